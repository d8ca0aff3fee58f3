use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AnyConfig, FkConfig, Lattice, LatticeKind, MeshSpec, SiteConfig};
use crate::error::{ensure, Result};
use crate::geom::{Point, Rect};
use crate::rng::{Stream, StreamKey};
use crate::unionfind::UnionFind;

#[inline]
fn zigzag(x: i32) -> u64 {
    ((x << 1) ^ (x >> 31)) as u32 as u64
}

/// Counter of site `(i, j)` within the site stream; independent of the region.
#[inline]
pub(crate) fn site_counter(i: i32, j: i32) -> u64 {
    (zigzag(i) << 32) | zigzag(j)
}

/// Colours of the infinite triangular lattice, generated on demand.
///
/// `is_red(i, j)` agrees with [`sample_bernoulli`] for the same seed and sample index on
/// every vertex of the region, so exploration can skip materialising the region.
#[derive(Debug, Clone, Copy)]
pub struct LazySites {
    key: StreamKey,
    p: f64,
    eta: f64,
}

impl LazySites {
    pub fn new(spec: &MeshSpec) -> Self {
        LazySites { key: StreamKey::new(spec.seed, spec.sample_index, Stream::Sites), p: spec.p, eta: spec.eta }
    }

    #[inline]
    pub fn is_red(&self, i: i32, j: i32) -> bool {
        self.key.bernoulli(site_counter(i, j), self.p)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

pub fn sample_bernoulli(spec: &MeshSpec) -> Result<SiteConfig> {
    ensure!(spec.kind == LatticeKind::TriangularSite, Config, "sample_bernoulli needs a triangular-site mesh");
    let lattice = spec.lattice()?;
    Ok(sample_bernoulli_on(spec, lattice))
}

/// Samples on a prebuilt lattice (must match `spec`).
pub fn sample_bernoulli_on(spec: &MeshSpec, lattice: Arc<Lattice>) -> SiteConfig {
    let sites = LazySites::new(spec);
    let colors = (0..lattice.len())
        .map(|v| {
            let (i, j) = lattice.coords(v);
            sites.is_red(i, j)
        })
        .collect();
    SiteConfig { spec: *spec, lattice, colors }
}

/// Reusable visited-set for lazy exploration.
#[derive(Debug, Default)]
pub struct ReachScratch {
    stamp: u32,
    marks: std::collections::HashMap<(i32, i32), u32>,
    queue: Vec<(i32, i32)>,
}

/// Largest L∞ distance from `centre` reached by the red clusters of the vertices in the closed
/// box Λ_a(centre), capped at `cap`; `None` when the box holds no red vertex.
///
/// Exploration never leaves the region of `region`, so the answer equals the one computed on
/// the materialised configuration.
pub fn lazy_reach(sites: &LazySites, region: &Lattice, centre: Point, a: f64, cap: f64, scratch: &mut ReachScratch) -> Option<f64> {
    scratch.stamp = scratch.stamp.wrapping_add(1);
    if scratch.stamp == 0 {
        scratch.marks.clear();
        scratch.stamp = 1;
    }
    let stamp = scratch.stamp;
    scratch.queue.clear();
    let kind = region.kind();
    let eta = region.eta();
    let bound = region.region();
    region.for_each_in_rect(&Rect::square(centre, a), |v| {
        let (i, j) = region.coords(v);
        if sites.is_red(i, j) {
            scratch.marks.insert((i, j), stamp);
            scratch.queue.push((i, j));
        }
    });
    if scratch.queue.is_empty() {
        return None;
    }
    let mut reach: f64 = 0.0;
    let mut head = 0;
    while head < scratch.queue.len() {
        let (i, j) = scratch.queue[head];
        head += 1;
        let d = Lattice::embed(kind, eta, i, j).linf(centre);
        reach = reach.max(d);
        if reach >= cap - 1e-9 {
            return Some(cap.max(reach));
        }
        for &(di, dj) in dirs(kind) {
            let (ni, nj) = (i + di, j + dj);
            if scratch.marks.get(&(ni, nj)) == Some(&stamp) {
                continue;
            }
            if !bound.contains(Lattice::embed(kind, eta, ni, nj)) || !sites.is_red(ni, nj) {
                continue;
            }
            scratch.marks.insert((ni, nj), stamp);
            scratch.queue.push((ni, nj));
        }
    }
    Some(reach)
}

fn dirs(kind: LatticeKind) -> &'static [(i32, i32)] {
    match kind {
        LatticeKind::TriangularSite => &[(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)],
        LatticeKind::SquareFk => &[(1, 0), (0, 1), (-1, 0), (0, -1)],
    }
}

/// Whether the origin is joined to ∂Λ_r by a red path, explored lazily (triangular only).
pub fn origin_one_arm(spec: &MeshSpec, region: &Lattice, r: f64, scratch: &mut ReachScratch) -> bool {
    let sites = LazySites::new(spec);
    if !sites.is_red(0, 0) {
        return false;
    }
    lazy_reach(&sites, region, Point::ORIGIN, 0.0, r, scratch).is_some_and(|d| d >= r - 1e-9)
}

/// Burn-in and decorrelation gap of the Swendsen–Wang chain, in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSchedule {
    pub burn_in: u64,
    pub gap: u64,
}

impl Default for SweepSchedule {
    fn default() -> Self {
        SweepSchedule { burn_in: 200, gap: 10 }
    }
}

/// Swendsen–Wang chain for the q = 2 random-cluster model with free boundary.
///
/// One sweep opens each edge between equal spins with probability p, labels the open
/// clusters, and recolours every cluster with an independent uniform sign. After a sweep the
/// bonds and spins form an Edwards–Sokal pair.
#[derive(Debug, Clone)]
pub struct FkChain {
    spec: MeshSpec,
    lattice: Arc<Lattice>,
    key: StreamKey,
    spins: Vec<i8>,
    bonds: Vec<bool>,
    uf: UnionFind,
    sweeps: u64,
}

impl FkChain {
    pub fn new(spec: &MeshSpec, chain_index: u64) -> Result<Self> {
        ensure!(spec.kind == LatticeKind::SquareFk, Config, "the FK sampler needs a square-fk mesh");
        let lattice = spec.lattice()?;
        Ok(Self::on_lattice(spec, lattice, chain_index))
    }

    pub fn on_lattice(spec: &MeshSpec, lattice: Arc<Lattice>, chain_index: u64) -> Self {
        let key = StreamKey::new(spec.seed, chain_index, Stream::Bonds);
        let init = StreamKey::new(spec.seed, chain_index, Stream::Spins);
        let spins = (0..lattice.len()).map(|v| if init.word(v as u64) & 1 == 0 { 1 } else { -1 }).collect();
        let n = lattice.len();
        let m = lattice.edge_count();
        FkChain { spec: *spec, lattice, key, spins, bonds: vec![false; m], uf: UnionFind::new(n), sweeps: 0 }
    }

    pub fn sweep(&mut self) {
        let bond_key = self.key.child(2 * self.sweeps);
        let spin_key = self.key.child(2 * self.sweeps + 1);
        let p = self.spec.p;
        self.uf.reset();
        for e in 0..self.lattice.edge_count() {
            let [u, v] = self.lattice.edge(e);
            let open = self.spins[u] == self.spins[v] && bond_key.bernoulli(e as u64, p);
            self.bonds[e] = open;
            if open {
                self.uf.union(u, v);
            }
        }
        for v in 0..self.lattice.len() {
            let r = self.uf.find(v);
            self.spins[v] = if spin_key.word(r as u64) & 1 == 0 { 1 } else { -1 };
        }
        self.sweeps += 1;
    }

    pub fn run(&mut self, sweeps: u64) {
        for _ in 0..sweeps {
            self.sweep();
        }
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn bonds(&self) -> &[bool] {
        &self.bonds
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn config(&self, sample_index: u64) -> FkConfig {
        FkConfig {
            spec: self.spec.with_sample(sample_index),
            lattice: self.lattice.clone(),
            bonds: self.bonds.clone(),
            spins: self.spins.clone(),
            sweeps: self.sweeps,
        }
    }
}

/// Runs a fresh chain keyed by `(seed, sample_index)` for `sweeps` sweeps.
pub fn sample_fk_ising(spec: &MeshSpec, sweeps: u64) -> Result<FkConfig> {
    ensure!(sweeps > 0, Parameter, "sweeps must be positive");
    if !spec.is_critical() {
        log::warn!("FK sample at p = {} differs from the self-dual point", spec.p);
    }
    let mut chain = FkChain::new(spec, spec.sample_index)?;
    chain.run(sweeps);
    Ok(chain.config(spec.sample_index))
}

/// Evaluates `f(scratch, sample_index, config)` on samples `0..n` of `spec`'s model and returns
/// the results in sample order.
///
/// Triangular samples are independent; FK samples come from chains of
/// [`FK_CHAIN_BLOCK`](super::normalization::FK_CHAIN_BLOCK) samples each, run with `schedule`.
/// Results depend only on the seed, never on the number of worker threads.
pub fn map_samples<S, T, I, F>(spec: &MeshSpec, n: u64, schedule: SweepSchedule, init: I, f: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, u64, &AnyConfig) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let lattice = spec.lattice()?;
    match spec.kind {
        LatticeKind::TriangularSite => Ok((0..n)
            .into_par_iter()
            .map_init(&init, |scratch, s| {
                let cfg = AnyConfig::Site(sample_bernoulli_on(&spec.with_sample(s), lattice.clone()));
                f(scratch, s, &cfg)
            })
            .collect()),
        LatticeKind::SquareFk => {
            if !spec.is_critical() {
                log::warn!("FK samples at p = {} differ from the self-dual point", spec.p);
            }
            let block = super::normalization::FK_CHAIN_BLOCK;
            let blocks = n.div_ceil(block);
            let nested: Vec<Vec<T>> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut scratch = init();
                    let mut chain = FkChain::on_lattice(spec, lattice.clone(), b);
                    chain.run(schedule.burn_in);
                    let count = block.min(n - b * block);
                    (0..count)
                        .map(|i| {
                            chain.run(schedule.gap.max(1));
                            let s = b * block + i;
                            f(&mut scratch, s, &AnyConfig::Fk(chain.config(s)))
                        })
                        .collect()
                })
                .collect();
            Ok(nested.into_iter().flatten().collect())
        }
    }
}
