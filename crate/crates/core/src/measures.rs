//! Normalised counting measures, one-arm and box-sum measures, and distances between them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clusters::ClusterSet;
use crate::error::{ensure, Result};
use crate::geom::{Point, Rect, GEOM_EPS};
use crate::lattice::{LatticeKind, NormEntry, NormalizationTable, Percolation};

/// Mesh and normaliser a measure was built with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub eta: f64,
    pub pi1_hat: f64,
    pub ci_halfwidth: f64,
}

impl Normalizer {
    /// Looks up the entry for `(kind, eta)`; a missing or zero entry is a configuration error.
    pub fn from_table(table: &NormalizationTable, kind: LatticeKind, eta: f64) -> Result<Self> {
        let e = table.require(kind, eta)?;
        Self::new(eta, &e)
    }

    pub fn new(eta: f64, entry: &NormEntry) -> Result<Self> {
        ensure!(eta > 0.0, Config, "mesh must be positive, got {eta}");
        ensure!(entry.usable(), Config, "normaliser π̂₁ = 0 at η = {eta} cannot weight a measure");
        Ok(Normalizer { eta, pi1_hat: entry.pi1_hat, ci_halfwidth: entry.ci_halfwidth })
    }

    /// Weight η²/π̂₁ of one vertex.
    pub fn weight(&self) -> f64 {
        self.eta * self.eta / self.pi1_hat
    }
}

/// Point measure with equal atom weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingMeasure {
    pub atoms: Vec<Point>,
    pub weight: f64,
    pub normalizer: Normalizer,
}

impl CountingMeasure {
    pub fn new(atoms: Vec<Point>, weight: f64, normalizer: Normalizer) -> Self {
        CountingMeasure { atoms, weight, normalizer }
    }

    pub fn total_mass(&self) -> f64 {
        self.weight * self.atoms.len() as f64
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Mass of the closed rectangle `r`.
    pub fn mass_in(&self, r: &Rect) -> f64 {
        self.weight * self.atoms.iter().filter(|&&p| r.contains(p)).count() as f64
    }

    /// ∫ f dμ.
    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.weight * self.atoms.iter().map(|&p| f(p)).sum::<f64>()
    }

    pub fn bin(&self, resolution: f64) -> BinnedMeasure {
        BinnedMeasure::from_measure(self, resolution)
    }

    /// CSV with columns `x, y, weight`, plus a JSON sidecar `<path>.json` with the normaliser.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y", "weight"])?;
        for p in &self.atoms {
            w.write_record([p.x.to_string(), p.y.to_string(), self.weight.to_string()])?;
        }
        w.flush()?;
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        let meta = serde_json::json!({
            "eta": self.normalizer.eta,
            "pi1_hat": self.normalizer.pi1_hat,
            "ci": self.normalizer.ci_halfwidth,
            "atoms": self.atoms.len(),
            "total_mass": self.total_mass(),
        });
        let mut f = std::fs::File::create(side)?;
        serde_json::to_writer_pretty(&mut f, &meta)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// μ^η_S: one atom of weight η²/π̂₁ per point of `points`.
pub fn counting_measure(points: &[Point], norm: &Normalizer) -> CountingMeasure {
    CountingMeasure::new(points.to_vec(), norm.weight(), *norm)
}

/// Vertices of Λ'_a(z) whose cluster reaches L∞ distance `b` from `z`, found in `cs`.
fn arm_vertices(cs: &ClusterSet, z: Point, a: f64, b: f64, out: &mut Vec<Point>) {
    let lat = cs.lattice();
    // Λ'_a(z) = z + [-a, a)²
    let bx = Rect::square(z, a);
    lat.for_each_in_rect(&bx, |v| {
        let p = lat.pos(v);
        if !bx.contains_half_open(p) {
            return;
        }
        if let Some(c) = cs.cluster_of(v) {
            if cs.info(c).bbox.reach_from(z) >= b - GEOM_EPS {
                out.push(p);
            }
        }
    });
}

/// One-arm measure of A(z; a, b): vertices of Λ'_a(z) joined to ∂Λ_b(z) by an open path.
pub fn one_arm_measure(config: &dyn Percolation, cs: &ClusterSet, z: Point, a: f64, b: f64, norm: &Normalizer) -> Result<CountingMeasure> {
    ensure!(a > 0.0 && b > a, Parameter, "need 0 < a < b, got a = {a}, b = {b}");
    ensure!(config.lattice().region().contains_rect(&Rect::square(z, b)), Domain, "annulus of radius {b} around ({}, {}) leaves the region", z.x, z.y);
    let mut atoms = Vec::new();
    arm_vertices(cs, z, a, b, &mut atoms);
    Ok(CountingMeasure::new(atoms, norm.weight(), *norm))
}

/// Integer centres z of the grid ε Z² whose box Λ_{r}(εz) meets one of `points`.
pub(crate) fn grid_centres(points: &[Point], eps: f64, r: f64) -> BTreeSet<(i64, i64)> {
    let mut out = BTreeSet::new();
    for p in points {
        let (x0, x1) = (((p.x - r) / eps - 1e-9).ceil() as i64, ((p.x + r) / eps + 1e-9).floor() as i64);
        let (y0, y1) = (((p.y - r) / eps - 1e-9).ceil() as i64, ((p.y + r) / eps + 1e-9).floor() as i64);
        for i in x0..=x1 {
            for j in y0..=y1 {
                let c = Point::new(i as f64 * eps, j as f64 * eps);
                if c.linf(*p) <= r + GEOM_EPS {
                    out.insert((i, j));
                }
            }
        }
    }
    out
}

/// μ^η_{S,n}: the sum of one-arm measures of A(εz; ε/2, δ/2 − ε), ε = 3^{-n}, over the centres εz
/// whose box Λ_{3ε/2}(εz) meets `s`.
pub fn box_sum_measure(config: &dyn Percolation, cs: &ClusterSet, s: &[Point], n: u32, delta: f64, norm: &Normalizer) -> Result<CountingMeasure> {
    let eps = 3f64.powi(-(n as i32));
    ensure!(10.0 * eps < delta, Parameter, "box-sum measure needs 10·3^-n < δ, got n = {n}, δ = {delta}");
    let b = delta / 2.0 - eps;
    let region = config.lattice().region();
    let mut atoms = Vec::new();
    for &(i, j) in &grid_centres(s, eps, 1.5 * eps) {
        let z = Point::new(i as f64 * eps, j as f64 * eps);
        ensure!(region.contains_rect(&Rect::square(z, b)), Domain, "annulus around ({}, {}) leaves the region", z.x, z.y);
        arm_vertices(cs, z, eps / 2.0, b, &mut atoms);
    }
    Ok(CountingMeasure::new(atoms, norm.weight(), *norm))
}

/// Recovered measure: an atom of weight 4ψ²/π̂₁(2ψ, 1) at each ψz whose box Λ_{ψ/2}(ψz) meets
/// `points`. `pi1_2psi` estimates the one-arm probability from Λ_{2ψ} to ∂Λ₁ at mesh `eta`.
pub fn recovered_measure(points: &[Point], psi: f64, eta: f64, pi1_2psi: &NormEntry) -> Result<CountingMeasure> {
    ensure!(psi > 0.0 && psi < 0.5, Parameter, "ψ must lie in (0, 1/2), got {psi}");
    ensure!(psi > eta, Parameter, "ψ = {psi} must be coarser than the mesh η = {eta}");
    ensure!(pi1_2psi.usable(), Config, "π̂₁(2ψ, 1) = 0 cannot weight a measure");
    let atoms = grid_centres(points, psi, psi / 2.0).into_iter().map(|(i, j)| Point::new(i as f64 * psi, j as f64 * psi)).collect();
    let normalizer = Normalizer { eta, pi1_hat: pi1_2psi.pi1_hat, ci_halfwidth: pi1_2psi.ci_halfwidth };
    Ok(CountingMeasure::new(atoms, 4.0 * psi * psi / pi1_2psi.pi1_hat, normalizer))
}

fn key(p: Point) -> (i64, i64) {
    ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64)
}

/// Total variation ‖m1 − m2‖ of the signed difference, summed over the union of atom positions.
pub fn tv_distance(m1: &CountingMeasure, m2: &CountingMeasure) -> f64 {
    let mut counts: HashMap<(i64, i64), (u32, u32)> = HashMap::new();
    for p in &m1.atoms {
        counts.entry(key(*p)).or_default().0 += 1;
    }
    for p in &m2.atoms {
        counts.entry(key(*p)).or_default().1 += 1;
    }
    counts.values().map(|&(a, b)| (a as f64 * m1.weight - b as f64 * m2.weight).abs()).sum()
}

/// Mass per cell of the grid ρ Z², cell (i, j) covering [iρ, (i+1)ρ) × [jρ, (j+1)ρ).
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMeasure {
    pub resolution: f64,
    pub bins: BTreeMap<(i64, i64), f64>,
}

impl BinnedMeasure {
    pub fn from_measure(m: &CountingMeasure, resolution: f64) -> Self {
        let mut bins = BTreeMap::new();
        for p in &m.atoms {
            let c = ((p.x / resolution).floor() as i64, (p.y / resolution).floor() as i64);
            *bins.entry(c).or_insert(0.0) += m.weight;
        }
        BinnedMeasure { resolution, bins }
    }

    pub fn total_mass(&self) -> f64 {
        self.bins.values().sum()
    }
}

/// Largest transportable mass from `src` to `dst` moving at most `reach` cells (L∞).
fn transport(src: &[((i64, i64), f64)], dst: &[((i64, i64), f64)], reach: i64) -> f64 {
    let (ns, nd) = (src.len(), dst.len());
    let (s, t) = (ns + nd, ns + nd + 1);
    let mut g = RealFlow::new(ns + nd + 2);
    for (i, &(c, m)) in src.iter().enumerate() {
        g.add(s, i, m);
        for (j, &(d, _)) in dst.iter().enumerate() {
            if (c.0 - d.0).abs().max((c.1 - d.1).abs()) <= reach {
                g.add(i, ns + j, f64::INFINITY);
            }
        }
    }
    for (j, &(_, m)) in dst.iter().enumerate() {
        g.add(ns + j, t, m);
    }
    g.max_flow(s, t)
}

/// Upper bound on the Prokhorov distance (L∞ ground metric).
///
/// Both measures are binned at resolution ρ with atoms moved to cell centres, which costs at
/// most ρ/2 each. For the binned pair, μ(S) ≤ ν(S^ε) + ε over all unions of cells holds iff
/// the mass μ can send to cells within ε is at least μ(total) − ε (Hall's theorem), so the
/// binned distance is min over cell radii d of max(dρ, defect_d), computed by max flow.
pub fn prokhorov_upper(m1: &CountingMeasure, m2: &CountingMeasure, resolution: f64) -> Result<f64> {
    ensure!(resolution > 0.0, Parameter, "resolution must be positive, got {resolution}");
    let b1: Vec<_> = m1.bin(resolution).bins.into_iter().collect();
    let b2: Vec<_> = m2.bin(resolution).bins.into_iter().collect();
    let (t1, t2) = (m1.total_mass(), m2.total_mass());
    let mut cells: Vec<(i64, i64)> = b1.iter().chain(&b2).map(|b| b.0).collect();
    cells.sort_unstable();
    cells.dedup();
    let span = cells
        .iter()
        .flat_map(|a| cells.iter().map(move |b| (a.0 - b.0).abs().max((a.1 - b.1).abs())))
        .max()
        .unwrap_or(0);
    let mut best = f64::INFINITY;
    for d in 0..=span {
        let r = d as f64 * resolution;
        if r >= best {
            break;
        }
        let defect = (t1 - transport(&b1, &b2, d)).max(t2 - transport(&b2, &b1, d)).max(0.0);
        best = best.min(r.max(defect));
    }
    if cells.is_empty() {
        best = 0.0;
    }
    Ok(best + resolution)
}

/// Edmonds–Karp on real capacities; graphs here are a few hundred nodes at most.
struct RealFlow {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

impl RealFlow {
    fn new(n: usize) -> Self {
        RealFlow { head: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new() }
    }

    fn add(&mut self, u: usize, v: usize, c: f64) {
        self.head[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(c);
        self.head[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0.0);
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        const TINY: f64 = 1e-15;
        let n = self.head.len();
        let mut flow = 0.0;
        loop {
            let mut prev = vec![usize::MAX; n];
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.head[u] {
                    let v = self.to[e];
                    if !seen[v] && self.cap[e] > TINY {
                        seen[v] = true;
                        prev[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if !seen[t] {
                return flow;
            }
            let mut push = f64::INFINITY;
            let mut v = t;
            while v != s {
                push = push.min(self.cap[prev[v]]);
                v = self.to[prev[v] ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = prev[v];
                self.cap[e] -= push;
                self.cap[e ^ 1] += push;
                v = self.to[e ^ 1];
            }
            flow += push;
        }
    }
}
