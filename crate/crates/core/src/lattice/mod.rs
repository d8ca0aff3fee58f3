//! Lattice geometry, configurations, and critical samplers.

mod geometry;
pub mod io;
mod normalization;
mod sample;

pub use geometry::{DualLattice, Lattice, NONE};
pub use normalization::{estimate_pi1_normalization, estimate_pi1_with, FK_CHAIN_BLOCK, NormEntry, NormalizationTable};
pub use sample::{
    lazy_reach, map_samples, origin_one_arm, sample_bernoulli, sample_bernoulli_on, sample_fk_ising, FkChain, LazySites, ReachScratch,
    SweepSchedule,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::geom::{Point, Rect};

/// Self-dual point of the q = 2 random-cluster model on Z².
pub const P_SELF_DUAL: f64 = std::f64::consts::SQRT_2 / (1.0 + std::f64::consts::SQRT_2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeKind {
    TriangularSite,
    SquareFk,
}

impl LatticeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LatticeKind::TriangularSite => "triangular-site",
            LatticeKind::SquareFk => "square-fk",
        }
    }

    pub fn critical_p(self) -> f64 {
        match self {
            LatticeKind::TriangularSite => 0.5,
            LatticeKind::SquareFk => P_SELF_DUAL,
        }
    }

    /// Lattice one-arm exponent α₁ at criticality.
    pub fn one_arm_exponent(self) -> f64 {
        match self {
            LatticeKind::TriangularSite => 5.0 / 48.0,
            LatticeKind::SquareFk => 1.0 / 8.0,
        }
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangular-site" | "triangular" => Ok(LatticeKind::TriangularSite),
            "square-fk" | "fk" | "square" => Ok(LatticeKind::SquareFk),
            other => Err(crate::Error::Config(format!("unknown lattice kind `{other}`"))),
        }
    }
}

/// Sampling frame of one configuration: lattice, mesh, region Λ_k, parameter and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub kind: LatticeKind,
    pub eta: f64,
    pub k: f64,
    pub p: f64,
    pub seed: u64,
    pub sample_index: u64,
}

impl MeshSpec {
    pub fn critical(kind: LatticeKind, eta: f64, k: f64, seed: u64) -> Self {
        MeshSpec { kind, eta, k, p: kind.critical_p(), seed, sample_index: 0 }
    }

    pub fn with_sample(mut self, sample_index: u64) -> Self {
        self.sample_index = sample_index;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.eta.is_finite() && self.eta > 0.0, Config, "mesh eta must be positive, got {}", self.eta);
        ensure!(self.k.is_finite() && self.k > self.eta, Config, "region half-width k = {} must exceed eta = {}", self.k, self.eta);
        ensure!((0.0..=1.0).contains(&self.p), Config, "parameter p = {} outside [0, 1]", self.p);
        Ok(())
    }

    pub fn region(&self) -> Rect {
        Rect::square(Point::ORIGIN, self.k)
    }

    pub fn is_critical(&self) -> bool {
        (self.p - self.kind.critical_p()).abs() < 1e-12
    }

    /// Key of this mesh in a [`NormalizationTable`].
    pub fn norm_key(&self) -> String {
        format!("{}:{}", self.kind.as_str(), self.eta)
    }

    pub fn lattice(&self) -> Result<Arc<Lattice>> {
        self.validate()?;
        Ok(Arc::new(Lattice::new(self.kind, self.eta, self.k)))
    }
}

/// A configuration that can be queried for open clusters.
pub trait Percolation: Sync {
    fn spec(&self) -> &MeshSpec;
    fn lattice(&self) -> &Arc<Lattice>;
    /// Whether `v` can belong to an open cluster (red site, or any FK vertex).
    fn occupied(&self, v: usize) -> bool;
    /// Whether lattice edge `e` is open.
    fn edge_open(&self, e: usize) -> bool;
}

/// Site colouring of the triangular lattice; `true` is red.
#[derive(Debug, Clone)]
pub struct SiteConfig {
    pub spec: MeshSpec,
    pub lattice: Arc<Lattice>,
    pub colors: Vec<bool>,
}

impl SiteConfig {
    pub fn from_colors(spec: MeshSpec, lattice: Arc<Lattice>, colors: Vec<bool>) -> Result<Self> {
        ensure!(colors.len() == lattice.len(), Format, "colour array has {} entries, lattice has {}", colors.len(), lattice.len());
        Ok(SiteConfig { spec, lattice, colors })
    }

    pub fn is_red(&self, v: usize) -> bool {
        self.colors[v]
    }

    pub fn red_count(&self) -> usize {
        self.colors.iter().filter(|&&c| c).count()
    }

    /// Swaps red and blue everywhere.
    pub fn complemented(&self) -> SiteConfig {
        SiteConfig { spec: self.spec, lattice: self.lattice.clone(), colors: self.colors.iter().map(|c| !c).collect() }
    }
}

impl Percolation for SiteConfig {
    fn spec(&self) -> &MeshSpec {
        &self.spec
    }
    fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }
    fn occupied(&self, v: usize) -> bool {
        self.colors[v]
    }
    fn edge_open(&self, e: usize) -> bool {
        let [u, v] = self.lattice.edge(e);
        self.colors[u] && self.colors[v]
    }
}

/// FK-Ising bond configuration with its Edwards–Sokal spins.
#[derive(Debug, Clone)]
pub struct FkConfig {
    pub spec: MeshSpec,
    pub lattice: Arc<Lattice>,
    pub bonds: Vec<bool>,
    pub spins: Vec<i8>,
    /// Sweeps performed by the chain that produced this sample.
    pub sweeps: u64,
}

impl FkConfig {
    pub fn from_parts(spec: MeshSpec, lattice: Arc<Lattice>, bonds: Vec<bool>, spins: Vec<i8>) -> Result<Self> {
        ensure!(bonds.len() == lattice.edge_count(), Format, "bond array has {} entries, lattice has {} edges", bonds.len(), lattice.edge_count());
        ensure!(spins.len() == lattice.len(), Format, "spin array has {} entries, lattice has {}", spins.len(), lattice.len());
        ensure!(spins.iter().all(|&s| s == 1 || s == -1), Format, "spins must be ±1");
        Ok(FkConfig { spec, lattice, bonds, spins, sweeps: 0 })
    }

    /// Whether spins are constant along every open bond.
    pub fn is_edwards_sokal_consistent(&self) -> bool {
        self.bonds.iter().enumerate().all(|(e, &open)| {
            let [u, v] = self.lattice.edge(e);
            !open || self.spins[u] == self.spins[v]
        })
    }

    pub fn open_bond_count(&self) -> usize {
        self.bonds.iter().filter(|&&b| b).count()
    }

    /// Whether the parameter differs from the self-dual point (flagged in reports).
    pub fn off_critical(&self) -> bool {
        !self.spec.is_critical()
    }
}

impl Percolation for FkConfig {
    fn spec(&self) -> &MeshSpec {
        &self.spec
    }
    fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }
    fn occupied(&self, _v: usize) -> bool {
        true
    }
    fn edge_open(&self, e: usize) -> bool {
        self.bonds[e]
    }
}

/// Either kind of configuration, for code paths that accept both models.
#[derive(Debug, Clone)]
pub enum AnyConfig {
    Site(SiteConfig),
    Fk(FkConfig),
}

impl Percolation for AnyConfig {
    fn spec(&self) -> &MeshSpec {
        self.as_percolation().spec()
    }
    fn lattice(&self) -> &Arc<Lattice> {
        self.as_percolation().lattice()
    }
    fn occupied(&self, v: usize) -> bool {
        self.as_percolation().occupied(v)
    }
    fn edge_open(&self, e: usize) -> bool {
        self.as_percolation().edge_open(e)
    }
}

impl AnyConfig {
    pub fn as_percolation(&self) -> &dyn Percolation {
        match self {
            AnyConfig::Site(c) => c,
            AnyConfig::Fk(c) => c,
        }
    }
}
