use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{origin_one_arm, FkChain, Lattice, LatticeKind, MeshSpec, ReachScratch, SweepSchedule};
use crate::clusters::find_clusters;
use crate::error::{ensure, Error, Result};
use crate::geom::Point;
use crate::stats::wilson_interval;

/// Samples drawn from one Swendsen–Wang chain before a fresh chain is started.
pub const FK_CHAIN_BLOCK: u64 = 256;

/// Monte Carlo estimate of π₁^η(η, 1) = P(origin ↔ ∂Λ₁).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub pi1_hat: f64,
    pub hits: u64,
    pub n_samples: u64,
    pub ci_halfwidth: f64,
}

impl NormEntry {
    pub fn from_counts(hits: u64, n_samples: u64) -> Self {
        let (lo, hi) = wilson_interval(hits, n_samples);
        let pi1_hat = if n_samples == 0 { 0.0 } else { hits as f64 / n_samples as f64 };
        NormEntry { pi1_hat, hits, n_samples, ci_halfwidth: 0.5 * (hi - lo) }
    }

    /// Count-weighted pooling of two independent estimates.
    pub fn merge(&self, other: &NormEntry) -> NormEntry {
        NormEntry::from_counts(self.hits + other.hits, self.n_samples + other.n_samples)
    }

    /// Whether the estimate can divide a measure weight.
    pub fn usable(&self) -> bool {
        self.pi1_hat > 0.0
    }

    /// An exact normaliser (tests and synthetic measures).
    pub fn exact(pi1: f64) -> Self {
        NormEntry { pi1_hat: pi1, hits: 0, n_samples: 0, ci_halfwidth: 0.0 }
    }
}

/// Normalisers keyed by `"kind:eta"`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTable {
    pub entries: BTreeMap<String, NormEntry>,
}

impl NormalizationTable {
    pub fn key(kind: LatticeKind, eta: f64) -> String {
        format!("{}:{}", kind.as_str(), eta)
    }

    pub fn get(&self, kind: LatticeKind, eta: f64) -> Option<&NormEntry> {
        self.entries.get(&Self::key(kind, eta))
    }

    /// Pools `entry` into the table (merge-by-key, associative and commutative).
    pub fn insert(&mut self, kind: LatticeKind, eta: f64, entry: NormEntry) {
        let key = Self::key(kind, eta);
        let merged = match self.entries.get(&key) {
            Some(old) => old.merge(&entry),
            None => entry,
        };
        self.entries.insert(key, merged);
    }

    pub fn merge(&mut self, other: &NormalizationTable) {
        for (k, e) in &other.entries {
            let merged = match self.entries.get(k) {
                Some(old) => old.merge(e),
                None => *e,
            };
            self.entries.insert(k.clone(), merged);
        }
    }

    pub fn require(&self, kind: LatticeKind, eta: f64) -> Result<NormEntry> {
        let e = self
            .get(kind, eta)
            .copied()
            .ok_or_else(|| Error::Config(format!("no normalisation entry for {}", Self::key(kind, eta))))?;
        ensure!(e.usable(), Config, "normalisation entry {} is zero and cannot normalise a measure", Self::key(kind, eta));
        Ok(e)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Estimates P(origin ↔ ∂Λ₁) from `n_samples` independent samples of `spec`'s model.
pub fn estimate_pi1_normalization(spec: &MeshSpec, n_samples: u64) -> Result<NormEntry> {
    estimate_pi1_with(spec, n_samples, SweepSchedule::default())
}

pub fn estimate_pi1_with(spec: &MeshSpec, n_samples: u64, schedule: SweepSchedule) -> Result<NormEntry> {
    ensure!(n_samples > 0, Parameter, "n_samples must be positive");
    spec.validate()?;
    ensure!(spec.k >= 1.0, Domain, "region Λ_{} must contain Λ_1", spec.k);
    let hits = match spec.kind {
        LatticeKind::TriangularSite => {
            let region = Lattice::new(spec.kind, spec.eta, spec.k);
            (0..n_samples)
                .into_par_iter()
                .map_init(ReachScratch::default, |scratch, s| origin_one_arm(&spec.with_sample(s), &region, 1.0, scratch) as u64)
                .sum()
        }
        LatticeKind::SquareFk => {
            let lattice = spec.lattice()?;
            let origin = lattice.nearest(Point::ORIGIN).ok_or_else(|| Error::Domain("region has no vertex".into()))?;
            let blocks = n_samples.div_ceil(FK_CHAIN_BLOCK);
            (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut chain = FkChain::on_lattice(spec, lattice.clone(), b);
                    chain.run(schedule.burn_in);
                    let count = FK_CHAIN_BLOCK.min(n_samples - b * FK_CHAIN_BLOCK);
                    let mut hits = 0u64;
                    for s in 0..count {
                        chain.run(schedule.gap.max(1));
                        let cfg = chain.config(b * FK_CHAIN_BLOCK + s);
                        let cs = find_clusters(&cfg);
                        if let Some(c) = cs.cluster_of(origin) {
                            if cs.info(c).bbox.reach_from(Point::ORIGIN) >= 1.0 - 1e-9 {
                                hits += 1;
                            }
                        }
                    }
                    hits
                })
                .sum()
        }
    };
    Ok(NormEntry::from_counts(hits, n_samples))
}
