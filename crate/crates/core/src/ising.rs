//! The critical Ising magnetization field and its signed FK-cluster representation.
//!
//! Spins of an Edwards–Sokal pair are constant on open clusters, so Φ^η(f) splits into a
//! signed sum of cluster integrals. Keeping only clusters of diameter at least ε gives the
//! cutoff field Φ^η_ε(f).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clusters::{find_clusters, ClusterSet};
use crate::error::{ensure, Error, Result};
use crate::geom::{Point, Rect, GEOM_EPS};
use crate::lattice::{map_samples, AnyConfig, FkConfig, LatticeKind, MeshSpec, NormEntry, SweepSchedule};
use crate::rng::{Stream, StreamKey};
use crate::stats::{ks_distance, loglog_fit, mean_ci, FitPoint, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionKind {
    IndicatorBox,
    SmoothBump,
}

/// A bounded test function with bounded support.
///
/// The bump is `amplitude · exp(1 − 1/(1 − r²))` with r the Euclidean distance to the
/// support centre over the support half-width; it vanishes outside the inscribed disc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: FunctionKind,
    pub support: Rect,
    pub amplitude: f64,
}

impl TestFunction {
    /// 1 on [−l, l]².
    pub fn indicator(l: f64) -> Self {
        TestFunction { kind: FunctionKind::IndicatorBox, support: Rect::square(Point::ORIGIN, l), amplitude: 1.0 }
    }

    pub fn bump(centre: Point, radius: f64) -> Self {
        TestFunction { kind: FunctionKind::SmoothBump, support: Rect::square(centre, radius), amplitude: 1.0 }
    }

    pub fn zero(l: f64) -> Self {
        TestFunction { amplitude: 0.0, ..Self::indicator(l) }
    }

    pub fn scaled(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn eval(&self, p: Point) -> f64 {
        if !self.support.contains(p) {
            return 0.0;
        }
        match self.kind {
            FunctionKind::IndicatorBox => self.amplitude,
            FunctionKind::SmoothBump => {
                let c = self.support.centre();
                let r2 = ((p.x - c.x).powi(2) + (p.y - c.y).powi(2)) / (0.25 * self.support.width().powi(2));
                if r2 >= 1.0 {
                    0.0
                } else {
                    self.amplitude * (1.0 - 1.0 / (1.0 - r2)).exp()
                }
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.amplitude.abs()
    }

    /// Short identifier used in CSV output.
    pub fn id(&self) -> String {
        let c = self.support.centre();
        let kind = match self.kind {
            FunctionKind::IndicatorBox => "box",
            FunctionKind::SmoothBump => "bump",
        };
        format!("{kind}({},{};{})x{}", c.x, c.y, 0.5 * self.support.width(), self.amplitude)
    }

    fn check(&self, config: &FkConfig) -> Result<()> {
        ensure!(self.amplitude.is_finite(), Parameter, "test function amplitude must be finite");
        let region = config.lattice.region();
        let grown = Rect::new(region.xmin - GEOM_EPS, region.xmax + GEOM_EPS, region.ymin - GEOM_EPS, region.ymax + GEOM_EPS);
        ensure!(grown.contains_rect(&self.support), Domain, "support of {} leaves the region Λ_{}", self.id(), config.spec.k);
        Ok(())
    }
}

/// Weight of one vertex in the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Convention {
    /// η^{15/8}.
    Eta15_8,
    /// η²/π̂₁(η, 1), the counting-measure normaliser.
    Pi1 { pi1_hat: f64 },
}

impl Convention {
    pub fn from_entry(entry: &NormEntry) -> Result<Self> {
        ensure!(entry.usable(), Config, "normaliser π̂₁ = 0 cannot weight the field");
        Ok(Convention::Pi1 { pi1_hat: entry.pi1_hat })
    }

    pub fn weight(&self, eta: f64) -> f64 {
        match *self {
            Convention::Eta15_8 => eta.powf(15.0 / 8.0),
            Convention::Pi1 { pi1_hat } => eta * eta / pi1_hat,
        }
    }

    /// η²/π̂₁ divided by η^{15/8}; logged whenever the π̂₁ convention is in use.
    pub fn ratio_to_eta15_8(&self, eta: f64) -> f64 {
        self.weight(eta) / Convention::Eta15_8.weight(eta)
    }
}

/// Where cluster signs come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SignSource {
    /// The Edwards–Sokal spins carried by the configuration.
    Spins,
    /// Fresh uniform signs keyed by the seed, the sample index and the cluster's
    /// lexicographically smallest vertex.
    Seeded { sign_seed: u64 },
}

impl SignSource {
    pub fn sign_seed(&self) -> Option<u64> {
        match self {
            SignSource::Spins => None,
            SignSource::Seeded { sign_seed } => Some(*sign_seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOptions {
    pub convention: Convention,
    pub signs: SignSource,
}

impl Default for FieldOptions {
    fn default() -> Self {
        FieldOptions { convention: Convention::Eta15_8, signs: SignSource::Spins }
    }
}

/// One sign per cluster of `cs`.
pub fn cluster_signs(config: &FkConfig, cs: &ClusterSet, source: SignSource) -> Vec<i8> {
    match source {
        SignSource::Spins => cs.infos().iter().map(|c| config.spins[c.min_vertex]).collect(),
        SignSource::Seeded { sign_seed } => {
            let key = StreamKey::new(sign_seed, config.spec.sample_index, Stream::ClusterSigns);
            cs.infos()
                .iter()
                .map(|c| {
                    let (i, j) = config.lattice.coords(c.min_vertex);
                    let counter = ((i as u32 as u64) << 32) | j as u32 as u64;
                    if key.word(counter) & 1 == 0 {
                        1
                    } else {
                        -1
                    }
                })
                .collect()
        }
    }
}

/// Diameter used by the cutoff: the L∞ diameter of the union of the η-cells around the
/// cluster's vertices, so a single vertex has diameter η.
pub fn cutoff_diameter(cs: &ClusterSet, c: usize) -> f64 {
    cs.info(c).diameter + cs.lattice().eta()
}

/// Φ^η(f) = η^{15/8} Σ_x S_x f(x) with the configuration's spins.
pub fn magnetization(config: &FkConfig, f: &TestFunction) -> Result<f64> {
    f.check(config)?;
    let w = Convention::Eta15_8.weight(config.spec.eta);
    let lat = &config.lattice;
    let mut sum = 0.0;
    lat.for_each_in_rect(&f.support, |v| sum += config.spins[v] as f64 * f.eval(lat.pos(v)));
    Ok(w * sum)
}

/// Φ^η_ε(f): signed sum of cluster integrals over clusters of diameter at least ε, with
/// the η^{15/8} weight and the configuration's spins.
pub fn cutoff_magnetization(config: &FkConfig, f: &TestFunction, eps: f64) -> Result<f64> {
    let s = magnetization_sample(config, f, &[eps], &FieldOptions::default())?;
    Ok(s.phi_cutoff[0].1)
}

/// Φ^η(f) and Φ^η_ε(f) for several ε from one cluster labelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationSample {
    pub eta: f64,
    pub sample_index: u64,
    pub f_id: String,
    /// Signed sum over every cluster.
    pub phi_full: f64,
    /// (ε, Φ^η_ε(f)).
    pub phi_cutoff: Vec<(f64, f64)>,
    /// (ε, Σ over clusters of diameter < ε of ⟨μ_C, f⟩²): the conditional second moment of
    /// Φ^η(f) − Φ^η_ε(f) given the bonds.
    pub small_square: Vec<(f64, f64)>,
    pub sign_seed: Option<u64>,
    #[serde(skip)]
    pub signs: Vec<i8>,
}

pub fn magnetization_sample(config: &FkConfig, f: &TestFunction, eps_list: &[f64], opts: &FieldOptions) -> Result<MagnetizationSample> {
    f.check(config)?;
    ensure!(eps_list.iter().all(|&e| e > 0.0 && e.is_finite()), Parameter, "cutoff scales must be positive");
    let cs = find_clusters(config);
    let signs = cluster_signs(config, &cs, opts.signs);
    let w = opts.convention.weight(config.spec.eta);
    let lat = &config.lattice;
    let mut integral = vec![0.0; cs.len()];
    lat.for_each_in_rect(&f.support, |v| {
        let c = cs.cluster_of(v).expect("every FK vertex is labelled");
        integral[c] += f.eval(lat.pos(v));
    });
    let mut phi_full = 0.0;
    let mut phi_cutoff = vec![0.0; eps_list.len()];
    let mut small_square = vec![0.0; eps_list.len()];
    for (c, &m) in integral.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let m = w * m;
        let s = signs[c] as f64 * m;
        phi_full += s;
        let d = cutoff_diameter(&cs, c);
        for (k, &eps) in eps_list.iter().enumerate() {
            if d >= eps - GEOM_EPS {
                phi_cutoff[k] += s;
            } else {
                small_square[k] += m * m;
            }
        }
    }
    Ok(MagnetizationSample {
        eta: config.spec.eta,
        sample_index: config.spec.sample_index,
        f_id: f.id(),
        phi_full,
        phi_cutoff: eps_list.iter().copied().zip(phi_cutoff).collect(),
        small_square: eps_list.iter().copied().zip(small_square).collect(),
        sign_seed: opts.signs.sign_seed(),
        signs,
    })
}

fn fk_spec(spec: &MeshSpec) -> Result<()> {
    ensure!(spec.kind == LatticeKind::SquareFk, Config, "Ising experiments need a square-fk mesh, got {}", spec.kind.as_str());
    Ok(())
}

fn as_fk(cfg: &AnyConfig) -> &FkConfig {
    match cfg {
        AnyConfig::Fk(c) => c,
        AnyConfig::Site(_) => unreachable!("square-fk spec yields FK samples"),
    }
}

/// Magnetization samples `0..n` of `spec`.
pub fn magnetization_samples(spec: &MeshSpec, n: u64, schedule: SweepSchedule, f: &TestFunction, eps_list: &[f64], opts: &FieldOptions) -> Result<Vec<MagnetizationSample>> {
    fk_spec(spec)?;
    if let Convention::Pi1 { .. } = opts.convention {
        log::info!("field weight η²/π̂₁ is {:.4} × η^(15/8) at η = {}", opts.convention.ratio_to_eta15_8(spec.eta), spec.eta);
    }
    map_samples(spec, n, schedule, || (), |_, _, cfg| magnetization_sample(as_fk(cfg), f, eps_list, opts))?.into_iter().collect()
}

/// CSV columns: eta, f_id, eps, phi_cutoff, phi_full, sample_index, sign_seed.
pub fn write_magnetization_csv(w: impl Write, samples: &[MagnetizationSample]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["eta", "f_id", "eps", "phi_cutoff", "phi_full", "sample_index", "sign_seed"])?;
    for s in samples {
        let seed = s.sign_seed.map(|x| x.to_string()).unwrap_or_default();
        for &(eps, phi) in &s.phi_cutoff {
            out.write_record([s.eta.to_string(), s.f_id.clone(), eps.to_string(), phi.to_string(), s.phi_full.to_string(), s.sample_index.to_string(), seed.clone()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// E[(Φ^η(f) − Φ^η_ε(f))²] per ε, estimated from the sign-averaged second moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffMoments {
    /// (ε, mean, 95% half-width).
    pub rows: Vec<(f64, f64, f64)>,
    /// Raw mean of the squared differences, for comparison.
    pub raw: Vec<(f64, f64)>,
    pub fit: Option<FitResult>,
}

pub fn cutoff_moments(samples: &[MagnetizationSample]) -> Result<CutoffMoments> {
    ensure!(!samples.is_empty(), Parameter, "no magnetization samples");
    let eps_list: Vec<f64> = samples[0].small_square.iter().map(|p| p.0).collect();
    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for (k, &eps) in eps_list.iter().enumerate() {
        let xs: Vec<f64> = samples.iter().map(|s| s.small_square[k].1).collect();
        let (m, ci) = mean_ci(&xs);
        rows.push((eps, m, ci));
        let r = samples.iter().map(|s| (s.phi_full - s.phi_cutoff[k].1).powi(2)).sum::<f64>() / samples.len() as f64;
        raw.push((eps, r));
    }
    let points: Vec<FitPoint> = rows.iter().map(|&(eps, m, ci)| FitPoint { scale: eps, p: m, ci, tally: None }).collect();
    let fit = loglog_fit(&points).ok();
    Ok(CutoffMoments { rows, raw, fit })
}

/// ⟨S₀ S_x⟩ at one distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointRow {
    /// Distance in lattice steps.
    pub steps: u32,
    pub r: f64,
    pub estimate: f64,
    pub ci_halfwidth: f64,
    pub pairs_per_sample: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointTable {
    pub rows: Vec<TwoPointRow>,
    /// Fit of log ⟨S₀S_x⟩ on log r over r > 0; the decay exponent is −slope.
    pub fit: Option<FitResult>,
}

impl TwoPointTable {
    pub fn exponent(&self) -> Option<f64> {
        self.fit.map(|f| -f.slope)
    }
}

/// Base points of the two-point estimator: every vertex within L∞ distance `radius` of the
/// origin, paired with its translates by ±r along both axes.
pub const TWO_POINT_BASE_RADIUS: f64 = 0.125;

/// ⟨S₀S_x⟩ = P(0 ↔ x) in the FK representation, averaged over base points near the origin.
pub fn two_point(spec: &MeshSpec, r_values: &[f64], n_samples: u64, schedule: SweepSchedule) -> Result<TwoPointTable> {
    fk_spec(spec)?;
    ensure!(n_samples > 0, Parameter, "two_point needs at least one sample");
    let eta = spec.eta;
    let steps: Vec<u32> = r_values.iter().map(|&r| (r / eta).round() as u32).collect();
    let base_r = TWO_POINT_BASE_RADIUS.min(spec.k);
    for (&r, &s) in r_values.iter().zip(&steps) {
        ensure!(r >= 0.0 && base_r + s as f64 * eta <= spec.k + GEOM_EPS, Domain, "distance {r} from base points within {base_r} leaves Λ_{}", spec.k);
    }
    let lattice = spec.lattice()?;
    let base = lattice.vertices_in_rect(&Rect::square(Point::ORIGIN, base_r));
    let per_sample = map_samples(spec, n_samples, schedule, || (), |_, _, cfg| {
        let cs = find_clusters(cfg);
        steps
            .iter()
            .map(|&s| {
                let (mut hits, mut pairs) = (0u64, 0u64);
                for &v in &base {
                    let (i, j) = lattice.coords(v);
                    let s = s as i32;
                    for (di, dj) in [(s, 0), (-s, 0), (0, s), (0, -s)] {
                        if let Some(w) = lattice.index(i + di, j + dj) {
                            pairs += 1;
                            if cs.cluster_of(v) == cs.cluster_of(w) {
                                hits += 1;
                            }
                        }
                    }
                }
                (hits, pairs)
            })
            .collect::<Vec<_>>()
    })?;
    let mut rows = Vec::new();
    for (k, &s) in steps.iter().enumerate() {
        let fr: Vec<f64> = per_sample.iter().map(|v| v[k].0 as f64 / v[k].1.max(1) as f64).collect();
        let (m, ci) = mean_ci(&fr);
        rows.push(TwoPointRow { steps: s, r: s as f64 * eta, estimate: m, ci_halfwidth: if ci.is_finite() { ci } else { 0.0 }, pairs_per_sample: per_sample[0][k].1 });
    }
    let points: Vec<FitPoint> = rows.iter().filter(|r| r.steps > 0).map(|r| FitPoint { scale: r.r, p: r.estimate, ci: r.ci_halfwidth, tally: None }).collect();
    let fit = loglog_fit(&points).ok();
    Ok(TwoPointTable { rows, fit })
}

/// Law of Φ^η(f) across meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshScan {
    pub etas: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    /// (i, j, KS distance between the laws at etas[i] and etas[j]).
    pub ks: Vec<(usize, usize, f64)>,
}

impl MeshScan {
    pub fn ks_between(&self, a: f64, b: f64) -> Option<f64> {
        let i = self.etas.iter().position(|&e| (e - a).abs() < 1e-12)?;
        let j = self.etas.iter().position(|&e| (e - b).abs() < 1e-12)?;
        self.ks.iter().find(|t| (t.0, t.1) == (i.min(j), i.max(j))).map(|t| t.2)
    }
}

pub fn mesh_stability_scan(template: &MeshSpec, f: &TestFunction, eta_list: &[f64], n_samples: u64, schedule: SweepSchedule) -> Result<MeshScan> {
    fk_spec(template)?;
    ensure!(!eta_list.is_empty() && n_samples > 0, Parameter, "mesh scan needs meshes and samples");
    let mut values = Vec::new();
    for &eta in eta_list {
        let spec = MeshSpec { eta, ..*template };
        let v = map_samples(&spec, n_samples, schedule, || (), |_, _, cfg| magnetization(as_fk(cfg), f))?;
        values.push(v.into_iter().collect::<Result<Vec<f64>>>()?);
    }
    let variances = values.iter().map(|v| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64
    });
    let variances = variances.collect();
    let mut ks = Vec::new();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            ks.push((i, j, ks_distance(&values[i], &values[j]).map_err(|e| Error::Domain(e.to_string()))?));
        }
    }
    Ok(MeshScan { etas: eta_list.to_vec(), values, variances, ks })
}
