//! Experiment configuration, dispatch and result persistence.
//!
//! A run validates its [`ExperimentConfig`], evaluates the experiment inside a rayon pool of
//! `workers` threads, and writes its files to `<output>/<config hash>/` together with a
//! `manifest.json`. Output bodies depend only on the configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arms::{arm_probabilities, write_estimates_csv, ArmEstimate, ArmQuery, ColourSequence};
use crate::boxapprox::{verify_samples, CorrespondenceReport};
use crate::clusters::{clusters_in_domain, find_clusters, largest_clusters};
use crate::error::{Error, Result};
use crate::geom::{Point, Rect};
use crate::ising::{cutoff_moments, magnetization_samples, two_point, write_magnetization_csv, Convention, FieldOptions, SignSource, TestFunction};
use crate::lattice::{estimate_pi1_with, io, map_samples, sample_bernoulli, sample_fk_ising, LatticeKind, MeshSpec, NormEntry, NormalizationTable, SweepSchedule};
use crate::measures::{box_sum_measure, counting_measure, tv_distance, Normalizer};
use crate::stats::{loglog_fit, FitPoint, FitResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sample,
    Pi1Table,
    Arms,
    ApproxVerify,
    Measures,
    Largest,
    Ising,
    Exponents,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::Pi1Table => "pi1-table",
            Experiment::Arms => "arms",
            Experiment::ApproxVerify => "approx-verify",
            Experiment::Measures => "measures",
            Experiment::Largest => "largest",
            Experiment::Ising => "ising",
            Experiment::Exponents => "exponents",
        }
    }
}

/// Mesh template; samples take their index from the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshTemplate {
    pub kind: LatticeKind,
    pub eta: f64,
    pub k: f64,
    /// Defaults to the critical value of `kind`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl MeshTemplate {
    pub fn spec(&self) -> MeshSpec {
        let s = MeshSpec::critical(self.kind, self.eta, self.k, self.seed);
        match self.p {
            Some(p) => s.with_p(p),
            None => s,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scales {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    pub psi: Vec<f64>,
    /// Two-point distances (ising).
    pub r: Vec<f64>,
    /// Meshes for pi1-table.
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmOptions {
    pub kappa: String,
    pub side: Option<u8>,
    pub kappa_hp: String,
}

impl Default for ArmOptions {
    fn default() -> Self {
        ArmOptions { kappa: "1".into(), side: None, kappa_hp: String::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionChoice {
    /// η²/π̂₁(η, 1).
    #[default]
    Pi1,
    /// η^{15/8}.
    Eta15_8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub mesh: MeshTemplate,
    #[serde(default)]
    pub scales: Scales,
    pub n_samples: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_seed: Option<u64>,
    #[serde(default)]
    pub sweeps: SweepSchedule,
    #[serde(default)]
    pub arms: ArmOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunction>,
    #[serde(default)]
    pub convention: ConventionChoice,
    /// A saved normalisation table; without one, π̂₁ is estimated from `n_samples` samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_table: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    /// A small valid configuration for `experiment`.
    pub fn template(experiment: Experiment) -> Self {
        let site = MeshTemplate { kind: LatticeKind::TriangularSite, eta: 1.0 / 64.0, k: 1.25, p: None, seed: 0 };
        let fk = MeshTemplate { kind: LatticeKind::SquareFk, eta: 1.0 / 64.0, k: 1.0, p: None, seed: 0 };
        let mut scales = Scales::default();
        let mut mesh = site;
        match experiment {
            Experiment::Arms | Experiment::Exponents => {
                scales.a = vec![0.125];
                scales.b = vec![0.25, 0.5, 1.0];
            }
            Experiment::ApproxVerify => {
                scales.eps = vec![1.0 / 27.0];
                scales.delta = vec![0.5];
            }
            Experiment::Measures => {
                scales.eps = vec![1.0 / 27.0, 1.0 / 81.0];
                scales.delta = vec![0.5];
                mesh.k = 1.35;
            }
            Experiment::Ising => {
                mesh = fk;
                scales.eps = vec![0.25, 0.125, 0.0625, 0.03125];
            }
            Experiment::Largest | Experiment::Pi1Table | Experiment::Sample => {}
        }
        ExperimentConfig {
            experiment,
            mesh,
            scales,
            n_samples: 100,
            workers: 1,
            output: default_output(),
            sign_seed: None,
            sweeps: SweepSchedule::default(),
            arms: ArmOptions::default(),
            test_function: None,
            convention: ConventionChoice::default(),
            norm_table: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML form with the output path removed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    fn test_function(&self) -> TestFunction {
        self.test_function.clone().unwrap_or_else(|| TestFunction::indicator(self.mesh.k.min(1.0)))
    }

    fn arm_queries(&self) -> std::result::Result<Vec<ArmQuery>, String> {
        let kappa: ColourSequence = self.arms.kappa.parse().map_err(|e: Error| e.to_string())?;
        let hp: ColourSequence = self.arms.kappa_hp.parse().map_err(|e: Error| e.to_string())?;
        let pairs: Vec<(f64, f64)> = if self.scales.a.len() == self.scales.b.len() {
            self.scales.a.iter().copied().zip(self.scales.b.iter().copied()).collect()
        } else {
            self.scales.a.iter().flat_map(|&a| self.scales.b.iter().map(move |&b| (a, b))).collect()
        };
        Ok(pairs
            .into_iter()
            .map(|(a, b)| ArmQuery { center: Point::ORIGIN, a, b, kappa: kappa.clone(), kappa_hp: hp.clone(), side: self.arms.side })
            .collect())
    }

    /// Every violated constraint; empty when the configuration can run.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let spec = self.mesh.spec();
        if let Err(e) = spec.validate() {
            errs.push(e.to_string());
        }
        if self.n_samples == 0 {
            errs.push("n_samples must be at least 1".into());
        }
        if self.workers == 0 {
            errs.push("workers must be at least 1".into());
        }
        let (eta, k) = (self.mesh.eta, self.mesh.k);
        let s = &self.scales;
        match self.experiment {
            Experiment::Arms | Experiment::Exponents => match self.arm_queries() {
                Err(e) => errs.push(e),
                Ok(qs) if qs.is_empty() => errs.push("arms need non-empty scale lists a and b".into()),
                Ok(qs) => {
                    for q in &qs {
                        if let Err(e) = q.validate() {
                            errs.push(e.to_string());
                        }
                        if q.b > k {
                            errs.push(format!("annulus radius b = {} exceeds the region Λ_{k}", q.b));
                        }
                        if q.a < eta {
                            errs.push(format!("inner radius a = {} is below the mesh η = {eta}", q.a));
                        }
                    }
                }
            },
            Experiment::ApproxVerify | Experiment::Measures => {
                if s.eps.is_empty() || s.delta.is_empty() {
                    errs.push("need non-empty scale lists eps and delta".into());
                }
                for &d in &s.delta {
                    if !(d > 0.0 && d < 1.0) {
                        errs.push(format!("δ = {d} must lie in (0, 1)"));
                    }
                    for &e in &s.eps {
                        if 10.0 * e >= d {
                            errs.push(format!("need 10ε < δ, got ε = {e}, δ = {d}"));
                        }
                        if self.experiment == Experiment::Measures && k < 1.0 + 1.5 * e + d / 2.0 {
                            errs.push(format!("region Λ_{k} must contain Λ_{}", 1.0 + 1.5 * e + d / 2.0));
                        }
                    }
                }
                for &e in &s.eps {
                    if self.experiment == Experiment::ApproxVerify {
                        if e <= eta {
                            errs.push(format!("box scale ε = {e} must exceed the mesh η = {eta}"));
                        }
                        if k < 1.0 + 2.0 * e {
                            errs.push(format!("region Λ_{k} must contain Λ_{}", 1.0 + 2.0 * e));
                        }
                    } else {
                        let n = -e.ln() / 3f64.ln();
                        if (n - n.round()).abs() > 1e-9 || n.round() < 1.0 {
                            errs.push(format!("measure scale ε = {e} is not 3^-n"));
                        }
                    }
                }
            }
            Experiment::Largest | Experiment::Pi1Table => {
                if k < 1.0 {
                    errs.push(format!("region Λ_{k} must contain Λ_1"));
                }
                for &e in &s.eta {
                    if e <= 0.0 || e >= k {
                        errs.push(format!("mesh η = {e} must lie in (0, k)"));
                    }
                }
            }
            Experiment::Ising => {
                if self.mesh.kind != LatticeKind::SquareFk {
                    errs.push("ising needs a square-fk mesh".into());
                }
                let f = self.test_function();
                if !spec.region().contains_rect(&f.support) {
                    errs.push(format!("test function support leaves the region Λ_{k}"));
                }
                if s.eps.iter().any(|&e| e <= 0.0) {
                    errs.push("cutoff scales must be positive".into());
                }
                for &r in &s.r {
                    if r < 0.0 || r + crate::ising::TWO_POINT_BASE_RADIUS > k {
                        errs.push(format!("two-point distance {r} leaves the region Λ_{k}"));
                    }
                }
                if self.convention == ConventionChoice::Pi1 && k < 1.0 && self.norm_table.is_none() {
                    errs.push("estimating π̂₁(η, 1) needs k ≥ 1".into());
                }
            }
            Experiment::Sample => {}
        }
        errs
    }
}

/// Why a run stopped.
#[derive(Debug)]
pub enum RunError {
    Validation(Vec<String>),
    Runtime(Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Validation(v) => write!(f, "invalid configuration:\n  {}", v.join("\n  ")),
            RunError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Runtime(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: Experiment,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub started_unix: u64,
    pub wall_time_s: f64,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<FileEntry>,
    /// Set when a checked property failed (approx-verify mismatches).
    pub assertion_failed: bool,
}

/// Result of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

struct Sink {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Sink {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(FileEntry { name: name.into(), sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.put(name, s.as_bytes())
    }
}

/// Validates, runs and persists one experiment.
pub fn run(config: &ExperimentConfig) -> std::result::Result<RunOutcome, RunError> {
    let errs = config.validate();
    if !errs.is_empty() {
        return Err(RunError::Validation(errs));
    }
    let hash = config.hash();
    let dir = config.output.join(&hash[..16]);
    fs::create_dir_all(&dir).map_err(Error::from)?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut sink = Sink { dir: dir.clone(), files: Vec::new() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.workers).build().map_err(|e| Error::Config(e.to_string()))?;
    let result = pool.install(|| dispatch(config, &mut sink));
    let mut manifest = Manifest {
        tool: "perclab".into(),
        version: VERSION.into(),
        experiment: config.experiment,
        config_hash: hash,
        config: config.clone(),
        started_unix,
        wall_time_s: started.elapsed().as_secs_f64(),
        complete: result.is_ok(),
        error: result.as_ref().err().map(|e| e.to_string()),
        files: sink.files.clone(),
        assertion_failed: matches!(result, Ok(true)),
    };
    manifest.files.sort_by(|a, b| a.name.cmp(&b.name));
    let text = serde_json::to_string_pretty(&manifest).map_err(Error::from)?;
    fs::write(dir.join("manifest.json"), text + "\n").map_err(Error::from)?;
    match result {
        Ok(_) => Ok(RunOutcome { dir, manifest }),
        Err(e) => Err(RunError::Runtime(e)),
    }
}

/// Runs the experiment; `Ok(true)` flags a failed check.
fn dispatch(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<bool> {
    let spec = cfg.mesh.spec();
    match cfg.experiment {
        Experiment::Sample => {
            for s in 0..cfg.n_samples {
                let spec = spec.with_sample(s);
                let bytes = match spec.kind {
                    LatticeKind::TriangularSite => io::encode_site(&sample_bernoulli(&spec)?),
                    LatticeKind::SquareFk => io::encode_fk(&sample_fk_ising(&spec, cfg.sweeps.burn_in.max(1))?),
                };
                sink.put(&format!("sample_{s:06}.bin"), &bytes)?;
            }
            Ok(false)
        }
        Experiment::Pi1Table => {
            let etas = if cfg.scales.eta.is_empty() { vec![cfg.mesh.eta] } else { cfg.scales.eta.clone() };
            let mut table = NormalizationTable::default();
            for eta in etas {
                let e = estimate_pi1_with(&MeshSpec { eta, ..spec }, cfg.n_samples, cfg.sweeps)?;
                if !e.usable() {
                    log::warn!("π̂₁ = 0 at η = {eta}: unusable as a normaliser");
                }
                table.insert(spec.kind, eta, e);
            }
            sink.json("pi1_table.json", &table)?;
            Ok(false)
        }
        Experiment::Arms | Experiment::Exponents => {
            let queries = cfg.arm_queries().map_err(Error::Config)?;
            let est = arm_probabilities(&spec, &queries, cfg.n_samples, cfg.sweeps)?;
            let mut csv = Vec::new();
            write_estimates_csv(&mut csv, &spec, &est)?;
            sink.put("arms.csv", &csv)?;
            if cfg.experiment == Experiment::Exponents {
                sink.json("exponents.json", &exponent_fits(&est))?;
            }
            Ok(false)
        }
        Experiment::ApproxVerify => {
            let mut reports: Vec<CorrespondenceReport> = Vec::new();
            for &delta in &cfg.scales.delta {
                for &eps in &cfg.scales.eps {
                    reports.push(verify_samples(&spec, cfg.n_samples, cfg.sweeps, eps, delta)?);
                }
            }
            sink.json("approx_verify.json", &reports)?;
            Ok(reports.iter().any(|r| r.failed > 0 || r.bound_violations > 0))
        }
        Experiment::Measures => {
            let norm = Normalizer::new(spec.eta, &normaliser(cfg, &spec)?)?;
            let ns: Vec<u32> = cfg.scales.eps.iter().map(|e| (-e.ln() / 3f64.ln()).round() as u32).collect();
            let unit = Rect::square(Point::ORIGIN, 1.0);
            let rows = map_samples(&spec, cfg.n_samples, cfg.sweeps, || (), |_, s, c| -> Result<Vec<String>> {
                let cs = find_clusters(c);
                let mut out = Vec::new();
                for &delta in &cfg.scales.delta {
                    let coll = clusters_in_domain(&cs, &unit, delta)?;
                    let Some(big) = coll.members.first() else { continue };
                    let pts = big.points(c.as_percolation().lattice());
                    let mu = counting_measure(&pts, &norm);
                    for &n in &ns {
                        let m = box_sum_measure(c.as_percolation(), &cs, &pts, n, delta, &norm)?;
                        out.push(format!("{s},{delta},{},{n},{},{},{}", big.cluster, 3f64.powi(-(n as i32)), mu.total_mass(), tv_distance(&mu, &m)));
                    }
                }
                Ok(out)
            })?;
            let mut body = String::from("sample_index,delta,cluster,n,eps,mass,tv\n");
            for r in rows {
                for line in r? {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
            sink.put("measures.csv", body.as_bytes())?;
            Ok(false)
        }
        Experiment::Largest => {
            let etas = if cfg.scales.eta.is_empty() { vec![cfg.mesh.eta] } else { cfg.scales.eta.clone() };
            let mut body = String::from("eta,sample_index,mass1,mass2,size1,size2\n");
            let unit = Rect::square(Point::ORIGIN, 1.0);
            for eta in etas {
                let spec = MeshSpec { eta, ..spec };
                let norm = Normalizer::new(eta, &normaliser(cfg, &spec)?)?;
                let rows = map_samples(&spec, cfg.n_samples, cfg.sweeps, || (), |_, s, c| {
                    let top = largest_clusters(&find_clusters(c), &unit, 2);
                    let size = |i: usize| top.get(i).map_or(0, |p| p.size);
                    (s, size(0), size(1))
                })?;
                for (s, a, b) in rows {
                    let w = norm.weight();
                    body.push_str(&format!("{eta},{s},{},{},{a},{b}\n", a as f64 * w, b as f64 * w));
                }
            }
            sink.put("largest.csv", body.as_bytes())?;
            Ok(false)
        }
        Experiment::Ising => {
            let convention = match cfg.convention {
                ConventionChoice::Eta15_8 => Convention::Eta15_8,
                ConventionChoice::Pi1 => Convention::from_entry(&normaliser(cfg, &spec)?)?,
            };
            let signs = match cfg.sign_seed {
                Some(sign_seed) => SignSource::Seeded { sign_seed },
                None => SignSource::Spins,
            };
            let opts = FieldOptions { convention, signs };
            let f = cfg.test_function();
            let samples = magnetization_samples(&spec, cfg.n_samples, cfg.sweeps, &f, &cfg.scales.eps, &opts)?;
            let mut csv = Vec::new();
            write_magnetization_csv(&mut csv, &samples)?;
            sink.put("ising.csv", &csv)?;
            if !cfg.scales.eps.is_empty() {
                let mut m = serde_json::to_value(cutoff_moments(&samples)?)?;
                m["convention"] = serde_json::to_value(convention)?;
                m["ratio_to_eta15_8"] = convention.ratio_to_eta15_8(spec.eta).into();
                sink.json("cutoff_moments.json", &m)?;
            }
            if !cfg.scales.r.is_empty() {
                sink.json("two_point.json", &two_point(&spec, &cfg.scales.r, cfg.n_samples, cfg.sweeps)?)?;
            }
            Ok(false)
        }
    }
}

/// π̂₁(η, 1) for `spec`: from the configured table, or estimated from `n_samples` samples.
fn normaliser(cfg: &ExperimentConfig, spec: &MeshSpec) -> Result<NormEntry> {
    let e = match &cfg.norm_table {
        Some(path) => NormalizationTable::load(path)?.require(spec.kind, spec.eta)?,
        None => estimate_pi1_with(spec, cfg.n_samples, cfg.sweeps)?,
    };
    if !e.usable() {
        return Err(Error::Config(format!("π̂₁ = 0 at η = {}; refusing to normalise by zero", spec.eta)));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub a: f64,
    pub kappa: String,
    pub fit: FitResult,
}

/// Slope of log p against log(a/b), per inner radius with at least three outer radii.
pub fn exponent_fits(est: &[ArmEstimate]) -> Vec<ExponentFit> {
    let mut a_values: Vec<f64> = est.iter().map(|e| e.query.a).collect();
    a_values.sort_by(f64::total_cmp);
    a_values.dedup();
    a_values
        .into_iter()
        .filter_map(|a| {
            let pts: Vec<FitPoint> = est.iter().filter(|e| e.query.a == a).map(|e| FitPoint::from_tally(a / e.query.b, e.hits, e.trials)).collect();
            let fit = loglog_fit(&pts).ok()?;
            let q = &est.iter().find(|e| e.query.a == a)?.query;
            Some(ExponentFit { a, kappa: format!("{}|{}", q.kappa, q.kappa_hp), fit })
        })
        .collect()
}
