//! Exponent fits, tail fits, two-sample distances, and interval estimates.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::{Stream, StreamKey};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
pub const DEFAULT_BOOTSTRAP: usize = 1000;

/// Wilson score interval at 95% for `hits` successes out of `n`.
pub fn wilson_interval(hits: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    pub r2: f64,
    pub n_points: usize,
    /// Profiled stretch exponent of a stretched-exponential tail fit.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shape: Option<f64>,
}

/// One point of a log-log fit: a scale and a probability with its 95% half-width.
///
/// When the Monte Carlo tallies are known they drive a parametric bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub scale: f64,
    pub p: f64,
    pub ci: f64,
    pub tally: Option<(u64, u64)>,
}

impl FitPoint {
    pub fn exact(scale: f64, p: f64) -> Self {
        FitPoint { scale, p, ci: 0.0, tally: None }
    }

    pub fn from_tally(scale: f64, hits: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(hits, trials);
        FitPoint { scale, p: hits as f64 / trials.max(1) as f64, ci: 0.5 * (hi - lo), tally: Some((hits, trials)) }
    }
}

struct Line {
    slope: f64,
    intercept: f64,
    slope_se: f64,
    r2: f64,
}

fn weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> Line {
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(ws).map(|(x, w)| w * (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).zip(ws).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().zip(ws).map(|(y, w)| w * (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).zip(ws).map(|((x, y), w)| w * (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 1e-300 { 1.0 - ss_res / syy } else { 1.0 };
    let dof = xs.len().saturating_sub(2).max(1) as f64;
    let slope_se = if sxx > 0.0 { (ss_res / dof / sxx).sqrt() } else { f64::INFINITY };
    Line { slope, intercept, slope_se, r2 }
}

/// Ordinary least squares of `ys` on `xs`: `(slope, intercept, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let l = weighted_line(xs, ys, &vec![1.0; xs.len()]);
    (l.slope, l.intercept, l.r2)
}

fn delta_weights(points: &[FitPoint]) -> Vec<f64> {
    let vars: Vec<f64> = points.iter().map(|q| (q.ci / Z95 / q.p).powi(2)).collect();
    if vars.iter().all(|&v| v > 0.0 && v.is_finite()) {
        vars.iter().map(|v| 1.0 / v).collect()
    } else {
        vec![1.0; points.len()]
    }
}

/// Weighted least squares of log p on log scale, with delta-method weights and a
/// bootstrap CI for the slope.
pub fn loglog_fit(points: &[FitPoint]) -> Result<FitResult> {
    loglog_fit_with(points, DEFAULT_BOOTSTRAP, 0)
}

pub fn loglog_fit_with(points: &[FitPoint], resamples: usize, seed: u64) -> Result<FitResult> {
    let usable: Vec<FitPoint> = points
        .iter()
        .copied()
        .filter(|q| {
            let ok = q.p > 0.0 && q.scale > 0.0 && q.p.is_finite();
            if !ok {
                log::warn!("log-log fit: dropping point at scale {} with p = {}", q.scale, q.p);
            }
            ok
        })
        .collect();
    ensure!(usable.len() >= 3, Fit, "log-log fit needs at least 3 positive points, got {}", usable.len());
    let xs: Vec<f64> = usable.iter().map(|q| q.scale.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|q| q.p.ln()).collect();
    let ws = delta_weights(&usable);
    let line = weighted_line(&xs, &ys, &ws);

    let mut slope_ci = (line.slope - Z95 * line.slope_se, line.slope + Z95 * line.slope_se);
    if usable.iter().all(|q| q.tally.is_some()) && resamples > 0 {
        let key = StreamKey::new(seed, 0, Stream::Bootstrap);
        let mut slopes = Vec::with_capacity(resamples);
        for r in 0..resamples {
            let mut rng = key.child(r as u64).rng();
            let boot: Vec<FitPoint> = usable
                .iter()
                .map(|q| {
                    let (h, n) = q.tally.unwrap();
                    let draw = Binomial::new(n, h as f64 / n as f64).map(|b| b.sample(&mut rng)).unwrap_or(h);
                    FitPoint::from_tally(q.scale, draw, n)
                })
                .collect();
            if boot.iter().any(|q| q.p <= 0.0) {
                continue;
            }
            let by: Vec<f64> = boot.iter().map(|q| q.p.ln()).collect();
            slopes.push(weighted_line(&xs, &by, &delta_weights(&boot)).slope);
        }
        if slopes.len() >= 20 {
            slopes.sort_by(f64::total_cmp);
            slope_ci = (quantile_sorted(&slopes, 0.025), quantile_sorted(&slopes, 0.975));
        }
    }
    slope_ci = (slope_ci.0.min(line.slope), slope_ci.1.max(line.slope));
    Ok(FitResult { slope: line.slope, intercept: line.intercept, slope_ci, r2: line.r2, n_points: usable.len(), shape: None })
}

/// Linear interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailFamily {
    Exponential,
    Stretched,
}

/// Grid points at which the empirical survival is fitted.
const TAIL_GRID: usize = 20;
/// Minimum number of samples above a grid point for it to enter the fit.
const TAIL_MIN_COUNT: usize = 5;

/// Survival function `(x, S(x))` on an even grid of the window `[lo, hi]`.
pub fn survival_grid(sorted: &[f64], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let n = sorted.len() as f64;
    (0..TAIL_GRID)
        .filter_map(|g| {
            let x = lo + (hi - lo) * g as f64 / (TAIL_GRID - 1) as f64;
            let above = sorted.len() - sorted.partition_point(|&s| s < x);
            (above >= TAIL_MIN_COUNT).then_some((x, above as f64 / n))
        })
        .collect()
}

fn fit_survival(sorted: &[f64], lo: f64, hi: f64, beta: f64) -> Option<(Line, usize)> {
    let pts = survival_grid(sorted, lo, hi);
    if pts.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|(x, _)| x.powf(beta)).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, s)| s.ln()).collect();
    Some((weighted_line(&xs, &ys, &vec![1.0; xs.len()]), pts.len()))
}

/// Fits log P(X ≥ x) against x (exponential) or x^β (stretched, β profiled) over the upper
/// half of the populated range, from the minimum to the point with five samples above it. The returned slope is the decay constant (positive for a
/// decaying tail).
pub fn tail_fit(samples: &[f64], family: TailFamily) -> Result<FitResult> {
    tail_fit_with(samples, family, DEFAULT_BOOTSTRAP, 0)
}

pub fn tail_fit_with(samples: &[f64], family: TailFamily, resamples: usize, seed: u64) -> Result<FitResult> {
    ensure!(samples.len() >= 100, Fit, "tail fit needs at least 100 samples, got {}", samples.len());
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[sorted.len() - TAIL_MIN_COUNT];
    ensure!(max > min, Fit, "degenerate survival: samples concentrated at {min}");
    let lo = 0.5 * (min + max);
    let betas: Vec<f64> = match family {
        TailFamily::Exponential => vec![1.0],
        TailFamily::Stretched => (0..=34).map(|i| 0.3 + 0.05 * i as f64).collect(),
    };
    let run = |data: &[f64]| -> Option<(Line, usize, f64)> {
        betas
            .iter()
            .filter_map(|&b| fit_survival(data, lo, max, b).map(|(l, n)| (l, n, b)))
            .max_by(|a, b| a.0.r2.total_cmp(&b.0.r2))
    };
    let (line, n_points, beta) = run(&sorted).ok_or_else(|| Error::Fit("too few populated tail grid points".into()))?;
    let decay = -line.slope;
    let key = StreamKey::new(seed, 1, Stream::Bootstrap);
    let mut boots = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let k = key.child(r as u64);
        let mut res: Vec<f64> = (0..sorted.len()).map(|i| sorted[(k.word(i as u64) % sorted.len() as u64) as usize]).collect();
        res.sort_by(f64::total_cmp);
        if let Some((l, _)) = fit_survival(&res, lo, max, beta) {
            boots.push(-l.slope);
        }
    }
    let ci = if boots.len() >= 20 {
        boots.sort_by(f64::total_cmp);
        (quantile_sorted(&boots, 0.025).min(decay), quantile_sorted(&boots, 0.975).max(decay))
    } else {
        (decay - Z95 * line.slope_se, decay + Z95 * line.slope_se)
    };
    Ok(FitResult {
        slope: decay,
        intercept: line.intercept,
        slope_ci: ci,
        r2: line.r2,
        n_points,
        shape: (family == TailFamily::Stretched).then_some(beta),
    })
}

/// Two-sample Kolmogorov–Smirnov statistic sup |F_x − F_y|, exact by merge scan.
pub fn ks_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    ensure!(!x.is_empty() && !y.is_empty(), Domain, "ks_distance needs non-empty samples");
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS critical value at level `alpha` ∈ {0.05, 0.01}.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = if alpha <= 0.01 { 1.628 } else { 1.358 };
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// Mean and its 95% half-width.
pub fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z95 * (var / n).sqrt())
}
