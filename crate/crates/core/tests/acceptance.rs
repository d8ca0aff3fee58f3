//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line straight to stdout,
//! so the lines show up without `--nocapture`.
//!
//! Budgets default to what a single core finishes in minutes. `PERCLAB_ACCEPTANCE=full` uses
//! the full sample counts. A FAIL line only fails the test under `PERCLAB_STRICT=1`.

mod common;

use std::io::Write;
use std::time::Instant;

use common::arm_oracle::{arms_exist, fk_graph, site_graph, Graph};
use common::box_oracle::Oracle;
use common::cluster_oracle::{fk_labels, groups, site_labels};
use common::pi1_oracle::{pi1_count, relevant};
use perclab::arms::{arm_probabilities, arm_probability_with, cluster_reach, count_connected_vertices, quasi_mult_ratio, ArmDetector, ArmQuery, ColourSequence};
use perclab::boxapprox::{build_box_graph, event_tally, good_subgraphs, verify_samples, Cell, CorrespondenceReport};
use perclab::clusters::{clusters_in_domain, find_clusters, largest_clusters, ClusterSet};
use perclab::geom::{Point, Rect};
use perclab::ising::{cutoff_moments, magnetization_samples, two_point, FieldOptions, TestFunction};
use perclab::lattice::{estimate_pi1_with, map_samples, FkConfig, LatticeKind, MeshSpec, SiteConfig, SweepSchedule};
use perclab::measures::{box_sum_measure, counting_measure, tv_distance, Normalizer};
use perclab::stats::{ks_distance, loglog_fit, tail_fit, wilson_interval, FitPoint, FitResult, TailFamily};

type Outcome = perclab::Result<(bool, String)>;

fn full() -> bool {
    std::env::var("PERCLAB_ACCEPTANCE").is_ok_and(|v| v == "full")
}

/// Sample count: the full budget, or the single-core one.
fn budget(full_n: u64, desk_n: u64) -> u64 {
    if full() {
        full_n
    } else {
        desk_n
    }
}

fn report(n: u32, name: &str, start: Instant, outcome: Outcome) {
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n}: {verdict} {name}: {detail} ({:.1}s)\n", start.elapsed().as_secs_f64());
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    if !pass && std::env::var("PERCLAB_STRICT").is_ok_and(|v| v == "1") {
        panic!("{}", line.trim_end());
    }
}

fn seq(s: &str) -> ColourSequence {
    s.parse().unwrap()
}

fn schedule(burn_in: u64, gap: u64) -> SweepSchedule {
    SweepSchedule { burn_in, gap }
}

fn fit_of(a: f64, est: &[perclab::arms::ArmEstimate]) -> perclab::Result<FitResult> {
    let pts: Vec<FitPoint> = est.iter().map(|e| FitPoint::from_tally(a / e.query.b, e.hits, e.trials)).collect();
    loglog_fit(&pts)
}

fn show_fit(f: &FitResult) -> String {
    format!("slope {:.4} [{:.4}, {:.4}]", f.slope, f.slope_ci.0, f.slope_ci.1)
}

/// One-arm probabilities for a = 8η and b/a ∈ {2, 4, 8, 16}, fitted in log-log.
fn one_arm_fit(kind: LatticeKind, eta: f64, n: u64, sweeps: SweepSchedule) -> perclab::Result<FitResult> {
    let a = 8.0 * eta;
    let spec = MeshSpec::critical(kind, eta, 16.0 * a + 2.0 * eta, 101);
    let qs: Vec<ArmQuery> = [2.0, 4.0, 8.0, 16.0].iter().map(|r| ArmQuery::plane(Point::ORIGIN, a, r * a, seq("1"))).collect();
    fit_of(a, &arm_probabilities(&spec, &qs, n, sweeps)?)
}

#[test]
fn one_arm_exponent_site() {
    let t = Instant::now();
    let n = budget(20_000, 20_000);
    let out = one_arm_fit(LatticeKind::TriangularSite, 1.0 / 256.0, n, SweepSchedule::default()).map(|f| {
        let target = 5.0 / 48.0;
        ((f.slope - target).abs() <= 0.02, format!("{}, target {target:.4} ± 0.02, n = {n}", show_fit(&f)))
    });
    report(1, "one-arm exponent, triangular site", t, out);
}

#[test]
fn one_arm_exponent_fk() {
    let t = Instant::now();
    let n = budget(20_000, 4_096);
    let out = one_arm_fit(LatticeKind::SquareFk, 1.0 / 256.0, n, SweepSchedule::default()).map(|f| {
        let target = 1.0 / 8.0;
        ((f.slope - target).abs() <= 0.03, format!("{}, target {target:.4} ± 0.03, n = {n}", show_fit(&f)))
    });
    report(2, "one-arm exponent, FK-Ising", t, out);
}

#[test]
fn half_plane_three_and_six_arm_exponents() {
    let t = Instant::now();
    let n = budget(20_000, 20_000);
    let out = (|| {
        // a small inner box leaves room for b/a up to 32 at this mesh
        let eta = 1.0 / 128.0;
        let a = 2.0 * eta;
        let spec = MeshSpec::critical(LatticeKind::TriangularSite, eta, 32.0 * a + 2.0 * eta, 103);
        let radii = [4.0, 8.0, 16.0, 32.0];
        let hp: Vec<ArmQuery> = radii.iter().map(|r| ArmQuery::half_plane(Point::ORIGIN, a, r * a, 1, seq("010"))).collect();
        let six: Vec<ArmQuery> = radii.iter().map(|r| ArmQuery::plane(Point::ORIGIN, a, r * a, seq("101010"))).collect();
        let est = arm_probabilities(&spec, &[hp, six].concat(), n, SweepSchedule::default())?;
        let (f3, f6) = (fit_of(a, &est[..4])?, fit_of(a, &est[4..])?);
        let pass = f3.slope >= 2.0 - 0.15 && f6.slope >= 2.0 + 0.3;
        Ok((pass, format!("half-plane 010 {} (need ≥ 1.85), six-arm {} (need ≥ 2.3), n = {n}", show_fit(&f3), show_fit(&f6))))
    })();
    report(3, "half-plane three-arm and six-arm exponents", t, out);
}

#[test]
fn quasi_multiplicativity_band() {
    let t = Instant::now();
    let n = budget(20_000, 20_000);
    let out = (|| {
        let mut ratios = Vec::new();
        for eta in [1.0 / 64.0, 1.0 / 128.0] {
            let spec = MeshSpec::critical(LatticeKind::TriangularSite, eta, 66.0 * eta, 104);
            ratios.push((eta, quasi_mult_ratio(&spec, 4.0 * eta, 16.0 * eta, 64.0 * eta, n)?.ratio));
        }
        let pass = ratios.iter().all(|&(_, r)| (1.0..=20.0).contains(&r));
        let detail = ratios.iter().map(|(e, r)| format!("η = 1/{:.0}: {r:.3}", 1.0 / e)).collect::<Vec<_>>().join(", ");
        Ok((pass, format!("{detail}; band [1, 20], n = {n}")))
    })();
    report(4, "quasi-multiplicativity", t, out);
}

#[test]
fn connected_vertex_count_has_exponential_tail() {
    let t = Instant::now();
    let n = budget(10_000, 10_000);
    let out = (|| {
        let (eta, a) = (1.0 / 128.0, 0.25);
        let spec = MeshSpec::critical(LatticeKind::TriangularSite, eta, a + 2.0 * eta, 105);
        let pi = arm_probability_with(&spec, &ArmQuery::plane(Point::ORIGIN, eta, a, seq("1")), n, SweepSchedule::default())?;
        let scale = (a / eta).powi(2) * pi.p_hat;
        let counts = map_samples(&spec, n, SweepSchedule::default(), || (), |_, _, c| count_connected_vertices(c, a))?;
        let xs: Vec<f64> = counts.into_iter().map(|c| c.map(|c| c as f64 / scale)).collect::<perclab::Result<_>>()?;
        let fit = tail_fit(&xs, TailFamily::Exponential)?;
        let pass = fit.slope > 0.0 && fit.r2 >= 0.95;
        Ok((pass, format!("log-survival slope {:.3}, r² {:.4} over {} grid points (need negative slope, r² ≥ 0.95), n = {n}", -fit.slope, fit.r2, fit.n_points)))
    })();
    report(5, "tail of |V_a|", t, out);
}

fn show_report(r: &CorrespondenceReport) -> String {
    format!("ε = 1/{:.0}: {} with E, {} without, {} failed, {} bound violations", 1.0 / r.epsilon, r.passed + r.failed, r.skipped, r.failed, r.bound_violations)
}

#[test]
fn correspondence_on_e() {
    let t = Instant::now();
    let n = budget(10_000, 300);
    let spec = MeshSpec::critical(LatticeKind::TriangularSite, 1.0 / 64.0, 1.25, 106);
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [1.0 / 27.0, 1.0 / 81.0] {
        match verify_samples(&spec, n, SweepSchedule::default(), eps, 0.5) {
            Ok(r) => {
                pass &= r.failed == 0 && r.bound_violations == 0;
                let vacuous = if r.passed + r.failed == 0 { " (vacuous: E never held)" } else { "" };
                parts.push(format!("{}{vacuous}", show_report(&r)));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("ε = 1/{:.0}: {e}", 1.0 / eps));
            }
        }
    }
    report(6, "box approximation matches clusters on E", t, Ok((pass, format!("{}; n = {n}", parts.join("; ")))));
}

#[test]
fn bad_event_probability_decays() {
    let t = Instant::now();
    let n = budget(2_000, 30);
    // η below every ε, so no box is smaller than a lattice step
    let spec = MeshSpec::critical(LatticeKind::TriangularSite, 1.0 / 128.0, 1.25, 107);
    let mut rates = Vec::new();
    let mut parts = Vec::new();
    for m in 2..=4 {
        let eps = 3f64.powi(-m);
        match event_tally(&spec, n, SweepSchedule::default(), eps, 0.5) {
            Ok(tally) => {
                rates.push((eps, tally.e_failure_rate()));
                parts.push(format!("ε = 3^-{m}: P(E^c) = {:.3}", tally.e_failure_rate()));
            }
            Err(e) => parts.push(format!("ε = 3^-{m}: {e}")),
        }
    }
    let decreasing = rates.len() == 3 && rates.windows(2).all(|w| w[1].1 < w[0].1);
    let slope = if rates.len() == 3 && rates.iter().all(|r| r.1 > 0.0) {
        loglog_fit(&rates.iter().map(|&(e, p)| FitPoint::exact(e, p)).collect::<Vec<_>>()).ok().map(|f| f.slope)
    } else {
        None
    };
    let pass = decreasing && slope.is_some_and(|s| s > 0.0);
    let slope = slope.map_or("no fit".into(), |s| format!("log-log slope {s:.3}"));
    report(7, "decay of P(E^c)", t, Ok((pass, format!("{}; {slope}, n = {n}", parts.join("; ")))));
}

#[test]
fn box_sum_measure_converges_in_tv() {
    let t = Instant::now();
    let n = budget(2_000, 200);
    let out = (|| {
        let (eta, delta) = (1.0 / 128.0, 0.5);
        let spec = MeshSpec::critical(LatticeKind::TriangularSite, eta, 1.35, 108);
        let norm = Normalizer::new(eta, &estimate_pi1_with(&spec, n.max(2_000), SweepSchedule::default())?)?;
        let levels = [3u32, 4];
        let unit = Rect::square(Point::ORIGIN, 1.0);
        let rows = map_samples(&spec, n, SweepSchedule::default(), || (), |_, _, c| -> perclab::Result<Option<Vec<f64>>> {
            let cs = find_clusters(c);
            let coll = clusters_in_domain(&cs, &unit, delta)?;
            let Some(big) = coll.members.first() else { return Ok(None) };
            let pts = big.points(c.as_percolation().lattice());
            let mu = counting_measure(&pts, &norm);
            let mut out = Vec::new();
            for &m in &levels {
                let approx = box_sum_measure(c.as_percolation(), &cs, &pts, m, delta, &norm)?;
                out.push(tv_distance(&mu, &approx));
            }
            Ok(Some(out))
        })?;
        let rows: Vec<Vec<f64>> = rows.into_iter().collect::<perclab::Result<Vec<_>>>()?.into_iter().flatten().collect();
        let count = rows.len().max(1) as f64;
        let freq: Vec<f64> = levels.iter().enumerate().map(|(i, &m)| rows.iter().filter(|r| r[i] >= 3f64.powi(-(m as i32)).powf(0.1)).count() as f64 / count).collect();
        let mean: Vec<f64> = (0..levels.len()).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / count).collect();
        let pass = !rows.is_empty() && freq.windows(2).all(|w| w[1] <= w[0]);
        let vacuous = if freq.iter().all(|&f| f == 0.0) { " (never reached)" } else { "" };
        let detail = levels.iter().zip(freq.iter().zip(&mean)).map(|(m, (f, t))| format!("n = {m}: {f:.3}, mean TV {t:.4}")).collect::<Vec<_>>().join("; ");
        Ok((pass, format!("P(TV ≥ ε^0.1){vacuous} {detail} over {} samples with a δ-cluster", rows.len())))
    })();
    report(8, "box-sum measure TV frequency", t, out);
}

/// Masses of the two largest clusters in `domain`, one pair per sample.
fn largest_masses(spec: &MeshSpec, domain: Rect, n: u64) -> perclab::Result<Vec<(f64, f64)>> {
    // the masses inherit π̂₁'s relative error, so it gets more samples than the masses
    let norm = Normalizer::new(spec.eta, &estimate_pi1_with(spec, n.max(40_000), SweepSchedule::default())?)?;
    let w = norm.weight();
    map_samples(spec, n, SweepSchedule::default(), || (), |_, _, c| {
        let top = largest_clusters(&find_clusters(c), &domain, 2);
        let size = |i: usize| top.get(i).map_or(0, |p| p.size) as f64 * w;
        (size(0), size(1))
    })
}

#[test]
fn largest_cluster_mass_is_mesh_stable() {
    let t = Instant::now();
    let n = budget(10_000, 2_000);
    let out = (|| {
        let unit = Rect::square(Point::ORIGIN, 1.0);
        let coarse = largest_masses(&MeshSpec::critical(LatticeKind::TriangularSite, 1.0 / 64.0, 1.0, 109), unit, n)?;
        let fine = largest_masses(&MeshSpec::critical(LatticeKind::TriangularSite, 1.0 / 128.0, 1.0, 110), unit, n)?;
        let first = |v: &[(f64, f64)]| v.iter().map(|p| p.0).collect::<Vec<_>>();
        let ks = ks_distance(&first(&coarse), &first(&fine))?;
        // with no gap every pair would be closer than 0.02; require the upper bound to stay below 1/2
        let close = |v: &[(f64, f64)]| v.iter().filter(|p| (p.0 - p.1).abs() < 0.02).count() as u64;
        let gaps: Vec<(f64, f64)> = [&coarse, &fine].iter().map(|v| (close(v) as f64 / v.len() as f64, wilson_interval(close(v), v.len() as u64).1)).collect();
        let pass = ks <= 0.05 && gaps.iter().all(|g| g.1 < 0.5);
        let gap = gaps.iter().map(|(p, hi)| format!("{p:.4} (≤ {hi:.4})")).collect::<Vec<_>>().join(", ");
        Ok((pass, format!("KS {ks:.4} (need ≤ 0.05); P(|m1 − m2| < 0.02) at 1/64, 1/128: {gap}, no-gap value 1, n = {n}")))
    })();
    report(9, "largest-cluster masses", t, out);
}

#[test]
fn cluster_masses_scale_covariantly() {
    let t = Instant::now();
    let n = budget(10_000, 2_000);
    let out = (|| {
        let (eta, r) = (1.0 / 128.0, 2.0);
        let base = largest_masses(&MeshSpec::critical(LatticeKind::TriangularSite, eta, 1.0, 111), Rect::square(Point::ORIGIN, 1.0), n)?;
        let scaled = largest_masses(&MeshSpec::critical(LatticeKind::TriangularSite, r * eta, r, 112), Rect::square(Point::ORIGIN, r), n)?;
        let x: Vec<f64> = base.iter().map(|p| p.0).collect();
        let y: Vec<f64> = scaled.iter().map(|p| p.0 * r.powf(-91.0 / 48.0)).collect();
        let ks = ks_distance(&x, &y)?;
        Ok((ks <= 0.05, format!("KS {ks:.4} at r = 2 (need ≤ 0.05), n = {n}")))
    })();
    report(10, "scaling covariance of cluster masses", t, out);
}

#[test]
fn ising_two_point_exponent() {
    let t = Instant::now();
    let n = budget(400, 100);
    let out = (|| {
        let eta = 1.0 / 128.0;
        let spec = MeshSpec::critical(LatticeKind::SquareFk, eta, 2.0, 113);
        let rs: Vec<f64> = [4.0, 8.0, 16.0, 32.0, 64.0].iter().map(|s| s * eta).collect();
        let table = two_point(&spec, &rs, n, schedule(1_500, 10))?;
        let x = table.exponent().ok_or_else(|| perclab::Error::Fit("no two-point fit".into()))?;
        Ok(((x - 0.25).abs() <= 0.05, format!("decay exponent {x:.4}, target 0.25 ± 0.05, n = {n}")))
    })();
    report(11, "Ising two-point decay", t, out);
}

#[test]
fn cutoff_magnetization_rate() {
    let t = Instant::now();
    let n = budget(2_000, 300);
    let out = (|| {
        let spec = MeshSpec::critical(LatticeKind::SquareFk, 1.0 / 128.0, 1.0, 114);
        let eps = [0.25, 0.125, 0.0625, 0.03125];
        let samples = magnetization_samples(&spec, n, schedule(100, 5), &TestFunction::indicator(1.0), &eps, &FieldOptions::default())?;
        let fit = cutoff_moments(&samples)?.fit.ok_or_else(|| perclab::Error::Fit("no cutoff fit".into()))?;
        Ok((fit.slope >= 1.5, format!("{} (need ≥ 1.5, target 1.75), n = {n}", show_fit(&fit))))
    })();
    report(12, "cutoff magnetization rate", t, out);
}

// Exhaustive oracle suite.

fn same_partition(cs: &ClusterSet, label: &[Option<usize>]) -> bool {
    let oracle = groups(label);
    cs.len() == oracle.len()
        && oracle.iter().all(|g| cs.cluster_of(g[0]).is_some_and(|c| cs.members(c).eq(g.iter().copied())))
        && (0..label.len()).all(|v| cs.cluster_of(v).is_some() == label[v].is_some())
}

fn arm_oracle(g: &Graph, q: &ArmQuery) -> bool {
    let plane = q.kappa.is_empty() || arms_exist(g, q.center, q.a, q.b, q.kappa.join(&q.kappa_hp).bits(), None);
    plane && (q.side.is_none() || arms_exist(g, q.center, q.a, q.b, q.kappa_hp.bits(), q.side))
}

fn arm_queries(a: f64, b: f64) -> Vec<ArmQuery> {
    let z = Point::ORIGIN;
    let mut qs: Vec<ArmQuery> = ["1", "0", "10", "1010", "010101", "11", "110", "0011"].iter().map(|k| ArmQuery::plane(z, a, b, seq(k))).collect();
    for side in 1..=4 {
        qs.push(ArmQuery::half_plane(z, a, b, side, seq("010")));
        qs.push(ArmQuery::composite(z, a, b, seq("1"), side, seq("010")));
    }
    qs
}

/// Site clusters over every colouring of a 23-vertex window with one vertex held red.
fn exhaustive_site_clusters() -> Result<String, String> {
    let spec = MeshSpec::critical(LatticeKind::TriangularSite, 1.0, 2.0, 0);
    let lat = spec.lattice().map_err(|e| e.to_string())?;
    let n = lat.len();
    if n > 23 {
        return Err(format!("{n} vertices"));
    }
    for state in 0u32..(1 << (n - 1)) {
        let colors: Vec<bool> = (0..n).map(|v| state >> v & 1 == 1 || v == n - 1).collect();
        let cfg = SiteConfig::from_colors(spec, lat.clone(), colors).unwrap();
        if !same_partition(&find_clusters(&cfg), &site_labels(&cfg)) {
            return Err(format!("site clusters differ on colouring {state:#x}"));
        }
    }
    Ok(format!("site clusters on 2^{} colourings", n - 1))
}

/// Site arm events over every colouring of the 16 vertices that can carry an arm.
fn exhaustive_site_arms() -> Result<String, String> {
    let spec = MeshSpec::critical(LatticeKind::TriangularSite, 1.0, 1.75, 0);
    let lat = spec.lattice().map_err(|e| e.to_string())?;
    // every neighbour of the centre lies in Λ_a, so the centre is never on an arm
    let centre = (0..lat.len()).find(|&v| lat.pos(v).linf(Point::ORIGIN) < 1e-12).unwrap();
    let free: Vec<usize> = (0..lat.len()).filter(|&v| v != centre).collect();
    if free.len() > 22 {
        return Err(format!("{} free vertices", free.len()));
    }
    let qs = arm_queries(1.0, 1.7);
    let mut det = ArmDetector::new();
    let mut positives = vec![0u32; qs.len()];
    for state in 0u32..(1 << free.len()) {
        let mut colors = vec![true; lat.len()];
        for (i, &v) in free.iter().enumerate() {
            colors[v] = state >> i & 1 == 1;
        }
        let cfg = SiteConfig::from_colors(spec, lat.clone(), colors).unwrap();
        let g = site_graph(&cfg);
        for (q, p) in qs.iter().zip(positives.iter_mut()) {
            let got = det.detect(&cfg, q).map_err(|e| e.to_string())?;
            if got != arm_oracle(&g, q) {
                return Err(format!("arm event {q:?} differs on colouring {state:#x}"));
            }
            *p += got as u32;
        }
    }
    let seen = positives.iter().filter(|&&p| p > 0).count();
    Ok(format!("{} arm queries on 2^{} colourings ({seen} occur)", qs.len(), free.len()))
}

/// FK clusters and arm events over every bond configuration of the 3 x 3 square patch.
fn exhaustive_fk() -> Result<String, String> {
    let spec = MeshSpec::critical(LatticeKind::SquareFk, 1.0, 1.5, 0);
    let lat = spec.lattice().map_err(|e| e.to_string())?;
    let m = lat.edge_count();
    if m > 22 {
        return Err(format!("{m} edges"));
    }
    let qs = arm_queries(0.5, 1.5);
    for state in 0u32..(1 << m) {
        let bonds: Vec<bool> = (0..m).map(|e| state >> e & 1 == 1).collect();
        let cfg = FkConfig::from_parts(spec, lat.clone(), bonds, vec![1; lat.len()]).unwrap();
        if !same_partition(&find_clusters(&cfg), &fk_labels(&cfg)) {
            return Err(format!("FK clusters differ on bonds {state:#x}"));
        }
        let g = fk_graph(&cfg);
        for q in &qs {
            if perclab::arms::detect_arms(&cfg, q).map_err(|e| e.to_string())? != arm_oracle(&g, q) {
                return Err(format!("FK arm event {q:?} differs on bonds {state:#x}"));
            }
        }
    }
    Ok(format!("2^{m} bond configurations"))
}

fn exhaustive_pi1() -> Result<String, String> {
    let spec = MeshSpec::critical(LatticeKind::TriangularSite, 0.7, 1.4, 3);
    let lat = spec.lattice().map_err(|e| e.to_string())?;
    let (hits, n) = pi1_count(&spec);
    if n > 22 {
        return Err(format!("{n} relevant vertices"));
    }
    let (inner, outer) = relevant(&spec);
    let all: Vec<usize> = inner.iter().chain(&outer).copied().collect();
    let mut lib_hits = 0u64;
    for state in 0u64..(1 << n) {
        let mut colors = vec![false; lat.len()];
        for (i, &v) in all.iter().enumerate() {
            colors[v] = state >> i & 1 == 1;
        }
        let cfg = SiteConfig::from_colors(spec, lat.clone(), colors).unwrap();
        lib_hits += cluster_reach(&cfg, Point::ORIGIN, 0.0, 1.0).is_some_and(|r| r >= 1.0 - 1e-9) as u64;
    }
    if lib_hits != hits {
        return Err(format!("π₁ count {lib_hits} vs oracle {hits}"));
    }
    Ok(format!("π₁ = {hits}/2^{n}"))
}

fn exhaustive_good_subgraphs() -> Result<String, String> {
    const FREE: [(i32, i32); 12] = [(-9, 0), (-5, 0), (0, 0), (5, 0), (9, 0), (-9, 1), (-3, 1), (2, 1), (8, 1), (-8, -1), (-1, -1), (4, -1)];
    let (eta, eps, delta) = (0.05, 0.09, 0.95);
    let spec = MeshSpec::critical(LatticeKind::TriangularSite, eta, 1.2, 0);
    let lat = spec.lattice().map_err(|e| e.to_string())?;
    let free: Vec<usize> = FREE.iter().map(|&(i, j)| lat.index(i, j).unwrap()).collect();
    let mut with_good = 0;
    for state in 0u32..(1 << FREE.len()) {
        let mut red: Vec<bool> = (0..lat.len())
            .map(|v| {
                let (i, j) = lat.coords(v);
                j == 0 && (-9..=9).contains(&i)
            })
            .collect();
        for (b, &v) in free.iter().enumerate() {
            red[v] = state >> b & 1 == 1;
        }
        let cfg = SiteConfig::from_colors(spec, lat.clone(), red.clone()).unwrap();
        let g = build_box_graph(&cfg, eps).map_err(|e| e.to_string())?;
        let got: Vec<Vec<Cell>> = good_subgraphs(&g, delta).map_err(|e| e.to_string())?.into_iter().map(|h| h.boxes.cells).collect();
        if got != Oracle::new(&lat, &red, eps, delta).good() {
            return Err(format!("good subgraphs differ on colouring {state:#b}"));
        }
        with_good += !got.is_empty() as u32;
    }
    Ok(format!("good subgraphs on 2^{} colourings ({with_good} with one)", FREE.len()))
}

#[test]
fn exhaustive_oracles_agree() {
    let t = Instant::now();
    let parts = [exhaustive_site_clusters(), exhaustive_site_arms(), exhaustive_fk(), exhaustive_pi1(), exhaustive_good_subgraphs()];
    let pass = parts.iter().all(|p| p.is_ok()) && t.elapsed().as_secs() <= 300;
    let detail = parts.iter().map(|p| p.clone().unwrap_or_else(|e| format!("MISMATCH {e}"))).collect::<Vec<_>>().join("; ");
    report(13, "exhaustive oracle equivalence", t, Ok((pass, format!("{detail}; budget 300 s"))));
}
