//! The ε-box graph, good subgraphs, the approximation events and the cluster correspondence.
//!
//! Boxes are the closed squares Λ_{ε/2}(εz), z ∈ Λ_{⌈1/ε⌉} ∩ Z², written by their integer
//! centre z. A vertex on a box side belongs to every box containing it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::arms::{ArmConfig, ArmDetector, ArmSource, ColourSequence};
use crate::clusters::{clusters_in_domain, find_clusters, ClusterSet};
use crate::error::{ensure, Result};
use crate::geom::{Point, Rect, GEOM_EPS};
use crate::lattice::{map_samples, MeshSpec, Percolation, SweepSchedule};
use crate::measures::grid_centres;

pub type Cell = (i64, i64);

/// Largest centre index: boxes have |z|∞ ≤ ⌈1/ε⌉.
fn grid_radius(eps: f64) -> i64 {
    (1.0 / eps - 1e-9).ceil() as i64
}

fn box_rect(eps: f64, z: Cell) -> Rect {
    Rect::square(Point::new(z.0 as f64 * eps, z.1 as f64 * eps), eps / 2.0)
}

fn in_unit_square(eps: f64, z: Cell) -> bool {
    (z.0.abs().max(z.1.abs()) as f64) * eps + eps / 2.0 <= 1.0 + GEOM_EPS
}

fn seq(s: &str) -> ColourSequence {
    s.parse().expect("constant colour sequence")
}

/// Sorted set of boxes at one scale, e.g. K_ε(S).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub epsilon: f64,
    pub cells: Vec<Cell>,
}

impl BoxSet {
    pub fn new(epsilon: f64, mut cells: Vec<Cell>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        BoxSet { epsilon, cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn rect(&self, z: Cell) -> Rect {
        box_rect(self.epsilon, z)
    }

    /// Whether `p` lies in U, the union of the boxes.
    pub fn contains(&self, p: Point) -> bool {
        self.cells.iter().any(|&z| self.rect(z).contains(p))
    }

    /// SR: the smallest rectangle containing U.
    pub fn bounding_rect(&self) -> Option<Rect> {
        self.cells.iter().map(|&z| self.rect(z)).reduce(|a, b| a.union(&b))
    }

    /// L∞ diameter of U.
    pub fn diameter(&self) -> f64 {
        self.bounding_rect().map_or(0.0, |r| r.diameter())
    }

    fn extreme(&self, key: impl Fn(Cell) -> i64) -> Vec<Cell> {
        let Some(best) = self.cells.iter().map(|&z| key(z)).min() else { return Vec::new() };
        self.cells.iter().copied().filter(|&z| key(z) == best).collect()
    }

    pub fn left(&self) -> Vec<Cell> {
        self.extreme(|z| z.0)
    }

    pub fn right(&self) -> Vec<Cell> {
        self.extreme(|z| -z.0)
    }

    pub fn top(&self) -> Vec<Cell> {
        self.extreme(|z| -z.1)
    }

    pub fn bottom(&self) -> Vec<Cell> {
        self.extreme(|z| z.1)
    }
}

/// K_ε(S): every box of the grid εZ² that meets `points`.
pub fn k_eps(points: &[Point], epsilon: f64) -> BoxSet {
    BoxSet::new(epsilon, grid_centres(points, epsilon, epsilon / 2.0).into_iter().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeTag {
    pub grid: bool,
    pub red: bool,
}

/// G_ε: boxes joined when their centres are grid neighbours or a red path meets both.
pub struct BoxGraph<'a> {
    epsilon: f64,
    radius: i64,
    source: ArmSource<'a>,
    clusters: ClusterSet,
    box_clusters: Vec<Vec<u32>>,
    cluster_boxes: Vec<Vec<u32>>,
}

/// Builds G_ε for `config`. Needs η < ε and Λ_{1+2ε} inside the region.
pub fn build_box_graph<C: Percolation + ArmConfig + ?Sized>(config: &C, epsilon: f64) -> Result<BoxGraph<'_>> {
    let lat = config.lattice();
    ensure!(epsilon > 0.0 && lat.eta() < epsilon, Parameter, "box scale ε = {epsilon} must exceed the mesh η = {}", lat.eta());
    ensure!(lat.k() >= 1.0 + 2.0 * epsilon - GEOM_EPS, Domain, "region Λ_{} does not contain Λ_{}", lat.k(), 1.0 + 2.0 * epsilon);
    let clusters = find_clusters(config);
    let radius = grid_radius(epsilon);
    let side = (2 * radius + 1) as usize;
    let mut box_clusters = vec![Vec::new(); side * side];
    let mut cluster_boxes = vec![Vec::new(); clusters.len()];
    let h = epsilon / 2.0;
    for v in 0..lat.len() {
        let Some(c) = clusters.cluster_of(v) else { continue };
        let p = lat.pos(v);
        let (x0, x1) = (((p.x - h) / epsilon - 1e-9).ceil() as i64, ((p.x + h) / epsilon + 1e-9).floor() as i64);
        let (y0, y1) = (((p.y - h) / epsilon - 1e-9).ceil() as i64, ((p.y + h) / epsilon + 1e-9).floor() as i64);
        for i in x0.max(-radius)..=x1.min(radius) {
            for j in y0.max(-radius)..=y1.min(radius) {
                if box_rect(epsilon, (i, j)).contains(p) {
                    let b = ((i + radius) as usize * side + (j + radius) as usize) as u32;
                    box_clusters[b as usize].push(c as u32);
                    cluster_boxes[c].push(b);
                }
            }
        }
    }
    for l in box_clusters.iter_mut().chain(cluster_boxes.iter_mut()) {
        l.sort_unstable();
        l.dedup();
    }
    Ok(BoxGraph { epsilon, radius, source: config.arm_source(), clusters, box_clusters, cluster_boxes })
}

fn shares(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

impl<'a> BoxGraph<'a> {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// ⌈1/ε⌉, the largest |z|∞.
    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.box_clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.box_clusters.is_empty()
    }

    fn side(&self) -> i64 {
        2 * self.radius + 1
    }

    /// Boxes are numbered in lexicographic order of their centres.
    pub fn cell(&self, b: u32) -> Cell {
        let s = self.side();
        (b as i64 / s - self.radius, b as i64 % s - self.radius)
    }

    pub fn index(&self, z: Cell) -> Option<u32> {
        let r = self.radius;
        (z.0.abs() <= r && z.1.abs() <= r).then(|| ((z.0 + r) * self.side() + z.1 + r) as u32)
    }

    pub fn rect(&self, b: u32) -> Rect {
        box_rect(self.epsilon, self.cell(b))
    }

    pub fn cluster_set(&self) -> &ClusterSet {
        &self.clusters
    }

    /// Clusters meeting box `b`.
    pub fn clusters_at(&self, b: u32) -> &[u32] {
        &self.box_clusters[b as usize]
    }

    /// Boxes meeting cluster `c`, i.e. K_ε(c) inside the grid.
    pub fn boxes_of(&self, c: usize) -> &[u32] {
        &self.cluster_boxes[c]
    }

    pub fn box_set(&self, boxes: &[u32]) -> BoxSet {
        BoxSet::new(self.epsilon, boxes.iter().map(|&b| self.cell(b)).collect())
    }

    fn grid_adjacent(&self, a: u32, b: u32) -> bool {
        let (za, zb) = (self.cell(a), self.cell(b));
        a != b && (za.0 - zb.0).abs() <= 1 && (za.1 - zb.1).abs() <= 1
    }

    pub fn edge(&self, a: u32, b: u32) -> Option<EdgeTag> {
        if a == b {
            return None;
        }
        let tag = EdgeTag { grid: self.grid_adjacent(a, b), red: shares(self.clusters_at(a), self.clusters_at(b)) };
        (tag.grid || tag.red).then_some(tag)
    }

    pub fn adjacent(&self, a: u32, b: u32) -> bool {
        a != b && (self.grid_adjacent(a, b) || shares(self.clusters_at(a), self.clusters_at(b)))
    }

    fn grid_neighbours(&self, b: u32, mut f: impl FnMut(u32)) {
        let z = self.cell(b);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if (dx, dy) != (0, 0) {
                    if let Some(n) = self.index((z.0 + dx, z.1 + dy)) {
                        f(n);
                    }
                }
            }
        }
    }

    /// All neighbours of `b`, sorted.
    pub fn neighbours(&self, b: u32) -> Vec<u32> {
        let mut out = Vec::new();
        self.grid_neighbours(b, |n| out.push(n));
        for &c in self.clusters_at(b) {
            out.extend_from_slice(&self.cluster_boxes[c as usize]);
        }
        out.sort_unstable();
        out.dedup();
        out.retain(|&n| n != b);
        out
    }

    /// Every edge with its tags, each pair once with the smaller index first.
    pub fn edges(&self) -> Vec<(u32, u32, EdgeTag)> {
        let mut out = Vec::new();
        for a in 0..self.len() as u32 {
            for b in self.neighbours(a) {
                if a < b {
                    out.push((a, b, self.edge(a, b).expect("neighbour")));
                }
            }
        }
        out
    }

    /// A box outside `members` adjacent to all of them, if any.
    pub fn extension(&self, members: &[u32]) -> Option<u32> {
        let first = *members.iter().min_by_key(|&&b| self.clusters_at(b).iter().map(|&c| self.cluster_boxes[c as usize].len()).sum::<usize>())?;
        self.neighbours(first).into_iter().find(|&w| members.binary_search(&w).is_err() && members.iter().all(|&m| self.adjacent(w, m)))
    }
}

/// A good subgraph H with its extreme boxes and strips (clipped to the sampled region).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodSubgraph {
    pub boxes: BoxSet,
    pub left: Vec<Cell>,
    pub right: Vec<Cell>,
    pub top: Vec<Cell>,
    pub bottom: Vec<Cell>,
    pub sv: Rect,
    pub sh: Rect,
    pub sr: Rect,
}

/// Why a complete subgraph is not good, or `None` when it is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Defect {
    NotComplete,
    LeavesUnitSquare,
    NotMaximal { extra: Cell },
    TooSmall { diameter: f64 },
    NoArms { from: Cell, to: Cell },
    /// Satisfies every condition yet was not enumerated.
    Missed,
}

struct CliqueSearch<'g, 'a> {
    g: &'g BoxGraph<'a>,
    span: i64,
    found: Vec<Vec<u32>>,
}

impl CliqueSearch<'_, '_> {
    fn wide_enough(&self, r: &[u32], p: &[u32]) -> bool {
        let (mut x0, mut x1, mut y0, mut y1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for &b in r.iter().chain(p) {
            let z = self.g.cell(b);
            x0 = x0.min(z.0);
            x1 = x1.max(z.0);
            y0 = y0.min(z.1);
            y1 = y1.max(z.1);
        }
        (x1 - x0).max(y1 - y0) >= self.span
    }

    fn common_cluster(&self, p: &[u32]) -> bool {
        let mut common: Vec<u32> = self.g.clusters_at(p[0]).to_vec();
        for &b in &p[1..] {
            let cl = self.g.clusters_at(b);
            common.retain(|c| cl.binary_search(c).is_ok());
            if common.is_empty() {
                return false;
            }
        }
        true
    }

    /// Bron–Kerbosch with pivoting, pruned to cliques wide enough to be good.
    fn run(&mut self, r: &mut Vec<u32>, mut p: Vec<u32>, mut x: Vec<u32>) {
        if !self.wide_enough(r, &p) {
            return;
        }
        if p.is_empty() {
            if x.is_empty() {
                self.found.push(r.clone());
            }
            return;
        }
        let g = self.g;
        if self.common_cluster(&p) {
            // P is a clique, so R ∪ P is the only candidate here
            if !x.iter().any(|&w| p.iter().all(|&q| g.adjacent(w, q))) {
                let mut c = r.clone();
                c.extend_from_slice(&p);
                self.found.push(c);
            }
            return;
        }
        let mut pivot = p[0];
        let mut best = usize::MAX;
        for &u in x.iter().take(8).chain(p.iter().take(8)) {
            let mut miss = 0;
            for &v in &p {
                if !g.adjacent(u, v) {
                    miss += 1;
                    if miss >= best {
                        break;
                    }
                }
            }
            if miss < best {
                best = miss;
                pivot = u;
            }
        }
        let branch: Vec<u32> = p.iter().copied().filter(|&v| !g.adjacent(pivot, v)).collect();
        for v in branch {
            let p2: Vec<u32> = p.iter().copied().filter(|&w| g.adjacent(v, w)).collect();
            let x2: Vec<u32> = x.iter().copied().filter(|&w| g.adjacent(v, w)).collect();
            r.push(v);
            self.run(r, p2, x2);
            r.pop();
            p.retain(|&w| w != v);
            x.push(v);
        }
    }
}

impl<'a> BoxGraph<'a> {
    /// Maximal complete subgraphs inside Λ₁ with diameter ≥ `delta`, each sorted.
    fn wide_maximal_cliques(&self, delta: f64) -> Vec<Vec<u32>> {
        // diam U = (cell span + 1) ε
        let span = (delta / self.epsilon - 1.0 - 1e-9).ceil().max(0.0) as i64;
        let mut search = CliqueSearch { g: self, span, found: Vec::new() };
        let inside: Vec<bool> = (0..self.len() as u32).map(|b| in_unit_square(self.epsilon, self.cell(b))).collect();
        // boxes meeting no cluster only join cliques of diameter ≤ 3ε
        for v in 0..self.len() as u32 {
            if !inside[v as usize] || self.clusters_at(v).is_empty() {
                continue;
            }
            let nb: Vec<u32> = self.neighbours(v).into_iter().filter(|&w| !self.clusters_at(w).is_empty()).collect();
            let p: Vec<u32> = nb.iter().copied().filter(|&w| w > v && inside[w as usize]).collect();
            let x: Vec<u32> = nb.iter().copied().filter(|&w| w < v || !inside[w as usize]).collect();
            search.run(&mut vec![v], p, x);
        }
        let mut out = search.found;
        for c in &mut out {
            c.sort_unstable();
        }
        out
    }

    fn strips(&self, set: &BoxSet) -> (Rect, Rect, Rect) {
        let sr = set.bounding_rect().expect("non-empty");
        let region = self.source.lattice().region();
        let sv = Rect::new(sr.xmin, sr.xmax, region.ymin, region.ymax);
        let sh = Rect::new(region.xmin, region.xmax, sr.ymin, sr.ymax);
        (sv, sh, sr)
    }

    /// Condition 5: (010) arms from every leftmost to every rightmost box inside SV, and from
    /// every top to every bottom box inside SH.
    fn arms_defect(&self, det: &mut ArmDetector, set: &BoxSet) -> Result<Option<Defect>> {
        let (sv, sh, _) = self.strips(set);
        let word = seq("010");
        for l in set.left() {
            for r in set.right() {
                if !det.connect(&self.source, &set.rect(l), &set.rect(r), &sv, &word, 3)? {
                    return Ok(Some(Defect::NoArms { from: l, to: r }));
                }
            }
        }
        for t in set.top() {
            for b in set.bottom() {
                if !det.connect(&self.source, &set.rect(t), &set.rect(b), &sh, &word, 2)? {
                    return Ok(Some(Defect::NoArms { from: t, to: b }));
                }
            }
        }
        Ok(None)
    }

    /// Checks conditions 1–5 on the sorted box list `members`, literally.
    pub fn defect(&self, det: &mut ArmDetector, members: &[u32], delta: f64) -> Result<Option<Defect>> {
        for (i, &a) in members.iter().enumerate() {
            if members[i + 1..].iter().any(|&b| !self.adjacent(a, b)) {
                return Ok(Some(Defect::NotComplete));
            }
        }
        let set = self.box_set(members);
        if set.cells.iter().any(|&z| !in_unit_square(self.epsilon, z)) {
            return Ok(Some(Defect::LeavesUnitSquare));
        }
        if let Some(w) = self.extension(members) {
            return Ok(Some(Defect::NotMaximal { extra: self.cell(w) }));
        }
        let d = set.diameter();
        if d < delta - GEOM_EPS {
            return Ok(Some(Defect::TooSmall { diameter: d }));
        }
        self.arms_defect(det, &set)
    }

    fn good_subgraph(&self, set: BoxSet) -> GoodSubgraph {
        let (sv, sh, sr) = self.strips(&set);
        GoodSubgraph { left: set.left(), right: set.right(), top: set.top(), bottom: set.bottom(), boxes: set, sv, sh, sr }
    }
}

fn check_scales(eps: f64, delta: f64) -> Result<()> {
    ensure!(eps > 0.0 && 10.0 * eps < delta && delta < 1.0, Parameter, "need 10ε < δ < 1, got ε = {eps}, δ = {delta}");
    Ok(())
}

/// Good subgraphs of `g` at threshold `delta`, ordered by their boxes.
pub fn good_subgraphs(g: &BoxGraph<'_>, delta: f64) -> Result<Vec<GoodSubgraph>> {
    check_scales(g.epsilon, delta)?;
    let mut det = ArmDetector::new();
    let mut out = Vec::new();
    for c in g.wide_maximal_cliques(delta) {
        if g.defect(&mut det, &c, delta)?.is_none() {
            out.push(g.good_subgraph(g.box_set(&c)));
        }
    }
    out.sort_by(|a, b| a.boxes.cells.cmp(&b.boxes.cells));
    Ok(out)
}

/// NC, NA₁, NA₂ and E = NA₁ ∩ NA₂ ∩ NC for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ApproxEvents {
    pub nc: bool,
    pub na1: bool,
    pub na2: bool,
    pub e: bool,
}

impl ApproxEvents {
    pub fn na(&self) -> bool {
        self.na1 && self.na2
    }
}

/// L∞ distance from the box Λ_{ε/2}(εz) to ∂Λ₁.
fn boundary_distance(eps: f64, z: Cell) -> f64 {
    let (cx, cy) = ((z.0 as f64 * eps).abs(), (z.1 as f64 * eps).abs());
    let h = eps / 2.0;
    let reach = cx.max(cy) + h;
    let nearest = (cx - h).max(0.0).max((cy - h).max(0.0));
    if reach <= 1.0 {
        1.0 - reach
    } else if nearest >= 1.0 {
        nearest - 1.0
    } else {
        0.0
    }
}

/// Incremental evaluation of NA₁, NA₂ and NC as boxes with half-plane (010) arms turn up.
struct EventScan {
    eps: f64,
    delta: f64,
    events: ApproxEvents,
    // columns of boxes with arms in H_1, H_3 and rows of boxes with arms in H_2, H_4
    lines: [Vec<i64>; 4],
}

impl EventScan {
    fn new(eps: f64, delta: f64) -> Self {
        EventScan { eps, delta, events: ApproxEvents { nc: true, na1: true, na2: true, e: true }, lines: Default::default() }
    }

    /// Centre distance within 3ε of δ.
    fn near(&self, d: i64) -> bool {
        let d = d.abs() as f64 * self.eps;
        d > self.delta - 3.0 * self.eps + GEOM_EPS && d < self.delta + 3.0 * self.eps - GEOM_EPS
    }

    fn add(&mut self, z: Cell, plane: bool, sides: [bool; 4]) {
        if !sides.iter().any(|&s| s) {
            return;
        }
        let ev = &mut self.events;
        ev.na1 &= !plane;
        ev.na2 &= boundary_distance(self.eps, z) > self.eps + GEOM_EPS;
        for j in 0..4 {
            if !sides[j] {
                continue;
            }
            let line = if j % 2 == 0 { z.0 } else { z.1 };
            if self.lines[(j + 2) % 4].iter().any(|&l| self.near(line - l)) {
                self.events.nc = false;
            }
            self.lines[j].push(line);
        }
        let ev = &mut self.events;
        ev.e = ev.na1 && ev.na2 && ev.nc;
    }
}

/// Scans every box centre and side. With `stop_early` the scan ends at the first violation,
/// and then only `e` is reliable.
fn scan_events<C: ArmConfig + ?Sized>(config: &C, eps: f64, delta: f64, det: &mut ArmDetector, stop_early: bool) -> Result<ApproxEvents> {
    let src = config.arm_source();
    let (a, b) = (eps / 2.0, delta / 2.0 - 3.0 * eps);
    let r = grid_radius(eps);
    let (one, hp) = (seq("1"), seq("010"));
    let mut scan = EventScan::new(eps, delta);
    for i in -r..=r {
        for j in -r..=r {
            let c = Point::new(i as f64 * eps, j as f64 * eps);
            // disjoint arms of one colour start at distinct inner nodes
            let (red, blue) = src.colour_counts(&Rect::square(c, a));
            if red < 1 || blue < 2 {
                continue;
            }
            let kappa = if red >= 2 { one.clone() } else { ColourSequence::empty() };
            let (plane, sides) = det.detect_sides(&src, c, a, b, &kappa, &hp)?;
            scan.add((i, j), red >= 2 && plane, sides);
            if stop_early && !scan.events.e {
                return Ok(scan.events);
            }
        }
    }
    Ok(scan.events)
}

/// Evaluates NC(ε, δ), NA₁(ε, δ), NA₂(ε, δ) and E(ε, δ) by scanning every box centre and side.
pub fn detect_events<C: ArmConfig + ?Sized>(config: &C, epsilon: f64, delta: f64) -> Result<ApproxEvents> {
    check_scales(epsilon, delta)?;
    scan_events(config, epsilon, delta, &mut ArmDetector::new(), false)
}

/// Whether E(ε, δ) holds, stopping at the first violated event.
pub fn e_holds<C: ArmConfig + ?Sized>(config: &C, epsilon: f64, delta: f64) -> Result<bool> {
    check_scales(epsilon, delta)?;
    Ok(scan_events(config, epsilon, delta, &mut ArmDetector::new(), true)?.e)
}

/// One way in which the cluster ↔ good subgraph correspondence breaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mismatch {
    /// A good subgraph equal to K_ε of no cluster, or of several.
    Unmatched { boxes: Vec<Cell>, clusters: Vec<usize> },
    /// A macroscopic cluster whose K_ε is not good.
    NotGood { cluster: usize, bbox: Rect, diameter: f64, boxes: Vec<Cell>, defect: Defect },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Skipped,
    Passed,
    Failed(Vec<Mismatch>),
}

/// Result of checking one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleVerdict {
    pub sample: u64,
    /// Whether E(ε, δ) holds; the invariant checks below run only then.
    pub e: bool,
    pub outcome: Outcome,
    pub good_count: usize,
    pub cluster_count: usize,
    /// More than 32ε⁻² good subgraphs.
    pub bound_violated: bool,
    /// A cluster in Λ₁ with diameter in (δ − 2ε, δ).
    pub gap_violated: bool,
    /// Two clusters of horizontal extent ≥ δ sharing a leftmost box.
    pub leftmost_shared: bool,
}

/// Checks that the good subgraphs of `config` are exactly the K_ε(𝒞) of clusters 𝒞 ⊆ Λ₁ with
/// diameter ≥ δ. Samples outside E(ε, δ) are skipped.
pub fn verify_correspondence<C: Percolation + ArmConfig + ?Sized>(config: &C, epsilon: f64, delta: f64) -> Result<SampleVerdict> {
    verify_with(config, epsilon, delta, true)
}

/// As [`verify_correspondence`]; with `require_e` false the comparison runs on every sample,
/// which shows how the correspondence fares outside E(ε, δ).
pub fn verify_with<C: Percolation + ArmConfig + ?Sized>(config: &C, epsilon: f64, delta: f64, require_e: bool) -> Result<SampleVerdict> {
    let e = e_holds(config, epsilon, delta)?;
    let mut verdict = SampleVerdict {
        sample: 0,
        e,
        outcome: Outcome::Skipped,
        good_count: 0,
        cluster_count: 0,
        bound_violated: false,
        gap_violated: false,
        leftmost_shared: false,
    };
    if require_e && !e {
        return Ok(verdict);
    }
    let g = build_box_graph(config, epsilon)?;
    let cs = g.cluster_set();
    let unit = Rect::square(Point::ORIGIN, 1.0);
    let big: Vec<usize> = clusters_in_domain(cs, &unit, delta)?.cluster_ids();
    verdict.cluster_count = big.len();
    if e {
        verdict.gap_violated = (0..cs.len()).any(|c| {
            let i = cs.info(c);
            unit.contains_rect(&i.bbox) && i.diameter > delta - 2.0 * epsilon + GEOM_EPS && i.diameter < delta - GEOM_EPS
        });
        let mut seen = HashMap::new();
        verdict.leftmost_shared = big
            .iter()
            .filter(|&&c| cs.info(c).bbox.width() >= delta - GEOM_EPS)
            .any(|&c| g.box_set(g.boxes_of(c)).left().into_iter().any(|z| seen.insert(z, c).is_some()));
    }
    let good = good_subgraphs(&g, delta)?;
    verdict.good_count = good.len();
    verdict.bound_violated = e && good.len() as f64 > 32.0 / (epsilon * epsilon);
    let mut by_boxes: HashMap<Vec<Cell>, Vec<usize>> = HashMap::new();
    for &c in &big {
        by_boxes.entry(g.box_set(g.boxes_of(c)).cells).or_default().push(c);
    }
    let mut mismatches = Vec::new();
    for h in &good {
        let owners = by_boxes.get(&h.boxes.cells).cloned().unwrap_or_default();
        if owners.len() != 1 {
            mismatches.push(Mismatch::Unmatched { boxes: h.boxes.cells.clone(), clusters: owners });
        }
    }
    let mut det = ArmDetector::new();
    for &c in &big {
        let set = g.box_set(g.boxes_of(c));
        if good.iter().any(|h| h.boxes.cells == set.cells) {
            continue;
        }
        let defect = g.defect(&mut det, g.boxes_of(c), delta)?.unwrap_or(Defect::Missed);
        let info = cs.info(c);
        mismatches.push(Mismatch::NotGood { cluster: c, bbox: info.bbox, diameter: info.diameter, boxes: set.cells, defect });
    }
    verdict.outcome = if mismatches.is_empty() { Outcome::Passed } else { Outcome::Failed(mismatches) };
    Ok(verdict)
}

/// Aggregate of [`SampleVerdict`]s, the JSON report of a verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub epsilon: f64,
    pub delta: f64,
    pub samples: u64,
    pub skipped: u64,
    pub passed: u64,
    pub failed: u64,
    pub bound_violations: u64,
    pub gap_violations: u64,
    pub leftmost_shared: u64,
    pub max_good_count: usize,
    pub counterexamples: Vec<(u64, Vec<Mismatch>)>,
}

/// Counterexamples kept in a report.
pub const MAX_COUNTEREXAMPLES: usize = 20;

impl CorrespondenceReport {
    pub fn from_verdicts(epsilon: f64, delta: f64, verdicts: &[SampleVerdict]) -> Self {
        let mut r = CorrespondenceReport {
            epsilon,
            delta,
            samples: verdicts.len() as u64,
            skipped: 0,
            passed: 0,
            failed: 0,
            bound_violations: 0,
            gap_violations: 0,
            leftmost_shared: 0,
            max_good_count: 0,
            counterexamples: Vec::new(),
        };
        for v in verdicts {
            match &v.outcome {
                Outcome::Skipped => r.skipped += 1,
                Outcome::Passed => r.passed += 1,
                Outcome::Failed(m) => {
                    r.failed += 1;
                    if r.counterexamples.len() < MAX_COUNTEREXAMPLES {
                        r.counterexamples.push((v.sample, m.clone()));
                    }
                }
            }
            r.bound_violations += v.bound_violated as u64;
            r.gap_violations += v.gap_violated as u64;
            r.leftmost_shared += v.leftmost_shared as u64;
            r.max_good_count = r.max_good_count.max(v.good_count);
        }
        r
    }
}

/// Runs [`verify_correspondence`] over `n` samples of `spec`.
pub fn verify_samples(spec: &MeshSpec, n: u64, schedule: SweepSchedule, epsilon: f64, delta: f64) -> Result<CorrespondenceReport> {
    check_scales(epsilon, delta)?;
    let verdicts = map_samples(spec, n, schedule, || (), |_, s, cfg| {
        verify_correspondence(cfg, epsilon, delta).map(|mut v| {
            v.sample = s;
            v
        })
    })?;
    let verdicts: Vec<SampleVerdict> = verdicts.into_iter().collect::<Result<_>>()?;
    Ok(CorrespondenceReport::from_verdicts(epsilon, delta, &verdicts))
}

/// Failure counts of the approximation events over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EventTally {
    pub samples: u64,
    pub e_failed: u64,
    pub nc_failed: u64,
    pub na1_failed: u64,
    pub na2_failed: u64,
}

impl EventTally {
    pub fn add(&mut self, e: &ApproxEvents) {
        self.samples += 1;
        self.e_failed += !e.e as u64;
        self.nc_failed += !e.nc as u64;
        self.na1_failed += !e.na1 as u64;
        self.na2_failed += !e.na2 as u64;
    }

    /// Empirical P(E(ε, δ)^c).
    pub fn e_failure_rate(&self) -> f64 {
        self.e_failed as f64 / self.samples.max(1) as f64
    }
}

pub fn event_tally(spec: &MeshSpec, n: u64, schedule: SweepSchedule, epsilon: f64, delta: f64) -> Result<EventTally> {
    check_scales(epsilon, delta)?;
    let events = map_samples(spec, n, schedule, ArmDetector::new, |det, _, cfg| scan_events(cfg, epsilon, delta, det, false))?;
    let mut t = EventTally::default();
    for e in events {
        t.add(&e?);
    }
    Ok(t)
}

/// n₀ with the scales it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub n0: Option<u32>,
    /// Coarsest scale with 10·3^-n < δ.
    pub coarsest: u32,
    /// Finest scale with 10·3^-n > η; the scan stops there.
    pub finest: u32,
    /// Whether E(3^-n, δ) holds, for n from `coarsest` to `finest`.
    pub holds: Vec<(u32, bool)>,
}

/// Smallest n such that E(3^-n', δ) holds for every scale n' ≥ n down to the mesh cutoff.
///
/// Scales where E is undefined (10·3^-n ≥ δ) impose nothing, so n₀ is 0 when E holds at every
/// scale that is evaluated.
pub fn refinement_index<C: ArmConfig + ?Sized>(config: &C, delta: f64) -> Result<Refinement> {
    ensure!(delta > 0.0 && delta < 1.0, Parameter, "δ must lie in (0, 1), got {delta}");
    let eta = config.arm_source().lattice().eta();
    let scale = |n: u32| 3f64.powi(-(n as i32));
    let mut coarsest = 0;
    while 10.0 * scale(coarsest) >= delta {
        coarsest += 1;
    }
    let mut finest = coarsest;
    while 10.0 * scale(finest + 1) > eta {
        finest += 1;
    }
    let mut holds = Vec::new();
    if 10.0 * scale(coarsest) <= eta {
        return Ok(Refinement { n0: Some(0), coarsest, finest: coarsest, holds });
    }
    let mut det = ArmDetector::new();
    let mut n0 = Some(0);
    for n in (coarsest..=finest).rev() {
        let eps = scale(n);
        let e = scan_events(config, eps, delta, &mut det, true)?.e;
        holds.push((n, e));
        if !e {
            n0 = (n < finest).then_some(n + 1);
            break;
        }
    }
    holds.reverse();
    Ok(Refinement { n0, coarsest, finest, holds })
}

/// Whether every good subgraph of the finer scale has U inside U of exactly one coarser one.
/// The two scales must differ by a power of 3, so each coarse box is a block of fine boxes.
pub fn nested(fine: &[GoodSubgraph], coarse: &[GoodSubgraph]) -> bool {
    let (Some(f), Some(c)) = (fine.first(), coarse.first()) else { return true };
    let ratio = (c.boxes.epsilon / f.boxes.epsilon).round() as i64;
    let parent = |z: Cell| ((z.0 as f64 / ratio as f64).round() as i64, (z.1 as f64 / ratio as f64).round() as i64);
    fine.iter().all(|h| {
        coarse
            .iter()
            .filter(|k| h.boxes.cells.iter().all(|&z| k.boxes.cells.binary_search(&parent(z)).is_ok()))
            .count()
            == 1
    })
}
