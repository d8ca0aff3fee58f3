//! Multi-arm events in annuli, half-plane variants, and their Monte Carlo probabilities.

mod window;

pub use window::{ArmConfig, ArmSource, Window};

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::geom::{Point, Rect, GEOM_EPS};
use crate::lattice::{lazy_reach, map_samples, AnyConfig, Lattice, LatticeKind, LazySites, MeshSpec, Percolation, ReachScratch, SweepSchedule};
use crate::stats::wilson_interval;

/// Finite word over {0, 1}; 1 is red (open), 0 is blue (closed, or dual-open for FK).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ColourSequence(Vec<bool>);

impl ColourSequence {
    pub fn new(bits: Vec<bool>) -> Self {
        ColourSequence(bits)
    }

    pub fn empty() -> Self {
        ColourSequence(Vec::new())
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Swaps the colours.
    pub fn complement(&self) -> Self {
        ColourSequence(self.0.iter().map(|b| !b).collect())
    }

    /// Concatenation κ ∨ κ'.
    pub fn join(&self, other: &ColourSequence) -> Self {
        let mut bits = self.0.clone();
        bits.extend_from_slice(&other.0);
        ColourSequence(bits)
    }
}

impl FromStr for ColourSequence {
    type Err = Error;

    /// Accepts `1010`, `(1,0,1,0)`, `()` and the empty string.
    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::new();
        for c in s.chars() {
            match c {
                '1' => bits.push(true),
                '0' => bits.push(false),
                '(' | ')' | ',' | ' ' => {}
                other => return Err(Error::Parameter(format!("bad colour `{other}` in sequence `{s}`"))),
            }
        }
        Ok(ColourSequence(bits))
    }
}

impl fmt::Display for ColourSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for ColourSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ColourSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The event A^i_{κ,κ'}(z; a, b): κ∨κ' arms across the annulus, and κ' arms inside H_i(z, a).
///
/// H_1, H_2, H_3, H_4 are the half-planes `x ≤ z.x + a`, `y ≤ z.y + a`, `x ≥ z.x - a`,
/// `y ≥ z.y - a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmQuery {
    pub center: Point,
    pub a: f64,
    pub b: f64,
    pub kappa: ColourSequence,
    pub kappa_hp: ColourSequence,
    pub side: Option<u8>,
}

impl ArmQuery {
    pub fn plane(center: Point, a: f64, b: f64, kappa: ColourSequence) -> Self {
        ArmQuery { center, a, b, kappa, kappa_hp: ColourSequence::empty(), side: None }
    }

    pub fn half_plane(center: Point, a: f64, b: f64, side: u8, kappa_hp: ColourSequence) -> Self {
        ArmQuery { center, a, b, kappa: ColourSequence::empty(), kappa_hp, side: Some(side) }
    }

    pub fn composite(center: Point, a: f64, b: f64, kappa: ColourSequence, side: u8, kappa_hp: ColourSequence) -> Self {
        ArmQuery { center, a, b, kappa, kappa_hp, side: Some(side) }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.a > 0.0 && self.b > self.a, Parameter, "need 0 < a < b, got a = {}, b = {}", self.a, self.b);
        ensure!(self.side.is_some() == !self.kappa_hp.is_empty(), Parameter, "a half-plane side is required exactly when the half-plane sequence is non-empty");
        if let Some(s) = self.side {
            ensure!((1..=4).contains(&s), Parameter, "half-plane side must be 1..4, got {s}");
        }
        ensure!(!self.kappa.is_empty() || !self.kappa_hp.is_empty(), Parameter, "empty colour sequence");
        Ok(())
    }

    fn is_one_arm(&self) -> bool {
        self.side.is_none() && self.kappa.bits() == [true]
    }
}

/// Monte Carlo estimate of an arm probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmEstimate {
    pub query: ArmQuery,
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_halfwidth: f64,
}

impl ArmEstimate {
    pub fn from_counts(query: ArmQuery, hits: u64, trials: u64) -> Self {
        let p_hat = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        let (lo, hi) = wilson_interval(hits, trials);
        ArmEstimate { query, hits, trials, p_hat, ci_halfwidth: 0.5 * (hi - lo) }
    }

    /// Wilson 95% interval.
    pub fn interval(&self) -> (f64, f64) {
        wilson_interval(self.hits, self.trials)
    }

    pub fn merge(&self, other: &ArmEstimate) -> ArmEstimate {
        ArmEstimate::from_counts(self.query.clone(), self.hits + other.hits, self.trials + other.trials)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Order {
    Cyclic,
    Linear { side: u8 },
}

const S_LAYER: u8 = 1;
const M_LAYER: u8 = 2;
const E_LAYER: u8 = 3;

#[derive(Clone, Copy)]
struct Entry {
    root: u32,
    red: bool,
}

/// Reusable buffers for arm detection.
///
/// The annulus is split into the inner layer (nodes of Λ_a), the middle layer and the outer
/// layer (distance ≥ b). Middle and outer nodes form *parts*: components joined through middle
/// nodes. A part that holds an outer node and is linked to an inner node carries arms. Parts are
/// listed in the order in which their links leave the inner box; an arm word is realised when
/// its letters can be assigned to parts in that order with pairwise disjoint arms, which a flow
/// computation decides per group of parts that share inner nodes.
#[derive(Default)]
pub struct ArmDetector {
    window: Window,
    layer: Vec<u8>,
    parent: Vec<u32>,
    root: Vec<u32>,
    has_e: Vec<bool>,
    contacts: Vec<(f64, Entry, u32)>,
    word: Vec<Entry>,
    group: std::collections::HashMap<u32, u32>,
}

impl ArmDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Whether `query`'s event occurs in `config`.
    pub fn detect(&mut self, config: &impl ArmConfig, query: &ArmQuery) -> Result<bool> {
        query.validate()?;
        let src = config.arm_source();
        let lat = src.lattice();
        ensure!(
            lat.region().contains_rect(&Rect::square(query.center, query.b)),
            Domain,
            "annulus Λ_{}({}, {}) leaves the region Λ_{}",
            query.b,
            query.center.x,
            query.center.y,
            lat.k()
        );
        let rect = Rect::square(query.center, query.b + 1.5 * lat.eta());
        self.window.build(&src, &rect);
        Ok(self.evaluate(query))
    }

    fn evaluate(&mut self, q: &ArmQuery) -> bool {
        if !q.kappa.is_empty() {
            let word = q.kappa.join(&q.kappa_hp);
            if !self.event(q.center, q.a, q.b, word.bits(), Order::Cyclic) {
                return false;
            }
        }
        match q.side {
            Some(side) => self.event(q.center, q.a, q.b, q.kappa_hp.bits(), Order::Linear { side }),
            None => true,
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn event(&mut self, z: Point, a: f64, b: f64, seq: &[bool], order: Order) -> bool {
        let w = &self.window;
        let n = w.len();
        self.layer.clear();
        for v in 0..n {
            let p = w.pos[v];
            if let Order::Linear { side } = order {
                if !in_half_plane(p, z, a, side) {
                    self.layer.push(0);
                    continue;
                }
            }
            let d = p.linf(z);
            self.layer.push(if d <= a + GEOM_EPS {
                S_LAYER
            } else if d >= b - GEOM_EPS {
                E_LAYER
            } else {
                M_LAYER
            });
        }
        self.solve(z, a, seq, order)
    }

    /// Whether the box `from` is joined to the box `to` inside `domain` by disjoint arms coloured
    /// `seq`, in the order in which they leave `from` counterclockwise from the direction of `side`
    /// (as for the half-plane H_side).
    pub fn connect(&mut self, config: &impl ArmConfig, from: &Rect, to: &Rect, domain: &Rect, seq: &ColourSequence, side: u8) -> Result<bool> {
        ensure!((1..=4).contains(&side), Parameter, "side must be 1..4, got {side}");
        let src = config.arm_source();
        self.window.build(&src, domain);
        let z = from.centre();
        let a = 0.5 * (from.xmax - from.xmin);
        self.layer.clear();
        for v in 0..self.window.len() {
            let p = self.window.pos[v];
            let (f, t) = (from.contains(p), to.contains(p));
            if f && t {
                // a shared node joins the boxes trivially
                return Ok(true);
            }
            self.layer.push(if f {
                S_LAYER
            } else if t {
                E_LAYER
            } else {
                M_LAYER
            });
        }
        Ok(self.solve(z, a, seq.bits(), Order::Linear { side }))
    }

    /// From one window: the plane event for `kappa ∨ kappa_hp` (true when `kappa` is empty) and
    /// the half-plane events `kappa_hp` in H_1..H_4.
    pub fn detect_sides(&mut self, config: &impl ArmConfig, center: Point, a: f64, b: f64, kappa: &ColourSequence, kappa_hp: &ColourSequence) -> Result<(bool, [bool; 4])> {
        ensure!(a > 0.0 && b > a, Parameter, "need 0 < a < b, got a = {a}, b = {b}");
        let src = config.arm_source();
        let lat = src.lattice();
        ensure!(lat.region().contains_rect(&Rect::square(center, b)), Domain, "annulus Λ_{b}({}, {}) leaves the region Λ_{}", center.x, center.y, lat.k());
        let rect = Rect::square(center, b + 1.5 * lat.eta());
        self.window.build(&src, &rect);
        let plane = kappa.is_empty() || self.event(center, a, b, kappa.join(kappa_hp).bits(), Order::Cyclic);
        let mut sides = [false; 4];
        for (i, s) in sides.iter_mut().enumerate() {
            *s = self.event(center, a, b, kappa_hp.bits(), Order::Linear { side: i as u8 + 1 });
        }
        Ok((plane, sides))
    }

    fn solve(&mut self, z: Point, a: f64, seq: &[bool], order: Order) -> bool {
        let n = self.window.len();
        self.parent.clear();
        self.parent.extend(0..n as u32);
        for v in 0..n {
            if self.layer[v] != M_LAYER {
                continue;
            }
            for i in self.window.start[v]..self.window.start[v + 1] {
                let u = self.window.adj[i as usize];
                let lu = self.layer[u as usize];
                if lu == M_LAYER || lu == E_LAYER {
                    let (ru, rv) = (self.find(u), self.find(v as u32));
                    if ru != rv {
                        self.parent[ru as usize] = rv;
                    }
                }
            }
        }
        self.root.clear();
        for v in 0..n as u32 {
            let r = self.find(v);
            self.root.push(r);
        }
        self.has_e.clear();
        self.has_e.resize(n, false);
        for v in 0..n {
            if self.layer[v] == E_LAYER {
                self.has_e[self.root[v] as usize] = true;
            }
        }
        let cut = match order {
            Order::Cyclic => 0.0,
            Order::Linear { side } => cut_angle(side),
        };
        self.contacts.clear();
        self.group.clear();
        for s in 0..n {
            if self.layer[s] != S_LAYER {
                continue;
            }
            let mut first: Option<u32> = None;
            for i in self.window.start[s]..self.window.start[s + 1] {
                let u = self.window.adj[i as usize];
                let lu = self.layer[u as usize];
                if lu != M_LAYER && lu != E_LAYER {
                    continue;
                }
                let r = self.root[u as usize];
                if !self.has_e[r as usize] {
                    continue;
                }
                match first {
                    None => first = Some(r),
                    Some(f) if f != r => group_union(&mut self.group, f, r),
                    _ => {}
                }
                let ang = exit_angle(self.window.pos[s], self.window.pos[u as usize], z, a);
                let key = (ang - cut).rem_euclid(TAU);
                self.contacts.push((key, Entry { root: r, red: self.window.red[s] }, s as u32));
            }
        }
        self.contacts.sort_by(|x, y| x.0.total_cmp(&y.0));
        self.word.clear();
        for &(_, e, _) in &self.contacts {
            if self.word.last().is_none_or(|l| l.root != e.root) {
                self.word.push(e);
            }
        }
        if order == Order::Cyclic && self.word.len() > 1 && self.word[0].root == self.word[self.word.len() - 1].root {
            self.word.pop();
        }
        if seq.is_empty() {
            return true;
        }
        if self.word.is_empty() {
            return false;
        }
        if self.group.is_empty() {
            self.greedy(seq, order)
        } else {
            self.search(seq, order)
        }
    }

    /// Embedding when no inner node feeds two parts: parts are then independent, and filling
    /// each colour run from the earliest parts is optimal.
    fn greedy(&self, seq: &[bool], order: Order) -> bool {
        let m = self.word.len();
        let (runs, starts) = match order {
            Order::Linear { .. } => (runs_of(seq), 1),
            Order::Cyclic if seq.iter().all(|&c| c == seq[0]) => (vec![(seq[0], seq.len())], 1),
            Order::Cyclic => {
                let shift = (0..seq.len()).find(|&i| seq[i] != seq[(i + seq.len() - 1) % seq.len()]).expect("two colours");
                let rotated: Vec<bool> = (0..seq.len()).map(|i| seq[(i + shift) % seq.len()]).collect();
                (runs_of(&rotated), m)
            }
        };
        'start: for s in 0..starts {
            let mut pos = 0;
            for &(colour, len) in &runs {
                let mut have = 0;
                while have < len {
                    if pos >= m {
                        continue 'start;
                    }
                    let e = self.word[(s + pos) % m];
                    pos += 1;
                    if e.red == colour {
                        have += if len - have == 1 { 1 } else { self.flow(&[(e.root, len - have)]) };
                    }
                }
            }
            return true;
        }
        false
    }

    /// Backtracking embedding, used when some inner node feeds several parts.
    fn search(&self, seq: &[bool], order: Order) -> bool {
        let m = self.word.len();
        let l = seq.len();
        let mut assign: Vec<usize> = Vec::with_capacity(l);
        match order {
            Order::Linear { .. } => self.extend(seq, 0, 0, 0, &mut assign),
            Order::Cyclic => {
                let mut seen: Vec<Vec<bool>> = Vec::new();
                for r in 0..l {
                    let rot: Vec<bool> = (0..l).map(|i| seq[(i + r) % l]).collect();
                    if seen.contains(&rot) {
                        continue;
                    }
                    for s in 0..m {
                        if self.word[s].red != rot[0] {
                            continue;
                        }
                        assign.clear();
                        assign.push(s);
                        if self.feasible(&assign) && self.extend(&rot, s, 1, 0, &mut assign) {
                            return true;
                        }
                    }
                    seen.push(rot);
                }
                false
            }
        }
    }

    fn extend(&self, seq: &[bool], s: usize, t: usize, pmin: usize, assign: &mut Vec<usize>) -> bool {
        if t == seq.len() {
            return true;
        }
        let m = self.word.len();
        for p in pmin..m {
            let idx = (s + p) % m;
            if self.word[idx].red != seq[t] {
                continue;
            }
            assign.push(idx);
            if self.feasible(assign) && self.extend(seq, s, t + 1, p, assign) {
                return true;
            }
            assign.pop();
        }
        false
    }

    /// Whether the arms assigned so far can be made disjoint within the group of the last part.
    fn feasible(&self, assign: &[usize]) -> bool {
        let last = self.word[*assign.last().expect("non-empty")].root;
        let g = group_find(&self.group, last);
        let mut counts: Vec<(u32, usize)> = Vec::new();
        for &i in assign {
            let r = self.word[i].root;
            if group_find(&self.group, r) != g {
                continue;
            }
            match counts.iter_mut().find(|(x, _)| *x == r) {
                Some((_, c)) => *c += 1,
                None => counts.push((r, 1)),
            }
        }
        let need: usize = counts.iter().map(|c| c.1).sum();
        need == 1 || self.flow(&counts) >= need
    }

    /// Maximum number of node-disjoint arms with at most `count` arms ending in each given part.
    fn flow(&self, parts: &[(u32, usize)]) -> usize {
        let n = self.window.len();
        let part_index = |v: usize| {
            let l = self.layer[v];
            if l == M_LAYER || l == E_LAYER {
                parts.iter().position(|&(r, _)| r == self.root[v])
            } else {
                None
            }
        };
        // node v: in = 2v, out = 2v + 1; source 2n, sink 2n + 1, part sinks from 2n + 2
        let (src, sink) = (2 * n, 2 * n + 1);
        let mut g = FlowGraph::new(2 * n + 2 + parts.len());
        for v in 0..n {
            match self.layer[v] {
                S_LAYER => {
                    let targets: Vec<u32> = self.window.links(v).iter().copied().filter(|&u| part_index(u as usize).is_some()).collect();
                    if targets.is_empty() {
                        continue;
                    }
                    g.add(src, 2 * v, 1);
                    g.add(2 * v, 2 * v + 1, 1);
                    for u in targets {
                        g.add(2 * v + 1, 2 * u as usize, 1);
                    }
                }
                M_LAYER | E_LAYER => {
                    let Some(pi) = part_index(v) else { continue };
                    g.add(2 * v, 2 * v + 1, 1);
                    if self.layer[v] == E_LAYER {
                        g.add(2 * v + 1, 2 * n + 2 + pi, 1);
                        continue;
                    }
                    for &u in self.window.links(v) {
                        let lu = self.layer[u as usize];
                        if lu == M_LAYER || lu == E_LAYER {
                            g.add(2 * v + 1, 2 * u as usize, 1);
                        }
                    }
                }
                _ => {}
            }
        }
        let mut limit = 0;
        for (i, &(_, c)) in parts.iter().enumerate() {
            g.add(2 * n + 2 + i, sink, c as u32);
            limit += c;
        }
        g.max_flow(src, sink, limit)
    }
}

fn group_find(g: &std::collections::HashMap<u32, u32>, mut x: u32) -> u32 {
    while let Some(&p) = g.get(&x) {
        if p == x {
            break;
        }
        x = p;
    }
    x
}

fn group_union(g: &mut std::collections::HashMap<u32, u32>, a: u32, b: u32) {
    let (ra, rb) = (group_find(g, a), group_find(g, b));
    g.entry(ra).or_insert(ra);
    g.entry(rb).or_insert(rb);
    if ra != rb {
        g.insert(ra, rb);
    }
}

fn runs_of(seq: &[bool]) -> Vec<(bool, usize)> {
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &c in seq {
        match runs.last_mut() {
            Some((col, len)) if *col == c => *len += 1,
            _ => runs.push((c, 1)),
        }
    }
    runs
}

fn in_half_plane(p: Point, z: Point, a: f64, side: u8) -> bool {
    match side {
        1 => p.x <= z.x + a + GEOM_EPS,
        2 => p.y <= z.y + a + GEOM_EPS,
        3 => p.x >= z.x - a - GEOM_EPS,
        _ => p.y >= z.y - a - GEOM_EPS,
    }
}

/// Direction of the half-plane's opening, where the linear order of contacts starts.
fn cut_angle(side: u8) -> f64 {
    match side {
        1 => 0.0,
        2 => FRAC_PI_2,
        3 => PI,
        _ => 3.0 * FRAC_PI_2,
    }
}

/// Angle around `z` at which the link `p → q` leaves the box Λ_a(z), taken just outside it.
pub(crate) fn exit_angle(p: Point, q: Point, z: Point, a: f64) -> f64 {
    let bx = Rect::square(z, a);
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let mut t: f64 = 1.0;
    if dx > 0.0 {
        t = t.min((bx.xmax - p.x) / dx);
    } else if dx < 0.0 {
        t = t.min((bx.xmin - p.x) / dx);
    }
    if dy > 0.0 {
        t = t.min((bx.ymax - p.y) / dy);
    } else if dy < 0.0 {
        t = t.min((bx.ymin - p.y) / dy);
    }
    let t = t.max(0.0) + 1e-6;
    Point::new(p.x + t * dx, p.y + t * dy).angle_from(z)
}

struct FlowGraph {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u32>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        FlowGraph { head: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new() }
    }

    fn add(&mut self, u: usize, v: usize, c: u32) {
        self.head[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(c);
        self.head[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0);
    }

    fn max_flow(&mut self, s: usize, t: usize, limit: usize) -> usize {
        let mut flow = 0;
        let n = self.head.len();
        let mut prev = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        while flow < limit {
            seen.iter_mut().for_each(|x| *x = false);
            queue.clear();
            queue.push_back(s);
            seen[s] = true;
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.head[u] {
                    let v = self.to[e];
                    if self.cap[e] > 0 && !seen[v] {
                        seen[v] = true;
                        prev[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if !seen[t] {
                break;
            }
            let mut v = t;
            while v != s {
                let e = prev[v];
                self.cap[e] -= 1;
                self.cap[e ^ 1] += 1;
                v = self.to[e ^ 1];
            }
            flow += 1;
        }
        flow
    }
}

/// Whether `query`'s event occurs in `config`.
pub fn detect_arms(config: &impl ArmConfig, query: &ArmQuery) -> Result<bool> {
    ArmDetector::new().detect(config, query)
}

/// Largest L∞ distance from `z` reached by open clusters meeting Λ_a(z), capped at `cap`.
/// `None` when no occupied vertex lies in the box.
pub fn cluster_reach(config: &dyn Percolation, z: Point, a: f64, cap: f64) -> Option<f64> {
    let lat = config.lattice();
    let mut seen = vec![false; lat.len()];
    let mut queue: Vec<usize> = Vec::new();
    lat.for_each_in_rect(&Rect::square(z, a), |v| {
        if config.occupied(v) {
            seen[v] = true;
            queue.push(v);
        }
    });
    if queue.is_empty() {
        return None;
    }
    let mut reach: f64 = 0.0;
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        reach = reach.max(lat.pos(v).linf(z));
        if reach >= cap - GEOM_EPS {
            return Some(reach);
        }
        lat.for_each_neighbor(v, |w, e| {
            if !seen[w] && config.edge_open(e) {
                seen[w] = true;
                queue.push(w);
            }
        });
    }
    Some(reach)
}

/// Monte Carlo estimate of `query`'s probability under `spec`'s critical model.
pub fn arm_probability(spec: &MeshSpec, query: &ArmQuery, n_samples: u64) -> Result<ArmEstimate> {
    arm_probability_with(spec, query, n_samples, SweepSchedule::default())
}

pub fn arm_probability_with(spec: &MeshSpec, query: &ArmQuery, n_samples: u64, schedule: SweepSchedule) -> Result<ArmEstimate> {
    let mut all = arm_probabilities(spec, std::slice::from_ref(query), n_samples, schedule)?;
    Ok(all.remove(0))
}

/// Estimates several events from the same samples.
pub fn arm_probabilities(spec: &MeshSpec, queries: &[ArmQuery], n_samples: u64, schedule: SweepSchedule) -> Result<Vec<ArmEstimate>> {
    ensure!(n_samples >= 1, Parameter, "n_samples must be at least 1");
    spec.validate()?;
    for q in queries {
        q.validate()?;
        ensure!(spec.region().contains_rect(&Rect::square(q.center, q.b)), Domain, "annulus of radius {} leaves the region Λ_{}", q.b, spec.k);
    }
    let hits: Vec<u64> = match spec.kind {
        LatticeKind::TriangularSite => {
            let region = spec.lattice()?;
            let per_sample: Vec<Vec<bool>> = (0..n_samples)
                .into_par_iter()
                .map_init(
                    || (ArmDetector::new(), ReachScratch::default()),
                    |(det, scratch), s| {
                        let sites = LazySites::new(&spec.with_sample(s));
                        queries.iter().map(|q| lazy_event(det, scratch, &sites, &region, q)).collect()
                    },
                )
                .collect();
            tally(&per_sample, queries.len())
        }
        LatticeKind::SquareFk => {
            let per_sample = map_samples(spec, n_samples, schedule, ArmDetector::new, |det, _, cfg| {
                queries.iter().map(|q| config_event(det, cfg, q)).collect::<Vec<bool>>()
            })?;
            tally(&per_sample, queries.len())
        }
    };
    Ok(queries.iter().zip(hits).map(|(q, h)| ArmEstimate::from_counts(q.clone(), h, n_samples)).collect())
}

fn tally(per_sample: &[Vec<bool>], n: usize) -> Vec<u64> {
    let mut hits = vec![0u64; n];
    for row in per_sample {
        for (h, &x) in hits.iter_mut().zip(row) {
            *h += x as u64;
        }
    }
    hits
}

fn lazy_event(det: &mut ArmDetector, scratch: &mut ReachScratch, sites: &LazySites, region: &Lattice, q: &ArmQuery) -> bool {
    if q.is_one_arm() {
        return lazy_reach(sites, region, q.center, q.a, q.b, scratch).is_some_and(|r| r >= q.b - GEOM_EPS);
    }
    let src = ArmSource::Lazy { lattice: region, sites: *sites };
    det.detect(&src, q).expect("query validated")
}

fn config_event(det: &mut ArmDetector, cfg: &AnyConfig, q: &ArmQuery) -> bool {
    if q.is_one_arm() {
        return cluster_reach(cfg.as_percolation(), q.center, q.a, q.b).is_some_and(|r| r >= q.b - GEOM_EPS);
    }
    det.detect(cfg, q).expect("query validated")
}

/// π̂₁(a,b) π̂₁(b,c) / π̂₁(a,c) at the origin, with the three estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiMultiplicativity {
    pub ratio: f64,
    pub ab: ArmEstimate,
    pub bc: ArmEstimate,
    pub ac: ArmEstimate,
}

pub fn quasi_mult_ratio(spec: &MeshSpec, a: f64, b: f64, c: f64, n_samples: u64) -> Result<QuasiMultiplicativity> {
    ensure!(spec.eta < a + GEOM_EPS && a <= b && b < c, Parameter, "need η ≤ a ≤ b < c, got ({a}, {b}, {c}) at η = {}", spec.eta);
    let one = |lo: f64, hi: f64| ArmQuery::plane(Point::ORIGIN, lo, hi, ColourSequence::new(vec![true]));
    let mut qs = vec![one(a, c), one(b, c)];
    let collapsed = b - a < GEOM_EPS;
    if !collapsed {
        qs.push(one(a, b));
    }
    let est = arm_probabilities(spec, &qs, n_samples, SweepSchedule::default())?;
    let ab = if collapsed { ArmEstimate::from_counts(one(a, a + GEOM_EPS), n_samples, n_samples) } else { est[2].clone() };
    let (ac, bc) = (est[0].clone(), est[1].clone());
    let ratio = ab.p_hat * bc.p_hat / ac.p_hat;
    Ok(QuasiMultiplicativity { ratio, ab, bc, ac })
}

/// |V_a|: vertices of Λ_{a/2} joined to ∂Λ_a by an open path.
pub fn count_connected_vertices(config: &impl ArmConfig, a: f64) -> Result<u64> {
    let src = config.arm_source();
    let lat = src.lattice();
    ensure!(a > 0.0, Parameter, "a must be positive");
    ensure!(lat.region().contains_rect(&Rect::square(Point::ORIGIN, a)), Domain, "Λ_{a} leaves the region Λ_{}", lat.k());
    let mut w = Window::default();
    w.build(&src, &Rect::square(Point::ORIGIN, a + 1.5 * lat.eta()));
    let n = w.len();
    // Components of red nodes strictly inside Λ_a, marked when they touch a red node at distance ≥ a.
    let inner: Vec<bool> = (0..n).map(|v| w.pos[v].linf(Point::ORIGIN) < a - GEOM_EPS).collect();
    let mut comp = vec![u32::MAX; n];
    let mut hits_boundary: Vec<bool> = Vec::new();
    let mut stack = Vec::new();
    for v in 0..n {
        if !w.red[v] || !inner[v] || comp[v] != u32::MAX {
            continue;
        }
        let c = hits_boundary.len() as u32;
        let mut touches = false;
        comp[v] = c;
        stack.push(v);
        while let Some(x) = stack.pop() {
            for &u in w.links(x) {
                let u = u as usize;
                if !inner[u] {
                    touches = true;
                } else if comp[u] == u32::MAX {
                    comp[u] = c;
                    stack.push(u);
                }
            }
        }
        hits_boundary.push(touches);
    }
    let half = Rect::square(Point::ORIGIN, 0.5 * a);
    Ok((0..n).filter(|&v| w.red[v] && inner[v] && hits_boundary[comp[v] as usize] && half.contains(w.pos[v])).count() as u64)
}

/// |W_a|: vertices v of Λ₁ joined by an open path to ∂Λ_a(v).
pub fn count_local_arm_vertices(config: &dyn Percolation, a: f64) -> Result<u64> {
    let lat = config.lattice();
    ensure!(a > 0.0 && a < 0.5, Parameter, "need 0 < a < 1/2, got {a}");
    ensure!(lat.region().contains_rect(&Rect::square(Point::ORIGIN, 1.0 + a)), Domain, "Λ_{} leaves the region Λ_{}", 1.0 + a, lat.k());
    let cs = crate::clusters::find_clusters(config);
    let unit = Rect::square(Point::ORIGIN, 1.0);
    let mut count = 0u64;
    lat.for_each_in_rect(&unit, |v| {
        if let Some(c) = cs.cluster_of(v) {
            if cs.info(c).bbox.reach_from(lat.pos(v)) >= a - GEOM_EPS {
                count += 1;
            }
        }
    });
    Ok(count)
}

/// Writes estimates as CSV rows: kind, eta, z, a, b, kappa, kappa_hp, side, hits, trials, p_hat, ci.
pub fn write_estimates_csv(w: impl Write, spec: &MeshSpec, estimates: &[ArmEstimate]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kind", "eta", "z", "a", "b", "kappa", "kappa_hp", "side", "hits", "trials", "p_hat", "ci"])?;
    for e in estimates {
        let q = &e.query;
        out.write_record([
            spec.kind.as_str().to_string(),
            spec.eta.to_string(),
            format!("{} {}", q.center.x, q.center.y),
            q.a.to_string(),
            q.b.to_string(),
            q.kappa.to_string(),
            q.kappa_hp.to_string(),
            q.side.map(|s| s.to_string()).unwrap_or_default(),
            e.hits.to_string(),
            e.trials.to_string(),
            e.p_hat.to_string(),
            e.ci_halfwidth.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
