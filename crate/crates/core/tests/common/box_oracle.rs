//! Literal good-subgraph enumeration: every complete subgraph of red boxes, checked condition by condition.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use perclab::boxapprox::Cell;
use perclab::geom::{Point, Rect};
use perclab::lattice::Lattice;

pub fn box_of(eps: f64, z: Cell) -> Rect {
    Rect::square(Point::new(z.0 as f64 * eps, z.1 as f64 * eps), eps / 2.0)
}

pub struct Oracle<'a> {
    lat: &'a Lattice,
    red: &'a [bool],
    eps: f64,
    delta: f64,
    m: i64,
    comps: HashMap<Cell, BTreeSet<usize>>,
    memo: RefCell<HashMap<(Cell, Cell, bool), bool>>,
}

impl<'a> Oracle<'a> {
    pub fn new(lat: &'a Lattice, red: &'a [bool], eps: f64, delta: f64) -> Oracle<'a> {
        let mut comp = vec![usize::MAX; lat.len()];
        for s in 0..lat.len() {
            if !red[s] || comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = s;
            while let Some(v) = stack.pop() {
                lat.for_each_neighbor(v, |w, _| {
                    if red[w] && comp[w] == usize::MAX {
                        comp[w] = s;
                        stack.push(w);
                    }
                });
            }
        }
        let m = (1.0 / eps - 1e-9).ceil() as i64;
        let mut comps = HashMap::new();
        for i in -m..=m {
            for j in -m..=m {
                let r = box_of(eps, (i, j));
                let set: BTreeSet<usize> = (0..lat.len()).filter(|&v| red[v] && r.contains(lat.pos(v))).map(|v| comp[v]).collect();
                comps.insert((i, j), set);
            }
        }
        Oracle { lat, red, eps, delta, m, comps, memo: RefCell::new(HashMap::new()) }
    }

    fn nodes(&self, r: &Rect) -> Vec<usize> {
        (0..self.lat.len()).filter(|&v| r.contains(self.lat.pos(v))).collect()
    }

    fn adjacent(&self, a: Cell, b: Cell) -> bool {
        a != b && ((a.0 - b.0).abs().max((a.1 - b.1).abs()) == 1 || !self.comps[&a].is_disjoint(&self.comps[&b]))
    }

    fn all_cells(&self) -> Vec<Cell> {
        (-self.m..=self.m).flat_map(|i| (-self.m..=self.m).map(move |j| (i, j))).collect()
    }

    /// Where the link p → q crosses the box side, as an angle from `cut`.
    fn key(&self, p: Point, q: Point, c: Point, cut: f64) -> f64 {
        let mut t = 0.0;
        for _ in 0..200 {
            let x = Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y));
            if x.linf(c) > self.eps / 2.0 + 1e-12 {
                break;
            }
            t += 0.005;
        }
        let x = Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y));
        ((x.y - c.y).atan2(x.x - c.x) - cut).rem_euclid(std::f64::consts::TAU)
    }

    /// Red simple paths from box `a` to box `b` in `d` (first node in a, interior outside both),
    /// with the key of their first link; then two disjoint blue paths with keys on either side.
    fn arms_010(&self, a: Cell, b: Cell, d: &Rect, vertical: bool) -> bool {
        if let Some(&r) = self.memo.borrow().get(&(a, b, vertical)) {
            return r;
        }
        let cut = if vertical { std::f64::consts::PI } else { std::f64::consts::FRAC_PI_2 };
        let r = self.arms_010_uncached(a, b, d, cut);
        self.memo.borrow_mut().insert((a, b, vertical), r);
        r
    }

    fn arms_010_uncached(&self, a: Cell, b: Cell, d: &Rect, cut: f64) -> bool {
        let (ra, rb) = (box_of(self.eps, a), box_of(self.eps, b));
        let inside: Vec<usize> = self.nodes(d);
        let ind: HashSet<usize> = inside.iter().copied().collect();
        if inside.iter().any(|&v| ra.contains(self.lat.pos(v)) && rb.contains(self.lat.pos(v))) {
            return true;
        }
        let in_a = |v: usize| ra.contains(self.lat.pos(v));
        let in_b = |v: usize| rb.contains(self.lat.pos(v));
        let c = ra.centre();
        let mut red_keys = Vec::new();
        for &s in inside.iter().filter(|&&v| self.red[v] && in_a(v)) {
            // depth-first over simple red paths
            let mut stack: Vec<(Vec<usize>, f64)> = Vec::new();
            self.lat.for_each_neighbor(s, |w, _| {
                if self.red[w] && ind.contains(&w) && !in_a(w) {
                    stack.push((vec![s, w], self.key(self.lat.pos(s), self.lat.pos(w), c, cut)));
                }
            });
            while let Some((path, k)) = stack.pop() {
                let last = *path.last().unwrap();
                if in_b(last) {
                    red_keys.push(k);
                    continue;
                }
                self.lat.for_each_neighbor(last, |w, _| {
                    if self.red[w] && ind.contains(&w) && !in_a(w) && !path.contains(&w) {
                        let mut p = path.clone();
                        p.push(w);
                        stack.push((p, k));
                    }
                });
            }
        }
        red_keys.sort_by(f64::total_cmp);
        red_keys.dedup();
        red_keys.into_iter().any(|k| self.two_blue(&inside, &in_a, &in_b, c, cut, k))
    }

    /// Two node-disjoint blue paths to box b, one leaving box a before key `k`, one after.
    fn two_blue(&self, inside: &[usize], in_a: &dyn Fn(usize) -> bool, in_b: &dyn Fn(usize) -> bool, c: Point, cut: f64, k: f64) -> bool {
        // node v: in 2i, out 2i + 1; sources "before" and "after"; sink
        let idx: HashMap<usize, usize> = inside.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let n = inside.len();
        let (before, after, src, sink) = (2 * n, 2 * n + 1, 2 * n + 2, 2 * n + 3);
        let mut net = Flow::new(2 * n + 4);
        net.add(src, before);
        net.add(src, after);
        for (i, &v) in inside.iter().enumerate() {
            if self.red[v] {
                continue;
            }
            net.add(2 * i, 2 * i + 1);
            if in_b(v) {
                net.add(2 * i + 1, sink);
                continue;
            }
            self.lat.for_each_neighbor(v, |w, _| {
                let Some(&j) = idx.get(&w) else { return };
                if self.red[w] || in_a(w) {
                    return;
                }
                if in_a(v) {
                    let kk = self.key(self.lat.pos(v), self.lat.pos(w), c, cut);
                    net.add(if kk < k { before } else { after }, 2 * i);
                }
                net.add(2 * i + 1, 2 * j);
            });
        }
        net.max_flow(src, sink, 2) == 2
    }

    pub fn good(&self) -> Vec<Vec<Cell>> {
        let cells = self.all_cells();
        let red_cells: Vec<Cell> = cells.iter().copied().filter(|z| !self.comps[z].is_empty()).collect();
        assert!(red_cells.len() <= 20, "{} red boxes", red_cells.len());
        let mut out = Vec::new();
        // every complete subgraph of red boxes
        let mut stack: Vec<Vec<usize>> = (0..red_cells.len()).map(|i| vec![i]).collect();
        while let Some(cl) = stack.pop() {
            let last = *cl.last().unwrap();
            for j in last + 1..red_cells.len() {
                if cl.iter().all(|&i| self.adjacent(red_cells[i], red_cells[j])) {
                    let mut c = cl.clone();
                    c.push(j);
                    stack.push(c);
                }
            }
            let h: Vec<Cell> = cl.iter().map(|&i| red_cells[i]).collect();
            if self.is_good(&h, &cells) {
                out.push(h);
            }
        }
        out.sort();
        out
    }

    fn is_good(&self, h: &[Cell], cells: &[Cell]) -> bool {
        let u = h.iter().map(|&z| box_of(self.eps, z)).reduce(|a, b| a.union(&b)).unwrap();
        if !Rect::square(Point::ORIGIN, 1.0).contains_rect(&u) || u.diameter() < self.delta - 1e-9 {
            return false;
        }
        if cells.iter().any(|z| !h.contains(z) && h.iter().all(|&w| self.adjacent(*z, w))) {
            return false;
        }
        let region = self.lat.region();
        let sv = Rect::new(u.xmin, u.xmax, region.ymin, region.ymax);
        let sh = Rect::new(region.xmin, region.xmax, u.ymin, u.ymax);
        let xs = (h.iter().map(|z| z.0).min().unwrap(), h.iter().map(|z| z.0).max().unwrap());
        let ys = (h.iter().map(|z| z.1).min().unwrap(), h.iter().map(|z| z.1).max().unwrap());
        let pick = |f: &dyn Fn(&Cell) -> bool| h.iter().copied().filter(|z| f(z)).collect::<Vec<_>>();
        let (l, r) = (pick(&|z| z.0 == xs.0), pick(&|z| z.0 == xs.1));
        let (t, b) = (pick(&|z| z.1 == ys.1), pick(&|z| z.1 == ys.0));
        l.iter().all(|&a| r.iter().all(|&c| self.arms_010(a, c, &sv, true)))
            && t.iter().all(|&a| b.iter().all(|&c| self.arms_010(a, c, &sh, false)))
    }
}

/// Unit-capacity augmenting paths.
struct Flow {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i32>,
}

impl Flow {
    fn new(n: usize) -> Self {
        Flow { adj: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new() }
    }

    fn add(&mut self, u: usize, v: usize) {
        self.adj[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(1);
        self.adj[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0);
    }

    fn max_flow(&mut self, s: usize, t: usize, limit: i32) -> i32 {
        let mut flow = 0;
        while flow < limit {
            let mut prev = vec![usize::MAX; self.adj.len()];
            prev[s] = usize::MAX - 1;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if self.cap[e] > 0 && prev[v] == usize::MAX {
                        prev[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
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
