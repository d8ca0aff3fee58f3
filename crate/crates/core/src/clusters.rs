//! Cluster labelling, domain restrictions, largest clusters and set distances.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::geom::{Point, Rect};
use crate::lattice::{Lattice, Percolation, NONE};
use crate::unionfind::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub size: usize,
    pub bbox: Rect,
    /// L∞ diameter, max(bbox width, bbox height).
    pub diameter: f64,
    /// Lexicographically smallest vertex by (x, y).
    pub min_vertex: usize,
}

/// Open clusters of one configuration.
///
/// Clusters are numbered in order of their lowest vertex index. Every occupied vertex has a
/// label; blue vertices of a site configuration carry none.
#[derive(Debug, Clone)]
pub struct ClusterSet {
    lattice: Arc<Lattice>,
    labels: Vec<u32>,
    infos: Vec<ClusterInfo>,
    offsets: Vec<usize>,
    members: Vec<u32>,
    open: Vec<bool>,
}

fn lex_less(a: Point, b: Point) -> bool {
    a.x < b.x - 1e-12 || ((a.x - b.x).abs() <= 1e-12 && a.y < b.y - 1e-12)
}

pub fn find_clusters<P: Percolation + ?Sized>(config: &P) -> ClusterSet {
    let lattice = config.lattice().clone();
    let n = lattice.len();
    let open: Vec<bool> = (0..lattice.edge_count()).map(|e| config.edge_open(e)).collect();
    let mut uf = UnionFind::new(n);
    for (e, &o) in open.iter().enumerate() {
        if o {
            let [u, v] = lattice.edge(e);
            uf.union(u, v);
        }
    }
    let mut root_label = vec![NONE; n];
    let mut labels = vec![NONE; n];
    let mut infos: Vec<ClusterInfo> = Vec::new();
    for v in 0..n {
        if !config.occupied(v) {
            continue;
        }
        let r = uf.find(v);
        let p = lattice.pos(v);
        if root_label[r] == NONE {
            root_label[r] = infos.len() as u32;
            infos.push(ClusterInfo { size: 0, bbox: Rect::point(p), diameter: 0.0, min_vertex: v });
        }
        let c = root_label[r] as usize;
        labels[v] = c as u32;
        let info = &mut infos[c];
        info.size += 1;
        info.bbox.expand(p);
        if lex_less(p, lattice.pos(info.min_vertex)) {
            info.min_vertex = v;
        }
    }
    for info in &mut infos {
        info.diameter = info.bbox.diameter();
    }
    let mut offsets = vec![0usize; infos.len() + 1];
    for (c, info) in infos.iter().enumerate() {
        offsets[c + 1] = offsets[c] + info.size;
    }
    let mut fill = offsets.clone();
    let mut members = vec![0u32; offsets[infos.len()]];
    for (v, &l) in labels.iter().enumerate() {
        if l != NONE {
            members[fill[l as usize]] = v as u32;
            fill[l as usize] += 1;
        }
    }
    ClusterSet { lattice, labels, infos, offsets, members, open }
}

impl ClusterSet {
    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn len(&self) -> usize {
        self.infos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infos.is_empty()
    }

    #[inline]
    pub fn cluster_of(&self, v: usize) -> Option<usize> {
        let l = self.labels[v];
        (l != NONE).then_some(l as usize)
    }

    pub fn info(&self, c: usize) -> &ClusterInfo {
        &self.infos[c]
    }

    pub fn infos(&self) -> &[ClusterInfo] {
        &self.infos
    }

    /// Vertex indices of cluster `c`, increasing.
    pub fn members(&self, c: usize) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.members[self.offsets[c]..self.offsets[c + 1]].iter().map(|&v| v as usize)
    }

    pub fn points(&self, c: usize) -> Vec<Point> {
        self.members(c).map(|v| self.lattice.pos(v)).collect()
    }

    #[inline]
    pub fn edge_open(&self, e: usize) -> bool {
        self.open[e]
    }

    /// Sum of all cluster sizes, the number of occupied vertices.
    pub fn labelled_count(&self) -> usize {
        self.members.len()
    }

    fn order(&self, a: &Piece, b: &Piece) -> Ordering {
        b.size.cmp(&a.size).then_with(|| {
            let (pa, pb) = (self.lattice.pos(a.min_vertex), self.lattice.pos(b.min_vertex));
            pa.x.total_cmp(&pb.x).then(pa.y.total_cmp(&pb.y))
        })
    }

    fn whole(&self, c: usize) -> Piece {
        let info = &self.infos[c];
        Piece {
            cluster: c,
            vertices: self.members(c).map(|v| v as u32).collect(),
            size: info.size,
            bbox: info.bbox,
            diameter: info.diameter,
            min_vertex: info.min_vertex,
        }
    }

    /// Connected components of cluster `c` ∩ `domain` within the domain's induced subgraph.
    fn clip(&self, c: usize, domain: &Rect) -> Vec<Piece> {
        let inside: Vec<usize> = self.members(c).filter(|&v| domain.contains(self.lattice.pos(v))).collect();
        let mut seen: std::collections::HashMap<usize, bool> = inside.iter().map(|&v| (v, false)).collect();
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for &s in &inside {
            if seen[&s] {
                continue;
            }
            seen.insert(s, true);
            stack.push(s);
            let mut piece = Piece { cluster: c, vertices: Vec::new(), size: 0, bbox: Rect::point(self.lattice.pos(s)), diameter: 0.0, min_vertex: s };
            while let Some(v) = stack.pop() {
                let p = self.lattice.pos(v);
                piece.vertices.push(v as u32);
                piece.bbox.expand(p);
                if lex_less(p, self.lattice.pos(piece.min_vertex)) {
                    piece.min_vertex = v;
                }
                self.lattice.for_each_neighbor(v, |w, e| {
                    if self.open[e] {
                        if let Some(flag) = seen.get_mut(&w) {
                            if !*flag {
                                *flag = true;
                                stack.push(w);
                            }
                        }
                    }
                });
            }
            piece.vertices.sort_unstable();
            piece.size = piece.vertices.len();
            piece.diameter = piece.bbox.diameter();
            out.push(piece);
        }
        out
    }
}

/// A cluster, or a connected part of one clipped to a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub cluster: usize,
    pub vertices: Vec<u32>,
    pub size: usize,
    pub bbox: Rect,
    pub diameter: f64,
    pub min_vertex: usize,
}

impl Piece {
    pub fn points(&self, lattice: &Lattice) -> Vec<Point> {
        self.vertices.iter().map(|&v| lattice.pos(v as usize)).collect()
    }
}

/// Clusters (or pieces) inside a domain with diameter at least `delta`, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCollection {
    pub members: Vec<Piece>,
    pub domain: Rect,
    pub delta: f64,
}

impl ClusterCollection {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn cluster_ids(&self) -> Vec<usize> {
        self.members.iter().map(|p| p.cluster).collect()
    }
}

pub type PieceCollection = ClusterCollection;

const DIAM_EPS: f64 = 1e-9;

/// Clusters wholly inside `domain` with L∞ diameter ≥ `delta`.
pub fn clusters_in_domain(cs: &ClusterSet, domain: &Rect, delta: f64) -> Result<ClusterCollection> {
    ensure!(delta >= 0.0, Parameter, "delta must be non-negative, got {delta}");
    let mut members: Vec<Piece> = (0..cs.len())
        .filter(|&c| {
            let info = cs.info(c);
            info.diameter >= delta - DIAM_EPS && domain.contains_rect(&info.bbox)
        })
        .map(|c| cs.whole(c))
        .collect();
    members.sort_by(|a, b| cs.order(a, b));
    Ok(ClusterCollection { members, domain: *domain, delta })
}

/// Connected components of (cluster ∩ domain) with diameter ≥ `delta`, over all clusters.
pub fn pieces_in_domain(cs: &ClusterSet, domain: &Rect, delta: f64) -> Result<PieceCollection> {
    ensure!(delta >= 0.0, Parameter, "delta must be non-negative, got {delta}");
    let mut members = Vec::new();
    for c in 0..cs.len() {
        let info = cs.info(c);
        if !domain.intersects(&info.bbox) {
            continue;
        }
        if domain.contains_rect(&info.bbox) {
            if info.diameter >= delta - DIAM_EPS {
                members.push(cs.whole(c));
            }
        } else {
            members.extend(cs.clip(c, domain).into_iter().filter(|p| p.diameter >= delta - DIAM_EPS));
        }
    }
    members.sort_by(|a, b| cs.order(a, b));
    Ok(ClusterCollection { members, domain: *domain, delta })
}

/// The `count` largest pieces in `domain`, by vertex count then lexicographic minimum vertex.
pub fn largest_clusters(cs: &ClusterSet, domain: &Rect, count: usize) -> Vec<Piece> {
    let mut all = pieces_in_domain(cs, domain, 0.0).expect("delta = 0 is valid").members;
    all.truncate(count);
    all
}

/// Uniform bucket grid for L∞ nearest-neighbour queries.
struct Buckets<'a> {
    pts: &'a [Point],
    origin: Point,
    cell: f64,
    nx: i64,
    ny: i64,
    start: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> Buckets<'a> {
    fn new(pts: &'a [Point]) -> Self {
        let mut bb = Rect::point(pts[0]);
        for &p in pts {
            bb.expand(p);
        }
        let span = bb.width().max(bb.height()).max(1e-12);
        let per_side = ((pts.len() as f64).sqrt().ceil() as i64).clamp(1, 2048);
        let cell = span / per_side as f64 * (1.0 + 1e-9);
        let nx = ((bb.width() / cell).floor() as i64 + 1).max(1);
        let ny = ((bb.height() / cell).floor() as i64 + 1).max(1);
        let origin = Point::new(bb.xmin, bb.ymin);
        let cell_of = |p: Point| -> usize {
            let cx = (((p.x - origin.x) / cell).floor() as i64).clamp(0, nx - 1);
            let cy = (((p.y - origin.y) / cell).floor() as i64).clamp(0, ny - 1);
            (cy * nx + cx) as usize
        };
        let mut start = vec![0usize; (nx * ny) as usize + 1];
        for &p in pts {
            start[cell_of(p) + 1] += 1;
        }
        for i in 1..start.len() {
            start[i] += start[i - 1];
        }
        let mut fill = start.clone();
        let mut order = vec![0usize; pts.len()];
        for (i, &p) in pts.iter().enumerate() {
            let c = cell_of(p);
            order[fill[c]] = i;
            fill[c] += 1;
        }
        Buckets { pts, origin, cell, nx, ny, start, order }
    }

    fn nearest(&self, q: Point) -> f64 {
        let qx = ((q.x - self.origin.x) / self.cell).floor() as i64;
        let qy = ((q.y - self.origin.y) / self.cell).floor() as i64;
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny) + qx.abs().max(qy.abs()) + 2;
        for ring in 0..=max_ring {
            // every point in ring r is at distance ≥ (r - 1) * cell from q
            if best.is_finite() && (ring - 1) as f64 * self.cell > best {
                break;
            }
            for cy in (qy - ring)..=(qy + ring) {
                if cy < 0 || cy >= self.ny {
                    continue;
                }
                let edge_row = cy == qy - ring || cy == qy + ring;
                let step = if edge_row { 1 } else { (2 * ring).max(1) };
                let mut cx = qx - ring;
                while cx <= qx + ring {
                    if cx >= 0 && cx < self.nx {
                        let c = (cy * self.nx + cx) as usize;
                        for &i in &self.order[self.start[c]..self.start[c + 1]] {
                            best = best.min(self.pts[i].linf(q));
                        }
                    }
                    cx += step;
                }
            }
        }
        best
    }
}

fn directed_hausdorff(a: &[Point], b: &[Point]) -> f64 {
    if a.len() * b.len() <= 4096 {
        return a.iter().map(|p| b.iter().map(|q| p.linf(*q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    }
    let grid = Buckets::new(b);
    a.iter().map(|&p| grid.nearest(p)).fold(0.0, f64::max)
}

/// Hausdorff distance on L∞ between two non-empty finite point sets.
pub fn hausdorff_distance(a: &[Point], b: &[Point]) -> Result<f64> {
    ensure!(!a.is_empty() && !b.is_empty(), Domain, "Hausdorff distance needs non-empty sets");
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// Whether the bipartite graph `allowed[i][j]` has a perfect matching (augmenting paths).
pub(crate) fn has_perfect_matching(n: usize, allowed: &dyn Fn(usize, usize) -> bool) -> bool {
    fn augment(i: usize, n: usize, allowed: &dyn Fn(usize, usize) -> bool, seen: &mut [bool], match_r: &mut [usize]) -> bool {
        for j in 0..n {
            if allowed(i, j) && !seen[j] {
                seen[j] = true;
                if match_r[j] == usize::MAX || augment(match_r[j], n, allowed, seen, match_r) {
                    match_r[j] = i;
                    return true;
                }
            }
        }
        false
    }
    let mut match_r = vec![usize::MAX; n];
    for i in 0..n {
        let mut seen = vec![false; n];
        if !augment(i, n, allowed, &mut seen, &mut match_r) {
            return false;
        }
    }
    true
}

/// Bottleneck distance between two collections of point sets: the minimum over bijections of
/// the largest paired Hausdorff distance, infinite when the sizes differ.
pub fn collection_distance(s: &[Vec<Point>], t: &[Vec<Point>]) -> Result<f64> {
    if s.len() != t.len() {
        return Ok(f64::INFINITY);
    }
    let n = s.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = hausdorff_distance(&s[i], &t[j])?;
        }
    }
    let mut values = d.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let (mut lo, mut hi) = (0usize, values.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        let eps = values[mid];
        if has_perfect_matching(n, &|i, j| d[i * n + j] <= eps) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(values[lo])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: usize,
    pub size: usize,
    pub diameter: f64,
    pub bbox: Rect,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
}

/// JSON records for a list of pieces; vertex lists are dropped above `max_vertices`.
pub fn export_records(pieces: &[Piece], lattice: &Lattice, max_vertices: Option<usize>) -> Vec<ClusterRecord> {
    pieces
        .iter()
        .enumerate()
        .map(|(id, p)| ClusterRecord {
            id,
            size: p.size,
            diameter: p.diameter,
            bbox: p.bbox,
            vertices: max_vertices.is_none_or(|m| p.size <= m).then(|| {
                p.vertices
                    .iter()
                    .map(|&v| {
                        let q = lattice.pos(v as usize);
                        [q.x, q.y]
                    })
                    .collect()
            }),
        })
        .collect()
}

pub fn write_json(path: &std::path::Path, records: &[ClusterRecord]) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(records)?)?;
    Ok(())
}
