use super::LatticeKind;
use crate::geom::{Point, Rect};

pub const NONE: u32 = u32::MAX;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;
const TOL: f64 = 1e-7;

const TRI_DIRS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];
const SQ_DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Vertices and edges of a lattice restricted to the closed square Λ_k.
///
/// Vertices are indexed row-major (by row `j`, then `i`). Triangular vertices sit at
/// η(i + j/2, j√3/2), square vertices at η(i, j). Edges are enumerated vertex by vertex
/// along the forward directions (1,0), (0,1) and, for the triangular lattice, (-1,1).
#[derive(Debug, Clone)]
pub struct Lattice {
    kind: LatticeKind,
    eta: f64,
    k: f64,
    i_lo: i32,
    j_lo: i32,
    width: usize,
    height: usize,
    grid: Vec<u32>,
    coords: Vec<(i32, i32)>,
    pos: Vec<Point>,
    edges: Vec<[u32; 2]>,
    edge_ids: Vec<u32>,
    dual: std::sync::OnceLock<DualLattice>,
}

impl Lattice {
    pub fn new(kind: LatticeKind, eta: f64, k: f64) -> Self {
        let rows = match kind {
            LatticeKind::TriangularSite => (k / (eta * SQRT3_2) + TOL).floor() as i32,
            LatticeKind::SquareFk => (k / eta + TOL).floor() as i32,
        };
        let mut row_ranges = Vec::with_capacity(2 * rows as usize + 1);
        for j in -rows..=rows {
            row_ranges.push((j, Self::row_range(kind, eta, -k, k, j)));
        }
        let i_lo = row_ranges.iter().map(|(_, (a, _))| *a).min().unwrap_or(0);
        let i_hi = row_ranges.iter().map(|(_, (_, b))| *b).max().unwrap_or(0);
        let width = (i_hi - i_lo + 1).max(0) as usize;
        let height = row_ranges.len();
        let mut grid = vec![NONE; width * height];
        let mut coords = Vec::new();
        let mut pos = Vec::new();
        for (row, &(j, (a, b))) in row_ranges.iter().enumerate() {
            for i in a..=b {
                grid[row * width + (i - i_lo) as usize] = coords.len() as u32;
                coords.push((i, j));
                pos.push(Self::embed(kind, eta, i, j));
            }
        }
        let mut lat = Lattice {
            kind,
            eta,
            k,
            i_lo,
            j_lo: -rows,
            width,
            height,
            grid,
            coords,
            pos,
            edges: Vec::new(),
            edge_ids: Vec::new(),
            dual: std::sync::OnceLock::new(),
        };
        let nf = lat.forward_dirs().len();
        let mut edge_ids = vec![NONE; lat.len() * nf];
        let mut edges = Vec::new();
        for v in 0..lat.len() {
            let (i, j) = lat.coords[v];
            for (d, &(di, dj)) in lat.forward_dirs().iter().enumerate() {
                if let Some(w) = lat.index(i + di, j + dj) {
                    edge_ids[v * nf + d] = edges.len() as u32;
                    edges.push([v as u32, w as u32]);
                }
            }
        }
        lat.edges = edges;
        lat.edge_ids = edge_ids;
        lat
    }

    fn row_range(kind: LatticeKind, eta: f64, xmin: f64, xmax: f64, j: i32) -> (i32, i32) {
        let shift = match kind {
            LatticeKind::TriangularSite => 0.5 * j as f64,
            LatticeKind::SquareFk => 0.0,
        };
        let lo = (xmin / eta - shift - TOL).ceil() as i32;
        let hi = (xmax / eta - shift + TOL).floor() as i32;
        (lo, hi)
    }

    #[inline]
    pub fn embed(kind: LatticeKind, eta: f64, i: i32, j: i32) -> Point {
        match kind {
            LatticeKind::TriangularSite => Point::new(eta * (i as f64 + 0.5 * j as f64), eta * SQRT3_2 * j as f64),
            LatticeKind::SquareFk => Point::new(eta * i as f64, eta * j as f64),
        }
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn region(&self) -> Rect {
        Rect::square(Point::ORIGIN, self.k)
    }
    pub fn len(&self) -> usize {
        self.coords.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
    #[inline]
    pub fn edge(&self, e: usize) -> [usize; 2] {
        let [u, v] = self.edges[e];
        [u as usize, v as usize]
    }
    #[inline]
    pub fn pos(&self, v: usize) -> Point {
        self.pos[v]
    }
    pub fn positions(&self) -> &[Point] {
        &self.pos
    }
    #[inline]
    pub fn coords(&self, v: usize) -> (i32, i32) {
        self.coords[v]
    }

    /// Neighbour offsets in counterclockwise order starting east.
    pub fn dirs(&self) -> &'static [(i32, i32)] {
        match self.kind {
            LatticeKind::TriangularSite => &TRI_DIRS,
            LatticeKind::SquareFk => &SQ_DIRS,
        }
    }

    pub fn forward_dirs(&self) -> &'static [(i32, i32)] {
        match self.kind {
            LatticeKind::TriangularSite => &[(1, 0), (0, 1), (-1, 1)],
            LatticeKind::SquareFk => &[(1, 0), (0, 1)],
        }
    }

    #[inline]
    pub fn index(&self, i: i32, j: i32) -> Option<usize> {
        let row = j - self.j_lo;
        let col = i - self.i_lo;
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            return None;
        }
        let v = self.grid[row as usize * self.width + col as usize];
        (v != NONE).then_some(v as usize)
    }

    /// Calls `f(w, e)` for each neighbour `w` of `v` joined by edge `e`.
    #[inline]
    pub fn for_each_neighbor(&self, v: usize, mut f: impl FnMut(usize, usize)) {
        let (i, j) = self.coords[v];
        let nf = self.forward_dirs().len();
        for (d, &(di, dj)) in self.dirs().iter().enumerate() {
            if let Some(w) = self.index(i + di, j + dj) {
                let e = if d < nf { self.edge_ids[v * nf + d] } else { self.edge_ids[w * nf + (d - nf)] };
                f(w, e as usize);
            }
        }
    }

    /// Edge joining `u` and `v`, if they are adjacent.
    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let mut found = None;
        self.for_each_neighbor(u, |w, e| {
            if w == v {
                found = Some(e);
            }
        });
        found
    }

    /// Calls `f(v)` for every vertex inside the closed rectangle, row by row.
    pub fn for_each_in_rect(&self, r: &Rect, mut f: impl FnMut(usize)) {
        let (jlo, jhi) = match self.kind {
            LatticeKind::TriangularSite => (
                (r.ymin / (self.eta * SQRT3_2) - TOL).ceil() as i32,
                (r.ymax / (self.eta * SQRT3_2) + TOL).floor() as i32,
            ),
            LatticeKind::SquareFk => ((r.ymin / self.eta - TOL).ceil() as i32, (r.ymax / self.eta + TOL).floor() as i32),
        };
        let jlo = jlo.max(self.j_lo);
        let jhi = jhi.min(self.j_lo + self.height as i32 - 1);
        for j in jlo..=jhi {
            let (a, b) = Self::row_range(self.kind, self.eta, r.xmin, r.xmax, j);
            let a = a.max(self.i_lo);
            let b = b.min(self.i_lo + self.width as i32 - 1);
            for i in a..=b {
                if let Some(v) = self.index(i, j) {
                    f(v);
                }
            }
        }
    }

    pub fn vertices_in_rect(&self, r: &Rect) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_in_rect(r, |v| out.push(v));
        out
    }

    /// Plaquettes of a square lattice, built on first use.
    pub fn dual(&self) -> &DualLattice {
        self.dual.get_or_init(|| DualLattice::new(self))
    }

    /// Vertex nearest to `p` in L∞ (ties to the lowest index).
    pub fn nearest(&self, p: Point) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        let r = Rect::square(p, 1.5 * self.eta);
        self.for_each_in_rect(&r, |v| {
            let d = self.pos[v].linf(p);
            if best.is_none_or(|(bd, _)| d < bd - 1e-12) {
                best = Some((d, v));
            }
        });
        best.map(|(_, v)| v)
    }
}

/// Plaquettes of a square lattice, the vertex set of its planar dual.
///
/// Plaquette `(i, j)` has corners `(i, j)`, `(i+1, j)`, `(i, j+1)`, `(i+1, j+1)` and exists
/// when all four corners lie in the region.
#[derive(Debug, Clone)]
pub struct DualLattice {
    i_lo: i32,
    j_lo: i32,
    width: usize,
    height: usize,
    grid: Vec<u32>,
    coords: Vec<(i32, i32)>,
    pos: Vec<Point>,
}

impl DualLattice {
    pub fn new(primal: &Lattice) -> Self {
        assert_eq!(primal.kind(), LatticeKind::SquareFk, "dual lattice is only defined for the square lattice");
        let eta = primal.eta();
        let n = (primal.k() / eta + TOL).floor() as i32;
        let (i_lo, j_lo) = (-n, -n);
        let side = (2 * n).max(0) as usize;
        let mut grid = vec![NONE; side * side];
        let mut coords = Vec::new();
        let mut pos = Vec::new();
        for j in -n..n {
            for i in -n..n {
                let all = [(0, 0), (1, 0), (0, 1), (1, 1)].iter().all(|&(a, b)| primal.index(i + a, j + b).is_some());
                if all {
                    grid[(j - j_lo) as usize * side + (i - i_lo) as usize] = coords.len() as u32;
                    coords.push((i, j));
                    pos.push(Point::new(eta * (i as f64 + 0.5), eta * (j as f64 + 0.5)));
                }
            }
        }
        DualLattice { i_lo, j_lo, width: side, height: side, grid, coords, pos }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
    #[inline]
    pub fn pos(&self, d: usize) -> Point {
        self.pos[d]
    }
    #[inline]
    pub fn coords(&self, d: usize) -> (i32, i32) {
        self.coords[d]
    }

    #[inline]
    pub fn index(&self, i: i32, j: i32) -> Option<usize> {
        let row = j - self.j_lo;
        let col = i - self.i_lo;
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            return None;
        }
        let v = self.grid[row as usize * self.width + col as usize];
        (v != NONE).then_some(v as usize)
    }

    /// Calls `f(neighbour, crossed_primal_edge)` for each dual neighbour of plaquette `d`.
    pub fn for_each_neighbor(&self, primal: &Lattice, d: usize, mut f: impl FnMut(usize, usize)) {
        let (i, j) = self.coords[d];
        // east: crosses the vertical edge (i+1, j)-(i+1, j+1)
        // north: crosses the horizontal edge (i, j+1)-(i+1, j+1)
        // west: crosses (i, j)-(i, j+1); south: crosses (i, j)-(i+1, j)
        let moves = [((1, 0), (i + 1, j), (i + 1, j + 1)), ((0, 1), (i, j + 1), (i + 1, j + 1)), ((-1, 0), (i, j), (i, j + 1)), ((0, -1), (i, j), (i + 1, j))];
        for ((di, dj), a, b) in moves {
            if let Some(w) = self.index(i + di, j + dj) {
                let u = primal.index(a.0, a.1).expect("plaquette corner");
                let v = primal.index(b.0, b.1).expect("plaquette corner");
                let e = primal.edge_between(u, v).expect("plaquette side");
                f(w, e);
            }
        }
    }

    pub fn for_each_in_rect(&self, eta: f64, r: &Rect, mut f: impl FnMut(usize)) {
        let jlo = ((r.ymin / eta - 0.5 - TOL).ceil() as i32).max(self.j_lo);
        let jhi = ((r.ymax / eta - 0.5 + TOL).floor() as i32).min(self.j_lo + self.height as i32 - 1);
        let ilo = ((r.xmin / eta - 0.5 - TOL).ceil() as i32).max(self.i_lo);
        let ihi = ((r.xmax / eta - 0.5 + TOL).floor() as i32).min(self.i_lo + self.width as i32 - 1);
        for j in jlo..=jhi {
            for i in ilo..=ihi {
                if let Some(d) = self.index(i, j) {
                    f(d);
                }
            }
        }
    }
}
