use crate::geom::{Point, Rect};
use crate::lattice::{AnyConfig, FkConfig, Lattice, LatticeKind, LazySites, SiteConfig, NONE};

/// Where node colours and links come from.
#[derive(Clone, Copy)]
pub enum ArmSource<'a> {
    Site { lattice: &'a Lattice, colors: &'a [bool] },
    Lazy { lattice: &'a Lattice, sites: LazySites },
    Fk { lattice: &'a Lattice, bonds: &'a [bool] },
}

impl ArmSource<'_> {
    pub fn lattice(&self) -> &Lattice {
        match self {
            ArmSource::Site { lattice, .. } | ArmSource::Lazy { lattice, .. } | ArmSource::Fk { lattice, .. } => lattice,
        }
    }

    /// Numbers of red and blue nodes inside `rect`.
    pub fn colour_counts(&self, rect: &Rect) -> (usize, usize) {
        let lat = self.lattice();
        let (mut red, mut blue) = (0, 0);
        match self {
            ArmSource::Site { colors, .. } => lat.for_each_in_rect(rect, |v| if colors[v] { red += 1 } else { blue += 1 }),
            ArmSource::Lazy { sites, .. } => lat.for_each_in_rect(rect, |v| {
                let (i, j) = lat.coords(v);
                if sites.is_red(i, j) {
                    red += 1
                } else {
                    blue += 1
                }
            }),
            ArmSource::Fk { .. } => {
                lat.for_each_in_rect(rect, |_| red += 1);
                lat.dual().for_each_in_rect(lat.eta(), rect, |_| blue += 1);
            }
        }
        (red, blue)
    }
}

/// Configurations on which arm events can be evaluated.
pub trait ArmConfig: Sync {
    fn arm_source(&self) -> ArmSource<'_>;
}

impl ArmConfig for SiteConfig {
    fn arm_source(&self) -> ArmSource<'_> {
        ArmSource::Site { lattice: &self.lattice, colors: &self.colors }
    }
}

impl ArmConfig for FkConfig {
    fn arm_source(&self) -> ArmSource<'_> {
        ArmSource::Fk { lattice: &self.lattice, bonds: &self.bonds }
    }
}

impl ArmConfig for AnyConfig {
    fn arm_source(&self) -> ArmSource<'_> {
        match self {
            AnyConfig::Site(c) => c.arm_source(),
            AnyConfig::Fk(c) => c.arm_source(),
        }
    }
}

impl ArmConfig for ArmSource<'_> {
    fn arm_source(&self) -> ArmSource<'_> {
        *self
    }
}

/// Nodes of a rectangle with their colours and same-colour links (CSR).
///
/// For site percolation the nodes are vertices. For FK the nodes are primal vertices
/// (colour 1, linked by open bonds) followed by plaquettes (colour 0, linked across closed bonds).
#[derive(Debug, Default)]
pub struct Window {
    pub pos: Vec<Point>,
    pub red: Vec<bool>,
    pub start: Vec<u32>,
    pub adj: Vec<u32>,
    map: Vec<u32>,
    stamp: Vec<u32>,
    cur: u32,
}

impl Window {
    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    #[inline]
    pub fn links(&self, v: usize) -> &[u32] {
        &self.adj[self.start[v] as usize..self.start[v + 1] as usize]
    }

    fn reset_map(&mut self, n: usize) {
        if self.stamp.len() < n {
            self.stamp.resize(n, 0);
            self.map.resize(n, NONE);
        }
        self.cur = self.cur.wrapping_add(1);
        if self.cur == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.cur = 1;
        }
    }

    #[inline]
    fn set(&mut self, key: usize, local: u32) {
        self.stamp[key] = self.cur;
        self.map[key] = local;
    }

    /// Fills the window with every node of `src` inside `rect`.
    pub fn build(&mut self, src: &ArmSource<'_>, rect: &Rect) {
        self.pos.clear();
        self.red.clear();
        self.start.clear();
        self.adj.clear();
        let lat = src.lattice();
        let mut globals: Vec<usize> = Vec::new();
        let (n, dual) = match src {
            ArmSource::Fk { .. } => {
                debug_assert_eq!(lat.kind(), LatticeKind::SquareFk);
                let d = lat.dual();
                (lat.len(), Some(d))
            }
            _ => (lat.len(), None),
        };
        self.reset_map(n + dual.map_or(0, |d| d.len()));
        lat.for_each_in_rect(rect, |v| globals.push(v));
        let primal_count = globals.len();
        if let Some(d) = dual {
            d.for_each_in_rect(lat.eta(), rect, |q| globals.push(n + q));
        }
        for (l, &g) in globals.iter().enumerate() {
            self.set(g, l as u32);
            if l < primal_count {
                self.pos.push(lat.pos(g));
                self.red.push(match src {
                    ArmSource::Site { colors, .. } => colors[g],
                    ArmSource::Lazy { sites, .. } => {
                        let (i, j) = lat.coords(g);
                        sites.is_red(i, j)
                    }
                    ArmSource::Fk { .. } => true,
                });
            } else {
                self.pos.push(dual.expect("dual").pos(g - n));
                self.red.push(false);
            }
        }
        let Window { red, start, adj, map, stamp, cur, .. } = self;
        let cur = *cur;
        let get = |k: usize| (stamp[k] == cur).then(|| map[k]);
        for (l, &g) in globals.iter().enumerate() {
            start.push(adj.len() as u32);
            let c = red[l];
            match src {
                ArmSource::Site { .. } | ArmSource::Lazy { .. } => lat.for_each_neighbor(g, |w, _| {
                    if let Some(lw) = get(w) {
                        if red[lw as usize] == c {
                            adj.push(lw);
                        }
                    }
                }),
                ArmSource::Fk { bonds, .. } => {
                    if l < primal_count {
                        lat.for_each_neighbor(g, |w, e| {
                            if bonds[e] {
                                if let Some(lw) = get(w) {
                                    adj.push(lw);
                                }
                            }
                        });
                    } else {
                        dual.expect("dual").for_each_neighbor(lat, g - n, |w, e| {
                            if !bonds[e] {
                                if let Some(lw) = get(n + w) {
                                    adj.push(lw);
                                }
                            }
                        });
                    }
                }
            }
        }
        start.push(adj.len() as u32);
    }
}
