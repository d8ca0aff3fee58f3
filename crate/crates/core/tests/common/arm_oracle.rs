//! Brute-force arm search: enumerate every arm as a simple path, then look for a
//! pairwise-disjoint family whose colours, sorted by where each arm leaves the inner box,
//! spell the requested word.

use perclab::geom::Point;
use perclab::lattice::{FkConfig, SiteConfig};

pub struct Graph {
    pub pos: Vec<Point>,
    pub red: Vec<bool>,
    /// Same-colour neighbours.
    pub links: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, PartialEq)]
enum Layer {
    Out,
    Inner,
    Middle,
    Outer,
}

struct Arm {
    mask: u128,
    red: bool,
    key: f64,
}

fn leave_angle(p: Point, q: Point, z: Point, a: f64) -> f64 {
    // bisect for the last parameter at which the segment is still inside the box
    let inside = |t: f64| {
        let x = p.x + t * (q.x - p.x);
        let y = p.y + t * (q.y - p.y);
        (x - z.x).abs() <= a + 1e-12 && (y - z.y).abs() <= a + 1e-12
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = lo + 1e-6;
    let (x, y) = (p.x + t * (q.x - p.x) - z.x, p.y + t * (q.y - p.y) - z.y);
    let ang = y.atan2(x);
    if ang < 0.0 {
        ang + std::f64::consts::TAU
    } else {
        ang
    }
}

fn in_side(p: Point, z: Point, a: f64, side: u8) -> bool {
    let e = 1e-9;
    match side {
        1 => p.x <= z.x + a + e,
        2 => p.y <= z.y + a + e,
        3 => p.x >= z.x - a - e,
        _ => p.y >= z.y - a - e,
    }
}

/// Whether the word `kappa` is realised by disjoint arms across A(z; a, b); `side` restricts
/// the arms to a half-plane and reads the word linearly from the half-plane's opening.
pub fn arms_exist(g: &Graph, z: Point, a: f64, b: f64, kappa: &[bool], side: Option<u8>) -> bool {
    assert!(g.pos.len() <= 128);
    let layer: Vec<Layer> = g
        .pos
        .iter()
        .map(|&p| {
            if let Some(s) = side {
                if !in_side(p, z, a, s) {
                    return Layer::Out;
                }
            }
            let d = (p.x - z.x).abs().max((p.y - z.y).abs());
            if d <= a + 1e-9 {
                Layer::Inner
            } else if d >= b - 1e-9 {
                Layer::Outer
            } else {
                Layer::Middle
            }
        })
        .collect();
    let cut = match side {
        None | Some(1) => 0.0,
        Some(2) => std::f64::consts::FRAC_PI_2,
        Some(3) => std::f64::consts::PI,
        Some(_) => 1.5 * std::f64::consts::PI,
    };
    let mut arms: Vec<Arm> = Vec::new();
    for s in 0..g.pos.len() {
        if layer[s] != Layer::Inner {
            continue;
        }
        for &u in &g.links[s] {
            if layer[u] != Layer::Middle && layer[u] != Layer::Outer {
                continue;
            }
            let key = (leave_angle(g.pos[s], g.pos[u], z, a) - cut).rem_euclid(std::f64::consts::TAU);
            let mut masks: Vec<u128> = Vec::new();
            extend(g, &layer, u, (1u128 << s) | (1u128 << u), &mut masks);
            // keep inclusion-minimal paths only
            masks.sort_by_key(|m| m.count_ones());
            let mut kept: Vec<u128> = Vec::new();
            for m in masks {
                if !kept.iter().any(|&k| k & m == k) {
                    kept.push(m);
                }
            }
            for mask in kept {
                arms.push(Arm { mask, red: g.red[s], key });
            }
        }
    }
    arms.sort_by(|x, y| x.key.total_cmp(&y.key));
    let l = kappa.len();
    let rotations: Vec<usize> = if side.is_some() { vec![0] } else { (0..l).collect() };
    for r in rotations {
        let word: Vec<bool> = (0..l).map(|i| kappa[(r + i) % l]).collect();
        if pick(&arms, &word, 0, 0, 0) {
            return true;
        }
    }
    false
}

fn extend(g: &Graph, layer: &[Layer], v: usize, mask: u128, out: &mut Vec<u128>) {
    if layer[v] == Layer::Outer {
        out.push(mask);
        return;
    }
    for &w in &g.links[v] {
        if mask >> w & 1 == 1 {
            continue;
        }
        if layer[w] == Layer::Middle || layer[w] == Layer::Outer {
            extend(g, layer, w, mask | (1u128 << w), out);
        }
    }
}

fn pick(arms: &[Arm], word: &[bool], from: usize, t: usize, used: u128) -> bool {
    if t == word.len() {
        return true;
    }
    for i in from..arms.len() {
        let arm = &arms[i];
        if arm.red == word[t] && arm.mask & used == 0 && pick(arms, word, i + 1, t + 1, used | arm.mask) {
            return true;
        }
    }
    false
}

pub fn site_graph(cfg: &SiteConfig) -> Graph {
    let lat = &cfg.lattice;
    let mut links = vec![Vec::new(); lat.len()];
    for (v, l) in links.iter_mut().enumerate() {
        lat.for_each_neighbor(v, |w, _| {
            if cfg.colors[w] == cfg.colors[v] {
                l.push(w);
            }
        });
    }
    Graph { pos: lat.positions().to_vec(), red: cfg.colors.clone(), links }
}

pub fn fk_graph(cfg: &FkConfig) -> Graph {
    let lat = &cfg.lattice;
    let dual = lat.dual();
    let n = lat.len();
    let mut pos = lat.positions().to_vec();
    let mut red = vec![true; n];
    let mut links = vec![Vec::new(); n + dual.len()];
    for v in 0..n {
        lat.for_each_neighbor(v, |w, e| {
            if cfg.bonds[e] {
                links[v].push(w);
            }
        });
    }
    for d in 0..dual.len() {
        pos.push(dual.pos(d));
        red.push(false);
        dual.for_each_neighbor(lat, d, |w, e| {
            if !cfg.bonds[e] {
                links[n + d].push(n + w);
            }
        });
    }
    Graph { pos, red, links }
}
