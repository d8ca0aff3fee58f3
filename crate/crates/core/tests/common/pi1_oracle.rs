use perclab::geom::Point;
use perclab::lattice::MeshSpec;

/// Vertices that decide whether the origin reaches ∂Λ₁: interior ones, and exterior ones next to them.
pub fn relevant(cfg_spec: &MeshSpec) -> (Vec<usize>, Vec<usize>) {
    let lat = cfg_spec.lattice().unwrap();
    let eta = lat.eta();
    let pos = lat.positions();
    let inner: Vec<usize> = (0..lat.len()).filter(|&v| pos[v].linf(Point::ORIGIN) < 1.0 - 1e-9).collect();
    let outer: Vec<usize> = (0..lat.len())
        .filter(|&v| pos[v].linf(Point::ORIGIN) >= 1.0 - 1e-9)
        .filter(|&v| inner.iter().any(|&w| ((pos[v].x - pos[w].x).powi(2) + (pos[v].y - pos[w].y).powi(2)).sqrt() < eta + 1e-9))
        .collect();
    (inner, outer)
}

/// Number of colourings of the relevant vertices in which a red path joins the origin to a
/// vertex at L∞ distance ≥ 1.
pub fn pi1_count(spec: &MeshSpec) -> (u64, u32) {
    let lat = spec.lattice().unwrap();
    let pos = lat.positions();
    let eta = lat.eta();
    let (inner, outer) = relevant(spec);
    let all: Vec<usize> = inner.iter().chain(&outer).copied().collect();
    let n = all.len();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && ((pos[all[i]].x - pos[all[j]].x).powi(2) + (pos[all[i]].y - pos[all[j]].y).powi(2)).sqrt() < eta + 1e-9)
                .collect()
        })
        .collect();
    let origin = all.iter().position(|&v| pos[v].linf(Point::ORIGIN) < 1e-12).unwrap();
    let mut hits = 0;
    for state in 0u64..(1 << n) {
        let red = |i: usize| state >> i & 1 == 1;
        if !red(origin) {
            continue;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![origin];
        seen[origin] = true;
        let mut hit = false;
        while let Some(i) = stack.pop() {
            if i >= inner.len() {
                hit = true;
                break;
            }
            for &j in &adj[i] {
                if red(j) && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        hits += hit as u64;
    }
    (hits, n as u32)
}
