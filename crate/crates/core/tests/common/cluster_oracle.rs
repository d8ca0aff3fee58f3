use perclab::lattice::{FkConfig, SiteConfig};

/// Flood fill over red vertices; triangular neighbours are the vertices at Euclidean distance η.
pub fn site_labels(cfg: &SiteConfig) -> Vec<Option<usize>> {
    let pos = cfg.lattice.positions();
    let eta = cfg.lattice.eta();
    let n = pos.len();
    let mut label = vec![None; n];
    let mut next = 0;
    for s in 0..n {
        if !cfg.colors[s] || label[s].is_some() {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([s]);
        label[s] = Some(next);
        while let Some(v) = queue.pop_front() {
            for w in 0..n {
                let (dx, dy) = (pos[v].x - pos[w].x, pos[v].y - pos[w].y);
                if cfg.colors[w] && label[w].is_none() && ((dx * dx + dy * dy).sqrt() - eta).abs() < 1e-9 {
                    label[w] = Some(next);
                    queue.push_back(w);
                }
            }
        }
        next += 1;
    }
    label
}

pub fn fk_labels(cfg: &FkConfig) -> Vec<Option<usize>> {
    let lat = &cfg.lattice;
    let n = lat.len();
    let mut adj = vec![Vec::new(); n];
    for e in 0..lat.edge_count() {
        if cfg.bonds[e] {
            let [u, v] = lat.edge(e);
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let mut label = vec![None; n];
    let mut next = 0;
    for s in 0..n {
        if label[s].is_some() {
            continue;
        }
        let mut stack = vec![s];
        label[s] = Some(next);
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if label[w].is_none() {
                    label[w] = Some(next);
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    label
}

/// Oracle clusters as sorted vertex lists.
pub fn groups(label: &[Option<usize>]) -> Vec<Vec<usize>> {
    let count = label.iter().flatten().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); count];
    for (v, l) in label.iter().enumerate() {
        if let Some(l) = l {
            out[*l].push(v);
        }
    }
    out
}
