//! Fill-reducing column ordering by graph nested dissection.
//!
//! Separators are breadth-first level sets taken from a pseudo-peripheral
//! node, thinned so that every separator node touches both halves. Rows of
//! very high degree (bordering rows of low-rank terms) are ordered last.

use crate::fem::CsrMatrix;
use crate::Real;

const LEAF: usize = 48;

struct Graph {
    ptr: Vec<usize>,
    adj: Vec<usize>,
}

impl Graph {
    fn from_pattern<T: Real>(a: &CsrMatrix<T>, active: &[bool]) -> Self {
        let n = a.n();
        let mut ptr = vec![0; n + 1];
        let mut adj = Vec::with_capacity(a.nnz());
        for i in 0..n {
            if active[i] {
                let (idx, _) = a.row(i);
                adj.extend(idx.iter().copied().filter(|&j| j != i && active[j]));
            }
            ptr[i + 1] = adj.len();
        }
        Self { ptr, adj }
    }

    fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }
}

struct Work {
    stamp: Vec<u32>,
    gen: u32,
    level: Vec<usize>,
}

impl Work {
    fn bump(&mut self) -> u32 {
        self.gen += 1;
        self.gen
    }
}

/// Permutation `q` with `q[k]` the original index eliminated at step `k`.
/// The pattern of `a` is treated as symmetric.
pub fn nested_dissection<T: Real>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.n();
    if n == 0 {
        return Vec::new();
    }
    let dense_cut = (10.0 * (n as f64).sqrt()).max(64.0) as usize;
    let mut active = vec![true; n];
    let mut dense = Vec::new();
    for (i, flag) in active.iter_mut().enumerate() {
        if a.row(i).0.len() > dense_cut {
            *flag = false;
            dense.push(i);
        }
    }
    let g = Graph::from_pattern(a, &active);
    let mut w = Work {
        stamp: vec![0; n],
        gen: 0,
        level: vec![0; n],
    };
    let mut out = Vec::with_capacity(n);
    let nodes: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    dissect(&g, nodes, &mut out, &mut w);
    out.extend(dense);
    debug_assert_eq!(out.len(), n);
    out
}

/// Connected components of the subgraph induced by `nodes`.
fn components(g: &Graph, nodes: &[usize], w: &mut Work) -> Vec<Vec<usize>> {
    let member = w.bump();
    for &v in nodes {
        w.stamp[v] = member;
    }
    let seen = w.bump();
    let mut comps = Vec::new();
    for &s in nodes {
        if w.stamp[s] != member {
            continue;
        }
        w.stamp[s] = seen;
        let mut comp = vec![s];
        let mut head = 0;
        while head < comp.len() {
            let v = comp[head];
            head += 1;
            for &u in g.neighbors(v) {
                if w.stamp[u] == member {
                    w.stamp[u] = seen;
                    comp.push(u);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// BFS levels within a connected node set whose members carry stamp `member`.
fn bfs_levels(g: &Graph, root: usize, member: u32, w: &mut Work) -> Vec<Vec<usize>> {
    let seen = w.bump();
    let mut levels = vec![vec![root]];
    w.stamp[root] = seen;
    loop {
        let mut next = Vec::new();
        for &v in levels.last().unwrap() {
            for &u in g.neighbors(v) {
                if w.stamp[u] == member {
                    w.stamp[u] = seen;
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }
    // restore membership for the caller
    for lvl in &levels {
        for &v in lvl {
            w.stamp[v] = member;
        }
    }
    levels
}

fn dissect(g: &Graph, nodes: Vec<usize>, out: &mut Vec<usize>, w: &mut Work) {
    if nodes.len() <= LEAF {
        out.extend(nodes);
        return;
    }
    let comps = components(g, &nodes, w);
    if comps.len() > 1 {
        for c in comps {
            dissect(g, c, out, w);
        }
        return;
    }
    let member = w.bump();
    for &v in &nodes {
        w.stamp[v] = member;
    }
    // pseudo-peripheral root: repeat BFS from the last node reached
    let mut levels = bfs_levels(g, nodes[0], member, w);
    for _ in 0..3 {
        let far = *levels.last().unwrap().first().unwrap();
        let cand = bfs_levels(g, far, member, w);
        if cand.len() <= levels.len() {
            break;
        }
        levels = cand;
    }
    if levels.len() < 3 {
        out.extend(nodes);
        return;
    }
    // smallest level among those splitting the set into comparable halves
    let total = nodes.len();
    let mut before = 0;
    let mut best: Option<(usize, usize)> = None;
    for (l, lvl) in levels.iter().enumerate() {
        if l > 0 && l + 1 < levels.len() {
            let after = total - before - lvl.len();
            let lo = before.min(after) as f64;
            if lo >= 0.3 * (total - lvl.len()) as f64 {
                if best.map_or(true, |(_, sz)| lvl.len() < sz) {
                    best = Some((l, lvl.len()));
                }
            }
        }
        before += lvl.len();
    }
    let sep_level = match best {
        Some((l, _)) => l,
        None => {
            // fall back to the median level
            let mut acc = 0;
            let mut l = 1;
            for (k, lvl) in levels.iter().enumerate() {
                acc += lvl.len();
                if 2 * acc >= total {
                    l = k.clamp(1, levels.len() - 2);
                    break;
                }
            }
            l
        }
    };
    for (l, lvl) in levels.iter().enumerate() {
        for &v in lvl {
            w.level[v] = l;
        }
    }
    let mut part_a: Vec<usize> = levels[..sep_level].concat();
    let part_b: Vec<usize> = levels[sep_level + 1..].concat();
    let mut sep = Vec::new();
    for &v in &levels[sep_level] {
        let touches_b = g
            .neighbors(v)
            .iter()
            .any(|&u| w.stamp[u] == member && w.level[u] == sep_level + 1);
        if touches_b {
            sep.push(v);
        } else {
            part_a.push(v);
        }
    }
    dissect(g, part_a, out, w);
    dissect(g, part_b, out, w);
    out.extend(sep);
}
