use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::registration::FrameTransformSet;
use crate::Vec3;

/// Detection graph over registered centroids.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociationGraph {
    /// Corrected centroid per node, frame-major order.
    pub positions: Vec<Vec3>,
    /// `(frame, detection index within frame)` per node.
    pub origin: Vec<(usize, usize)>,
    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl AssociationGraph {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }
}

/// Nodes are all corrected centroids; an edge joins two nodes from
/// different frames closer than `tau`.
pub fn build_association_graph(frames: &[Vec<Vec3>], transforms: &FrameTransformSet, tau: f64) -> AssociationGraph {
    let mut positions = Vec::new();
    let mut origin = Vec::new();
    for (f, dets) in frames.iter().enumerate() {
        for (k, c) in dets.iter().enumerate() {
            positions.push(transforms.apply(f, c));
            origin.push((f, k));
        }
    }
    let mut edges = Vec::new();
    for a in 0..positions.len() {
        for b in a + 1..positions.len() {
            if origin[a].0 != origin[b].0 && (positions[a] - positions[b]).norm() < tau {
                edges.push((a, b));
            }
        }
    }
    AssociationGraph { positions, origin, edges }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HcsParams {
    pub min_cluster_size: usize,
    /// Emit connected two-node components even though their cut of 1 is not
    /// more than half their size.
    pub keep_pairs: bool,
}

impl Default for HcsParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 2,
            keep_pairs: true,
        }
    }
}

/// Small undirected graph on local vertex ids `0..n`.
#[derive(Clone, Debug)]
pub struct LocalGraph {
    pub n: usize,
    pub adj: Vec<Vec<usize>>,
}

impl LocalGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        Self { n, adj }
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &w in &self.adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn cut_size(&self, side: &[bool]) -> usize {
        (0..self.n)
            .filter(|&v| side[v])
            .map(|v| self.adj[v].iter().filter(|&&w| !side[w]).count())
            .sum()
    }

    /// Unit-capacity max flow from `s` to `t`; returns the flow value and the
    /// residual-reachable source side (the smallest minimum `s`-`t` cut).
    fn max_flow(&self, s: usize, t: usize) -> (usize, Vec<bool>) {
        // flow[v][k] on arc v -> adj[v][k]; antisymmetric via the reverse arc
        let mut flow: Vec<Vec<i32>> = self.adj.iter().map(|l| vec![0; l.len()]).collect();
        let rev: Vec<Vec<usize>> = (0..self.n)
            .map(|v| {
                self.adj[v]
                    .iter()
                    .map(|&w| self.adj[w].binary_search(&v).expect("symmetric adjacency"))
                    .collect()
            })
            .collect();
        let mut value = 0;
        loop {
            let mut pred: Vec<Option<(usize, usize)>> = vec![None; self.n];
            let mut seen = vec![false; self.n];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                if v == t {
                    break;
                }
                for (k, &w) in self.adj[v].iter().enumerate() {
                    if !seen[w] && flow[v][k] < 1 {
                        seen[w] = true;
                        pred[w] = Some((v, k));
                        queue.push_back(w);
                    }
                }
            }
            if !seen[t] {
                return (value, seen);
            }
            let mut v = t;
            while let Some((u, k)) = pred[v] {
                flow[u][k] += 1;
                flow[v][rev[u][k]] -= 1;
                v = u;
            }
            value += 1;
        }
    }

    /// Global minimum edge cut of a connected graph with `n >= 2`.
    ///
    /// Canonical choice: with `s = 0`, the first `t` (ascending) whose
    /// minimum `s`-`t` cut attains the global minimum, and of those cuts the
    /// one with the smallest source side.
    pub fn min_cut(&self) -> (usize, Vec<bool>) {
        let mut best: Option<(usize, Vec<bool>)> = None;
        for t in 1..self.n {
            let (v, side) = self.max_flow(0, t);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, side));
                if v == 0 {
                    break;
                }
            }
        }
        best.expect("min cut needs two vertices")
    }
}

fn hcs_recurse(nodes: &[usize], edges: &[(usize, usize)], params: &HcsParams, out: &mut Vec<Vec<usize>>) {
    // local ids follow the global order of `nodes`
    let local = |g: usize| nodes.binary_search(&g).expect("edge endpoint in node set");
    let local_edges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (local(a), local(b))).collect();
    let graph = LocalGraph::new(nodes.len(), &local_edges);
    for comp in graph.components() {
        let members: Vec<usize> = comp.iter().map(|&v| nodes[v]).collect();
        if members.len() < 2 {
            continue;
        }
        let in_comp = |g: usize| members.binary_search(&g).is_ok();
        let comp_edges: Vec<(usize, usize)> = edges.iter().copied().filter(|&(a, _)| in_comp(a)).collect();
        if members.len() == 2 {
            if params.keep_pairs && members.len() >= params.min_cluster_size {
                out.push(members);
            }
            continue;
        }
        let cg = LocalGraph::new(
            members.len(),
            &comp_edges
                .iter()
                .map(|&(a, b)| (members.binary_search(&a).unwrap(), members.binary_search(&b).unwrap()))
                .collect::<Vec<_>>(),
        );
        let (cut, side) = cg.min_cut();
        if 2 * cut > members.len() {
            if members.len() >= params.min_cluster_size {
                out.push(members);
            }
            continue;
        }
        let kept: Vec<(usize, usize)> = comp_edges
            .into_iter()
            .filter(|&(a, b)| {
                side[members.binary_search(&a).unwrap()] == side[members.binary_search(&b).unwrap()]
            })
            .collect();
        hcs_recurse(&members, &kept, params, out);
    }
}

/// Highly connected subgraph clustering.
///
/// Components whose minimum cut exceeds half their vertex count are
/// emitted; otherwise the cut edges are removed and the pieces recursed on.
/// Singletons are discarded. Clusters are sorted and ordered by their
/// smallest node.
pub fn hcs_cluster(graph: &AssociationGraph, params: &HcsParams) -> Vec<Vec<usize>> {
    let nodes: Vec<usize> = (0..graph.node_count()).collect();
    let mut out = Vec::new();
    hcs_recurse(&nodes, &graph.edges, params, &mut out);
    out.sort_unstable_by_key(|c| c[0]);
    out
}

/// Convenience wrapper for a bare edge list on `n` nodes.
pub fn hcs_on_edges(n: usize, edges: &[(usize, usize)], params: &HcsParams) -> Vec<Vec<usize>> {
    let mut e: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    e.sort_unstable();
    e.dedup();
    let nodes: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    hcs_recurse(&nodes, &e, params, &mut out);
    out.sort_unstable_by_key(|c| c[0]);
    out
}
