//! Multilayer hypergraphs and their per-layer clique expansions.
//!
//! A hyperedge `e` with weight `w` contributes `w / |e|` to every unordered
//! node pair it contains. The expanded graph of a layer is stored with one
//! entry per node pair (weights aggregated over hyperedges), an oriented
//! incidence pair per edge, and a per-node list of incident edges.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A weighted hyperedge with sorted, duplicate-free node ids (`|e| >= 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperedge {
    pub weight: f64,
    pub nodes: Vec<usize>,
}

impl Hyperedge {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layer {
    pub hyperedges: Vec<Hyperedge>,
}

/// Non-fatal issue found while validating raw hyperedges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerWarning {
    /// Hyperedge `index` collapsed to the single node `node` after dedup and was dropped.
    SingletonDropped { index: usize, node: usize },
}

impl std::fmt::Display for LayerWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerWarning::SingletonDropped { index, node } => {
                write!(f, "hyperedge {index} reduces to node {node} alone; dropped")
            }
        }
    }
}

/// Validate raw `(weight, node ids)` pairs into a [`Layer`].
///
/// Node lists are sorted and deduplicated; hyperedges left with a single
/// node are dropped and reported as warnings.
pub fn build_layer(raw: &[(f64, Vec<i64>)], n: usize) -> Result<(Layer, Vec<LayerWarning>)> {
    if n == 0 {
        return Err(Error::InvalidParameter("node count must be at least 1".into()));
    }
    let mut hyperedges = Vec::with_capacity(raw.len());
    let mut warnings = Vec::new();
    for (index, (weight, nodes)) in raw.iter().enumerate() {
        if nodes.is_empty() {
            return Err(Error::EmptyHyperedge(index));
        }
        let mut ids = Vec::with_capacity(nodes.len());
        for &node in nodes {
            if node < 0 || node as u64 >= n as u64 {
                return Err(Error::InvalidNode { node, n });
            }
            ids.push(node as usize);
        }
        if !(weight.is_finite() && *weight > 0.0) {
            return Err(Error::InvalidWeight(*weight));
        }
        ids.sort_unstable();
        ids.dedup();
        if ids.len() == 1 {
            warnings.push(LayerWarning::SingletonDropped { index, node: ids[0] });
            continue;
        }
        hyperedges.push(Hyperedge {
            weight: *weight,
            nodes: ids,
        });
    }
    Ok((Layer { hyperedges }, warnings))
}

/// Node set shared by `L >= 1` hyperedge layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilayerHypergraph {
    n: usize,
    layers: Vec<Layer>,
}

impl MultilayerHypergraph {
    pub fn new(n: usize, layers: Vec<Layer>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("node count must be at least 1".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidParameter("at least one layer is required".into()));
        }
        for layer in &layers {
            for (index, e) in layer.hyperedges.iter().enumerate() {
                if e.nodes.len() < 2 {
                    return Err(Error::EmptyHyperedge(index));
                }
                if !(e.weight.is_finite() && e.weight > 0.0) {
                    return Err(Error::InvalidWeight(e.weight));
                }
                if let Some(&bad) = e.nodes.iter().find(|&&u| u >= n) {
                    return Err(Error::InvalidNode { node: bad as i64, n });
                }
            }
        }
        Ok(Self { n, layers })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn clique_layers(&self) -> Vec<CliqueLayer> {
        self.layers.iter().map(|l| clique_expand(l, self.n)).collect()
    }
}

/// Clique-expanded weighted graph of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueLayer {
    n: usize,
    /// Unordered pairs `(u, v)` with `u < v`, sorted lexicographically.
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    pub degrees: Vec<f64>,
    /// Oriented `(source, tip)` pair per edge.
    pub incidence: Vec<(usize, usize)>,
    /// Incident edge ids per node.
    pub adjacency: Vec<Vec<usize>>,
}

impl CliqueLayer {
    /// Build a clique layer from already aggregated pair weights.
    ///
    /// Pairs may be given in any order; duplicates are summed and `u == v`
    /// entries are rejected.
    pub fn from_pairs(n: usize, pairs: &[((usize, usize), f64)]) -> Result<Self> {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &((a, b), w) in pairs {
            if a >= n || b >= n {
                return Err(Error::InvalidNode {
                    node: a.max(b) as i64,
                    n,
                });
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at node {a}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidWeight(w));
            }
            *acc.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
        }
        Ok(Self::from_sorted(n, acc))
    }

    fn from_sorted(n: usize, acc: BTreeMap<(usize, usize), f64>) -> Self {
        let mut edges = Vec::with_capacity(acc.len());
        let mut weights = Vec::with_capacity(acc.len());
        let mut degrees = vec![0.0; n];
        let mut adjacency = vec![Vec::new(); n];
        for (id, ((u, v), w)) in acc.into_iter().enumerate() {
            edges.push((u, v));
            weights.push(w);
            degrees[u] += w;
            degrees[v] += w;
            adjacency[u].push(id);
            adjacency[v].push(id);
        }
        let incidence = edges.clone();
        Self {
            n,
            edges,
            weights,
            degrees,
            incidence,
            adjacency,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Reverse the orientation of edge `e` in the incidence structure.
    pub fn flip_orientation(&mut self, e: usize) {
        let (s, t) = self.incidence[e];
        self.incidence[e] = (t, s);
    }

    /// Other endpoint of edge `e` seen from `node`.
    #[inline]
    pub fn neighbor(&self, e: usize, node: usize) -> usize {
        let (u, v) = self.edges[e];
        if u == node {
            v
        } else {
            u
        }
    }

    /// `+1` if `node` is the source of edge `e`, `-1` if it is the tip.
    #[inline]
    pub fn orientation_sign(&self, e: usize, node: usize) -> f64 {
        if self.incidence[e].0 == node {
            1.0
        } else {
            -1.0
        }
    }

    /// Largest number of incident edges over all nodes.
    pub fn max_edge_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

/// Expand every hyperedge into a clique with pair weight `w(e) / |e|`.
pub fn clique_expand(layer: &Layer, n: usize) -> CliqueLayer {
    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in &layer.hyperedges {
        let share = e.weight / e.nodes.len() as f64;
        for (a, &u) in e.nodes.iter().enumerate() {
            for &v in &e.nodes[a + 1..] {
                *acc.entry((u.min(v), u.max(v))).or_insert(0.0) += share;
            }
        }
    }
    CliqueLayer::from_sorted(n, acc)
}

/// Nodes with zero degree in the layer, ascending.
pub fn isolated_nodes(layer: &CliqueLayer) -> Vec<usize> {
    layer
        .degrees
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0.0)
        .map(|(u, _)| u)
        .collect()
}

/// Hyperedge-side degree `Σ_{e∋u} w(e)(|e|-1)/|e|`, used to cross-check the
/// clique degrees.
pub fn hyperedge_degrees(layer: &Layer, n: usize) -> Vec<f64> {
    let mut deg = vec![0.0; n];
    for e in &layer.hyperedges {
        let k = e.nodes.len() as f64;
        let share = e.weight * (k - 1.0) / k;
        for &u in &e.nodes {
            deg[u] += share;
        }
    }
    deg
}
