//! Sparse attributed graphs: storage, validation, normalization, I/O and
//! synthetic generation.

pub(crate) mod features;
mod io;
mod lcc;
pub(crate) mod normalize;
mod synthetic;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use features::{clamp_features, FeatureRange};
pub use io::{load_graph, save_graph, GraphPaths, Splits};
pub use lcc::largest_connected_component;
pub use normalize::{normalize_adjacency, NormalizedAdjacency};
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// Undirected simple graph. Each edge is stored once as `(u, v)` with
/// `u < v`, in ascending order; a symmetric neighbor index is derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

/// What `Adjacency::from_edges` discarded while canonicalizing its input.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeCleanup {
    pub self_loops: Vec<usize>,
    pub duplicates: usize,
}

impl Adjacency {
    /// Symmetrizes, deduplicates and drops self-loops.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<(Self, EdgeCleanup)> {
        let mut cleanup = EdgeCleanup::default();
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) references a node outside [0, {n})"
                )));
            }
            if u == v {
                cleanup.self_loops.push(u);
                continue;
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        let before = canon.len();
        canon.dedup();
        cleanup.duplicates = before - canon.len();
        Ok((Self::from_canonical(n, canon), cleanup))
    }

    /// `edges` must already be sorted, deduplicated, with `u < v < n`.
    fn from_canonical(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        for &(u, v) in &edges {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        for u in 0..n {
            neighbors[offsets[u]..offsets[u + 1]].sort_unstable();
        }
        Adjacency {
            n,
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_canonical(n, Vec::new())
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list, each undirected edge once with `u < v`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Both orientations of every edge.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().flat_map(|&(u, v)| [(u, v), (v, u)])
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Keeps only edges for which `keep(u, v)` holds.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let edges = self.edges.iter().copied().filter(|&(u, v)| keep(u, v)).collect();
        Self::from_canonical(self.n, edges)
    }

    /// Appends `extra` nodes and the given edges; existing edges are untouched.
    pub fn extended(
        &self,
        extra: usize,
        new_edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let (adj, _) = Self::from_edges(
            self.n + extra,
            self.edges.iter().copied().chain(new_edges),
        )?;
        Ok(adj)
    }

    pub fn to_dense<T: Scalar>(&self) -> Array2<T> {
        let mut a = Array2::zeros((self.n, self.n));
        for (u, v) in self.directed_edges() {
            a[[u, v]] = T::one();
        }
        a
    }
}

/// Structure plus node features; the unit every forward pass consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphView<T> {
    pub adjacency: Adjacency,
    pub features: Array2<T>,
}

impl<T: Scalar> GraphView<T> {
    pub fn new(adjacency: Adjacency, features: Array2<T>) -> Result<Self> {
        if features.nrows() != adjacency.n_nodes() {
            return Err(Error::Dimension(format!(
                "{} feature rows for {} nodes",
                features.nrows(),
                adjacency.n_nodes()
            )));
        }
        Ok(GraphView {
            adjacency,
            features,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.n_nodes()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Hex SHA-256 over structure and feature bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        self.hash_into(&mut h);
        hex(&h.finalize())
    }

    fn hash_into(&self, h: &mut Sha256) {
        h.update((self.n_nodes() as u64).to_le_bytes());
        h.update((self.n_features() as u64).to_le_bytes());
        for &(u, v) in self.adjacency.edges() {
            h.update((u as u64).to_le_bytes());
            h.update((v as u64).to_le_bytes());
        }
        for x in self.features.iter() {
            h.update(x.as_f64().to_bits().to_le_bytes());
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A validated node-classification graph with its labeled and target splits.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph<T> {
    view: GraphView<T>,
    labels: Vec<usize>,
    n_classes: usize,
    labeled: Vec<usize>,
    targets: Vec<usize>,
    feature_range: FeatureRange<T>,
    warnings: Vec<String>,
}

impl<T: Scalar> AttributedGraph<T> {
    /// Validates labels and splits and computes the per-dimension feature
    /// range from these (clean) features. Split lists are sorted.
    pub fn new(
        view: GraphView<T>,
        labels: Vec<usize>,
        n_classes: usize,
        mut labeled: Vec<usize>,
        mut targets: Vec<usize>,
    ) -> Result<Self> {
        let n = view.n_nodes();
        if labels.len() != n {
            return Err(Error::Validation(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if let Some((u, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
            return Err(Error::Validation(format!(
                "label {y} of node {u} outside [0, {n_classes})"
            )));
        }
        labeled.sort_unstable();
        labeled.dedup();
        targets.sort_unstable();
        targets.dedup();
        for (name, set) in [("labeled", &labeled), ("targets", &targets)] {
            if let Some(&u) = set.iter().find(|&&u| u >= n) {
                return Err(Error::Validation(format!(
                    "{name} index {u} outside [0, {n})"
                )));
            }
        }
        if let Some(u) = labeled.iter().find(|u| targets.binary_search(u).is_ok()) {
            return Err(Error::Validation(format!(
                "node {u} is both labeled and a target"
            )));
        }
        let feature_range = FeatureRange::from_features(view.features.view());
        Ok(AttributedGraph {
            view,
            labels,
            n_classes,
            labeled,
            targets,
            feature_range,
            warnings: Vec::new(),
        })
    }

    pub(crate) fn with_warnings(mut self, warnings: Vec<String>) -> Self {
        self.warnings = warnings;
        self
    }

    pub fn view(&self) -> &GraphView<T> {
        &self.view
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.view.adjacency
    }

    pub fn features(&self) -> &Array2<T> {
        &self.view.features
    }

    pub fn n_nodes(&self) -> usize {
        self.view.n_nodes()
    }

    pub fn n_edges(&self) -> usize {
        self.view.adjacency.n_edges()
    }

    pub fn n_features(&self) -> usize {
        self.view.n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn labeled_set(&self) -> &[usize] {
        &self.labeled
    }

    pub fn target_set(&self) -> &[usize] {
        &self.targets
    }

    pub fn feature_range(&self) -> &FeatureRange<T> {
        &self.feature_range
    }

    /// Non-fatal issues recorded while loading (dropped self-loops, duplicates).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Edges per node, `E / N`.
    pub fn average_degree(&self) -> f64 {
        self.n_edges() as f64 / self.n_nodes() as f64
    }

    /// Same graph with a different target split.
    pub fn with_targets(&self, targets: Vec<usize>) -> Result<Self> {
        let warnings = self.warnings.clone();
        Ok(Self::new(
            self.view.clone(),
            self.labels.clone(),
            self.n_classes,
            self.labeled.clone(),
            targets,
        )?
        .with_warnings(warnings))
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        self.view.hash_into(&mut h);
        for &y in &self.labels {
            h.update((y as u64).to_le_bytes());
        }
        hex(&h.finalize())
    }

    /// Whether every node is reachable from node 0.
    pub fn is_connected(&self) -> bool {
        lcc::components(self.adjacency())
            .iter()
            .all(|&c| c == 0)
    }
}
