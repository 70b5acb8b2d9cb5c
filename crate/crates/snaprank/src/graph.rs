//! Attributed-graph data model: global graph, snapshots, normalized
//! adjacency, ego networks, conductance, and time-window aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::tensor::SparseMatrix;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge endpoint {vertex} out of range (n = {n})")]
    EndpointOutOfRange { vertex: usize, n: usize },
    #[error("attribute row {row} has {got} columns, expected {expected}")]
    AttrDimMismatch { row: usize, got: usize, expected: usize },
    #[error("edge weight must be nonnegative, got {0}")]
    NegativeWeight(f64),
    #[error("invalid ego center {center} (n = {n})")]
    InvalidCenter { center: usize, n: usize },
    #[error("conductance undefined for empty or full vertex subset")]
    DegenerateCut,
    #[error("edge ({src}, {dst}) has no timestamp; windowing unavailable")]
    MissingTimestamp { src: usize, dst: usize },
    #[error("window length must be positive, got {0}")]
    NonPositiveWindow(i64),
    #[error("snapshot must contain at least one vertex")]
    EmptySnapshot,
    #[error("snapshot edge endpoint {0} not in vertex list")]
    EdgeOutsideSnapshot(usize),
}

/// A weighted edge, optionally timestamped (seconds).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
    pub timestamp: Option<i64>,
}

impl Edge {
    pub fn new(src: usize, dst: usize, weight: f64) -> Self {
        Edge { src, dst, weight, timestamp: None }
    }

    pub fn at(src: usize, dst: usize, weight: f64, timestamp: i64) -> Self {
        Edge { src, dst, weight, timestamp: Some(timestamp) }
    }
}

/// Global attributed graph. Immutable after construction; mutation paths
/// (anomaly injection) produce a modified copy.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    attr_dim: usize,
    edges: Vec<Edge>,
    /// Row-major n×d attribute matrix.
    attrs: Vec<f64>,
    directed: bool,
}

impl Graph {
    /// Builds a graph from edge records and a per-vertex attribute table.
    /// Duplicate (src, dst) pairs accumulate their weights; the first
    /// timestamp seen for a pair is kept.
    pub fn build(
        edge_records: &[Edge],
        attributes: &[Vec<f64>],
        directed: bool,
    ) -> Result<Graph, GraphError> {
        let n = attributes.len();
        let attr_dim = attributes.first().map_or(0, |r| r.len());
        let mut attrs = Vec::with_capacity(n * attr_dim);
        for (row, r) in attributes.iter().enumerate() {
            if r.len() != attr_dim {
                return Err(GraphError::AttrDimMismatch {
                    row,
                    got: r.len(),
                    expected: attr_dim,
                });
            }
            attrs.extend_from_slice(r);
        }
        let mut merged: BTreeMap<(usize, usize), Edge> = BTreeMap::new();
        for e in edge_records {
            for v in [e.src, e.dst] {
                if v >= n {
                    return Err(GraphError::EndpointOutOfRange { vertex: v, n });
                }
            }
            if e.weight < 0.0 {
                return Err(GraphError::NegativeWeight(e.weight));
            }
            merged
                .entry((e.src, e.dst))
                .and_modify(|acc| acc.weight += e.weight)
                .or_insert(*e);
        }
        Ok(Graph {
            n,
            attr_dim,
            edges: merged.into_values().collect(),
            attrs,
            directed,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn attr_dim(&self) -> usize {
        self.attr_dim
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn attr(&self, v: usize) -> &[f64] {
        &self.attrs[v * self.attr_dim..(v + 1) * self.attr_dim]
    }

    /// Flat row-major attribute matrix (n×d).
    pub fn attrs_flat(&self) -> &[f64] {
        &self.attrs
    }

    pub(crate) fn with_extra_edges(&self, extra: Vec<Edge>) -> Result<Graph, GraphError> {
        let mut all = self.edges.clone();
        all.extend(extra);
        let rows: Vec<Vec<f64>> = (0..self.n).map(|v| self.attr(v).to_vec()).collect();
        Graph::build(&all, &rows, self.directed)
    }

    pub(crate) fn with_attr_row(&self, vertex: usize, row: Vec<f64>) -> Graph {
        assert_eq!(row.len(), self.attr_dim);
        let mut g = self.clone();
        let attrs = &mut g.attrs;
        attrs[vertex * self.attr_dim..(vertex + 1) * self.attr_dim].copy_from_slice(&row);
        g
    }

    /// Undirected neighbor lists (direction ignored), sorted, deduplicated.
    pub fn undirected_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.n];
        for e in &self.edges {
            if e.src != e.dst {
                adj[e.src].insert(e.dst);
                adj[e.dst].insert(e.src);
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Per-vertex out-degree as an edge count. For undirected graphs every
    /// incident edge counts as outgoing.
    pub fn out_degrees(&self) -> Vec<usize> {
        out_degrees_of(self.n, &self.edges, self.directed, |v| v)
    }

    /// Weighted degree (sum of incident edge weights, direction ignored).
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for e in &self.edges {
            deg[e.src] += e.weight;
            if e.src != e.dst {
                deg[e.dst] += e.weight;
            }
        }
        deg
    }

    /// Dense symmetric-normalized adjacency D̂^{-1/2}(Â)D̂^{-1/2} with
    /// Â = A + I (directed inputs are symmetrized via A + Aᵀ first).
    pub fn normalized_adjacency(&self) -> Vec<f64> {
        normalized_adjacency_dense(self.n, &self.edges, |v| v)
    }

    /// Same operator in sparse triplet form; nnz is O(|E| + n).
    pub fn normalized_adjacency_sparse(&self) -> SparseMatrix {
        normalized_adjacency_sparse(self.n, &self.edges, |v| v)
    }

    /// Extracts the ego network of `center`: all vertices within `radius`
    /// hops (direction ignored) plus induced edges. The center is the
    /// first vertex of the snapshot.
    pub fn ego_network(&self, center: usize, radius: usize) -> Result<Snapshot, GraphError> {
        if center >= self.n {
            return Err(GraphError::InvalidCenter { center, n: self.n });
        }
        let adj = self.undirected_neighbors();
        let mut dist: HashMap<usize, usize> = HashMap::new();
        let mut order = vec![center];
        dist.insert(center, 0);
        let mut queue = VecDeque::from([center]);
        while let Some(v) = queue.pop_front() {
            let dv = dist[&v];
            if dv == radius {
                continue;
            }
            for &u in &adj[v] {
                if !dist.contains_key(&u) {
                    dist.insert(u, dv + 1);
                    order.push(u);
                    queue.push_back(u);
                }
            }
        }
        self.induced_snapshot(format!("ego{center}r{radius}"), order)
    }

    /// Builds a snapshot over the given vertices, with edges induced from
    /// the global graph and attribute rows copied positionally.
    pub fn induced_snapshot(
        &self,
        id: String,
        vertices: Vec<usize>,
    ) -> Result<Snapshot, GraphError> {
        if let Some(&v) = vertices.iter().find(|&&v| v >= self.n) {
            return Err(GraphError::EndpointOutOfRange { vertex: v, n: self.n });
        }
        let members: BTreeSet<usize> = vertices.iter().copied().collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| members.contains(&e.src) && members.contains(&e.dst))
            .copied()
            .collect();
        let attrs = self.attr_rows(&vertices);
        Snapshot::new(id, vertices, edges, attrs, self.attr_dim, None)
    }

    fn attr_rows(&self, vertices: &[usize]) -> Vec<f64> {
        let mut attrs = Vec::with_capacity(vertices.len() * self.attr_dim);
        for &v in vertices {
            attrs.extend_from_slice(self.attr(v));
        }
        attrs
    }

    /// Conductance of a vertex subset: cut(S) / min(vol(S), vol(V∖S)),
    /// with weighted degrees and edges treated as undirected.
    pub fn conductance(&self, subset: &[usize]) -> Result<f64, GraphError> {
        let members: BTreeSet<usize> = subset.iter().copied().collect();
        if members.is_empty() || members.len() >= self.n {
            return Err(GraphError::DegenerateCut);
        }
        let mut cut = 0.0;
        let mut vol_in = 0.0;
        let mut vol_out = 0.0;
        for e in &self.edges {
            let a = members.contains(&e.src);
            let b = members.contains(&e.dst);
            if a != b {
                cut += e.weight;
            }
            for (v, inside) in [(e.src, a), (e.dst, b)] {
                let _ = v;
                if inside {
                    vol_in += e.weight;
                } else {
                    vol_out += e.weight;
                }
                if e.src == e.dst {
                    break; // self-loop contributes once
                }
            }
        }
        let denom = vol_in.min(vol_out);
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok(cut / denom)
    }

    /// Splits timestamped edges into half-open windows [k·w, (k+1)·w) and
    /// emits one snapshot per nonempty window, in time order. Vertices of
    /// each snapshot are the endpoints seen in that window.
    pub fn aggregate_snapshots(&self, window_seconds: i64) -> Result<Vec<Snapshot>, GraphError> {
        if window_seconds <= 0 {
            return Err(GraphError::NonPositiveWindow(window_seconds));
        }
        let mut windows: BTreeMap<i64, Vec<Edge>> = BTreeMap::new();
        for e in &self.edges {
            let ts = e.timestamp.ok_or(GraphError::MissingTimestamp {
                src: e.src,
                dst: e.dst,
            })?;
            windows.entry(ts.div_euclid(window_seconds)).or_default().push(*e);
        }
        let mut snapshots = Vec::with_capacity(windows.len());
        for (k, edges) in windows {
            let vertices: Vec<usize> = edges
                .iter()
                .flat_map(|e| [e.src, e.dst])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let attrs = self.attr_rows(&vertices);
            snapshots.push(Snapshot::new(
                format!("w{k}"),
                vertices,
                edges,
                attrs,
                self.attr_dim,
                None,
            )?);
        }
        Ok(snapshots)
    }
}

fn out_degrees_of(
    n: usize,
    edges: &[Edge],
    directed: bool,
    map: impl Fn(usize) -> usize,
) -> Vec<usize> {
    let mut deg = vec![0usize; n];
    for e in edges {
        deg[map(e.src)] += 1;
        if !directed && e.src != e.dst {
            deg[map(e.dst)] += 1;
        }
    }
    deg
}

/// Shared normalized-adjacency builder over an edge iterator with a
/// vertex-id remap (identity for the global graph, position map for
/// snapshots). Symmetrizes unconditionally and adds unit self-loops.
fn symmetrized_hat(
    n: usize,
    edges: &[Edge],
    map: impl Fn(usize) -> usize,
) -> BTreeMap<(usize, usize), f64> {
    let mut hat: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in edges {
        let (i, j) = (map(e.src), map(e.dst));
        if i == j {
            *hat.entry((i, i)).or_default() += e.weight;
        } else {
            *hat.entry((i, j)).or_default() += e.weight;
            *hat.entry((j, i)).or_default() += e.weight;
        }
    }
    for i in 0..n {
        *hat.entry((i, i)).or_default() += 1.0; // self-loop
    }
    hat
}

fn normalized_adjacency_dense(
    n: usize,
    edges: &[Edge],
    map: impl Fn(usize) -> usize,
) -> Vec<f64> {
    let hat = symmetrized_hat(n, edges, map);
    let mut deg = vec![0.0; n];
    for (&(i, _), &w) in &hat {
        deg[i] += w;
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut out = vec![0.0; n * n];
    for (&(i, j), &w) in &hat {
        out[i * n + j] = inv_sqrt[i] * w * inv_sqrt[j];
    }
    out
}

fn normalized_adjacency_sparse(
    n: usize,
    edges: &[Edge],
    map: impl Fn(usize) -> usize,
) -> SparseMatrix {
    let hat = symmetrized_hat(n, edges, map);
    let mut deg = vec![0.0; n];
    for (&(i, _), &w) in &hat {
        deg[i] += w;
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let entries = hat
        .into_iter()
        .map(|((i, j), w)| (i, j, inv_sqrt[i] * w * inv_sqrt[j]))
        .collect();
    SparseMatrix { rows: n, cols: n, entries }
}

/// A labeled subgraph: ordered vertex list, edges over those vertices
/// (endpoints keep their global ids), positionally aligned attribute rows,
/// and an optional anomaly label.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub id: String,
    vertices: Vec<usize>,
    edges: Vec<Edge>,
    /// Row-major n_t×d, row i belongs to vertices[i].
    attrs: Vec<f64>,
    attr_dim: usize,
    pub label: Option<bool>,
}

impl Snapshot {
    pub fn new(
        id: String,
        vertices: Vec<usize>,
        edges: Vec<Edge>,
        attrs: Vec<f64>,
        attr_dim: usize,
        label: Option<bool>,
    ) -> Result<Snapshot, GraphError> {
        if vertices.is_empty() {
            return Err(GraphError::EmptySnapshot);
        }
        let members: BTreeSet<usize> = vertices.iter().copied().collect();
        for e in &edges {
            for v in [e.src, e.dst] {
                if !members.contains(&v) {
                    return Err(GraphError::EdgeOutsideSnapshot(v));
                }
            }
        }
        assert_eq!(attrs.len(), vertices.len() * attr_dim, "attribute rows must align with vertices");
        Ok(Snapshot { id, vertices, edges, attrs, attr_dim, label })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn attr_dim(&self) -> usize {
        self.attr_dim
    }

    pub fn attrs_flat(&self) -> &[f64] {
        &self.attrs
    }

    /// Position of each vertex id within this snapshot's ordering.
    fn position_map(&self) -> HashMap<usize, usize> {
        self.vertices
            .iter()
            .enumerate()
            .map(|(pos, &v)| (v, pos))
            .collect()
    }

    /// Dense normalized adjacency over snapshot-local positions.
    pub fn normalized_adjacency(&self) -> Vec<f64> {
        let pos = self.position_map();
        normalized_adjacency_dense(self.vertices.len(), &self.edges, |v| pos[&v])
    }

    pub fn normalized_adjacency_sparse(&self) -> SparseMatrix {
        let pos = self.position_map();
        normalized_adjacency_sparse(self.vertices.len(), &self.edges, |v| pos[&v])
    }

    /// Snapshot-local out-degrees (positionally aligned with vertices).
    pub fn out_degrees(&self, directed: bool) -> Vec<usize> {
        let pos = self.position_map();
        out_degrees_of(self.vertices.len(), &self.edges, directed, |v| pos[&v])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_attrs(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64 + 1.0]).collect()
    }

    #[test]
    fn minimal_graph_builds() {
        let g = Graph::build(&[Edge::new(0, 1, 1.0)], &unit_attrs(2), false).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn duplicate_edges_accumulate_weight() {
        let g = Graph::build(
            &[Edge::new(0, 1, 1.0), Edge::new(0, 1, 1.0)],
            &unit_attrs(2),
            false,
        )
        .unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges()[0].weight, 2.0);
    }

    #[test]
    fn out_of_range_endpoint_rejected() {
        let err = Graph::build(&[Edge::new(0, 5, 1.0)], &unit_attrs(2), false).unwrap_err();
        assert!(matches!(err, GraphError::EndpointOutOfRange { vertex: 5, n: 2 }));
    }

    #[test]
    fn ragged_attributes_rejected() {
        let err = Graph::build(&[], &[vec![1.0], vec![1.0, 2.0]], false).unwrap_err();
        assert!(matches!(err, GraphError::AttrDimMismatch { row: 1, .. }));
    }

    #[test]
    fn normalized_adjacency_isolated_vertex() {
        let g = Graph::build(&[], &unit_attrs(1), false).unwrap();
        assert_eq!(g.normalized_adjacency(), vec![1.0]);
    }

    #[test]
    fn normalized_adjacency_single_edge() {
        let g = Graph::build(&[Edge::new(0, 1, 1.0)], &unit_attrs(2), false).unwrap();
        let m = g.normalized_adjacency();
        for v in m {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_adjacency_path_spot_value() {
        // path 0-1-2: D̂ = diag(2, 3, 2); entry (0,0) = 1/2.
        let g = Graph::build(
            &[Edge::new(0, 1, 1.0), Edge::new(1, 2, 1.0)],
            &unit_attrs(3),
            false,
        )
        .unwrap();
        let m = g.normalized_adjacency();
        assert!((m[0] - 0.5).abs() < 1e-12);
        // symmetry
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i * 3 + j] - m[j * 3 + i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ego_network_star() {
        // star: center 0, leaves 1..=3
        let g = Graph::build(
            &[Edge::new(0, 1, 1.0), Edge::new(0, 2, 1.0), Edge::new(0, 3, 1.0)],
            &unit_attrs(4),
            false,
        )
        .unwrap();
        let whole = g.ego_network(0, 1).unwrap();
        assert_eq!(whole.vertex_count(), 4);
        assert_eq!(whole.edge_count(), 3);
        assert_eq!(whole.vertices()[0], 0);

        let leaf = g.ego_network(1, 1).unwrap();
        assert_eq!(leaf.vertex_count(), 2);
        assert_eq!(leaf.edge_count(), 1);
        assert_eq!(leaf.vertices()[0], 1);
    }

    #[test]
    fn ego_network_radius_zero() {
        let g = Graph::build(&[Edge::new(0, 1, 1.0)], &unit_attrs(2), false).unwrap();
        let s = g.ego_network(1, 0).unwrap();
        assert_eq!(s.vertex_count(), 1);
        assert_eq!(s.edge_count(), 0);
    }

    #[test]
    fn ego_network_bad_center() {
        let g = Graph::build(&[], &unit_attrs(1), false).unwrap();
        assert!(matches!(
            g.ego_network(3, 1),
            Err(GraphError::InvalidCenter { .. })
        ));
    }

    fn two_triangles(bridge: bool) -> Graph {
        let mut edges = vec![
            Edge::new(0, 1, 1.0),
            Edge::new(1, 2, 1.0),
            Edge::new(0, 2, 1.0),
            Edge::new(3, 4, 1.0),
            Edge::new(4, 5, 1.0),
            Edge::new(3, 5, 1.0),
        ];
        if bridge {
            edges.push(Edge::new(2, 3, 1.0));
        }
        Graph::build(&edges, &unit_attrs(6), false).unwrap()
    }

    #[test]
    fn conductance_disjoint_triangles_is_zero() {
        let g = two_triangles(false);
        assert_eq!(g.conductance(&[0, 1, 2]).unwrap(), 0.0);
    }

    #[test]
    fn conductance_bridged_triangles() {
        let g = two_triangles(true);
        // cut = 1, vol(S) = 2+2+3 = 7
        let c = g.conductance(&[0, 1, 2]).unwrap();
        assert!((c - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn conductance_degenerate_subsets_error() {
        let g = two_triangles(true);
        assert!(matches!(g.conductance(&[]), Err(GraphError::DegenerateCut)));
        assert!(matches!(
            g.conductance(&[0, 1, 2, 3, 4, 5]),
            Err(GraphError::DegenerateCut)
        ));
    }

    #[test]
    fn conductance_complement_invariant() {
        let g = two_triangles(true);
        let a = g.conductance(&[0, 1, 2]).unwrap();
        let b = g.conductance(&[3, 4, 5]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn aggregate_windows() {
        let g = Graph::build(
            &[
                Edge::at(0, 1, 1.0, 0),
                Edge::at(1, 2, 1.0, 10),
                Edge::at(0, 2, 1.0, 3700),
            ],
            &unit_attrs(3),
            true,
        )
        .unwrap();
        let snaps = g.aggregate_snapshots(3600).unwrap();
        assert_eq!(snaps.len(), 2);
        assert_eq!(snaps[0].edge_count(), 2);
        assert_eq!(snaps[1].edge_count(), 1);
    }

    #[test]
    fn aggregate_empty_graph() {
        let g = Graph::build(&[], &unit_attrs(2), false).unwrap();
        assert!(g.aggregate_snapshots(60).unwrap().is_empty());
    }

    #[test]
    fn aggregate_single_window_keeps_all_edges() {
        let g = Graph::build(
            &[Edge::at(0, 1, 1.0, 5), Edge::at(1, 2, 1.0, 7)],
            &unit_attrs(3),
            false,
        )
        .unwrap();
        let snaps = g.aggregate_snapshots(100).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].edge_count(), 2);
    }

    #[test]
    fn aggregate_missing_timestamp_errors() {
        let g = Graph::build(
            &[Edge::new(0, 1, 1.0), Edge::at(1, 2, 1.0, 7)],
            &unit_attrs(3),
            false,
        )
        .unwrap();
        assert!(matches!(
            g.aggregate_snapshots(100),
            Err(GraphError::MissingTimestamp { .. })
        ));
    }

    #[test]
    fn snapshot_rejects_outside_edges() {
        let err = Snapshot::new(
            "s".into(),
            vec![0, 1],
            vec![Edge::new(0, 7, 1.0)],
            vec![0.0, 0.0],
            1,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::EdgeOutsideSnapshot(7)));
    }
}
