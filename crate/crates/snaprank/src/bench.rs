//! Benchmark construction: normal-snapshot selection by conductance,
//! structural (clique) and attribute (max-dissimilarity) anomaly
//! injection, and the edge-count label rule.

use std::collections::BTreeSet;

use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, Graph, GraphError, Snapshot};
use crate::tensor::SeedRng;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("clique size {clique} exceeds snapshot size {snapshot}")]
    CliqueTooLarge { clique: usize, snapshot: usize },
    #[error("attribute injection needs at least one node")]
    EmptyInjection,
    #[error("attribute injection needs a positive attribute dimension")]
    NoAttributes,
    #[error("requested {requested} snapshots but only {available} candidates")]
    NotEnoughCandidates { requested: usize, available: usize },
    #[error("candidate covers the whole vertex set; conductance undefined")]
    FullCoverCandidate,
}

/// How attribute dissimilarity is measured when picking the replacement
/// donor vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dissimilarity {
    Euclidean,
    Cosine,
}

/// Parameters of a synthetic injected corpus.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct InjectionSpec {
    pub n_normal: usize,
    pub n_struct_anomalies: usize,
    pub clique_size: usize,
    pub n_attr_anomalies: usize,
    pub nodes_per_attr_anomaly: usize,
    pub dissimilarity: Dissimilarity,
    pub seed: u64,
    /// Ego-network candidates to sample before normal selection; 0 means
    /// 2× the total snapshot count.
    pub candidate_count: usize,
    pub ego_radius: usize,
}

impl Default for InjectionSpec {
    fn default() -> Self {
        InjectionSpec {
            n_normal: 90,
            n_struct_anomalies: 5,
            clique_size: 8,
            n_attr_anomalies: 5,
            nodes_per_attr_anomaly: 5,
            dissimilarity: Dissimilarity::Euclidean,
            seed: 0,
            candidate_count: 0,
            ego_radius: 1,
        }
    }
}

/// Where a label-1 snapshot came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    CliqueInjection { snapshot_id: String, vertices: Vec<usize> },
    AttributeInjection { snapshot_id: String, vertices: Vec<usize> },
    EdgeCountRule { snapshot_id: String, edges: usize },
}

impl Provenance {
    pub fn snapshot_id(&self) -> &str {
        match self {
            Provenance::CliqueInjection { snapshot_id, .. }
            | Provenance::AttributeInjection { snapshot_id, .. }
            | Provenance::EdgeCountRule { snapshot_id, .. } => snapshot_id,
        }
    }
}

/// A fully labeled snapshot corpus plus the graph it lives on and the
/// provenance of every positive label.
#[derive(Clone, Debug)]
pub struct LabeledCorpus {
    pub graph: Graph,
    pub snapshots: Vec<Snapshot>,
    pub provenance: Vec<Provenance>,
}

/// Returns the `count` candidates with the lowest conductance inside the
/// global graph, ties broken by snapshot id.
pub fn select_normal_snapshots(
    graph: &Graph,
    candidates: &[Snapshot],
    count: usize,
) -> Result<Vec<Snapshot>, BenchError> {
    if count > candidates.len() {
        return Err(BenchError::NotEnoughCandidates {
            requested: count,
            available: candidates.len(),
        });
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for s in candidates {
        let c = match graph.conductance(s.vertices()) {
            Ok(c) => c,
            Err(GraphError::DegenerateCut) => return Err(BenchError::FullCoverCandidate),
            Err(e) => return Err(e.into()),
        };
        scored.push((c, s.clone()));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    Ok(scored.into_iter().take(count).map(|(_, s)| s).collect())
}

/// Plants a clique on `clique_size` vertices of the snapshot: every
/// missing pairwise connection gets a weight-1 edge in both the graph and
/// the snapshot. Returns the modified pair, labeled anomalous.
pub fn inject_structural(
    graph: &Graph,
    snapshot: &Snapshot,
    clique_size: usize,
    rng: &mut SeedRng,
) -> Result<(Graph, Snapshot, Vec<usize>), BenchError> {
    if clique_size > snapshot.vertex_count() {
        return Err(BenchError::CliqueTooLarge {
            clique: clique_size,
            snapshot: snapshot.vertex_count(),
        });
    }
    let mut chosen = snapshot.vertices().to_vec();
    partial_shuffle(&mut chosen, clique_size, rng);
    chosen.truncate(clique_size);
    chosen.sort_unstable();

    let connected: BTreeSet<(usize, usize)> = graph
        .edges()
        .iter()
        .map(|e| (e.src.min(e.dst), e.src.max(e.dst)))
        .collect();
    let timestamp = median_timestamp(snapshot.edges());
    let mut extra = Vec::new();
    for (i, &a) in chosen.iter().enumerate() {
        for &b in &chosen[i + 1..] {
            if !connected.contains(&(a, b)) {
                extra.push(Edge { src: a, dst: b, weight: 1.0, timestamp });
            }
        }
    }
    let new_graph = graph.with_extra_edges(extra)?;
    let mut new_snap = new_graph.induced_snapshot(snapshot.id.clone(), snapshot.vertices().to_vec())?;
    new_snap.label = Some(true);
    Ok((new_graph, new_snap, chosen))
}

fn median_timestamp(edges: &[Edge]) -> Option<i64> {
    let mut ts: Vec<i64> = edges.iter().filter_map(|e| e.timestamp).collect();
    if ts.len() < edges.len() || ts.is_empty() {
        return None;
    }
    ts.sort_unstable();
    Some(ts[ts.len() / 2])
}

fn distance(a: &[f64], b: &[f64], metric: Dissimilarity) -> f64 {
    match metric {
        Dissimilarity::Euclidean => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        Dissimilarity::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                1.0 - dot / (na * nb)
            }
        }
    }
}

/// The donor vertex for attribute replacement: argmax of attribute
/// dissimilarity over all graph vertices, ties by vertex index.
pub fn most_dissimilar_vertex(graph: &Graph, vertex: usize, metric: Dissimilarity) -> usize {
    let base = graph.attr(vertex);
    let mut best = (0usize, f64::NEG_INFINITY);
    for u in 0..graph.vertex_count() {
        let d = distance(base, graph.attr(u), metric);
        if d > best.1 {
            best = (u, d);
        }
    }
    best.0
}

/// Replaces the attributes of `node_count` sampled snapshot vertices with
/// the attributes of their most dissimilar vertex in the whole graph.
pub fn inject_attribute(
    graph: &Graph,
    snapshot: &Snapshot,
    node_count: usize,
    metric: Dissimilarity,
    rng: &mut SeedRng,
) -> Result<(Graph, Snapshot, Vec<usize>), BenchError> {
    if node_count == 0 {
        return Err(BenchError::EmptyInjection);
    }
    if graph.attr_dim() == 0 {
        return Err(BenchError::NoAttributes);
    }
    let node_count = node_count.min(snapshot.vertex_count());
    let mut chosen = snapshot.vertices().to_vec();
    partial_shuffle(&mut chosen, node_count, rng);
    chosen.truncate(node_count);
    chosen.sort_unstable();

    let mut new_graph = graph.clone();
    for &v in &chosen {
        let donor = most_dissimilar_vertex(&new_graph, v, metric);
        new_graph = new_graph.with_attr_row(v, new_graph.attr(donor).to_vec());
    }
    let mut new_snap = new_graph.induced_snapshot(snapshot.id.clone(), snapshot.vertices().to_vec())?;
    new_snap.label = Some(true);
    Ok((new_graph, new_snap, chosen))
}

/// Labels each snapshot anomalous iff its edge count reaches `threshold`.
pub fn label_by_edge_count(
    graph: Graph,
    mut snapshots: Vec<Snapshot>,
    threshold: usize,
) -> LabeledCorpus {
    let mut provenance = Vec::new();
    for s in &mut snapshots {
        let anomalous = s.edge_count() >= threshold;
        s.label = Some(anomalous);
        if anomalous {
            provenance.push(Provenance::EdgeCountRule {
                snapshot_id: s.id.clone(),
                edges: s.edge_count(),
            });
        }
    }
    LabeledCorpus { graph, snapshots, provenance }
}

/// Builds a fully synthetic corpus: samples ego-network candidates, keeps
/// the lowest-conductance ones as the working set, injects clique and
/// attribute anomalies into disjoint subsets, labels the rest normal, and
/// shuffles. Deterministic given the spec's seed.
pub fn build_injected_corpus(graph: &Graph, spec: &InjectionSpec) -> Result<LabeledCorpus, BenchError> {
    let total = spec.n_normal + spec.n_struct_anomalies + spec.n_attr_anomalies;
    let mut rng = SeedRng::seed_from_u64(spec.seed);
    let candidate_count = if spec.candidate_count == 0 {
        (2 * total).min(graph.vertex_count())
    } else {
        spec.candidate_count.min(graph.vertex_count())
    };
    let mut centers: Vec<usize> = (0..graph.vertex_count()).collect();
    partial_shuffle(&mut centers, candidate_count, &mut rng);
    centers.truncate(candidate_count);

    let mut candidates = Vec::with_capacity(candidate_count);
    for c in centers {
        let snap = graph.ego_network(c, spec.ego_radius)?;
        if snap.vertex_count() < graph.vertex_count() {
            candidates.push(snap);
        }
    }
    let mut selected = select_normal_snapshots(graph, &candidates, total)?;

    // injection targets: first the cliques, then the attribute anomalies
    let mut current = graph.clone();
    let mut provenance = Vec::new();
    for i in 0..spec.n_struct_anomalies {
        let snap = &selected[i];
        let size = spec.clique_size.min(snap.vertex_count());
        let (g, s, vertices) = inject_structural(&current, snap, size, &mut rng)?;
        provenance.push(Provenance::CliqueInjection {
            snapshot_id: s.id.clone(),
            vertices,
        });
        current = g;
        selected[i] = s;
    }
    for i in spec.n_struct_anomalies..spec.n_struct_anomalies + spec.n_attr_anomalies {
        let snap = &selected[i];
        let (g, s, vertices) = inject_attribute(
            &current,
            snap,
            spec.nodes_per_attr_anomaly,
            spec.dissimilarity,
            &mut rng,
        )?;
        provenance.push(Provenance::AttributeInjection {
            snapshot_id: s.id.clone(),
            vertices,
        });
        current = g;
        selected[i] = s;
    }

    // rebuild every snapshot against the final graph so shared vertices
    // see the injected edges and attributes consistently
    let mut snapshots = Vec::with_capacity(selected.len());
    for (i, s) in selected.into_iter().enumerate() {
        let injected = i < spec.n_struct_anomalies + spec.n_attr_anomalies;
        let mut rebuilt = current.induced_snapshot(s.id.clone(), s.vertices().to_vec())?;
        rebuilt.label = Some(injected);
        snapshots.push(rebuilt);
    }
    shuffle(&mut snapshots, &mut rng);
    Ok(LabeledCorpus {
        graph: current,
        snapshots,
        provenance,
    })
}

fn partial_shuffle<T>(items: &mut [T], k: usize, rng: &mut SeedRng) {
    let n = items.len();
    for i in 0..k.min(n.saturating_sub(1)) {
        let j = rng.gen_range(i..n);
        items.swap(i, j);
    }
}

fn shuffle<T>(items: &mut [T], rng: &mut SeedRng) {
    let n = items.len();
    partial_shuffle(items, n, rng);
}
