//! Ranking evaluation: precision/recall at K, k-fold cross-validation,
//! baseline score aggregation, and the fold harness that ties training and
//! ranking together.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::LabeledCorpus;
use crate::graph::Snapshot;
use crate::model::{self, ArchitectureConfig};
use crate::trainer::{self, TrainConfig, TrainError};
use crate::tensor::SeedRng;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("K = {k} exceeds ranking length {len}")]
    KTooLarge { k: usize, len: usize },
    #[error("truth set contains no positive")]
    NoPositives,
    #[error("fold count {folds} exceeds item count {items}")]
    TooManyFolds { folds: usize, items: usize },
    #[error("likelihood {0} outside (0, 1]")]
    BadLikelihood(f64),
    #[error("weight {0} must be positive")]
    BadWeight(f64),
    #[error("corpus contains unlabeled snapshots")]
    UnlabeledCorpus,
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, EvalError>;

/// precision@K and recall@K of a ranking against a truth map.
pub fn precision_recall_at_k(
    ranking: &[String],
    truth: &HashMap<String, bool>,
    k: usize,
) -> Result<(f64, f64)> {
    if k > ranking.len() {
        return Err(EvalError::KTooLarge { k, len: ranking.len() });
    }
    let total_positives = truth.values().filter(|&&v| v).count();
    if total_positives == 0 {
        return Err(EvalError::NoPositives);
    }
    let hits = ranking[..k]
        .iter()
        .filter(|id| truth.get(*id).copied().unwrap_or(false))
        .count();
    Ok((
        hits as f64 / k as f64,
        hits as f64 / total_positives as f64,
    ))
}

/// Seeded k-fold split: disjoint test sets covering all ids, sizes
/// differing by at most one.
pub fn kfold_split(
    ids: &[String],
    folds: usize,
    seed: u64,
) -> Result<Vec<(Vec<String>, Vec<String>)>> {
    if folds == 0 || folds > ids.len() {
        return Err(EvalError::TooManyFolds { folds, items: ids.len() });
    }
    let mut shuffled = ids.to_vec();
    let mut rng = SeedRng::seed_from_u64(seed);
    for i in 0..shuffled.len().saturating_sub(1) {
        let j = rng.gen_range(i..shuffled.len());
        shuffled.swap(i, j);
    }
    let mut splits = Vec::with_capacity(folds);
    for f in 0..folds {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, id) in shuffled.iter().enumerate() {
            if i % folds == f {
                test.push(id.clone());
            } else {
                train.push(id.clone());
            }
        }
        splits.push((train, test));
    }
    Ok(splits)
}

/// Per-node aggregation used by node-scoring baselines:
/// anomalyScore = −log Π ℓ(v) = −Σ log ℓ(v), computed in log space.
pub fn aggregate_node_scores(per_node_likelihoods: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for &l in per_node_likelihoods {
        if !(l > 0.0 && l <= 1.0) {
            return Err(EvalError::BadLikelihood(l));
        }
        acc -= l.ln();
    }
    Ok(acc)
}

/// Per-edge aggregation used by edge-scoring baselines: −log of the
/// weighted geometric mean (Π ℓ(e)^w)^{1/W}, in log space.
pub fn aggregate_edge_scores(per_edge_likelihoods: &[f64], weights: &[f64]) -> Result<f64> {
    assert_eq!(per_edge_likelihoods.len(), weights.len());
    let mut num = 0.0;
    let mut total_weight = 0.0;
    for (&l, &w) in per_edge_likelihoods.iter().zip(weights) {
        if !(l > 0.0 && l <= 1.0) {
            return Err(EvalError::BadLikelihood(l));
        }
        if w <= 0.0 {
            return Err(EvalError::BadWeight(w));
        }
        num += w * l.ln();
        total_weight += w;
    }
    if total_weight == 0.0 {
        return Ok(0.0);
    }
    Ok(-num / total_weight)
}

/// Sorts (id, score) pairs into a ranking: score descending, ties broken
/// by id ascending for reproducibility.
pub fn rank_by_score(mut scored: Vec<(String, f64)>) -> Vec<(String, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}

/// Random ranking baseline (seeded).
pub fn random_ranking(ids: &[String], seed: u64) -> Vec<(String, f64)> {
    let mut rng = SeedRng::seed_from_u64(seed);
    rank_by_score(ids.iter().map(|id| (id.clone(), rng.gen::<f64>())).collect())
}

/// Degree-sum ranking baseline: score = total out-degree of the
/// snapshot's vertices in the global graph.
pub fn degree_sum_ranking(corpus: &LabeledCorpus, snapshots: &[&Snapshot]) -> Vec<(String, f64)> {
    let degrees = corpus.graph.out_degrees();
    rank_by_score(
        snapshots
            .iter()
            .map(|s| {
                let d: usize = s.vertices().iter().map(|&v| degrees[v]).sum();
                (s.id.clone(), d as f64)
            })
            .collect(),
    )
}

/// How the trained model ranks snapshots during evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankingMode {
    /// Generator argmax scores (the full adversarial model).
    Generator,
    /// Discriminator probabilities (the ablation).
    DiscriminatorOnly,
}

/// Options for the fold harness.
#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub mode: RankingMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            ks: vec![10, 20, 50],
            folds: 10,
            seed: 0,
            mode: RankingMode::Generator,
        }
    }
}

/// One (fold, K) metrics row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricRow {
    pub fold: usize,
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Ranked test set of one fold with its metrics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankedResult {
    pub fold: usize,
    /// (snapshot id, score), scores non-increasing.
    pub ranking: Vec<(String, f64)>,
    pub metrics: Vec<MetricRow>,
}

/// Mean and standard deviation across folds for one K.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KSummary {
    pub k: usize,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub folds: Vec<RankedResult>,
    pub summary: Vec<KSummary>,
    /// Folds whose test set held no positive (metrics undefined there).
    pub skipped_folds: Vec<usize>,
}

/// Ranks a snapshot pool with a trained state.
pub fn rank_snapshots(
    state: &trainer::TrainState,
    corpus: &LabeledCorpus,
    snapshots: &[&Snapshot],
    mode: RankingMode,
) -> Result<Vec<(String, f64)>> {
    let scored = match mode {
        RankingMode::Generator => {
            let pool: Vec<Snapshot> = snapshots.iter().map(|s| (*s).clone()).collect();
            let probs = model::generator_distribution(&state.generator, &pool, &corpus.graph)?;
            snapshots
                .iter()
                .zip(probs)
                .map(|(s, p)| (s.id.clone(), p))
                .collect()
        }
        RankingMode::DiscriminatorOnly => {
            let mut scored = Vec::with_capacity(snapshots.len());
            for s in snapshots {
                let p = model::discriminator_probability(
                    &state.discriminator,
                    s,
                    corpus.graph.is_directed(),
                )?;
                scored.push((s.id.clone(), p));
            }
            scored
        }
    };
    Ok(rank_by_score(scored))
}

/// Per-fold training plus ranking of the held-out test set. Ks larger
/// than a fold's test set are clamped to the test size.
pub fn evaluate(
    corpus: &LabeledCorpus,
    train_cfg: &TrainConfig,
    arch: &ArchitectureConfig,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if corpus.snapshots.iter().any(|s| s.label.is_none()) {
        return Err(EvalError::UnlabeledCorpus);
    }
    let by_id: HashMap<&str, &Snapshot> = corpus
        .snapshots
        .iter()
        .map(|s| (s.id.as_str(), s))
        .collect();
    let ids: Vec<String> = corpus.snapshots.iter().map(|s| s.id.clone()).collect();
    let splits = kfold_split(&ids, opts.folds, opts.seed)?;

    let mut folds = Vec::new();
    let mut skipped = Vec::new();
    for (fold, (train_ids, test_ids)) in splits.iter().enumerate() {
        let train_pool: Vec<Snapshot> = train_ids
            .iter()
            .map(|id| by_id[id.as_str()].clone())
            .collect();
        let test_pool: Vec<&Snapshot> = test_ids.iter().map(|id| by_id[id.as_str()]).collect();
        let truth: HashMap<String, bool> = test_pool
            .iter()
            .map(|s| (s.id.clone(), s.label == Some(true)))
            .collect();
        if !truth.values().any(|&v| v) || !train_pool.iter().any(|s| s.label == Some(true)) {
            skipped.push(fold);
            continue;
        }
        let mut fold_cfg = train_cfg.clone();
        fold_cfg.seed = train_cfg.seed.wrapping_add(fold as u64);
        fold_cfg.sample_count = fold_cfg.sample_count.min(train_pool.len());
        if opts.mode == RankingMode::DiscriminatorOnly {
            fold_cfg.disc_only = true;
        }
        let state = trainer::train(&train_pool, &corpus.graph, &fold_cfg, arch, None)?;
        let ranking = rank_snapshots(&state, corpus, &test_pool, opts.mode)?;
        let ranked_ids: Vec<String> = ranking.iter().map(|(id, _)| id.clone()).collect();
        let mut metrics = Vec::new();
        for &k in &opts.ks {
            let k = k.min(ranked_ids.len());
            if k == 0 {
                continue;
            }
            let (p, r) = precision_recall_at_k(&ranked_ids, &truth, k)?;
            metrics.push(MetricRow { fold, k, precision: p, recall: r });
        }
        folds.push(RankedResult { fold, ranking, metrics });
    }
    let summary = summarize(&folds, &opts.ks);
    Ok(EvalReport { folds, summary, skipped_folds: skipped })
}

fn summarize(folds: &[RankedResult], ks: &[usize]) -> Vec<KSummary> {
    let mut summary = Vec::new();
    for &k in ks {
        let rows: Vec<&MetricRow> = folds
            .iter()
            .flat_map(|f| f.metrics.iter())
            .filter(|m| {
                // rows may have been clamped; bucket by requested K
                m.k == k || (m.k < k && folds.iter().all(|f| f.ranking.len() < k))
            })
            .collect();
        if rows.is_empty() {
            continue;
        }
        let (pm, ps) = mean_std(rows.iter().map(|m| m.precision));
        let (rm, rs) = mean_std(rows.iter().map(|m| m.recall));
        summary.push(KSummary {
            k,
            precision_mean: pm,
            precision_std: ps,
            recall_mean: rm,
            recall_std: rs,
        });
    }
    summary
}

pub fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let vals: Vec<f64> = values.collect();
    if vals.is_empty() {
        return (0.0, 0.0);
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    (mean, var.sqrt())
}

/// Writes the report as line-delimited JSON (one record per fold plus a
/// summary record) and a plot-ready CSV metrics table.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut jsonl = std::fs::File::create(dir.join("report.jsonl"))?;
    for fold in &report.folds {
        writeln!(jsonl, "{}", serde_json::to_string(fold).expect("serializable"))?;
    }
    writeln!(
        jsonl,
        "{}",
        serde_json::to_string(&serde_json::json!({
            "summary": report.summary,
            "skipped_folds": report.skipped_folds,
        }))
        .expect("serializable")
    )?;
    let mut csv = std::fs::File::create(dir.join("metrics.csv"))?;
    writeln!(csv, "fold,k,precision,recall")?;
    for fold in &report.folds {
        for m in &fold.metrics {
            writeln!(csv, "{},{},{},{}", m.fold, m.k, m.precision, m.recall)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(pairs: &[(&str, bool)]) -> HashMap<String, bool> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn precision_recall_basic() {
        let ranking = ids(&["a", "b", "c", "d"]);
        let t = truth(&[("a", true), ("b", false), ("c", true), ("d", false)]);
        let (p, r) = precision_recall_at_k(&ranking, &t, 2).unwrap();
        assert_eq!((p, r), (0.5, 0.5));
    }

    #[test]
    fn perfect_ranking_hits_one() {
        let ranking = ids(&["a", "c", "b", "d"]);
        let t = truth(&[("a", true), ("c", true), ("b", false), ("d", false)]);
        let (p, r) = precision_recall_at_k(&ranking, &t, 2).unwrap();
        assert_eq!((p, r), (1.0, 1.0));
    }

    #[test]
    fn full_length_k_gives_full_recall() {
        let ranking = ids(&["a", "b", "c"]);
        let t = truth(&[("a", false), ("b", true), ("c", true)]);
        let (_, r) = precision_recall_at_k(&ranking, &t, 3).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn no_positives_is_error() {
        let ranking = ids(&["a"]);
        let t = truth(&[("a", false)]);
        assert!(matches!(
            precision_recall_at_k(&ranking, &t, 1),
            Err(EvalError::NoPositives)
        ));
    }

    #[test]
    fn hit_counts_agree_between_precision_and_recall() {
        // precision·K and recall·P are the same integer hit count
        let ranking = ids(&["a", "b", "c", "d", "e"]);
        let t = truth(&[
            ("a", true),
            ("b", false),
            ("c", true),
            ("d", true),
            ("e", false),
        ]);
        for k in 1..=5 {
            let (p, r) = precision_recall_at_k(&ranking, &t, k).unwrap();
            let hits_p = p * k as f64;
            let hits_r = r * 3.0;
            assert!((hits_p - hits_p.round()).abs() < 1e-9);
            assert!((hits_p - hits_r).abs() < 1e-9);
        }
    }

    #[test]
    fn kfold_covers_everything() {
        let items: Vec<String> = (0..23).map(|i| format!("s{i}")).collect();
        let splits = kfold_split(&items, 10, 3).unwrap();
        assert_eq!(splits.len(), 10);
        let mut seen: Vec<String> = splits.iter().flat_map(|(_, t)| t.clone()).collect();
        seen.sort();
        let mut want = items.clone();
        want.sort();
        assert_eq!(seen, want);
        let sizes: Vec<usize> = splits.iter().map(|(_, t)| t.len()).collect();
        let min = *sizes.iter().min().unwrap();
        let max = *sizes.iter().max().unwrap();
        assert!(max - min <= 1);
    }

    #[test]
    fn kfold_singletons() {
        let items: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let splits = kfold_split(&items, 10, 0).unwrap();
        assert!(splits.iter().all(|(_, t)| t.len() == 1));
    }

    #[test]
    fn kfold_deterministic() {
        let items: Vec<String> = (0..12).map(|i| format!("s{i}")).collect();
        assert_eq!(
            kfold_split(&items, 4, 9).unwrap(),
            kfold_split(&items, 4, 9).unwrap()
        );
    }

    #[test]
    fn node_aggregation_log_space() {
        let s = aggregate_node_scores(&[0.5, 0.5]).unwrap();
        assert!((s - 0.25f64.ln().abs()).abs() < 1e-12);
        assert_eq!(aggregate_node_scores(&[1.0, 1.0]).unwrap(), 0.0);
        assert!(aggregate_node_scores(&[0.0]).is_err());
    }

    #[test]
    fn edge_aggregation_weighted_geometric_mean() {
        let s = aggregate_edge_scores(&[0.25, 1.0], &[1.0, 1.0]).unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-12);
        // single edge: weight cancels
        let s = aggregate_edge_scores(&[0.3], &[7.0]).unwrap();
        assert!((s + 0.3f64.ln()).abs() < 1e-12);
        assert_eq!(aggregate_edge_scores(&[1.0, 1.0], &[2.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn log_space_matches_naive_product() {
        let likes = [0.9, 0.8, 0.7, 0.6, 0.5];
        let naive = -likes.iter().product::<f64>().ln();
        let logspace = aggregate_node_scores(&likes).unwrap();
        assert!((naive - logspace).abs() < 1e-9);
    }

    #[test]
    fn ranking_ties_break_by_id() {
        let ranked = rank_by_score(vec![
            ("b".into(), 1.0),
            ("a".into(), 1.0),
            ("c".into(), 2.0),
        ]);
        let ids: Vec<&str> = ranked.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, vec!["c", "a", "b"]);
    }

    #[test]
    fn oracle_scorer_gives_expected_precision() {
        // score = label: all positives rank first
        let mut scored = Vec::new();
        for i in 0..20 {
            let label = i < 6;
            scored.push((format!("s{i:02}"), if label { 1.0 } else { 0.0 }));
        }
        let ranking: Vec<String> = rank_by_score(scored.clone())
            .into_iter()
            .map(|(id, _)| id)
            .collect();
        let t: HashMap<String, bool> = (0..20).map(|i| (format!("s{i:02}"), i < 6)).collect();
        for k in [3, 6, 10] {
            let (p, _) = precision_recall_at_k(&ranking, &t, k).unwrap();
            let expected = (6.0f64).min(k as f64) / k as f64;
            assert!((p - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn random_scorer_precision_near_positive_rate() {
        // Monte-Carlo: on a balanced corpus, precision@K of a random
        // ranker concentrates near the positive rate
        let t: HashMap<String, bool> = (0..40).map(|i| (format!("s{i:02}"), i % 2 == 0)).collect();
        let ids: Vec<String> = (0..40).map(|i| format!("s{i:02}")).collect();
        let mut acc = 0.0;
        let trials = 2000;
        for seed in 0..trials {
            let ranking: Vec<String> = random_ranking(&ids, seed)
                .into_iter()
                .map(|(id, _)| id)
                .collect();
            let (p, _) = precision_recall_at_k(&ranking, &t, 10).unwrap();
            acc += p;
        }
        let mean = acc / trials as f64;
        assert!((mean - 0.5).abs() < 0.02, "random precision {mean}");
    }
}
