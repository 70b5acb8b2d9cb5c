//! Minimax training loop: discriminator maximization against generator
//! samples, generator updates via the score-function (REINFORCE)
//! estimator with a softplus reward.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, Snapshot};
use crate::model::{
    self, generator_distribution_traced, snapshot_score_local, ArchitectureConfig, HeadKind,
    ModelError, ModelParams,
};
use crate::tensor::{self, backward, Mode, SeedRng, Tape, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("pool contains no labeled anomalous snapshot")]
    NoAnomalousLabels,
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("sample count {k} exceeds pool size {pool}")]
    SampleCountTooLarge { k: usize, pool: usize },
    #[error("generator distribution contains NaN")]
    DegenerateDistribution,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Persist(#[from] model::PersistError),
}

type Result<T> = std::result::Result<T, TrainError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Training hyperparameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Snapshots sampled per generator step (the K of the estimator).
    pub sample_count: usize,
    pub generator_epochs: usize,
    pub discriminator_epochs: usize,
    /// Gradient steps per player per alternation round.
    pub inner_steps: usize,
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Train the discriminator against uniform negatives and skip the
    /// generator entirely (the ablation).
    pub disc_only: bool,
    /// Sample generator draws with replacement instead of the default
    /// renormalized without-replacement draws.
    pub with_replacement: bool,
    /// Constant reward baseline subtracted in the estimator (off by
    /// default; the raw estimator is the reference behavior).
    pub reward_baseline: Option<f64>,
    /// Checkpoint cadence in rounds; 0 disables intermediate checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            sample_count: 16,
            generator_epochs: 100,
            discriminator_epochs: 60,
            // several steps per round compensate for the high variance of the
            // score-function estimator under Adam's per-coordinate scaling
            inner_steps: 10,
            generator_lr: 1e-3,
            discriminator_lr: 1e-3,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            disc_only: false,
            with_replacement: false,
            reward_baseline: None,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self, pool_size: usize) -> Result<()> {
        if self.sample_count < 1 || self.sample_count > pool_size {
            return Err(TrainError::SampleCountTooLarge {
                k: self.sample_count,
                pool: pool_size,
            });
        }
        if self.generator_lr <= 0.0 || self.discriminator_lr <= 0.0 {
            return Err(TrainError::BadConfig("learning rates must be positive".into()));
        }
        if self.inner_steps < 1 {
            return Err(TrainError::BadConfig("inner_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer over a parameter set (also covers plain SGD).
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
        Optimizer {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Applies one descent step along `grads` (one slice per tensor).
    pub fn apply(&mut self, params: &mut ModelParams, grads: &[Vec<f64>]) {
        self.step += 1;
        for (ti, tensor) in params.tensors.iter_mut().enumerate() {
            let g = &grads[ti];
            match self.kind {
                OptimizerKind::Sgd => {
                    for (p, gv) in tensor.data.iter_mut().zip(g) {
                        *p -= self.lr * gv;
                    }
                }
                OptimizerKind::Adam => {
                    let bc1 = 1.0 - self.beta1.powi(self.step as i32);
                    let bc2 = 1.0 - self.beta2.powi(self.step as i32);
                    for (i, (p, gv)) in tensor.data.iter_mut().zip(g).enumerate() {
                        let m = &mut self.m[ti][i];
                        let v = &mut self.v[ti][i];
                        *m = self.beta1 * *m + (1.0 - self.beta1) * gv;
                        *v = self.beta2 * *v + (1.0 - self.beta2) * gv * gv;
                        let mhat = *m / bc1;
                        let vhat = *v / bc2;
                        *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
                    }
                }
            }
        }
    }
}

/// Extracts per-parameter gradients in tensor order, zero-filling
/// parameters the output did not reach.
fn collect_grads(
    bound: &model::BoundParams,
    params: &ModelParams,
    grads: &tensor::Gradients,
) -> Vec<Vec<f64>> {
    bound
        .tensors
        .iter()
        .zip(&params.tensors)
        .map(|(t, named)| {
            t.grad(grads)
                .map(|g| g.to_vec())
                .unwrap_or_else(|| vec![0.0; named.data.len()])
        })
        .collect()
}

/// Negated discriminator objective (a loss to minimize):
/// mean softplus(−f) over ground-truth anomalous snapshots plus
/// mean softplus(f) over generator-provided snapshots.
pub fn discriminator_loss(
    bound: &model::BoundParams,
    params: &ModelParams,
    true_anomalous: &[&Snapshot],
    generated: &[&Snapshot],
    directed: bool,
    mode: Mode,
    rng: &mut SeedRng,
) -> Result<Tensor> {
    if true_anomalous.is_empty() || generated.is_empty() {
        return Err(TrainError::BadConfig(
            "discriminator loss needs nonempty true and generated sets".into(),
        ));
    }
    let mut side = |snaps: &[&Snapshot], flip: bool| -> Result<Tensor> {
        let mut terms = Vec::with_capacity(snaps.len());
        for s in snaps {
            let f = snapshot_score_local(bound, params, s, directed, mode, rng)?;
            let f = if flip { tensor::scale(&f, -1.0)? } else { f };
            terms.push(tensor::softplus(&f)?);
        }
        let refs: Vec<&Tensor> = terms.iter().collect();
        let stacked = tensor::stack_scalars(&refs)?;
        Ok(tensor::scale(&tensor::sum(&stacked)?, 1.0 / terms.len() as f64)?)
    };
    // −log σ(f) = softplus(−f); −log(1−σ(f)) = softplus(f)
    let true_term = side(true_anomalous, true)?;
    let gen_term = side(generated, false)?;
    Ok(tensor::add(&true_term, &gen_term)?)
}

/// Generator reward for a sampled snapshot: log(1 + exp(f_φ)), evaluated
/// with the overflow-safe softplus branch.
pub fn generator_reward(
    discriminator: &ModelParams,
    snapshot: &Snapshot,
    directed: bool,
) -> Result<f64> {
    let f = model::discriminator_score(discriminator, snapshot, directed)?;
    Ok(f.max(0.0) + (-f.abs()).exp().ln_1p())
}

/// Ranking/sampling mode for [`sample_topk`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMode {
    /// Without-replacement sampling via iterative renormalized draws.
    Sample,
    /// The K highest-probability indices (ties by index ascending).
    Argmax,
}

/// Selects K indices from a probability vector.
pub fn sample_topk(
    distribution: &[f64],
    k: usize,
    mode: SelectionMode,
    rng: &mut SeedRng,
) -> Result<Vec<usize>> {
    if k > distribution.len() {
        return Err(TrainError::SampleCountTooLarge {
            k,
            pool: distribution.len(),
        });
    }
    if distribution.iter().any(|p| p.is_nan()) {
        return Err(TrainError::DegenerateDistribution);
    }
    match mode {
        SelectionMode::Argmax => {
            let mut idx: Vec<usize> = (0..distribution.len()).collect();
            idx.sort_by(|&a, &b| distribution[b].total_cmp(&distribution[a]).then(a.cmp(&b)));
            idx.truncate(k);
            Ok(idx)
        }
        SelectionMode::Sample => {
            let mut remaining: Vec<usize> = (0..distribution.len()).collect();
            let mut picked = Vec::with_capacity(k);
            for _ in 0..k {
                let total: f64 = remaining.iter().map(|&i| distribution[i]).sum();
                let chosen = if total <= 0.0 {
                    // residual mass exhausted: fall back to uniform
                    remaining[rng.gen_range(0..remaining.len())]
                } else {
                    let mut u = rng.gen::<f64>() * total;
                    let mut chosen = *remaining.last().unwrap();
                    for &i in &remaining {
                        u -= distribution[i];
                        if u <= 0.0 {
                            chosen = i;
                            break;
                        }
                    }
                    chosen
                };
                picked.push(chosen);
                remaining.retain(|&i| i != chosen);
            }
            Ok(picked)
        }
    }
}

/// Draws K indices with replacement.
fn sample_with_replacement(distribution: &[f64], k: usize, rng: &mut SeedRng) -> Vec<usize> {
    (0..k)
        .map(|_| {
            let mut u = rng.gen::<f64>();
            for (i, p) in distribution.iter().enumerate() {
                u -= p;
                if u <= 0.0 {
                    return i;
                }
            }
            distribution.len() - 1
        })
        .collect()
}

/// Diagnostics emitted by one generator step.
#[derive(Clone, Debug)]
pub struct GeneratorStepInfo {
    pub sampled: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Value of the surrogate objective J before the step.
    pub surrogate: f64,
}

/// Smallest probability fed to `ln` in the policy objective.
const PROB_FLOOR: f64 = 1e-300;

/// Tape-tracked log-probability of an ordered without-replacement sample:
/// Σ_k log( p_{i_k} / (1 − Σ_{j<k} p_{i_j}) ).
fn sequential_log_prob(probs: &Tensor, sampled: &[usize]) -> Result<Vec<Tensor>> {
    let mut terms = Vec::with_capacity(sampled.len());
    let mut remaining = Tensor::scalar(1.0);
    for &i in sampled {
        let p = tensor::get(probs, i)?;
        // floor both logs: a fully concentrated distribution can underflow a
        // sampled probability (or the residual mass) to zero
        let term = tensor::sub(
            &tensor::ln(&tensor::clamp_min(&p, PROB_FLOOR)?)?,
            &tensor::ln(&tensor::clamp_min(&remaining, PROB_FLOOR)?)?,
        )?;
        terms.push(term);
        remaining = tensor::sub(&remaining, &p)?;
    }
    Ok(terms)
}

/// One policy-gradient ascent step on the generator:
/// ∇θJ ≈ (1/K) Σ_k ∇θ log p_θ(g_k) · reward(g_k).
pub fn generator_gradient_step(
    generator: &mut ModelParams,
    discriminator: &ModelParams,
    pool: &[Snapshot],
    graph: &Graph,
    config: &TrainConfig,
    optimizer: &mut Optimizer,
    mode: Mode,
    rng: &mut SeedRng,
) -> Result<GeneratorStepInfo> {
    let k = config.sample_count;
    if k > pool.len() {
        return Err(TrainError::SampleCountTooLarge { k, pool: pool.len() });
    }
    let tape = Tape::new();
    let bound = generator.bind(&tape);
    let probs = generator_distribution_traced(&bound, generator, pool, graph, mode, rng)?;
    if probs.data().iter().any(|p| p.is_nan()) {
        return Err(TrainError::DegenerateDistribution);
    }
    let sampled = if config.with_replacement {
        sample_with_replacement(probs.data(), k, rng)
    } else {
        sample_topk(probs.data(), k, SelectionMode::Sample, rng)?
    };
    let rewards: Vec<f64> = {
        let mut rewards = Vec::with_capacity(k);
        for &i in &sampled {
            let mut r = generator_reward(discriminator, &pool[i], graph.is_directed())?;
            if let Some(b) = config.reward_baseline {
                r -= b;
            }
            rewards.push(r);
        }
        rewards
    };
    let log_terms = if config.with_replacement {
        sampled
            .iter()
            .map(|&i| {
                Ok(tensor::ln(&tensor::clamp_min(
                    &tensor::get(&probs, i)?,
                    PROB_FLOOR,
                )?)?)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        sequential_log_prob(&probs, &sampled)?
    };
    let mut weighted = Vec::with_capacity(k);
    for (term, &r) in log_terms.iter().zip(&rewards) {
        weighted.push(tensor::scale(term, r / k as f64)?);
    }
    let refs: Vec<&Tensor> = weighted.iter().collect();
    let surrogate = tensor::sum(&tensor::stack_scalars(&refs)?)?;
    // ascend J: minimize −J
    let loss = tensor::scale(&surrogate, -1.0)?;
    let grads = backward(&loss)?;
    let grad_vecs = collect_grads(&bound, generator, &grads);
    optimizer.apply(generator, &grad_vecs);
    Ok(GeneratorStepInfo {
        sampled,
        rewards,
        surrogate: surrogate.item(),
    })
}

/// Gradient of log p_θ(pool[index]) with respect to every generator
/// parameter tensor (eval mode). One per-sample term of the estimator.
pub fn policy_log_prob_gradient(
    generator: &ModelParams,
    pool: &[Snapshot],
    graph: &Graph,
    index: usize,
) -> Result<Vec<Vec<f64>>> {
    let tape = Tape::new();
    let bound = generator.bind(&tape);
    let mut rng = SeedRng::seed_from_u64(0);
    let probs = generator_distribution_traced(&bound, generator, pool, graph, Mode::Eval, &mut rng)?;
    let lp = tensor::ln(&tensor::get(&probs, index)?)?;
    let grads = backward(&lp)?;
    Ok(collect_grads(&bound, generator, &grads))
}

/// Gradient of the expected reward Σ_g p_θ(g)·reward(g) with respect to
/// every generator parameter tensor (eval mode). The analytic side of the
/// score-function identity.
pub fn expected_reward_gradient(
    generator: &ModelParams,
    pool: &[Snapshot],
    graph: &Graph,
    rewards: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let tape = Tape::new();
    let bound = generator.bind(&tape);
    let mut rng = SeedRng::seed_from_u64(0);
    let probs = generator_distribution_traced(&bound, generator, pool, graph, Mode::Eval, &mut rng)?;
    let weights = Tensor::constant(vec![rewards.len()], rewards.to_vec());
    let expected = tensor::sum(&tensor::mul(&probs, &weights)?)?;
    let grads = backward(&expected)?;
    Ok(collect_grads(&bound, generator, &grads))
}

/// Generator selection probabilities (eval), re-exported here for callers
/// holding only trainer types.
pub fn generator_probabilities(
    generator: &ModelParams,
    pool: &[Snapshot],
    graph: &Graph,
) -> Result<Vec<f64>> {
    Ok(model::generator_distribution(generator, pool, graph)?)
}

/// Evolving state of the minimax game.
pub struct TrainState {
    pub generator: ModelParams,
    pub discriminator: ModelParams,
    pub generator_epochs_done: usize,
    pub discriminator_epochs_done: usize,
    pub generator_loss_history: Vec<f64>,
    pub discriminator_loss_history: Vec<f64>,
}

/// Optional sink for run artifacts: per-epoch metrics and checkpoints.
pub struct RunLogger {
    dir: PathBuf,
    metrics: fs::File,
}

impl RunLogger {
    pub fn create(dir: &std::path::Path) -> Result<RunLogger> {
        fs::create_dir_all(dir)?;
        let metrics = fs::File::create(dir.join("metrics.jsonl"))?;
        Ok(RunLogger {
            dir: dir.to_path_buf(),
            metrics,
        })
    }

    fn log(&mut self, record: &serde_json::Value) -> Result<()> {
        writeln!(self.metrics, "{record}")?;
        Ok(())
    }

    fn checkpoint(&self, state: &TrainState, round: usize) -> Result<()> {
        let stem = self.dir.join(format!("round{round:04}-generator"));
        model::save_model(&state.generator, &stem)?;
        let stem = self.dir.join(format!("round{round:04}-discriminator"));
        model::save_model(&state.discriminator, &stem)?;
        Ok(())
    }

    pub fn save_final(&self, state: &TrainState) -> Result<()> {
        model::save_model(&state.generator, &self.dir.join("generator"))?;
        model::save_model(&state.discriminator, &self.dir.join("discriminator"))?;
        Ok(())
    }
}

fn check_finite(params: &ModelParams, what: &str) -> Result<()> {
    for t in &params.tensors {
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::NumericFailure(format!(
                "{what} parameter {} became non-finite",
                t.name
            )));
        }
    }
    Ok(())
}

/// Runs the alternating minimax game over a labeled snapshot pool.
/// Each round trains one discriminator epoch (ground-truth anomalous vs
/// generator-sampled negatives) followed by one generator epoch, until
/// both epoch budgets are exhausted. Deterministic given the seed.
pub fn train(
    pool: &[Snapshot],
    graph: &Graph,
    config: &TrainConfig,
    arch: &ArchitectureConfig,
    mut logger: Option<&mut RunLogger>,
) -> Result<TrainState> {
    config.validate(pool.len())?;
    let anomalous: Vec<&Snapshot> = pool.iter().filter(|s| s.label == Some(true)).collect();
    if anomalous.is_empty() {
        return Err(TrainError::NoAnomalousLabels);
    }
    let normal_idx: Vec<usize> = (0..pool.len())
        .filter(|&i| pool[i].label != Some(true))
        .collect();
    let directed = graph.is_directed();

    let mut generator = ModelParams::init(arch, graph.attr_dim(), HeadKind::Generator, config.seed)?;
    let mut discriminator = ModelParams::init(
        arch,
        graph.attr_dim(),
        HeadKind::Discriminator,
        config.seed.wrapping_add(0x9e37_79b9),
    )?;
    let mut gen_opt = Optimizer::new(config.optimizer, config.generator_lr, &generator);
    let mut disc_opt = Optimizer::new(config.optimizer, config.discriminator_lr, &discriminator);
    let mut rng = SeedRng::seed_from_u64(config.seed.wrapping_add(0x51_7c_c1_b7));

    let mut state_gen_hist = Vec::new();
    let mut state_disc_hist = Vec::new();
    let mut gen_done = 0usize;
    let mut disc_done = 0usize;
    let gen_budget = if config.disc_only { 0 } else { config.generator_epochs };
    let rounds = gen_budget.max(config.discriminator_epochs);

    for round in 0..rounds {
        if round < config.discriminator_epochs {
            // fresh negatives from the current generator (uniform from the
            // unlabeled/normal pool in disc-only mode)
            let negatives: Vec<&Snapshot> = if config.disc_only {
                let k = config.sample_count.min(normal_idx.len().max(1));
                let mut idx = normal_idx.clone();
                partial_shuffle(&mut idx, k, &mut rng);
                idx.into_iter().take(k).map(|i| &pool[i]).collect()
            } else {
                let probs = model::generator_distribution(&generator, pool, graph)?;
                sample_topk(&probs, config.sample_count, SelectionMode::Sample, &mut rng)?
                    .into_iter()
                    .map(|i| &pool[i])
                    .collect()
            };
            let mut last_loss = f64::NAN;
            for _ in 0..config.inner_steps {
                let tape = Tape::new();
                let bound = discriminator.bind(&tape);
                let loss = discriminator_loss(
                    &bound,
                    &discriminator,
                    &anomalous,
                    &negatives,
                    directed,
                    Mode::Train,
                    &mut rng,
                )?;
                last_loss = loss.item();
                if !last_loss.is_finite() {
                    return Err(TrainError::NumericFailure(format!(
                        "discriminator loss {last_loss} at round {round}"
                    )));
                }
                let grads = backward(&loss)?;
                let grad_vecs = collect_grads(&bound, &discriminator, &grads);
                disc_opt.apply(&mut discriminator, &grad_vecs);
            }
            check_finite(&discriminator, "discriminator")?;
            state_disc_hist.push(last_loss);
            disc_done += 1;
            if let Some(log) = logger.as_deref_mut() {
                log.log(&serde_json::json!({
                    "round": round, "player": "discriminator", "loss": last_loss,
                }))?;
            }
        }
        if round < gen_budget {
            let mut last_surrogate = f64::NAN;
            for _ in 0..config.inner_steps {
                let info = generator_gradient_step(
                    &mut generator,
                    &discriminator,
                    pool,
                    graph,
                    config,
                    &mut gen_opt,
                    Mode::Train,
                    &mut rng,
                )?;
                last_surrogate = info.surrogate;
                if !last_surrogate.is_finite() {
                    return Err(TrainError::NumericFailure(format!(
                        "generator surrogate {last_surrogate} at round {round}"
                    )));
                }
            }
            check_finite(&generator, "generator")?;
            state_gen_hist.push(last_surrogate);
            gen_done += 1;
            if let Some(log) = logger.as_deref_mut() {
                log.log(&serde_json::json!({
                    "round": round, "player": "generator", "surrogate": last_surrogate,
                }))?;
            }
        }
        if config.checkpoint_every > 0 && (round + 1) % config.checkpoint_every == 0 {
            if let Some(log) = logger.as_deref_mut() {
                let snapshot_state = TrainState {
                    generator: generator.clone(),
                    discriminator: discriminator.clone(),
                    generator_epochs_done: gen_done,
                    discriminator_epochs_done: disc_done,
                    generator_loss_history: state_gen_hist.clone(),
                    discriminator_loss_history: state_disc_hist.clone(),
                };
                log.checkpoint(&snapshot_state, round + 1)?;
            }
        }
    }

    Ok(TrainState {
        generator,
        discriminator,
        generator_epochs_done: gen_done,
        discriminator_epochs_done: disc_done,
        generator_loss_history: state_gen_hist,
        discriminator_loss_history: state_disc_hist,
    })
}

/// Fisher-Yates over the first k slots.
fn partial_shuffle(idx: &mut [usize], k: usize, rng: &mut SeedRng) {
    let n = idx.len();
    for i in 0..k.min(n.saturating_sub(1)) {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn small_arch() -> ArchitectureConfig {
        ArchitectureConfig {
            gcn_channels: vec![4, 2],
            conv1d_channels: vec![3],
            conv1d_kernel_sizes: vec![2],
            dense_width: 4,
            ..Default::default()
        }
    }

    fn line_graph(n: usize) -> Graph {
        let edges: Vec<Edge> = (0..n - 1).map(|i| Edge::new(i, i + 1, 1.0)).collect();
        let attrs: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 3) as f64, 1.0]).collect();
        Graph::build(&edges, &attrs, false).unwrap()
    }

    #[test]
    fn discriminator_loss_at_zero_scores() {
        // all-zero params give f = 0 everywhere: loss = 2 ln 2
        let g = line_graph(5);
        let mut params = ModelParams::init(&small_arch(), 2, HeadKind::Discriminator, 1).unwrap();
        for t in &mut params.tensors {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        let a = g.ego_network(1, 1).unwrap();
        let b = g.ego_network(3, 1).unwrap();
        let tape = Tape::new();
        let bound = params.bind(&tape);
        let mut rng = SeedRng::seed_from_u64(0);
        let loss = discriminator_loss(&bound, &params, &[&a], &[&b], false, Mode::Eval, &mut rng)
            .unwrap();
        assert!((loss.item() - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn discriminator_loss_symmetric_within_sets() {
        let g = line_graph(6);
        let params = ModelParams::init(&small_arch(), 2, HeadKind::Discriminator, 3).unwrap();
        let s: Vec<_> = (0..4).map(|i| g.ego_network(i, 1).unwrap()).collect();
        let mut rng = SeedRng::seed_from_u64(0);
        let eval = |t: &[&Snapshot], f: &[&Snapshot], rng: &mut SeedRng| {
            let tape = Tape::new();
            let bound = params.bind(&tape);
            discriminator_loss(&bound, &params, t, f, false, Mode::Eval, rng)
                .unwrap()
                .item()
        };
        let l1 = eval(&[&s[0], &s[1]], &[&s[2], &s[3]], &mut rng);
        let l2 = eval(&[&s[1], &s[0]], &[&s[3], &s[2]], &mut rng);
        assert!((l1 - l2).abs() < 1e-12);
    }

    #[test]
    fn discriminator_loss_requires_both_sets() {
        let g = line_graph(4);
        let params = ModelParams::init(&small_arch(), 2, HeadKind::Discriminator, 3).unwrap();
        let s = g.ego_network(0, 1).unwrap();
        let tape = Tape::new();
        let bound = params.bind(&tape);
        let mut rng = SeedRng::seed_from_u64(0);
        assert!(
            discriminator_loss(&bound, &params, &[&s], &[], false, Mode::Eval, &mut rng).is_err()
        );
    }

    #[test]
    fn generator_reward_closed_form() {
        // reward is softplus(f); check the formula on raw values
        let softplus = |f: f64| f.max(0.0) + (-f.abs()).exp().ln_1p();
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(softplus(-1e9), 0.0);
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn sample_topk_degenerate_distribution() {
        let mut rng = SeedRng::seed_from_u64(0);
        let picked = sample_topk(&[1.0, 0.0, 0.0], 1, SelectionMode::Sample, &mut rng).unwrap();
        assert_eq!(picked, vec![0]);
    }

    #[test]
    fn sample_topk_argmax_order() {
        let mut rng = SeedRng::seed_from_u64(0);
        let picked = sample_topk(&[0.1, 0.6, 0.3], 2, SelectionMode::Argmax, &mut rng).unwrap();
        assert_eq!(picked, vec![1, 2]);
    }

    #[test]
    fn sample_topk_rejects_oversized_k() {
        let mut rng = SeedRng::seed_from_u64(0);
        assert!(sample_topk(&[0.5, 0.5], 3, SelectionMode::Sample, &mut rng).is_err());
    }

    #[test]
    fn sample_topk_marginals_match_enumeration() {
        // empirical marginals of without-replacement draws vs the exact
        // sequential renormalization oracle on a 3-element pool
        let p = [0.5, 0.3, 0.2];
        let k = 2;
        // oracle: P(i in sample) via enumeration of ordered outcomes
        let mut marginal = [0.0f64; 3];
        for a in 0..3 {
            for b in 0..3 {
                if a == b {
                    continue;
                }
                let prob = p[a] * p[b] / (1.0 - p[a]);
                marginal[a] += prob;
                marginal[b] += prob;
            }
        }
        let mut rng = SeedRng::seed_from_u64(11);
        let trials = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..trials {
            for i in sample_topk(&p, k, SelectionMode::Sample, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        for i in 0..3 {
            let emp = counts[i] as f64 / trials as f64;
            assert!(
                (emp - marginal[i]).abs() < 0.02,
                "marginal {i}: empirical {emp} vs exact {}",
                marginal[i]
            );
        }
    }

    #[test]
    fn train_rejects_unlabeled_pool() {
        let g = line_graph(6);
        let pool: Vec<Snapshot> = (0..4).map(|i| g.ego_network(i, 1).unwrap()).collect();
        let cfg = TrainConfig {
            sample_count: 2,
            generator_epochs: 1,
            discriminator_epochs: 1,
            ..Default::default()
        };
        assert!(matches!(
            train(&pool, &g, &cfg, &small_arch(), None),
            Err(TrainError::NoAnomalousLabels)
        ));
    }

    #[test]
    fn train_is_deterministic() {
        let g = line_graph(8);
        let mut pool: Vec<Snapshot> = (0..6).map(|i| g.ego_network(i, 1).unwrap()).collect();
        pool[0].label = Some(true);
        for s in pool.iter_mut().skip(1) {
            s.label = Some(false);
        }
        let cfg = TrainConfig {
            sample_count: 2,
            generator_epochs: 3,
            discriminator_epochs: 3,
            seed: 42,
            ..Default::default()
        };
        let a = train(&pool, &g, &cfg, &small_arch(), None).unwrap();
        let b = train(&pool, &g, &cfg, &small_arch(), None).unwrap();
        assert_eq!(a.generator_loss_history, b.generator_loss_history);
        assert_eq!(a.discriminator_loss_history, b.discriminator_loss_history);
        for (ta, tb) in a.generator.tensors.iter().zip(&b.generator.tensors) {
            assert_eq!(ta.data, tb.data);
        }
    }

    #[test]
    fn disc_loss_non_increasing_with_tiny_lr() {
        // sanity descent: 5 consecutive steps on frozen inputs, lr 1e-4
        let g = line_graph(8);
        let anomalous = g.ego_network(0, 2).unwrap();
        let normal = g.ego_network(5, 1).unwrap();
        let mut params = ModelParams::init(&small_arch(), 2, HeadKind::Discriminator, 5).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 1e-4, &params);
        let mut rng = SeedRng::seed_from_u64(0);
        let mut prev = f64::INFINITY;
        for _ in 0..5 {
            let tape = Tape::new();
            let bound = params.bind(&tape);
            let loss = discriminator_loss(
                &bound,
                &params,
                &[&anomalous],
                &[&normal],
                false,
                Mode::Eval,
                &mut rng,
            )
            .unwrap();
            let value = loss.item();
            assert!(value <= prev + 1e-12, "loss rose from {prev} to {value}");
            prev = value;
            let grads = backward(&loss).unwrap();
            let grad_vecs = collect_grads(&bound, &params, &grads);
            opt.apply(&mut params, &grad_vecs);
        }
    }
}
