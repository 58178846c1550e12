//! Outer training loop: sample a batch from the policy, refine it with GP and
//! constant fitting, score it, and update the policy with the risk-seeking
//! policy gradient.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{evaluate, reward, Metrics, RewardKind};
use crate::constopt::{optimize_constants, NelderMeadConfig};
use crate::data::{Dataset, LabeledData};
use crate::expr::{ExprError, ExprTree, Library, TokenId};
use crate::gp::{evolve, Fitness, GpConfig, GpError, Scored};
use crate::pareto::ParetoPoint;
use crate::policy::{sample_batch, Grammar, GrammarConfig, Optimizer, OptimizerConfig, PolicyError, PolicyNet};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    ConfigInvalid(String),
    #[error("invalid training data: {0}")]
    DataInvalid(String),
    #[error("empty reward batch")]
    EmptyBatch,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialisation error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Where constants are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstFit {
    /// Constants stay at their initial value.
    Off,
    /// Top-ε emitted sequences only.
    Batch,
    /// Top-ε emitted sequences and the best fraction of every GP generation.
    #[default]
    BatchAndGp,
}

/// Which sequences and rewards feed the policy gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Credit {
    /// The sequences the policy emitted, scored after constant fitting.
    #[default]
    Emitted,
    /// The best `batch_size` distinct expressions of the emitted batch and
    /// the final GP population.
    GpRefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epsilon: f64,
    pub threshold: f64,
    pub reward: RewardKind,
    pub iterations: usize,
    /// Operator tokens (`+ - * / sin cos exp log square sqrt const`); the
    /// dataset's features are always added.
    pub operators: Vec<String>,
    pub grammar: GrammarConfig,
    pub hidden_size: usize,
    pub optimizer: OptimizerConfig,
    pub gp: GpConfig,
    pub const_fit: ConstFit,
    pub constopt: NelderMeadConfig,
    pub credit: Credit,
    /// Rows of the training split drawn afresh each iteration for scoring;
    /// `None` scores on the whole split.
    pub train_subsample: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 500,
            epsilon: 0.05,
            threshold: 0.5,
            reward: RewardKind::F1,
            iterations: 2000,
            operators: [
                "+", "-", "*", "/", "sin", "cos", "exp", "log", "square", "sqrt", "const",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            grammar: GrammarConfig::default(),
            hidden_size: 32,
            optimizer: OptimizerConfig::default(),
            gp: GpConfig::default(),
            const_fit: ConstFit::default(),
            constopt: NelderMeadConfig::default(),
            credit: Credit::default(),
            train_subsample: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::ConfigInvalid(m));
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon {} is outside (0, 1]", self.epsilon));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} is outside (0, 1)", self.threshold));
        }
        let min_batch = (1.0 / self.epsilon - 1e-9).ceil() as usize;
        if self.batch_size < min_batch.max(1) {
            return bad(format!(
                "batch size {} is below ceil(1/epsilon) = {min_batch}",
                self.batch_size
            ));
        }
        if self.hidden_size == 0 {
            return bad("hidden size must be positive".into());
        }
        if !(self.optimizer.learning_rate > 0.0 && self.optimizer.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate {} must be positive",
                self.optimizer.learning_rate
            ));
        }
        if self.train_subsample == Some(0) {
            return bad("train subsample must be positive".into());
        }
        self.gp.validate()?;
        Ok(())
    }

    /// Token library over the given features.
    pub fn library(&self, feature_names: &[String]) -> Result<Library, TrainError> {
        Ok(Library::from_names(&self.operators, feature_names)?)
    }
}

/// Index of the baseline in the ascending order: `ceil((1 - ε) N) - 1`,
/// clamped at 0.
fn quantile_rank(n: usize, epsilon: f64) -> usize {
    let r = ((1.0 - epsilon) * n as f64 - 1e-9).ceil();
    (r as isize - 1).max(0) as usize
}

/// Empirical `(1 - ε)`-quantile of a reward batch.
pub fn epsilon_quantile(rewards: &[f64], epsilon: f64) -> Result<f64, TrainError> {
    if rewards.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(TrainError::ConfigInvalid(format!(
            "epsilon {epsilon} is outside (0, 1]"
        )));
    }
    let mut sorted = rewards.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[quantile_rank(sorted.len(), epsilon)])
}

/// Per-sample weights of the risk-seeking estimator,
/// `(R_i - R̃) · 1{R_i ≥ R̃} / (εN)`, and the baseline `R̃`.
pub fn risk_weights(rewards: &[f64], epsilon: f64) -> Result<(Vec<f64>, f64), TrainError> {
    let baseline = epsilon_quantile(rewards, epsilon)?;
    let scale = 1.0 / (epsilon * rewards.len() as f64);
    let w = rewards
        .iter()
        .map(|&r| if r >= baseline { (r - baseline) * scale } else { 0.0 })
        .collect();
    Ok((w, baseline))
}

/// Risk-seeking policy-gradient estimate over the given sequences.
pub fn risk_gradient(
    net: &PolicyNet,
    grammar: &Grammar,
    sequences: &[Vec<TokenId>],
    rewards: &[f64],
    epsilon: f64,
) -> Result<(Vec<f64>, f64), TrainError> {
    assert_eq!(sequences.len(), rewards.len());
    let (weights, baseline) = risk_weights(rewards, epsilon)?;
    let mut grad = vec![0.0; net.n_params()];
    for (seq, &w) in sequences.iter().zip(&weights) {
        if w != 0.0 {
            net.accumulate_grad_log_prob(grammar, seq, w, &mut grad)?;
        }
    }
    Ok((grad, baseline))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub baseline: f64,
    pub gradient_norm: f64,
}

/// One risk-seeking ascent step on `net`.
pub fn update_policy(
    net: &mut PolicyNet,
    optimizer: &mut Optimizer,
    grammar: &Grammar,
    sequences: &[Vec<TokenId>],
    rewards: &[f64],
    epsilon: f64,
) -> Result<UpdateStats, TrainError> {
    let (grad, baseline) = risk_gradient(net, grammar, sequences, rewards, epsilon)?;
    let gradient_norm = optimizer.ascend(net.params_mut(), &grad);
    Ok(UpdateStats {
        baseline,
        gradient_norm,
    })
}

/// Training-split scorer with a per-expression cache. Also the GP fitness.
struct Scorer<'a> {
    data: LabeledData,
    full: &'a LabeledData,
    lib: &'a Library,
    kind: RewardKind,
    threshold: f64,
    constopt: NelderMeadConfig,
    refine: bool,
    cache: HashMap<String, f64>,
    refined: HashMap<String, (ExprTree, f64)>,
    evaluations: usize,
}

impl Scorer<'_> {
    fn resample(&mut self, size: Option<usize>, rng: &mut ChaCha8Rng) {
        if let Some(k) = size.filter(|&k| k < self.full.len()) {
            let mut rows = index::sample(rng, self.full.len(), k).into_vec();
            rows.sort_unstable();
            self.data = self.full.select(&rows);
            self.cache.clear();
            self.refined.clear();
        }
    }

    fn score(&mut self, tree: &ExprTree) -> f64 {
        let key = tree.to_line(self.lib);
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        self.evaluations += 1;
        let r = reward(tree, &self.data, self.kind, self.threshold).unwrap_or(0.0);
        let r = if r.is_nan() { 0.0 } else { r };
        self.cache.insert(key, r);
        r
    }

    fn fit(&mut self, tree: &ExprTree) -> (ExprTree, f64) {
        if tree.n_constants() == 0 {
            return (tree.clone(), self.score(tree));
        }
        let key = tree.to_line(self.lib);
        if let Some(hit) = self.refined.get(&key) {
            return hit.clone();
        }
        let (fitted, report) = optimize_constants(tree, &self.data, self.kind, self.threshold, &self.constopt);
        self.evaluations += report.iterations + 1;
        let r = if report.final_reward.is_finite() {
            report.final_reward
        } else {
            0.0
        };
        self.cache.insert(fitted.to_line(self.lib), r);
        self.refined.insert(key, (fitted.clone(), r));
        (fitted, r)
    }
}

impl Fitness for Scorer<'_> {
    fn fitness(&mut self, tree: &ExprTree) -> f64 {
        self.score(tree)
    }

    fn refine(&mut self, tree: &ExprTree, fitness: f64) -> Option<(ExprTree, f64)> {
        if !self.refine || tree.n_constants() == 0 {
            return None;
        }
        let (fitted, r) = self.fit(tree);
        (r > fitness).then_some((fitted, r))
    }
}

/// An evaluated expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Serialised prefix line (see [`ExprTree::to_line`]).
    pub expression: String,
    pub complexity: u32,
    pub iteration: usize,
    pub train_reward: f64,
    pub validation_reward: f64,
    pub validation: Metrics,
}

impl Candidate {
    pub fn tree(&self, lib: &Library) -> Result<ExprTree, ExprError> {
        ExprTree::parse_line(lib, &self.expression)
    }

    pub fn pareto_point(&self) -> ParetoPoint {
        ParetoPoint::new(self.complexity, self.validation.f1, self.expression.clone())
    }
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub iteration: usize,
    /// Best training reward seen so far.
    pub best_reward: f64,
    /// Mean training reward of the emitted batch.
    pub mean_reward: f64,
    pub baseline: f64,
    pub best_expression: String,
    pub complexity: u32,
    /// Best validation reward seen so far and its expression.
    pub best_validation_reward: f64,
    pub best_validation_expression: String,
    pub gradient_norm: f64,
    pub evaluations: usize,
    pub archived: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub library: Library,
    pub best: Candidate,
    pub log: Vec<RunRecord>,
    /// Wall-clock seconds per iteration, kept apart from the log so that the
    /// log itself is reproducible.
    pub seconds: Vec<f64>,
    /// Every distinct expression scored at the end of an iteration.
    pub archive: Vec<Candidate>,
    pub policy: PolicyNet,
}

impl TrainOutput {
    pub fn pareto_points(&self) -> Vec<ParetoPoint> {
        self.archive.iter().map(Candidate::pareto_point).collect()
    }
}

/// Writes records as JSON lines.
pub fn write_run_log<W: Write>(log: &[RunRecord], mut w: W) -> Result<(), TrainError> {
    for rec in log {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    a.validation_reward > b.validation_reward
        || (a.validation_reward == b.validation_reward
            && (a.train_reward > b.train_reward || (a.train_reward == b.train_reward && a.complexity < b.complexity)))
}

/// Trains on `data.train` and selects candidates on `data.validation`.
pub fn train(cfg: &TrainConfig, data: &Dataset) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    for (name, split) in [("training", &data.train), ("validation", &data.validation)] {
        let fraud = split.n_fraud();
        if fraud == 0 || fraud == split.len() {
            return Err(TrainError::DataInvalid(format!("{name} split has a single class")));
        }
    }
    let lib = cfg.library(&data.feature_names)?;
    let grammar = Grammar::new(lib.clone(), cfg.grammar)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = PolicyNet::new(lib.len(), cfg.hidden_size, &mut rng);
    let mut optimizer = Optimizer::new(cfg.optimizer, net.n_params());
    let mut scorer = Scorer {
        data: data.train.clone(),
        full: &data.train,
        lib: &lib,
        kind: cfg.reward,
        threshold: cfg.threshold,
        constopt: cfg.constopt,
        refine: cfg.const_fit == ConstFit::BatchAndGp,
        cache: HashMap::new(),
        refined: HashMap::new(),
        evaluations: 0,
    };

    let mut archive: Vec<Candidate> = Vec::new();
    let mut archived: HashMap<String, usize> = HashMap::new();
    let mut best: Option<usize> = None;
    let mut best_train: Option<(f64, String, u32)> = None;
    let mut log = Vec::new();
    let mut seconds = Vec::new();

    for it in 0..cfg.iterations.max(1) {
        let started = Instant::now();
        scorer.resample(cfg.train_subsample, &mut rng);
        let batch = sample_batch(&net, &grammar, cfg.batch_size, &mut rng)?;
        let mut trees = batch
            .sequences
            .iter()
            .map(|s| ExprTree::parse_prefix(&lib, s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rewards: Vec<f64> = trees.iter().map(|t| scorer.score(t)).collect();
        if cfg.const_fit != ConstFit::Off {
            let cut = epsilon_quantile(&rewards, cfg.epsilon)?;
            for i in 0..trees.len() {
                if rewards[i] >= cut && trees[i].n_constants() > 0 {
                    let (fitted, r) = scorer.fit(&trees[i]);
                    if r > rewards[i] {
                        trees[i] = fitted;
                        rewards[i] = r;
                    }
                }
            }
        }
        let seed_pop = trees.clone();
        let population: Vec<Scored> = if cfg.gp.generations == 0 {
            trees
                .iter()
                .zip(&rewards)
                .map(|(t, &f)| Scored {
                    tree: t.clone(),
                    fitness: f,
                })
                .collect()
        } else {
            evolve(seed_pop, &mut scorer, &grammar, &cfg.gp, &mut rng)?.population
        };

        let stats = if cfg.iterations == 0 {
            UpdateStats {
                baseline: epsilon_quantile(&rewards, cfg.epsilon)?,
                gradient_norm: 0.0,
            }
        } else {
            match cfg.credit {
                Credit::Emitted => update_policy(
                    &mut net,
                    &mut optimizer,
                    &grammar,
                    &batch.sequences,
                    &rewards,
                    cfg.epsilon,
                )?,
                Credit::GpRefined => {
                    let mut pool: Vec<(&ExprTree, f64)> = trees
                        .iter()
                        .zip(rewards.iter().copied())
                        .chain(population.iter().map(|s| (&s.tree, s.fitness)))
                        .collect();
                    pool.sort_by(|a, b| b.1.total_cmp(&a.1));
                    let mut seen = std::collections::HashSet::new();
                    let mut seqs = Vec::new();
                    let mut rs = Vec::new();
                    for (t, r) in pool {
                        if seqs.len() == cfg.batch_size {
                            break;
                        }
                        let seq = t.to_prefix();
                        if seen.insert(seq.clone()) {
                            seqs.push(seq);
                            rs.push(r);
                        }
                    }
                    update_policy(&mut net, &mut optimizer, &grammar, &seqs, &rs, cfg.epsilon)?
                }
            }
        };

        let mean_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;
        let scored = trees
            .iter()
            .zip(rewards.iter().copied())
            .chain(population.iter().map(|s| (&s.tree, s.fitness)));
        for (tree, r) in scored {
            let line = tree.to_line(&lib);
            if best_train.as_ref().is_none_or(|b| r > b.0) {
                best_train = Some((r, line.clone(), tree.complexity()));
            }
            if archived.contains_key(&line) {
                continue;
            }
            let validation_reward = reward(tree, &data.validation, cfg.reward, cfg.threshold).unwrap_or(0.0);
            let validation = match evaluate(tree, &data.validation, cfg.threshold) {
                Ok((_, m)) => m,
                Err(_) => Metrics {
                    accuracy: 0.0,
                    precision: 0.0,
                    recall: 0.0,
                    f1: 0.0,
                },
            };
            let cand = Candidate {
                expression: line.clone(),
                complexity: tree.complexity(),
                iteration: it,
                train_reward: r,
                validation_reward: if validation_reward.is_nan() {
                    0.0
                } else {
                    validation_reward
                },
                validation,
            };
            if best.is_none_or(|b| better(&cand, &archive[b])) {
                best = Some(archive.len());
            }
            archived.insert(line, archive.len());
            archive.push(cand);
        }
        let (best_reward, best_expression, complexity) = best_train.clone().expect("non-empty batch");
        let b = &archive[best.expect("non-empty archive")];
        log.push(RunRecord {
            iteration: it,
            best_reward,
            mean_reward,
            baseline: stats.baseline,
            best_expression,
            complexity,
            best_validation_reward: b.validation_reward,
            best_validation_expression: b.expression.clone(),
            gradient_norm: stats.gradient_norm,
            evaluations: scorer.evaluations,
            archived: archive.len(),
        });
        seconds.push(started.elapsed().as_secs_f64());
        log::info!(
            "iteration {it}: best train {best_reward:.4}, mean {mean_reward:.4}, best validation {:.4}",
            b.validation_reward
        );
    }
    let best = archive[best.expect("non-empty archive")].clone();
    Ok(TrainOutput {
        library: lib,
        best,
        log,
        seconds,
        archive,
        policy: net,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{masked_softmax, OptimizerKind, PartialTree};
    use rand::Rng;

    #[test]
    fn quantile_examples() {
        let r: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(epsilon_quantile(&r, 0.1).unwrap(), 0.9);
        let (w, _) = risk_weights(&r, 0.1).unwrap();
        assert_eq!(w.iter().filter(|&&x| x > 0.0).count(), 1);
        assert_eq!(epsilon_quantile(&[0.3; 7], 0.05).unwrap(), 0.3);
        assert_eq!(epsilon_quantile(&[0.4, 0.1, 0.9], 1.0).unwrap(), 0.1);
        assert!(matches!(epsilon_quantile(&[], 0.5), Err(TrainError::EmptyBatch)));
    }

    #[test]
    fn quantile_matches_rank_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = rng.gen_range(1..60);
            let eps = rng.gen_range(0.01..=1.0);
            let r: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..8) as f64) / 8.0).collect();
            let q = epsilon_quantile(&r, eps).unwrap();
            // smallest value v with #{R < v} >= ceil((1 - eps) n) - 1 by direct count
            let need = ((1.0 - eps) * n as f64 - 1e-9).ceil().max(1.0) as usize - 1;
            let mut vals = r.clone();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let oracle = *vals
                .iter()
                .rev()
                .find(|&&v| r.iter().filter(|&&x| x < v).count() <= need)
                .unwrap();
            assert_eq!(q, oracle);
            let top = (eps * n as f64 - 1e-9).ceil() as usize;
            assert!(r.iter().filter(|&&x| x >= q).count() >= top.max(1));
        }
    }

    fn bandit() -> (Grammar, PolicyNet) {
        let lib = Library::from_names(&[], &["A".to_string(), "B".to_string()]).unwrap();
        let grammar = Grammar::new(
            lib,
            GrammarConfig {
                min_len: 1,
                max_len: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = PolicyNet::new(2, 8, &mut rng);
        (grammar, net)
    }

    fn p_a(net: &PolicyNet, grammar: &Grammar) -> f64 {
        let partial = PartialTree::new();
        let (logits, _) = net.policy_step(partial.observation(), &net.initial_state());
        masked_softmax(&logits, &grammar.constraint_mask(&partial).unwrap())[0]
    }

    #[test]
    fn bandit_gradient_matches_enumeration() {
        let (grammar, net) = bandit();
        let p = p_a(&net, &grammar);
        let b_out = net.tensors().into_iter().find(|t| t.name == "b_out").unwrap();
        for (eps, picks) in [
            (1.0, vec![0, 1, 1, 0, 1]),
            (0.5, vec![0, 1, 1, 1]),
            (0.25, vec![1, 1, 1, 0, 1, 1, 1, 1]),
            (1.0, vec![0, 0, 0]),
        ] {
            let seqs: Vec<Vec<TokenId>> = picks.iter().map(|&k| vec![k]).collect();
            let rewards: Vec<f64> = picks.iter().map(|&k| if k == 0 { 1.0 } else { 0.0 }).collect();
            let (g, _) = risk_gradient(&net, &grammar, &seqs, &rewards, eps).unwrap();
            // ranks enumerated by hand: baseline is the sorted entry at ceil((1-eps)N)-1
            let n = picks.len();
            let mut sorted = rewards.clone();
            sorted.sort_by(f64::total_cmp);
            let base = sorted[((1.0 - eps) * n as f64).ceil().max(1.0) as usize - 1];
            let mut expect = [0.0, 0.0];
            for (&k, &r) in picks.iter().zip(&rewards) {
                if r >= base {
                    let w = (r - base) / (eps * n as f64);
                    let probs = [p, 1.0 - p];
                    for j in 0..2 {
                        expect[j] += w * (f64::from(u8::from(j == k)) - probs[j]);
                    }
                }
            }
            for j in 0..2 {
                assert!(
                    (g[b_out.offset + j] - expect[j]).abs() < 1e-6,
                    "{picks:?}: {} vs {}",
                    g[b_out.offset + j],
                    expect[j]
                );
            }
            // full gradient against finite differences of the weighted log-likelihood
            let (w, _) = risk_weights(&rewards, eps).unwrap();
            let objective = |net: &PolicyNet| -> f64 {
                seqs.iter()
                    .zip(&w)
                    .map(|(s, wi)| wi * net.log_prob(&grammar, s).unwrap())
                    .sum()
            };
            let mut probe = net.clone();
            for i in 0..net.n_params() {
                let h = 1e-5;
                let x = probe.params()[i];
                probe.params_mut()[i] = x + h;
                let up = objective(&probe);
                probe.params_mut()[i] = x - h;
                let down = objective(&probe);
                probe.params_mut()[i] = x;
                assert!((g[i] - (up - down) / (2.0 * h)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_gradient_cases() {
        let (grammar, net) = bandit();
        let (g, b) = risk_gradient(&net, &grammar, &[vec![0], vec![1], vec![0]], &[0.5; 3], 0.4).unwrap();
        assert_eq!(b, 0.5);
        assert!(g.iter().all(|&x| x == 0.0));
        let (g, _) = risk_gradient(&net, &grammar, &[vec![1]], &[0.7], 1.0).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
        // below-baseline samples never contribute
        let (g1, _) = risk_gradient(&net, &grammar, &[vec![0], vec![1], vec![1]], &[1.0, 0.2, 0.3], 0.5).unwrap();
        let (g2, _) = risk_gradient(&net, &grammar, &[vec![0], vec![0], vec![1]], &[1.0, 0.2, 0.3], 0.5).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn full_epsilon_is_reinforce_with_min_baseline() {
        let (grammar, net) = bandit();
        let seqs = vec![vec![0], vec![1], vec![1], vec![0], vec![0]];
        let rewards = [0.9, 0.1, 0.4, 0.2, 0.7];
        let (g, b) = risk_gradient(&net, &grammar, &seqs, &rewards, 1.0).unwrap();
        assert_eq!(b, 0.1);
        let mut expect = vec![0.0; net.n_params()];
        for (s, r) in seqs.iter().zip(rewards) {
            let gi = net.grad_log_prob(&grammar, s).unwrap();
            for (e, x) in expect.iter_mut().zip(gi) {
                *e += (r - 0.1) * x / seqs.len() as f64;
            }
        }
        for (a, e) in g.iter().zip(&expect) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn bandit_training_converges() {
        for seed in 0..3 {
            let (grammar, _) = bandit();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = PolicyNet::new(2, 8, &mut rng);
            let mut opt = Optimizer::new(
                OptimizerConfig {
                    kind: OptimizerKind::Adam,
                    learning_rate: 0.05,
                    clip_norm: 5.0,
                },
                net.n_params(),
            );
            for _ in 0..200 {
                let batch = sample_batch(&net, &grammar, 32, &mut rng).unwrap();
                let rewards: Vec<f64> = batch
                    .sequences
                    .iter()
                    .map(|s| if s[0] == 0 { 1.0 } else { 0.0 })
                    .collect();
                update_policy(&mut net, &mut opt, &grammar, &batch.sequences, &rewards, 1.0).unwrap();
            }
            let p = p_a(&net, &grammar);
            assert!(p > 0.95, "seed {seed}: {p}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for cfg in [
            TrainConfig {
                epsilon: 0.0,
                ..Default::default()
            },
            TrainConfig {
                epsilon: 1.5,
                ..Default::default()
            },
            TrainConfig {
                threshold: 1.0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 19,
                ..Default::default()
            },
        ] {
            assert!(matches!(cfg.validate(), Err(TrainError::ConfigInvalid(_))));
        }
        assert!(TrainConfig {
            batch_size: 20,
            ..Default::default()
        }
        .validate()
        .is_ok());
    }
}
