//! Autoregressive expression policy: grammar masking, a recurrent network over
//! parent/sibling observations, sampling, log-probabilities and gradients.

mod checkpoint;
mod grammar;
mod net;
mod optim;

pub use checkpoint::{read_checkpoint, write_checkpoint, MAGIC as CHECKPOINT_MAGIC, VERSION as CHECKPOINT_VERSION};
pub use grammar::{Grammar, GrammarConfig, Observation, PartialTree, TrigScope};
pub use net::{masked_softmax, PolicyNet, TensorInfo};
pub use optim::{l2_norm, Optimizer, OptimizerConfig, OptimizerKind};

use rand::Rng;
use thiserror::Error;

use crate::expr::TokenId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("grammar dead end after {length} token(s): every token is masked")]
    DeadEnd { length: usize },
    #[error("token {token} at step {step} has zero probability (masked)")]
    ZeroProbability { step: usize, token: TokenId },
    #[error("constraint violation at step {step} (token {token}): {reason}")]
    Violation {
        step: usize,
        token: TokenId,
        reason: &'static str,
    },
    #[error("invalid grammar configuration: {0}")]
    InvalidConfig(String),
    #[error("parameter vector has {found} entries, expected {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// A batch of sequences drawn from the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub sequences: Vec<Vec<TokenId>>,
    pub log_probs: Vec<f64>,
    /// Per sequence, the allowed-token mask at each step.
    pub masks: Vec<Vec<Vec<bool>>>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

/// Draws `n` complete sequences in order from a single RNG stream.
pub fn sample_batch<R: Rng>(
    net: &PolicyNet,
    grammar: &Grammar,
    n: usize,
    rng: &mut R,
) -> Result<SampleBatch, PolicyError> {
    let mut batch = SampleBatch {
        sequences: Vec::with_capacity(n),
        log_probs: Vec::with_capacity(n),
        masks: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let (seq, lp, masks) = net.sample(grammar, rng)?;
        batch.sequences.push(seq);
        batch.log_probs.push(lp);
        batch.masks.push(masks);
    }
    Ok(batch)
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::expr::{Library, Symbol, TokenId};

    use super::{GrammarConfig, TrigScope};

    /// Structural constraint checker written against the recursive tree shape,
    /// without the incremental mask machinery.
    pub fn independent_violations(lib: &Library, cfg: &GrammarConfig, seq: &[TokenId]) -> Vec<String> {
        fn walk(
            lib: &Library,
            cfg: &GrammarConfig,
            seq: &[TokenId],
            pos: &mut usize,
            parent: Option<TokenId>,
            trig_above: bool,
            out: &mut Vec<String>,
        ) -> Option<TokenId> {
            let id = *seq.get(*pos)?;
            *pos += 1;
            let sym = lib.token(id).symbol;
            if sym.is_trig() && trig_above {
                out.push(format!("trig token {id} under trig"));
            }
            if let Some(p) = parent {
                if matches!(lib.token(p).symbol, Symbol::Unary(_)) && lib.inverse_of(p) == Some(id) {
                    out.push(format!("token {id} is inverse of parent {p}"));
                }
            }
            let below = match cfg.trig_scope {
                TrigScope::Descendants => trig_above || sym.is_trig(),
                TrigScope::Children => sym.is_trig(),
            };
            let kids: Vec<Option<TokenId>> = (0..sym.arity())
                .map(|_| walk(lib, cfg, seq, pos, Some(id), below, out))
                .collect();
            if kids.len() == 2
                && kids
                    .iter()
                    .all(|k| k.is_some_and(|k| lib.token(k).symbol == Symbol::Const))
            {
                out.push(format!("binary {id} has two constant leaves"));
            }
            Some(id)
        }
        let mut out = Vec::new();
        if seq.len() < cfg.min_len || seq.len() > cfg.max_len {
            out.push(format!(
                "length {} outside [{}, {}]",
                seq.len(),
                cfg.min_len,
                cfg.max_len
            ));
        }
        if seq.len() == 1 && lib.token(seq[0]).symbol == Symbol::Const {
            out.push("single-constant tree".into());
        }
        let mut pos = 0;
        let root = walk(lib, cfg, seq, &mut pos, None, false, &mut out);
        if root.is_none() || pos != seq.len() {
            out.push("sequence is not exactly one complete tree".into());
        }
        out
    }
}
