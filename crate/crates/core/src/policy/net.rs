use rand::Rng;

use crate::expr::TokenId;

use super::grammar::{Grammar, Observation, PartialTree};
use super::PolicyError;

/// Named parameter tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Single-layer gated recurrent cell with a softmax read-out over the library.
///
/// The input at every step is the one-hot parent token concatenated with the
/// one-hot elder-sibling token, each over `library ∪ {EMPTY}`. Because the
/// input is two-hot, input weights are stored as one row of `hidden` values
/// per input unit.
///
/// ```text
/// z  = σ(Wz·x + Uz·h + bz)
/// r  = σ(Wr·x + Ur·h + br)
/// n  = tanh(Wn·x + Un·(r ⊙ h) + bn)
/// h' = (1 − z) ⊙ n + z ⊙ h
/// logits = Wo·h' + bo
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    n_tokens: usize,
    hidden: usize,
    params: Vec<f64>,
}

const W_Z: usize = 0;
const W_R: usize = 1;
const W_N: usize = 2;
const U_Z: usize = 3;
const U_R: usize = 4;
const U_N: usize = 5;
const B_Z: usize = 6;
const B_R: usize = 7;
const B_N: usize = 8;
const W_OUT: usize = 9;
const B_OUT: usize = 10;

/// Cached activations of one forward step.
#[derive(Debug, Clone)]
struct StepCache {
    inputs: [usize; 2],
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    h: Vec<f64>,
    probs: Vec<f64>,
    chosen: TokenId,
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Softmax restricted to allowed entries; masked entries get exactly 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

fn masked_log_prob(logits: &[f64], mask: &[bool], chosen: TokenId) -> f64 {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| (l - max).exp())
        .sum::<f64>()
        .ln()
        + max;
    logits[chosen] - lse
}

impl PolicyNet {
    pub fn layout(n_tokens: usize, hidden: usize) -> Vec<TensorInfo> {
        let input = 2 * (n_tokens + 1);
        let shapes: [(&'static str, usize, usize); 11] = [
            ("w_z", input, hidden),
            ("w_r", input, hidden),
            ("w_n", input, hidden),
            ("u_z", hidden, hidden),
            ("u_r", hidden, hidden),
            ("u_n", hidden, hidden),
            ("b_z", 1, hidden),
            ("b_r", 1, hidden),
            ("b_n", 1, hidden),
            ("w_out", n_tokens, hidden),
            ("b_out", 1, n_tokens),
        ];
        let mut offset = 0;
        shapes
            .iter()
            .map(|&(name, rows, cols)| {
                let info = TensorInfo {
                    name,
                    rows,
                    cols,
                    offset,
                };
                offset += rows * cols;
                info
            })
            .collect()
    }

    /// All-zero parameters: every step emits uniform logits.
    pub fn zeros(n_tokens: usize, hidden: usize) -> Self {
        let len = Self::layout(n_tokens, hidden).last().map_or(0, |t| t.offset + t.len());
        PolicyNet {
            n_tokens,
            hidden,
            params: vec![0.0; len],
        }
    }

    /// Uniform initialisation in `±1/sqrt(hidden)` for recurrent and input
    /// weights; biases start at zero.
    pub fn new<R: Rng>(n_tokens: usize, hidden: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(n_tokens, hidden);
        let scale = 1.0 / (hidden as f64).sqrt();
        for t in Self::layout(n_tokens, hidden) {
            if t.name.starts_with("b_") {
                continue;
            }
            for v in &mut net.params[t.offset..t.offset + t.len()] {
                *v = rng.gen_range(-scale..scale);
            }
        }
        net
    }

    pub fn from_params(n_tokens: usize, hidden: usize, params: Vec<f64>) -> Result<Self, PolicyError> {
        let net = Self::zeros(n_tokens, hidden);
        if params.len() != net.params.len() {
            return Err(PolicyError::ShapeMismatch {
                expected: net.params.len(),
                found: params.len(),
            });
        }
        Ok(PolicyNet {
            n_tokens,
            hidden,
            params,
        })
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn tensors(&self) -> Vec<TensorInfo> {
        Self::layout(self.n_tokens, self.hidden)
    }

    fn off(&self, tensor: usize) -> usize {
        // layout order is fixed, so offsets are computed arithmetically
        let h = self.hidden;
        let i = 2 * (self.n_tokens + 1);
        let sizes = [i * h, i * h, i * h, h * h, h * h, h * h, h, h, h, self.n_tokens * h];
        sizes[..tensor].iter().sum()
    }

    fn input_units(&self, obs: Observation) -> [usize; 2] {
        let empty = self.n_tokens;
        [
            obs.parent.unwrap_or(empty),
            self.n_tokens + 1 + obs.sibling.unwrap_or(empty),
        ]
    }

    pub fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.hidden]
    }

    fn forward(&self, inputs: [usize; 2], h_prev: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let hs = self.hidden;
        let p = &self.params;
        let gate = |w: usize, u: usize, b: usize, h_in: &[f64]| -> Vec<f64> {
            let (ow, ou, ob) = (self.off(w), self.off(u), self.off(b));
            (0..hs)
                .map(|i| {
                    let mut a = p[ob + i] + p[ow + inputs[0] * hs + i] + p[ow + inputs[1] * hs + i];
                    let row = &p[ou + i * hs..ou + (i + 1) * hs];
                    a += row.iter().zip(h_in).map(|(w, h)| w * h).sum::<f64>();
                    a
                })
                .collect()
        };
        let z: Vec<f64> = gate(W_Z, U_Z, B_Z, h_prev).into_iter().map(sigmoid).collect();
        let r: Vec<f64> = gate(W_R, U_R, B_R, h_prev).into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
        let n: Vec<f64> = gate(W_N, U_N, B_N, &rh).into_iter().map(f64::tanh).collect();
        let h: Vec<f64> = (0..hs).map(|i| (1.0 - z[i]) * n[i] + z[i] * h_prev[i]).collect();
        let (ow, ob) = (self.off(W_OUT), self.off(B_OUT));
        let logits = (0..self.n_tokens)
            .map(|k| {
                p[ob + k]
                    + p[ow + k * hs..ow + (k + 1) * hs]
                        .iter()
                        .zip(&h)
                        .map(|(w, h)| w * h)
                        .sum::<f64>()
            })
            .collect();
        (z, r, n, h, logits)
    }

    /// One recurrent step: logits over the library and the next hidden state.
    pub fn policy_step(&self, obs: Observation, hidden: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (_, _, _, h, logits) = self.forward(self.input_units(obs), hidden);
        (logits, h)
    }

    /// Samples one complete sequence. Returns the tokens and their total
    /// log-probability under the masked softmax.
    pub fn sample<R: Rng>(
        &self,
        grammar: &Grammar,
        rng: &mut R,
    ) -> Result<(Vec<TokenId>, f64, Vec<Vec<bool>>), PolicyError> {
        let lib = grammar.library();
        let mut partial = PartialTree::new();
        let mut h = self.initial_state();
        let mut log_prob = 0.0;
        let mut masks = Vec::new();
        while !partial.is_complete() {
            let mask = grammar.constraint_mask(&partial)?;
            let (logits, h_next) = self.policy_step(partial.observation(), &h);
            let probs = masked_softmax(&logits, &mask);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = None;
            for (k, &pk) in probs.iter().enumerate() {
                if pk > 0.0 {
                    acc += pk;
                    chosen = Some(k);
                    if u < acc {
                        break;
                    }
                }
            }
            let chosen = chosen.expect("non-empty mask");
            log_prob += masked_log_prob(&logits, &mask, chosen);
            partial.push(lib, chosen);
            masks.push(mask);
            h = h_next;
        }
        Ok((partial.tokens(), log_prob, masks))
    }

    fn replay(&self, grammar: &Grammar, seq: &[TokenId]) -> Result<(Vec<StepCache>, f64), PolicyError> {
        let lib = grammar.library();
        let mut partial = PartialTree::new();
        let mut h = self.initial_state();
        let mut caches = Vec::with_capacity(seq.len());
        let mut log_prob = 0.0;
        for (step, &id) in seq.iter().enumerate() {
            if partial.is_complete() || id >= self.n_tokens {
                return Err(PolicyError::Violation {
                    step,
                    token: id,
                    reason: "token does not fit the sequence",
                });
            }
            let mask = grammar.constraint_mask(&partial)?;
            if !mask[id] {
                return Err(PolicyError::ZeroProbability { step, token: id });
            }
            let inputs = self.input_units(partial.observation());
            let (z, r, n, h_new, logits) = self.forward(inputs, &h);
            log_prob += masked_log_prob(&logits, &mask, id);
            let probs = masked_softmax(&logits, &mask);
            caches.push(StepCache {
                inputs,
                h_prev: std::mem::replace(&mut h, h_new.clone()),
                z,
                r,
                n,
                h: h_new,
                probs,
                chosen: id,
            });
            partial.push(lib, id);
        }
        if !partial.is_complete() {
            return Err(PolicyError::Violation {
                step: seq.len(),
                token: usize::MAX,
                reason: "sequence ends with open slots",
            });
        }
        Ok((caches, log_prob))
    }

    /// Σ log p(token_i | masked softmax at step i).
    pub fn log_prob(&self, grammar: &Grammar, seq: &[TokenId]) -> Result<f64, PolicyError> {
        self.replay(grammar, seq).map(|(_, lp)| lp)
    }

    /// Gradient of [`PolicyNet::log_prob`] with respect to every parameter.
    pub fn grad_log_prob(&self, grammar: &Grammar, seq: &[TokenId]) -> Result<Vec<f64>, PolicyError> {
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_grad_log_prob(grammar, seq, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Adds `weight · ∇ log p(seq)` into `grad` and returns `log p(seq)`.
    pub fn accumulate_grad_log_prob(
        &self,
        grammar: &Grammar,
        seq: &[TokenId],
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64, PolicyError> {
        assert_eq!(grad.len(), self.params.len());
        let (caches, log_prob) = self.replay(grammar, seq)?;
        if weight == 0.0 {
            return Ok(log_prob);
        }
        let hs = self.hidden;
        let p = &self.params;
        let (ow_z, ow_r, ow_n) = (self.off(W_Z), self.off(W_R), self.off(W_N));
        let (ou_z, ou_r, ou_n) = (self.off(U_Z), self.off(U_R), self.off(U_N));
        let (ob_z, ob_r, ob_n) = (self.off(B_Z), self.off(B_R), self.off(B_N));
        let (ow_o, ob_o) = (self.off(W_OUT), self.off(B_OUT));

        let mut dh_next = vec![0.0; hs];
        for c in caches.iter().rev() {
            // d log p / d logits = onehot(chosen) - probs
            let mut dh = dh_next.clone();
            for k in 0..self.n_tokens {
                let dl = weight * ((k == c.chosen) as u8 as f64 - c.probs[k]);
                if dl == 0.0 {
                    continue;
                }
                grad[ob_o + k] += dl;
                let row = ow_o + k * hs;
                for i in 0..hs {
                    grad[row + i] += dl * c.h[i];
                    dh[i] += dl * p[row + i];
                }
            }
            let mut dh_prev = vec![0.0; hs];
            let mut da_n = vec![0.0; hs];
            let mut da_z = vec![0.0; hs];
            for i in 0..hs {
                let dn = dh[i] * (1.0 - c.z[i]);
                let dz = dh[i] * (c.h_prev[i] - c.n[i]);
                dh_prev[i] += dh[i] * c.z[i];
                da_n[i] = dn * (1.0 - c.n[i] * c.n[i]);
                da_z[i] = dz * c.z[i] * (1.0 - c.z[i]);
            }
            // candidate gate: a_n = Wn x + Un (r ⊙ h_prev) + bn
            let mut d_rh = vec![0.0; hs];
            for i in 0..hs {
                let row = ou_n + i * hs;
                for j in 0..hs {
                    grad[row + j] += da_n[i] * c.r[j] * c.h_prev[j];
                    d_rh[j] += p[row + j] * da_n[i];
                }
            }
            let mut da_r = vec![0.0; hs];
            for j in 0..hs {
                let dr = d_rh[j] * c.h_prev[j];
                dh_prev[j] += d_rh[j] * c.r[j];
                da_r[j] = dr * c.r[j] * (1.0 - c.r[j]);
            }
            for (da, ow, ou, ob) in [
                (&da_z, ow_z, ou_z, ob_z),
                (&da_r, ow_r, ou_r, ob_r),
                (&da_n, ow_n, usize::MAX, ob_n),
            ] {
                for i in 0..hs {
                    grad[ob + i] += da[i];
                    grad[ow + c.inputs[0] * hs + i] += da[i];
                    grad[ow + c.inputs[1] * hs + i] += da[i];
                }
                if ou == usize::MAX {
                    continue;
                }
                for i in 0..hs {
                    let row = ou + i * hs;
                    for j in 0..hs {
                        grad[row + j] += da[i] * c.h_prev[j];
                        dh_prev[j] += p[row + j] * da[i];
                    }
                }
            }
            dh_next = dh_prev;
        }
        Ok(log_prob)
    }
}
