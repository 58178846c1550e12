//! Fitting the constant slots of an expression by derivative-free direct
//! search on the reward.

use serde::{Deserialize, Serialize};

use crate::classify::{reward, RewardKind};
use crate::data::LabeledData;
use crate::expr::ExprTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstFitReport {
    pub initial_reward: f64,
    pub final_reward: f64,
    /// Objective evaluations spent after the initial point.
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadConfig {
    /// Maximum objective evaluations after the initial point.
    pub budget: usize,
    /// Offset of the initial simplex vertices along each axis.
    pub spread: f64,
    /// Stop once every vertex is within `xtol` (max-norm) and `ftol` (value)
    /// of the best vertex.
    pub xtol: f64,
    pub ftol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            budget: 200,
            spread: 0.5,
            xtol: 1e-4,
            ftol: 1e-9,
        }
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Maximises `f` starting from `x0` with the Nelder–Mead simplex method.
/// Non-finite objective values rank below every finite value. Returns the
/// best point ever evaluated, so the result never scores below `x0`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    x0: &[f64],
    mut f: F,
    cfg: &NelderMeadConfig,
) -> (Vec<f64>, ConstFitReport) {
    let score = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let initial = score(f(x0));
    let n = x0.len();
    if n == 0 {
        return (
            Vec::new(),
            ConstFitReport {
                initial_reward: initial,
                final_reward: initial,
                iterations: 0,
                converged: true,
            },
        );
    }
    let mut evals = 0usize;
    let mut best = (x0.to_vec(), initial);
    let mut eval = |x: &[f64], evals: &mut usize, best: &mut (Vec<f64>, f64)| {
        *evals += 1;
        let v = score(f(x));
        if v > best.1 {
            *best = (x.to_vec(), v);
        }
        v
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), initial)];
    for i in 0..n {
        if evals >= cfg.budget {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += cfg.spread;
        let v = eval(&x, &mut evals, &mut best);
        simplex.push((x, v));
    }
    let mut converged = false;
    if simplex.len() == n + 1 {
        loop {
            // descending by value; stable so earlier vertices win ties
            simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
            let top = &simplex[0];
            let flat = simplex.iter().all(|(x, v)| {
                let dv = if *v == top.1 { 0.0 } else { top.1 - v };
                dv <= cfg.ftol && x.iter().zip(&top.0).all(|(a, b)| (a - b).abs() <= cfg.xtol)
            });
            if flat {
                converged = true;
                break;
            }
            if evals >= cfg.budget {
                break;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let worst = simplex[n].clone();
            let toward =
                |coef: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + coef * (c - w)).collect() };
            let xr = toward(REFLECT);
            let fr = eval(&xr, &mut evals, &mut best);
            if fr > simplex[0].1 {
                if evals >= cfg.budget {
                    simplex[n] = (xr, fr);
                    continue;
                }
                let xe = toward(EXPAND);
                let fe = eval(&xe, &mut evals, &mut best);
                simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr > simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            if evals >= cfg.budget {
                break;
            }
            if fr > worst.1 {
                let xc = toward(CONTRACT);
                let fc = eval(&xc, &mut evals, &mut best);
                if fc >= fr {
                    simplex[n] = (xc, fc);
                    continue;
                }
            } else {
                let xc = toward(-CONTRACT);
                let fc = eval(&xc, &mut evals, &mut best);
                if fc > worst.1 {
                    simplex[n] = (xc, fc);
                    continue;
                }
            }
            let anchor = simplex[0].0.clone();
            for v in simplex.iter_mut().skip(1) {
                if evals >= cfg.budget {
                    break;
                }
                let x: Vec<f64> = anchor.iter().zip(&v.0).map(|(a, b)| a + SHRINK * (b - a)).collect();
                let fx = eval(&x, &mut evals, &mut best);
                *v = (x, fx);
            }
        }
    }
    (
        best.0,
        ConstFitReport {
            initial_reward: initial,
            final_reward: best.1,
            iterations: evals,
            converged,
        },
    )
}

/// Fits the constants of `tree` to maximise its reward on `data` at
/// threshold `t`. Trees without constants come back unchanged.
pub fn optimize_constants(
    tree: &ExprTree,
    data: &LabeledData,
    kind: RewardKind,
    t: f64,
    cfg: &NelderMeadConfig,
) -> (ExprTree, ConstFitReport) {
    let mut work = tree.clone();
    let (best, report) = nelder_mead(
        tree.constants(),
        |c| {
            work.set_constants(c);
            reward(&work, data, kind, t).unwrap_or(0.0)
        },
        cfg,
    );
    let fitted = if best.is_empty() {
        tree.clone()
    } else {
        tree.clone().with_constants(&best)
    };
    (fitted, report)
}
