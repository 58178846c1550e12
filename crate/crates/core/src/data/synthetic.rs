//! Seeded generator of transaction logs with a planted fraud rule.
//!
//! Transactions are spread uniformly over 720 hourly steps. Types follow the
//! marginals `CASH_OUT 0.35, PAYMENT 0.34, CASH_IN 0.22, TRANSFER 0.08,
//! DEBIT 0.01`; amounts are log-normal with type-specific medians
//! (`CASH_IN 1500, CASH_OUT 1800, DEBIT 50, PAYMENT 100, TRANSFER 5000`) and
//! log-scale 0.9, rounded to cents.
//!
//! Recipients come from three pools: customer accounts (non-zero balances),
//! merchants (zero balances, payments only) and external accounts (zero
//! balances). Cash-outs go to an external account 40% of the time, legitimate
//! transfers 50% of the time when the chosen external account already has
//! history.
//!
//! Fraud rows are transfers to an external account whose amount is at least
//! the largest of that recipient's previous six amounts. Legitimate external
//! transfers that would come within 80% of that maximum are scaled down to
//! 5–60% of it, so before label noise `isFraud` equals the rule exactly.
//! Label noise flips the same number of rows in each direction, keeping the
//! fraud count at `round(rows * fraud_rate)`.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::features::FeatureTable;
use super::raw::{RawTransaction, TxType};
use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub rows: usize,
    pub fraud_rate: f64,
    pub seed: u64,
    /// Fraction of the fraud count flipped in each direction.
    pub label_noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            rows: 50_000,
            fraud_rate: 0.01,
            seed: 0,
            label_noise: 0.005,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.rows < 100 {
            return Err(DataError::ConfigInvalid(format!(
                "rows must be at least 100, got {}",
                self.rows
            )));
        }
        if !(self.fraud_rate > 0.0 && self.fraud_rate < 0.5) {
            return Err(DataError::ConfigInvalid(format!(
                "fraud rate must be in (0, 0.5), got {}",
                self.fraud_rate
            )));
        }
        if !(0.0..=0.01).contains(&self.label_noise) {
            return Err(DataError::ConfigInvalid(format!(
                "label noise must be in [0, 0.01], got {}",
                self.label_noise
            )));
        }
        Ok(())
    }
}

const STEPS: u32 = 720;
const TYPE_WEIGHTS: [(TxType, f64); 5] = [
    (TxType::CashOut, 0.35),
    (TxType::Payment, 0.34),
    (TxType::CashIn, 0.22),
    (TxType::Transfer, 0.08),
    (TxType::Debit, 0.01),
];

fn median(t: TxType) -> f64 {
    match t {
        TxType::CashIn => 1500.0,
        TxType::CashOut => 1800.0,
        TxType::Debit => 50.0,
        TxType::Payment => 100.0,
        TxType::Transfer => 5000.0,
    }
}

fn draw_type<R: Rng>(rng: &mut R) -> TxType {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (t, w) in TYPE_WEIGHTS {
        acc += w;
        if u < acc {
            return t;
        }
    }
    TxType::Debit
}

fn cents(v: f64) -> i64 {
    (v * 100.0).round().max(1.0) as i64
}

fn money(c: i64) -> f64 {
    c as f64 / 100.0
}

struct Pools {
    customers: usize,
    external: usize,
    merchants: usize,
}

fn customer(i: usize) -> String {
    format!("C{}", 100_000_000 + i)
}

fn external(i: usize) -> String {
    format!("C{}", 900_000_000 + i)
}

fn merchant(i: usize) -> String {
    format!("M{}", 100_000_000 + i)
}

/// Generates `cfg.rows` transactions ordered by step. Identical configs give
/// identical output.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Vec<RawTransaction>, DataError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.rows;
    let pools = Pools {
        customers: (n / 5).max(50),
        external: (n / 25).max(20),
        merchants: (n / 10).max(10),
    };
    let mut steps: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=STEPS)).collect();
    steps.sort_unstable();
    let n_fraud = (n as f64 * cfg.fraud_rate).round() as usize;
    let fraud_at: HashSet<usize> = index::sample(&mut rng, n, n_fraud).into_iter().collect();

    let mut history: HashMap<usize, VecDeque<i64>> = HashMap::new();
    let mut rows = Vec::with_capacity(n);
    for (i, &step) in steps.iter().enumerate() {
        let is_fraud = fraud_at.contains(&i);
        let tx_type = if is_fraud {
            TxType::Transfer
        } else {
            draw_type(&mut rng)
        };
        let dist = LogNormal::new(median(tx_type).ln(), 0.9).expect("valid log-normal");
        let mut amount = cents(dist.sample(&mut rng));
        let orig = customer(rng.gen_range(0..pools.customers));

        // recipient: Some(external pool index) or a named account with balances
        let mut ext_idx = None;
        let mut dest = String::new();
        let mut dest_zero = false;
        if is_fraud {
            let e = rng.gen_range(0..pools.external);
            let prev_max = history.get(&e).and_then(|h| h.iter().max().copied()).unwrap_or(0);
            let floor = (prev_max as f64 * rng.gen_range(1.0..1.6)).ceil() as i64;
            amount = amount.max(floor).max(prev_max);
            ext_idx = Some(e);
        } else {
            match tx_type {
                TxType::Payment => {
                    dest = merchant(rng.gen_range(0..pools.merchants));
                    dest_zero = true;
                }
                TxType::CashOut if rng.gen_bool(0.4) => ext_idx = Some(rng.gen_range(0..pools.external)),
                TxType::Transfer if rng.gen_bool(0.5) => {
                    let e = rng.gen_range(0..pools.external);
                    if let Some(prev_max) = history.get(&e).and_then(|h| h.iter().max().copied()) {
                        if amount as f64 >= 0.8 * prev_max as f64 {
                            amount = ((prev_max as f64 * rng.gen_range(0.05..0.6)).floor() as i64).max(1);
                        }
                        if amount < prev_max {
                            ext_idx = Some(e);
                        }
                    }
                }
                _ => {}
            }
            if ext_idx.is_none() && dest.is_empty() {
                dest = customer(rng.gen_range(0..pools.customers));
            }
        }
        if let Some(e) = ext_idx {
            dest = external(e);
            dest_zero = true;
            let h = history.entry(e).or_default();
            if h.len() == 6 {
                h.pop_front();
            }
            h.push_back(amount);
        }

        let (old_org, new_org) = if rng.gen_bool(0.1) {
            (0, 0)
        } else if tx_type == TxType::CashIn {
            let old = (amount as f64 * rng.gen_range(0.0..5.0)) as i64;
            (old, old + amount)
        } else {
            let old = (amount as f64 * rng.gen_range(1.0..4.0)) as i64;
            (old, old - amount)
        };
        let (old_dest, new_dest) = if dest_zero {
            (0, 0)
        } else {
            let old = rng.gen_range(10_000..50_000_000i64);
            (old, old + amount)
        };
        rows.push(RawTransaction {
            step,
            tx_type,
            amount: money(amount),
            name_orig: orig,
            oldbalance_org: money(old_org),
            newbalance_orig: money(new_org),
            name_dest: dest,
            oldbalance_dest: money(old_dest),
            newbalance_dest: money(new_dest),
            is_fraud,
            is_flagged_fraud: is_fraud && amount > 20_000_000,
        });
    }

    let flips = (cfg.label_noise * n_fraud as f64).round() as usize;
    if flips > 0 {
        let fraud: Vec<usize> = (0..n).filter(|i| rows[*i].is_fraud).collect();
        let legit: Vec<usize> = (0..n).filter(|i| !rows[*i].is_fraud).collect();
        let f = index::sample(&mut rng, fraud.len(), flips.min(fraud.len()));
        let l = index::sample(&mut rng, legit.len(), flips.min(legit.len()));
        for k in f {
            rows[fraud[k]].is_fraud = false;
        }
        for k in l {
            rows[legit[k]].is_fraud = true;
        }
    }
    Ok(rows)
}

/// The planted rule on an engineered (unscaled) table: transfer to an
/// external account with `amount ≥ maxDest7`.
pub fn planted_rule(table: &FeatureTable) -> Result<Vec<bool>, DataError> {
    let col = |n: &str| table.column(n).ok_or_else(|| DataError::UnknownFeature(n.to_string()));
    let transfer = col("type_transfer")?;
    let ext = col("externalDest")?;
    let amount = col("amount")?;
    let max7 = col("maxDest7")?;
    Ok((0..table.n_rows())
        .map(|i| transfer[i] == 1.0 && ext[i] == 1.0 && amount[i] >= max7[i])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{confusion, metrics};
    use crate::data::{engineer_features, write_csv, EngineerConfig};

    fn small(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            rows: 5_000,
            fraud_rate: 0.02,
            seed,
            label_noise: 0.01,
        }
    }

    #[test]
    fn deterministic_bytes() {
        let write = |rows: &[RawTransaction]| {
            let mut b = Vec::new();
            write_csv(rows, &mut b).unwrap();
            b
        };
        let a = write(&generate_synthetic(&small(9)).unwrap());
        let b = write(&generate_synthetic(&small(9)).unwrap());
        let c = write(&generate_synthetic(&small(10)).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fraud_count_is_exact() {
        let rows = generate_synthetic(&small(1)).unwrap();
        assert_eq!(rows.iter().filter(|r| r.is_fraud).count(), 100);
        assert!(rows.windows(2).all(|w| w[0].step <= w[1].step));
    }

    #[test]
    fn planted_rule_matches_labels_up_to_noise() {
        let cfg = SyntheticConfig {
            label_noise: 0.0,
            ..small(2)
        };
        let rows = generate_synthetic(&cfg).unwrap();
        let table = engineer_features(&rows, &EngineerConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(planted_rule(&table).unwrap(), table.labels);

        let rows = generate_synthetic(&small(2)).unwrap();
        let table = engineer_features(&rows, &EngineerConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        let m = metrics(&confusion(&planted_rule(&table).unwrap(), &table.labels).unwrap()).unwrap();
        assert!(m.f1 >= 0.98, "{m:?}");
    }

    #[test]
    fn amount_condition_is_needed() {
        let rows = generate_synthetic(&small(3)).unwrap();
        let table = engineer_features(&rows, &EngineerConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        let t = table.column("type_transfer").unwrap();
        let e = table.column("externalDest").unwrap();
        let coarse: Vec<bool> = (0..table.n_rows()).map(|i| t[i] == 1.0 && e[i] == 1.0).collect();
        let m = metrics(&confusion(&coarse, &table.labels).unwrap()).unwrap();
        assert!(m.f1 < 0.7, "{m:?}");
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SyntheticConfig { rows: 99, ..small(0) },
            SyntheticConfig {
                fraud_rate: 0.6,
                ..small(0)
            },
            SyntheticConfig {
                fraud_rate: 0.0,
                ..small(0)
            },
            SyntheticConfig {
                label_noise: 0.02,
                ..small(0)
            },
        ] {
            assert!(matches!(generate_synthetic(&cfg), Err(DataError::ConfigInvalid(_))));
        }
    }
}
