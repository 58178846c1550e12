use std::collections::{HashMap, VecDeque};
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::raw::{RawTransaction, TxType};
use super::{DataError, LabeledData};
use crate::expr::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineerConfig {
    /// Multiplier on the per-account noise standard deviation of the
    /// whole-history aggregates; 0 disables the noise.
    pub noise_scale: f64,
}

impl Default for EngineerConfig {
    fn default() -> Self {
        EngineerConfig { noise_scale: 1.0 }
    }
}

/// Named numeric columns with labels. Boolean columns hold only 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub boolean: Vec<bool>,
    pub labels: Vec<bool>,
}

/// Linear-interpolation quantile of an ascending slice (`q` in `[0, 1]`).
pub fn numeric_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Default)]
struct History {
    amounts: Vec<f64>,
}

struct Summary {
    sum: f64,
    n: usize,
    /// Largest value and the row holding it, then the second largest.
    top: [(f64, usize); 2],
    sigma: f64,
}

impl Summary {
    fn of(amounts: &[f64], rows: &[usize]) -> Summary {
        let mut sorted = amounts.to_vec();
        sorted.sort_by(f64::total_cmp);
        let sigma = 0.01 * (numeric_quantile(&sorted, 0.75) - sorted[0]);
        let mut top = [(f64::NEG_INFINITY, usize::MAX); 2];
        for (&a, &r) in amounts.iter().zip(rows) {
            if a > top[0].0 {
                top[1] = top[0];
                top[0] = (a, r);
            } else if a > top[1].0 {
                top[1] = (a, r);
            }
        }
        Summary {
            sum: amounts.iter().sum(),
            n: amounts.len(),
            top,
            sigma,
        }
    }

    /// Mean and maximum over every other transaction of the account; both 0
    /// when there is none.
    fn excluding(&self, amount: f64, row: usize) -> (f64, f64) {
        if self.n <= 1 {
            return (0.0, 0.0);
        }
        let mean = (self.sum - amount) / (self.n - 1) as f64;
        let max = if self.top[0].1 == row {
            self.top[1].0
        } else {
            self.top[0].0
        };
        (mean, max)
    }
}

fn summaries<'a>(keys: impl Iterator<Item = &'a str>, amounts: &[f64]) -> (Vec<usize>, Vec<Summary>) {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut hist: Vec<(History, Vec<usize>)> = Vec::new();
    let mut of_row = Vec::with_capacity(amounts.len());
    for (row, key) in keys.enumerate() {
        let id = *ids.entry(key).or_insert_with(|| {
            hist.push((History::default(), Vec::new()));
            hist.len() - 1
        });
        hist[id].0.amounts.push(amounts[row]);
        hist[id].1.push(row);
        of_row.push(id);
    }
    let sums = hist.iter().map(|(h, rows)| Summary::of(&h.amounts, rows)).collect();
    (of_row, sums)
}

const BASE_COLUMNS: [&str; 18] = [
    "step",
    "amount",
    "oldbalanceOrg",
    "newbalanceOrig",
    "oldbalanceDest",
    "newbalanceDest",
    "externalOrig",
    "externalDest",
    "meanOrig",
    "meanDest",
    "maxOrig",
    "maxDest",
    "meanDest3",
    "meanDest7",
    "maxDest3",
    "maxDest7",
    "numTransOrig",
    "numTransDest",
];

/// Column names of [`engineer_features`] output, in order.
pub fn engineered_feature_names() -> Vec<String> {
    BASE_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(TxType::ALL.iter().map(|t| t.column_name()))
        .collect()
}

/// Builds the engineered feature table.
///
/// Rows are stably sorted by `step` first. Accounts whose balances before and
/// after the transaction are both zero are flagged external and their
/// balances imputed (`newbalanceDest = oldbalanceDest + amount`,
/// `oldbalanceOrg = newbalanceOrig + amount`). Whole-history aggregates
/// exclude the current row, include later rows and carry Gaussian noise;
/// recipient windows cover the current row and up to 2 or 6 earlier ones.
pub fn engineer_features<R: Rng>(rows: &[RawTransaction], cfg: &EngineerConfig, rng: &mut R) -> FeatureTable {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| rows[i].step);
    let rows: Vec<&RawTransaction> = order.iter().map(|&i| &rows[i]).collect();
    let n = rows.len();
    let amounts: Vec<f64> = rows.iter().map(|r| r.amount).collect();

    let (orig_of, orig_sum) = summaries(rows.iter().map(|r| r.name_orig.as_str()), &amounts);
    let (dest_of, dest_sum) = summaries(rows.iter().map(|r| r.name_dest.as_str()), &amounts);

    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); BASE_COLUMNS.len()];
    let mut windows: Vec<VecDeque<f64>> = (0..dest_sum.len()).map(|_| VecDeque::with_capacity(7)).collect();
    for (i, r) in rows.iter().enumerate() {
        let ext_orig = r.oldbalance_org == 0.0 && r.newbalance_orig == 0.0;
        let ext_dest = r.oldbalance_dest == 0.0 && r.newbalance_dest == 0.0;
        let old_org = if ext_orig {
            r.newbalance_orig + r.amount
        } else {
            r.oldbalance_org
        };
        let new_dest = if ext_dest {
            r.oldbalance_dest + r.amount
        } else {
            r.newbalance_dest
        };

        let os = &orig_sum[orig_of[i]];
        let ds = &dest_sum[dest_of[i]];
        let (mean_o, max_o) = os.excluding(r.amount, i);
        let (mean_d, max_d) = ds.excluding(r.amount, i);
        let mut noisy = |v: f64, sigma: f64| {
            let z: f64 = rng.sample(StandardNormal);
            v + cfg.noise_scale * sigma * z
        };
        let mean_o = noisy(mean_o, os.sigma);
        let max_o = noisy(max_o, os.sigma);
        let mean_d = noisy(mean_d, ds.sigma);
        let max_d = noisy(max_d, ds.sigma);

        let w = &mut windows[dest_of[i]];
        if w.len() == 7 {
            w.pop_front();
        }
        w.push_back(r.amount);
        let last = |k: usize| w.iter().rev().take(k);
        let win_mean = |k: usize| last(k).sum::<f64>() / last(k).count() as f64;
        let win_max = |k: usize| last(k).copied().fold(f64::NEG_INFINITY, f64::max);

        let vals = [
            r.step as f64,
            r.amount,
            old_org,
            r.newbalance_orig,
            r.oldbalance_dest,
            new_dest,
            f64::from(u8::from(ext_orig)),
            f64::from(u8::from(ext_dest)),
            mean_o,
            mean_d,
            max_o,
            max_d,
            win_mean(3),
            win_mean(7),
            win_max(3),
            win_max(7),
            os.n as f64,
            ds.n as f64,
        ];
        for (c, v) in cols.iter_mut().zip(vals) {
            c.push(v);
        }
    }

    let names = engineered_feature_names();
    let mut boolean = vec![false; BASE_COLUMNS.len()];
    boolean[6] = true;
    boolean[7] = true;
    for t in TxType::ALL {
        boolean.push(true);
        cols.push(rows.iter().map(|r| f64::from(u8::from(r.tx_type == t))).collect());
    }
    FeatureTable {
        names,
        columns: cols,
        boolean,
        labels: rows.iter().map(|r| r.is_fraud).collect(),
    }
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|i| self.columns[i].as_slice())
    }

    pub fn to_labeled(&self) -> LabeledData {
        LabeledData {
            x: FeatureMatrix::from_columns(self.columns.clone()).expect("columns have equal length"),
            y: self.labels.clone(),
        }
    }

    /// Writes the table as CSV with a trailing `isFraud` column. Values use
    /// the shortest representation that reads back exactly.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push("isFraud");
        w.write_record(&header)?;
        let mut rec = Vec::with_capacity(header.len());
        for r in 0..self.n_rows() {
            rec.clear();
            rec.extend(self.columns.iter().map(|c| c[r].to_string()));
            rec.push(u8::from(self.labels[r]).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`FeatureTable::write_csv`]. Columns holding
    /// only 0 and 1 are treated as Boolean.
    pub fn read_csv<R: Read>(reader: R) -> Result<FeatureTable, DataError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let label = headers
            .iter()
            .position(|h| h == "isFraud")
            .ok_or_else(|| DataError::SchemaMismatch("missing column: isFraud".into()))?;
        let names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut columns = vec![Vec::new(); names.len()];
        let mut labels = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| DataError::ParseError {
                row,
                message: e.to_string(),
            })?;
            let mut c = 0;
            for (j, field) in rec.iter().enumerate() {
                if j == label {
                    labels.push(match field.trim() {
                        "0" => false,
                        "1" => true,
                        other => {
                            return Err(DataError::ParseError {
                                row,
                                message: format!("isFraud: {other:?} is not 0 or 1"),
                            })
                        }
                    });
                } else {
                    let v: f64 = field.trim().parse().map_err(|_| DataError::ParseError {
                        row,
                        message: format!("{}: {field:?} is not a number", names[c]),
                    })?;
                    columns[c].push(v);
                    c += 1;
                }
            }
        }
        let boolean = columns
            .iter()
            .map(|c| !c.is_empty() && c.iter().all(|&v| v == 0.0 || v == 1.0))
            .collect();
        Ok(FeatureTable {
            names,
            columns,
            boolean,
            labels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tx(step: u32, t: TxType, amount: f64, orig: &str, dest: &str, dest_bal: (f64, f64)) -> RawTransaction {
        RawTransaction {
            step,
            tx_type: t,
            amount,
            name_orig: orig.into(),
            oldbalance_org: amount * 2.0,
            newbalance_orig: amount,
            name_dest: dest.into(),
            oldbalance_dest: dest_bal.0,
            newbalance_dest: dest_bal.1,
            is_fraud: false,
            is_flagged_fraud: false,
        }
    }

    fn col<'a>(t: &'a FeatureTable, name: &str) -> &'a [f64] {
        t.column(name).unwrap()
    }

    fn quiet() -> EngineerConfig {
        EngineerConfig { noise_scale: 0.0 }
    }

    #[test]
    fn single_transaction_window_is_its_amount() {
        let rows = vec![tx(1, TxType::Transfer, 250.0, "A", "B", (5.0, 255.0))];
        let t = engineer_features(&rows, &quiet(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(col(&t, "maxDest7"), &[250.0]);
        assert_eq!(col(&t, "maxDest3"), &[250.0]);
        assert_eq!(col(&t, "meanDest"), &[0.0]);
        assert_eq!(col(&t, "numTransDest"), &[1.0]);
    }

    #[test]
    fn external_recipient_is_imputed() {
        let rows = vec![tx(1, TxType::Transfer, 100.0, "A", "B", (0.0, 0.0))];
        let t = engineer_features(&rows, &quiet(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(col(&t, "externalDest"), &[1.0]);
        assert_eq!(col(&t, "newbalanceDest"), &[100.0]);
        assert_eq!(col(&t, "externalOrig"), &[0.0]);
    }

    #[test]
    fn external_customer_is_imputed() {
        let mut r = tx(1, TxType::CashOut, 40.0, "A", "B", (1.0, 41.0));
        r.oldbalance_org = 0.0;
        r.newbalance_orig = 0.0;
        let t = engineer_features(&[r], &quiet(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(col(&t, "externalOrig"), &[1.0]);
        assert_eq!(col(&t, "oldbalanceOrg"), &[40.0]);
    }

    #[test]
    fn whole_history_mean_excludes_current() {
        let rows = vec![
            tx(1, TxType::Payment, 10.0, "A", "R", (1.0, 11.0)),
            tx(2, TxType::Payment, 20.0, "B", "R", (1.0, 21.0)),
            tx(3, TxType::Payment, 30.0, "C", "R", (1.0, 31.0)),
        ];
        let t = engineer_features(&rows, &quiet(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(col(&t, "meanDest")[2], 15.0);
        assert_eq!(col(&t, "maxDest")[2], 20.0);
        // future rows count for the whole-history features
        assert_eq!(col(&t, "meanDest")[0], 25.0);
        assert_eq!(col(&t, "maxDest")[0], 30.0);
        // but never for the windows
        assert_eq!(col(&t, "maxDest7"), &[10.0, 20.0, 30.0]);
        assert_eq!(col(&t, "meanDest3"), &[10.0, 15.0, 20.0]);
        assert_eq!(col(&t, "numTransDest"), &[3.0; 3]);
    }

    #[test]
    fn windows_slide() {
        let amounts = [5.0, 1.0, 9.0, 2.0, 3.0, 4.0, 1.0, 1.0, 1.0, 1.0];
        let rows: Vec<_> = amounts
            .iter()
            .enumerate()
            .map(|(i, &a)| tx(i as u32, TxType::Transfer, a, "A", "R", (1.0, 1.0 + a)))
            .collect();
        let t = engineer_features(&rows, &quiet(), &mut ChaCha8Rng::seed_from_u64(0));
        for i in 0..amounts.len() {
            let lo3 = i.saturating_sub(2);
            let lo7 = i.saturating_sub(6);
            let m3 = amounts[lo3..=i].iter().copied().fold(f64::MIN, f64::max);
            let m7 = amounts[lo7..=i].iter().copied().fold(f64::MIN, f64::max);
            assert_eq!(col(&t, "maxDest3")[i], m3, "row {i}");
            assert_eq!(col(&t, "maxDest7")[i], m7, "row {i}");
            let mean7: f64 = amounts[lo7..=i].iter().sum::<f64>() / (i - lo7 + 1) as f64;
            assert!((col(&t, "meanDest7")[i] - mean7).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_are_stably_sorted_by_step() {
        let mut a = tx(5, TxType::Debit, 1.0, "A", "X", (1.0, 2.0));
        a.is_fraud = true;
        let rows = vec![
            a,
            tx(2, TxType::Debit, 2.0, "B", "X", (1.0, 3.0)),
            tx(5, TxType::Debit, 3.0, "C", "X", (1.0, 4.0)),
        ];
        let t = engineer_features(&rows, &quiet(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(col(&t, "amount"), &[2.0, 1.0, 3.0]);
        assert_eq!(t.labels, vec![false, true, false]);
    }

    #[test]
    fn one_hot_and_dropped_columns() {
        let rows: Vec<_> = TxType::ALL
            .iter()
            .map(|&ty| tx(1, ty, 3.0, "A", "B", (1.0, 4.0)))
            .collect();
        let t = engineer_features(&rows, &quiet(), &mut ChaCha8Rng::seed_from_u64(0));
        for r in 0..rows.len() {
            let s: f64 = TxType::ALL.iter().map(|ty| col(&t, &ty.column_name())[r]).sum();
            assert_eq!(s, 1.0);
        }
        for gone in ["nameOrig", "nameDest", "isFlaggedFraud", "isFraud", "type"] {
            assert!(t.index_of(gone).is_none());
        }
        assert_eq!(t.names.len(), t.boolean.len());
    }

    #[test]
    fn noise_is_zero_for_single_transaction_accounts_and_seeded() {
        let rows = vec![
            tx(1, TxType::Payment, 10.0, "A", "R", (1.0, 11.0)),
            tx(2, TxType::Payment, 20.0, "B", "R", (1.0, 21.0)),
            tx(3, TxType::Payment, 60.0, "C", "R", (1.0, 61.0)),
        ];
        let cfg = EngineerConfig::default();
        let a = engineer_features(&rows, &cfg, &mut ChaCha8Rng::seed_from_u64(3));
        let b = engineer_features(&rows, &cfg, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert_eq!(col(&a, "meanOrig"), &[0.0; 3]);
        assert_ne!(col(&a, "meanDest")[2], 15.0);
        // sigma = 0.01 * (q75 - min) = 0.01 * (40 - 10)
        assert!((col(&a, "meanDest")[2] - 15.0).abs() < 0.3 * 6.0);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(numeric_quantile(&[10.0, 20.0, 60.0], 0.75), 40.0);
        assert_eq!(numeric_quantile(&[4.0], 0.75), 4.0);
        assert_eq!(numeric_quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
    }

    #[test]
    fn table_csv_round_trip() {
        let rows = vec![
            tx(1, TxType::Transfer, 100.25, "A", "B", (0.0, 0.0)),
            tx(2, TxType::CashOut, 7.1, "A", "C", (3.0, 10.1)),
        ];
        let t = engineer_features(&rows, &EngineerConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = FeatureTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.names, t.names);
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.labels, t.labels);
        for (i, name) in t.names.iter().enumerate() {
            if t.boolean[i] {
                assert!(back.boolean[i], "{name}");
            }
        }
    }
}
