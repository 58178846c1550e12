use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureTable;
use super::{DataError, LabeledData};
use crate::expr::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.75,
            validation: 0.10,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<(), DataError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DataError::ConfigInvalid(format!(
                "split fractions {parts:?} must be in [0, 1] and sum to 1"
            )));
        }
        if self.train == 0.0 {
            return Err(DataError::ConfigInvalid("train fraction must be positive".into()));
        }
        Ok(())
    }
}

/// Per-column standardisation fitted on the training rows. `None` marks a
/// column left as is (Boolean or zero variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub names: Vec<String>,
    pub params: Vec<Option<(f64, f64)>>,
    /// Numeric columns skipped because their training std is zero.
    pub degenerate: Vec<String>,
}

impl Scaler {
    pub fn fit(names: &[String], columns: &[Vec<f64>], boolean: &[bool]) -> Scaler {
        let mut params = Vec::with_capacity(columns.len());
        let mut degenerate = Vec::new();
        for (i, col) in columns.iter().enumerate() {
            if boolean[i] || col.is_empty() {
                params.push(None);
                continue;
            }
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            if std > 0.0 && std.is_finite() {
                params.push(Some((mean, std)));
            } else {
                log::warn!(
                    "column {} has zero variance on the training split; left unscaled",
                    names[i]
                );
                degenerate.push(names[i].clone());
                params.push(None);
            }
        }
        Scaler {
            names: names.to_vec(),
            params,
            degenerate,
        }
    }

    pub fn transform_value(&self, column: usize, v: f64) -> f64 {
        match self.params[column] {
            Some((mean, std)) => (v - mean) / std,
            None => v,
        }
    }

    pub fn inverse_value(&self, column: usize, v: f64) -> f64 {
        match self.params[column] {
            Some((mean, std)) => v * std + mean,
            None => v,
        }
    }

    pub fn transform(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let cols = x
            .columns()
            .iter()
            .enumerate()
            .map(|(c, col)| col.iter().map(|&v| self.transform_value(c, v)).collect())
            .collect();
        FeatureMatrix::from_columns(cols).expect("same shape")
    }
}

/// Train/validation/test splits of a feature table, scaled with a scaler
/// fitted on the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub boolean: Vec<bool>,
    pub train: LabeledData,
    pub validation: LabeledData,
    pub test: LabeledData,
    /// Row indices into the source table, ascending within each split.
    pub train_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub scaler: Scaler,
}

impl Dataset {
    pub fn split(&self, name: &str) -> Option<&LabeledData> {
        match name {
            "train" => Some(&self.train),
            "validation" | "val" => Some(&self.validation),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Shuffles the rows, cuts them into `round(f * n)`-sized splits (the test
/// split takes the remainder) and standardises numeric columns.
pub fn split_scale<R: Rng>(table: &FeatureTable, fractions: SplitFractions, rng: &mut R) -> Result<Dataset, DataError> {
    fractions.validate()?;
    let n = table.n_rows();
    let n_train = ((fractions.train * n as f64).round() as usize).min(n);
    let n_val = ((fractions.validation * n as f64).round() as usize).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut train_rows = order[..n_train].to_vec();
    let mut validation_rows = order[n_train..n_train + n_val].to_vec();
    let mut test_rows = order[n_train + n_val..].to_vec();
    train_rows.sort_unstable();
    validation_rows.sort_unstable();
    test_rows.sort_unstable();

    let all = table.to_labeled();
    let raw_train = all.select(&train_rows);
    let scaler = Scaler::fit(&table.names, raw_train.x.columns(), &table.boolean);
    let scaled = |d: LabeledData| LabeledData {
        x: scaler.transform(&d.x),
        y: d.y,
    };
    Ok(Dataset {
        feature_names: table.names.clone(),
        boolean: table.boolean.clone(),
        train: scaled(raw_train),
        validation: scaled(all.select(&validation_rows)),
        test: scaled(all.select(&test_rows)),
        train_rows,
        validation_rows,
        test_rows,
        scaler,
    })
}

/// Keeps every row of the minority class (fraud, in practice) and an equally
/// sized uniform sample of the majority class, in the original row order.
pub fn undersample<R: Rng>(train: &LabeledData, rng: &mut R) -> Result<LabeledData, DataError> {
    Ok(train.select(&undersample_rows(&train.y, rng)?))
}

/// [`undersample`] applied to the training split of a dataset, keeping
/// `train_rows` in step.
pub fn undersample_train<R: Rng>(ds: &mut Dataset, rng: &mut R) -> Result<(), DataError> {
    let rows = undersample_rows(&ds.train.y, rng)?;
    ds.train = ds.train.select(&rows);
    ds.train_rows = rows.iter().map(|&i| ds.train_rows[i]).collect();
    Ok(())
}

fn undersample_rows<R: Rng>(y: &[bool], rng: &mut R) -> Result<Vec<usize>, DataError> {
    let fraud: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let legit: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    if fraud.is_empty() {
        return Err(DataError::SingleClass("no fraudulent rows"));
    }
    if legit.is_empty() {
        return Err(DataError::SingleClass("no legitimate rows"));
    }
    let (keep, pool) = if fraud.len() <= legit.len() {
        (fraud, legit)
    } else {
        (legit, fraud)
    };
    let mut rows = keep.clone();
    rows.extend(index::sample(rng, pool.len(), keep.len()).into_iter().map(|i| pool[i]));
    rows.sort_unstable();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(n: usize) -> FeatureTable {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        FeatureTable {
            names: vec!["a".into(), "flag".into(), "const".into()],
            columns: vec![
                (0..n).map(|_| rng.gen_range(-50.0..1e6)).collect(),
                (0..n).map(|i| (i % 3 == 0) as u8 as f64).collect(),
                vec![4.0; n],
            ],
            boolean: vec![false, true, false],
            labels: (0..n).map(|i| i % 10 == 0).collect(),
        }
    }

    #[test]
    fn split_sizes() {
        let d = split_scale(
            &table(10_000),
            SplitFractions::default(),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert_eq!((d.train.len(), d.validation.len(), d.test.len()), (7500, 1000, 1500));
        let mut all: Vec<usize> = d
            .train_rows
            .iter()
            .chain(&d.validation_rows)
            .chain(&d.test_rows)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..10_000).collect::<Vec<_>>());
    }

    #[test]
    fn train_columns_standardised_and_flags_untouched() {
        let t = table(3_001);
        let d = split_scale(&t, SplitFractions::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let a = d.train.x.column(0);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let std = (a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-9 && (std - 1.0).abs() < 1e-9);
        let flags: Vec<f64> = d.train_rows.iter().map(|&r| t.columns[1][r]).collect();
        assert_eq!(d.train.x.column(1), flags.as_slice());
        assert_eq!(d.scaler.degenerate, vec!["const".to_string()]);
        assert!(d.test.x.column(2).iter().all(|&v| v == 4.0));
    }

    #[test]
    fn scaler_fitted_on_train_only() {
        let t = table(2_000);
        let d = split_scale(&t, SplitFractions::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let (mean, std) = d.scaler.params[0].unwrap();
        for (k, &r) in d.test_rows.iter().enumerate() {
            let expect = (t.columns[0][r] - mean) / std;
            assert_eq!(d.test.x.column(0)[k], expect);
            assert!((d.scaler.inverse_value(0, expect) - t.columns[0][r]).abs() < 1e-6);
        }
    }

    #[test]
    fn bad_fractions_rejected() {
        let f = SplitFractions {
            train: 0.8,
            validation: 0.3,
            test: 0.1,
        };
        assert!(matches!(
            split_scale(&table(10), f, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(DataError::ConfigInvalid(_))
        ));
    }

    fn labeled(n_fraud: usize, n_legit: usize) -> LabeledData {
        let y: Vec<bool> = (0..n_fraud + n_legit)
            .map(|i| i % (n_fraud + n_legit) < n_fraud)
            .collect();
        LabeledData {
            x: FeatureMatrix::from_columns(vec![(0..y.len()).map(|i| i as f64).collect()]).unwrap(),
            y,
        }
    }

    #[test]
    fn undersample_examples() {
        let d = labeled(10, 990);
        let u = undersample(&d, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!((u.len(), u.n_fraud()), (20, 10));
        let kept: Vec<f64> =
            u.x.column(0)
                .iter()
                .zip(&u.y)
                .filter(|(_, &y)| y)
                .map(|(&v, _)| v)
                .collect();
        assert_eq!(kept, (0..10).map(|i| i as f64).collect::<Vec<_>>());

        let b = labeled(50, 50);
        assert_eq!(undersample(&b, &mut ChaCha8Rng::seed_from_u64(1)).unwrap(), b);

        let single = labeled(0, 20);
        assert!(matches!(
            undersample(&single, &mut ChaCha8Rng::seed_from_u64(1)),
            Err(DataError::SingleClass(_))
        ));
    }
}
