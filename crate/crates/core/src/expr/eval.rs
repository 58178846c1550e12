use super::library::Symbol;
use super::tree::ExprTree;
use super::ExprError;

/// Column-major feature matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self, ExprError> {
        let n_rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().position(|c| c.len() != n_rows) {
            return Err(ExprError::RaggedMatrix {
                column: bad,
                expected: n_rows,
                found: columns[bad].len(),
            });
        }
        Ok(FeatureMatrix { n_rows, columns })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ExprError> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); n_cols];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(ExprError::RaggedMatrix {
                    column: r,
                    expected: n_cols,
                    found: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                columns[c].push(v);
            }
        }
        Ok(FeatureMatrix {
            n_rows: rows.len(),
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.columns[c]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            n_rows: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
        }
    }
}

/// Output of [`ExprTree::evaluate_batch`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub values: Vec<f64>,
    /// Rows whose value is NaN or infinite.
    pub non_finite: usize,
}

impl Evaluation {
    /// A candidate is valid only if every row evaluated to a finite number.
    pub fn is_valid(&self) -> bool {
        self.non_finite == 0
    }
}

impl ExprTree {
    /// Evaluates the tree column-at-a-time over every row of `x`.
    pub fn evaluate_batch(&self, x: &FeatureMatrix) -> Result<Evaluation, ExprError> {
        let n = x.n_rows();
        let mut stack: Vec<Vec<f64>> = Vec::with_capacity(self.depth() + 1);
        for node in self.nodes().iter().rev() {
            match node.symbol() {
                Symbol::Feature(i) => {
                    if i >= x.n_cols() {
                        return Err(ExprError::FeatureIndexOutOfRange {
                            index: i,
                            n_features: x.n_cols(),
                        });
                    }
                    stack.push(x.column(i).to_vec());
                }
                Symbol::Const => {
                    let v = self.constants()[node.slot.expect("constant slot")];
                    stack.push(vec![v; n]);
                }
                Symbol::Unary(op) => {
                    let col = stack.last_mut().expect("operand");
                    for v in col.iter_mut() {
                        *v = op.apply(*v);
                    }
                }
                Symbol::Binary(op) => {
                    let mut left = stack.pop().expect("left operand");
                    let right = stack.pop().expect("right operand");
                    for (a, b) in left.iter_mut().zip(&right) {
                        *a = op.apply(*a, *b);
                    }
                    stack.push(left);
                }
            }
        }
        let values = stack.pop().expect("root value");
        debug_assert!(stack.is_empty());
        let non_finite = values.iter().filter(|v| !v.is_finite()).count();
        Ok(Evaluation { values, non_finite })
    }

    /// Evaluates a single row of raw feature values.
    pub fn evaluate_row(&self, row: &[f64]) -> Result<f64, ExprError> {
        let x = FeatureMatrix::from_rows(&[row.to_vec()])?;
        Ok(self.evaluate_batch(&x)?.values[0])
    }
}
