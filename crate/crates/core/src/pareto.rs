//! Complexity/F1 Pareto front of evaluated expressions and elbow selection.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParetoError {
    #[error("archive is empty")]
    EmptyArchive,
    #[error("front is empty")]
    EmptyFront,
    #[error("archive line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// An evaluated expression (serialised prefix line) with its complexity and
/// F1 score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub complexity: u32,
    pub f1: f64,
    pub expression: String,
}

impl ParetoPoint {
    pub fn new(complexity: u32, f1: f64, expression: impl Into<String>) -> Self {
        ParetoPoint {
            complexity,
            f1,
            expression: expression.into(),
        }
    }

    /// No worse on both axes and strictly better on one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.complexity <= other.complexity
            && self.f1 >= other.f1
            && (self.complexity < other.complexity || self.f1 > other.f1)
    }
}

/// Non-dominated points ordered by complexity, one per complexity value, with
/// strictly increasing F1. Among equal `(complexity, f1)` the
/// lexicographically smallest expression is kept. Entries with a NaN score
/// are ignored.
pub fn pareto_front(archive: &[ParetoPoint]) -> Result<Vec<ParetoPoint>, ParetoError> {
    let mut pts: Vec<&ParetoPoint> = archive.iter().filter(|p| !p.f1.is_nan()).collect();
    if pts.is_empty() {
        return Err(ParetoError::EmptyArchive);
    }
    pts.sort_by(|a, b| {
        a.complexity
            .cmp(&b.complexity)
            .then(b.f1.total_cmp(&a.f1))
            .then_with(|| a.expression.cmp(&b.expression))
    });
    let mut front: Vec<ParetoPoint> = Vec::new();
    for p in pts {
        if front.last().is_none_or(|last| p.f1 > last.f1) {
            front.push(p.clone());
        }
    }
    Ok(front)
}

/// The last front point whose F1 gain per unit of added complexity over its
/// predecessor is at least `min_gain`; the first point if none is.
pub fn elbow(front: &[ParetoPoint], min_gain: f64) -> Result<&ParetoPoint, ParetoError> {
    let first = front.first().ok_or(ParetoError::EmptyFront)?;
    let mut chosen = first;
    for w in front.windows(2) {
        let dc = f64::from(w[1].complexity) - f64::from(w[0].complexity);
        let gain = (w[1].f1 - w[0].f1) / dc;
        if gain >= min_gain {
            chosen = &w[1];
        }
    }
    Ok(chosen)
}

pub const ARCHIVE_HEADER: &str = "complexity\tf1\texpression";

/// Tab-separated `complexity, f1, expression` rows under a header line.
pub fn write_points<W: Write>(points: &[ParetoPoint], mut w: W) -> Result<(), ParetoError> {
    writeln!(w, "{ARCHIVE_HEADER}")?;
    for p in points {
        writeln!(w, "{}\t{}\t{}", p.complexity, p.f1, p.expression)?;
    }
    Ok(())
}

pub fn read_points<R: BufRead>(r: R) -> Result<Vec<ParetoPoint>, ParetoError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() || (n == 1 && line.trim() == ARCHIVE_HEADER) {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (Some(c), Some(f), Some(e)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(ParetoError::Parse {
                line: n,
                message: "expected three tab-separated fields".into(),
            });
        };
        let complexity = c.trim().parse().map_err(|_| ParetoError::Parse {
            line: n,
            message: format!("bad complexity {c:?}"),
        })?;
        let f1 = f.trim().parse().map_err(|_| ParetoError::Parse {
            line: n,
            message: format!("bad f1 {f:?}"),
        })?;
        out.push(ParetoPoint::new(complexity, f1, e.trim()));
    }
    Ok(out)
}

/// Aligned text table of a front.
pub fn format_table(points: &[ParetoPoint]) -> String {
    let mut s = format!("{:>10}  {:>8}  expression\n", "complexity", "f1");
    for p in points {
        s.push_str(&format!("{:>10}  {:>8.4}  {}\n", p.complexity, p.f1, p.expression));
    }
    s
}
