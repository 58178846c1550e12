use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::features::FeatureTable;
use super::raw::TxType;
use super::split::Scaler;
use super::DataError;

/// Columns of which exactly one is 1 in every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotGroup {
    pub name: String,
    pub members: Vec<String>,
}

/// `Σ coef · feature ≤ bound`, known to hold on every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFact {
    pub terms: Vec<(String, f64)>,
    pub bound: f64,
}

impl LinearFact {
    pub fn new(terms: &[(&str, f64)], bound: f64) -> Self {
        LinearFact {
            terms: terms.iter().map(|&(n, c)| (n.to_string(), c)).collect(),
            bound,
        }
    }
}

impl fmt::Display for LinearFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, c) in &self.terms {
            let sign = if *c < 0.0 { "-" } else { "+" };
            let mag = c.abs();
            if first {
                if *c < 0.0 {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mag == 1.0 {
                f.write_str(name)?;
            } else {
                write!(f, "{mag}*{name}")?;
            }
            first = false;
        }
        write!(f, " <= {}", self.bound)
    }
}

/// Feature metadata used by rule extraction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    /// Stand-alone {0, 1} features (one-hot members are listed in `groups`).
    pub boolean: Vec<String>,
    pub groups: Vec<OneHotGroup>,
    pub facts: Vec<LinearFact>,
}

impl FeatureSpec {
    /// Metadata of the engineered transaction table in raw (unscaled) units.
    pub fn paysim() -> FeatureSpec {
        FeatureSpec {
            boolean: vec!["externalOrig".into(), "externalDest".into()],
            groups: vec![OneHotGroup {
                name: "type".into(),
                members: TxType::ALL.iter().map(|t| t.column_name()).collect(),
            }],
            facts: vec![
                LinearFact::new(&[("amount", 1.0), ("maxDest7", -1.0)], 0.0),
                LinearFact::new(&[("amount", 1.0), ("maxDest3", -1.0)], 0.0),
            ],
        }
    }

    /// Metadata for an arbitrary table: the transaction preset restricted to
    /// the table's columns, plus any other Boolean column as a stand-alone
    /// flag.
    pub fn for_table(table: &FeatureTable) -> FeatureSpec {
        Self::for_columns(&table.names, &table.boolean)
    }

    pub fn for_columns(names: &[String], boolean: &[bool]) -> FeatureSpec {
        let has = |n: &str| names.iter().any(|c| c == n);
        let preset = Self::paysim();
        let mut spec = FeatureSpec::default();
        for g in preset.groups {
            if g.members.iter().all(|m| has(m)) {
                spec.groups.push(g);
            }
        }
        let grouped: HashSet<String> = spec.groups.iter().flat_map(|g| g.members.clone()).collect();
        for (n, &b) in names.iter().zip(boolean) {
            if b && !grouped.contains(n) {
                spec.boolean.push(n.clone());
            }
        }
        spec.facts = preset
            .facts
            .into_iter()
            .filter(|f| f.terms.iter().all(|(n, _)| has(n)))
            .collect();
        spec
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = HashSet::new();
        for name in self.boolean.iter().chain(self.groups.iter().flat_map(|g| &g.members)) {
            if !seen.insert(name) {
                return Err(DataError::ConfigInvalid(format!(
                    "feature {name:?} appears in more than one Boolean declaration"
                )));
            }
        }
        if let Some(g) = self.groups.iter().find(|g| g.members.len() < 2) {
            return Err(DataError::ConfigInvalid(format!(
                "one-hot group {:?} needs at least two members",
                g.name
            )));
        }
        Ok(())
    }

    /// Rewrites the facts for standardised columns: a raw value is
    /// `mean + std · scaled`.
    pub fn scaled(&self, scaler: &Scaler) -> Result<FeatureSpec, DataError> {
        let mut out = self.clone();
        for fact in &mut out.facts {
            let mut bound = fact.bound;
            for (name, coef) in &mut fact.terms {
                let i = scaler
                    .names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| DataError::UnknownFeature(name.clone()))?;
                if let Some((mean, std)) = scaler.params[i] {
                    bound -= *coef * mean;
                    *coef *= std;
                }
            }
            fact.bound = bound;
        }
        Ok(out)
    }
}
