//! Decision rules from a thresholded expression.
//!
//! The sigmoid threshold is moved onto the raw expression value
//! (`σ(f) ≥ t ⇔ f ≥ ln(t / (1 - t))`), Boolean and one-hot features are
//! enumerated, and each case is partially evaluated to an affine function of
//! the remaining numeric features. Cases then reduce to a constant label or a
//! single linear inequality, using known linear facts (such as
//! `amount - maxDest7 <= 0`) to settle inequalities that can never or always
//! hold.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::sigmoid;
use crate::data::FeatureSpec;
use crate::expr::{BinaryOp, ExprTree, Library, Symbol, UnaryOp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RulesError {
    #[error("threshold {0} is outside (0, 1)")]
    OutOfRange(f64),
    #[error("case [{case}] does not reduce to a single linear inequality: {reason}")]
    NotReducible { case: String, reason: String },
    #[error("invalid feature metadata: {0}")]
    InvalidSpec(String),
}

/// Raw-value threshold `ln(t / (1 - t))` matching sigmoid threshold `t`.
pub fn invert_threshold(t: f64) -> Result<f64, RulesError> {
    if t > 0.0 && t < 1.0 {
        Ok((t / (1.0 - t)).ln())
    } else {
        Err(RulesError::OutOfRange(t))
    }
}

/// Whether a score exactly at the threshold is fraud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// `σ(f) ≥ t`, the classifier's own rule.
    #[default]
    Inclusive,
    /// `σ(f) > t`.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
}

impl Cmp {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Cmp::Ge => lhs >= rhs,
            Cmp::Gt => lhs > rhs,
            Cmp::Le => lhs <= rhs,
            Cmp::Lt => lhs < rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
            Cmp::Le => "<=",
            Cmp::Lt => "<",
        }
    }
}

/// A linear term over a feature, by library feature index and name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub feature: usize,
    pub name: String,
    pub coef: f64,
}

/// `Σ coef · feature  cmp  bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub terms: Vec<Term>,
    pub cmp: Cmp,
    pub bound: f64,
    /// The bound written in closed form.
    pub closed_form: String,
}

impl Inequality {
    pub fn holds(&self, row: &[f64]) -> bool {
        let lhs: f64 = self.terms.iter().map(|t| t.coef * row[t.feature]).sum();
        self.cmp.holds(lhs, self.bound)
    }

    pub fn lhs_string(&self) -> String {
        let mut s = String::new();
        for (i, t) in self.terms.iter().enumerate() {
            let mag = t.coef.abs();
            if i == 0 {
                if t.coef < 0.0 {
                    s.push('-');
                }
            } else {
                s.push_str(if t.coef < 0.0 { " - " } else { " + " });
            }
            if mag == 1.0 {
                s.push_str(&t.name);
            } else {
                s.push_str(&format!("{}*{}", fmt4(mag), t.name));
            }
        }
        s
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs_string(), self.cmp.symbol(), fmt4(self.bound))
    }
}

fn fmt4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Condition {
    /// A stand-alone Boolean feature equals `value`.
    Flag { feature: usize, name: String, value: bool },
    /// A one-hot group takes `member`; `None` means none of the group
    /// columns used by the expression is set.
    Group {
        group: String,
        member: Option<(usize, String)>,
        /// Group columns used by the expression.
        used: Vec<(usize, String)>,
    },
}

impl Condition {
    pub fn holds(&self, row: &[f64]) -> bool {
        match self {
            Condition::Flag { feature, value, .. } => (row[*feature] == 1.0) == *value,
            Condition::Group { member, used, .. } => match member {
                Some((i, _)) => row[*i] == 1.0,
                None => used.iter().all(|(i, _)| row[*i] == 0.0),
            },
        }
    }
}

fn short_member<'a>(group: &str, member: &'a str) -> &'a str {
    member
        .strip_prefix(group)
        .and_then(|m| m.strip_prefix('_'))
        .unwrap_or(member)
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Flag { name, value, .. } => write!(f, "{name} = {}", u8::from(*value)),
            Condition::Group { group, member, used } => match member {
                Some((_, m)) => write!(f, "{group} = {}", short_member(group, m)),
                None => {
                    let names: Vec<&str> = used.iter().map(|(_, m)| short_member(group, m)).collect();
                    write!(f, "{group} not in {{{}}}", names.join(", "))
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Outcome {
    Fraud,
    Legitimate,
    /// Fraud exactly when the inequality holds.
    #[serde(rename = "fraud_if")]
    FraudIf(Inequality),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleCase {
    pub conditions: Vec<Condition>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub threshold: f64,
    /// `ln(t / (1 - t))`.
    pub raw_threshold: f64,
    pub boundary: Boundary,
    /// Mutually exclusive cases; rows matching none get `default_fraud`.
    pub cases: Vec<RuleCase>,
    pub default_fraud: bool,
}

impl RuleSet {
    /// Label of one feature row (library feature order).
    pub fn predict(&self, row: &[f64]) -> bool {
        for case in &self.cases {
            if case.conditions.iter().all(|c| c.holds(row)) {
                return match &case.outcome {
                    Outcome::Fraud => true,
                    Outcome::Legitimate => false,
                    Outcome::FraudIf(ineq) => ineq.holds(row),
                };
            }
        }
        self.default_fraud
    }

    /// Human-readable listing.
    pub fn to_text(&self) -> String {
        let op = match self.boundary {
            Boundary::Inclusive => ">=",
            Boundary::Strict => ">",
        };
        let mut s = format!(
            "threshold: sigma(f) {op} {}  <=>  f {op} {}  (ln({} / (1 - {})))\n",
            self.threshold,
            fmt4(self.raw_threshold),
            self.threshold,
            self.threshold
        );
        let label = |b: bool| if b { "fraud" } else { "legitimate" };
        if self.cases.is_empty() {
            s.push_str(&format!("always {}\n", label(self.default_fraud)));
            return s;
        }
        for (i, case) in self.cases.iter().enumerate() {
            let mut parts: Vec<String> = case.conditions.iter().map(|c| c.to_string()).collect();
            let (result, note) = match &case.outcome {
                Outcome::Fraud => ("fraud".to_string(), None),
                Outcome::Legitimate => ("legitimate".to_string(), None),
                Outcome::FraudIf(ineq) => {
                    parts.push(ineq.to_string());
                    ("fraud".to_string(), Some(ineq.closed_form.clone()))
                }
            };
            let cond = if parts.is_empty() {
                "always".to_string()
            } else {
                parts.join(" AND ")
            };
            s.push_str(&format!("rule {}: {cond}  =>  {result}", i + 1));
            if let Some(n) = note {
                s.push_str(&format!("  # bound = {n}"));
            }
            s.push('\n');
        }
        s.push_str(&format!("otherwise: {}\n", label(self.default_fraud)));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleOptions {
    pub boundary: Boundary,
}

/// `Σ coef · x + constant` over library feature indices.
#[derive(Debug, Clone, PartialEq)]
struct Affine {
    coefs: BTreeMap<usize, f64>,
    constant: f64,
}

impl Affine {
    fn constant(c: f64) -> Self {
        Affine {
            coefs: BTreeMap::new(),
            constant: c,
        }
    }

    fn var(i: usize) -> Self {
        Affine {
            coefs: BTreeMap::from([(i, 1.0)]),
            constant: 0.0,
        }
    }

    fn as_constant(&self) -> Option<f64> {
        self.coefs.is_empty().then_some(self.constant)
    }

    fn combine(mut self, other: &Affine, sign: f64) -> Affine {
        for (&i, &c) in &other.coefs {
            let e = self.coefs.entry(i).or_insert(0.0);
            *e += sign * c;
            if *e == 0.0 {
                self.coefs.remove(&i);
            }
        }
        self.constant += sign * other.constant;
        self
    }

    fn scale(mut self, k: f64) -> Affine {
        for c in self.coefs.values_mut() {
            *c *= k;
        }
        self.coefs.retain(|_, c| *c != 0.0);
        self.constant *= k;
        self
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.coefs.values().all(|c| c.is_finite())
    }
}

/// Strictly monotone one-argument maps a reduced value may pass through.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    /// `a · v + b`; with `a = 0` only the argument's domain remains.
    Linear(f64, f64),
    Exp,
    Log,
    Sqrt,
}

/// A case expression after fixing the discrete features.
#[derive(Debug, Clone, PartialEq)]
enum Reduced {
    Affine(Affine),
    /// `steps` applied in order to a non-constant affine form.
    Monotone {
        inner: Affine,
        steps: Vec<Step>,
    },
}

impl Reduced {
    fn as_constant(&self) -> Option<f64> {
        match self {
            Reduced::Affine(a) => a.as_constant(),
            Reduced::Monotone { .. } => None,
        }
    }

    fn then(self, step: Step) -> Reduced {
        match self {
            Reduced::Affine(inner) => Reduced::Monotone {
                inner,
                steps: vec![step],
            },
            Reduced::Monotone { inner, mut steps } => {
                steps.push(step);
                Reduced::Monotone { inner, steps }
            }
        }
    }
}

fn reduce(tree: &ExprTree, fixed: &HashMap<usize, f64>) -> Result<Reduced, String> {
    let mut stack: Vec<Reduced> = Vec::new();
    for node in tree.nodes().iter().rev() {
        let v = match node.symbol() {
            Symbol::Feature(i) => Reduced::Affine(match fixed.get(&i) {
                Some(&v) => Affine::constant(v),
                None => Affine::var(i),
            }),
            Symbol::Const => Reduced::Affine(Affine::constant(tree.constants()[node.slot.expect("constant slot")])),
            Symbol::Unary(op) => {
                let a = stack.pop().expect("operand");
                if let Some(c) = a.as_constant() {
                    Reduced::Affine(Affine::constant(op.apply(c)))
                } else {
                    match op {
                        UnaryOp::Exp => a.then(Step::Exp),
                        UnaryOp::Log => a.then(Step::Log),
                        UnaryOp::Sqrt => a.then(Step::Sqrt),
                        _ => return Err(format!("{} of a non-constant argument", op.name())),
                    }
                }
            }
            Symbol::Binary(op) => {
                let a = stack.pop().expect("left operand");
                let b = stack.pop().expect("right operand");
                binary(op, a, b)?
            }
        };
        stack.push(v);
    }
    Ok(stack.pop().expect("complete tree"))
}

fn binary(op: BinaryOp, a: Reduced, b: Reduced) -> Result<Reduced, String> {
    if let (Some(x), Some(y)) = (a.as_constant(), b.as_constant()) {
        return Ok(Reduced::Affine(Affine::constant(op.apply(x, y))));
    }
    if let (Reduced::Affine(a), Reduced::Affine(b)) = (&a, &b) {
        let (a, b) = (a.clone(), b);
        return Ok(Reduced::Affine(match (op, a.as_constant(), b.as_constant()) {
            (BinaryOp::Add, _, _) => a.combine(b, 1.0),
            (BinaryOp::Sub, _, _) => a.combine(b, -1.0),
            (BinaryOp::Mul, Some(x), _) => b.clone().scale(x),
            (BinaryOp::Mul, _, Some(y)) => a.scale(y),
            (BinaryOp::Mul, None, None) => return Err("product of two non-constant factors".into()),
            (BinaryOp::Div, _, Some(y)) if y != 0.0 => a.scale(1.0 / y),
            (BinaryOp::Div, _, Some(_)) => return Err("division of a non-constant numerator by zero".into()),
            (BinaryOp::Div, _, None) => return Err("division by a non-constant denominator".into()),
        }));
    }
    // one side passed through a monotone map; the other must be constant
    let step = match (op, a.as_constant(), b.as_constant()) {
        (BinaryOp::Add, Some(c), _) | (BinaryOp::Add, _, Some(c)) => Step::Linear(1.0, c),
        (BinaryOp::Sub, _, Some(c)) => Step::Linear(1.0, -c),
        (BinaryOp::Sub, Some(c), _) => Step::Linear(-1.0, c),
        (BinaryOp::Mul, Some(c), _) | (BinaryOp::Mul, _, Some(c)) if c.is_finite() => Step::Linear(c, 0.0),
        (BinaryOp::Div, _, Some(c)) if c != 0.0 && c.is_finite() => Step::Linear(1.0 / c, 0.0),
        _ => return Err(format!("unsupported {} around a nonlinear term", op.symbol())),
    };
    if let Step::Linear(_, c) = step {
        if !c.is_finite() {
            return Err("non-finite constant".into());
        }
    }
    Ok(if a.as_constant().is_none() { a } else { b }.then(step))
}

#[derive(Debug, Clone, PartialEq)]
struct Bound {
    value: f64,
    closed: bool,
    /// Closed form of `value`.
    form: String,
}

/// Real interval; infinite ends are unbounded.
#[derive(Debug, Clone, PartialEq)]
struct Interval {
    lo: Bound,
    hi: Bound,
}

fn unbounded(v: f64) -> Bound {
    Bound {
        value: v,
        closed: false,
        form: String::new(),
    }
}

fn sub_form(form: &str, k: f64) -> String {
    if k == 0.0 {
        form.to_string()
    } else {
        format!("{form} {} {}", if k < 0.0 { "+" } else { "-" }, k.abs())
    }
}

fn div_form(form: &str, a: f64) -> String {
    if a == 1.0 {
        form.to_string()
    } else {
        format!("({form}) / {a}")
    }
}

impl Interval {
    fn is_empty(&self) -> bool {
        self.lo.value > self.hi.value || (self.lo.value == self.hi.value && !(self.lo.closed && self.hi.closed))
    }

    fn contains(&self, v: f64) -> bool {
        (self.lo.value < v || (self.lo.value == v && self.lo.closed))
            && (v < self.hi.value || (v == self.hi.value && self.hi.closed))
    }

    /// Preimage under `v ↦ a · v + b`.
    fn linear(self, a: f64, b: f64) -> Interval {
        if a == 0.0 {
            return if self.contains(b) { everything() } else { empty() };
        }
        let map = |e: Bound| -> Bound {
            if e.value.is_infinite() {
                unbounded(e.value * a.signum())
            } else {
                Bound {
                    value: (e.value - b) / a,
                    closed: e.closed,
                    form: div_form(&sub_form(&e.form, b), a),
                }
            }
        };
        let lo = map(self.lo);
        let hi = map(self.hi);
        if a > 0.0 {
            Interval { lo, hi }
        } else {
            Interval { lo: hi, hi: lo }
        }
    }

    fn preimage(self, step: Step) -> Interval {
        if self.is_empty() {
            return empty();
        }
        match step {
            Step::Linear(a, b) => self.linear(a, b),
            Step::Exp => {
                if self.hi.value <= 0.0 {
                    return empty();
                }
                let lo = if self.lo.value <= 0.0 {
                    unbounded(f64::NEG_INFINITY)
                } else {
                    Bound {
                        value: self.lo.value.ln(),
                        closed: self.lo.closed,
                        form: format!("ln({})", self.lo.form),
                    }
                };
                let hi = if self.hi.value.is_infinite() {
                    unbounded(f64::INFINITY)
                } else {
                    Bound {
                        value: self.hi.value.ln(),
                        closed: self.hi.closed,
                        form: format!("ln({})", self.hi.form),
                    }
                };
                Interval { lo, hi }
            }
            Step::Log => {
                let lo = if self.lo.value.is_infinite() {
                    Bound {
                        value: 0.0,
                        closed: false,
                        form: "0".into(),
                    }
                } else {
                    Bound {
                        value: self.lo.value.exp(),
                        closed: self.lo.closed,
                        form: format!("exp({})", self.lo.form),
                    }
                };
                let hi = if self.hi.value.is_infinite() {
                    unbounded(f64::INFINITY)
                } else {
                    Bound {
                        value: self.hi.value.exp(),
                        closed: self.hi.closed,
                        form: format!("exp({})", self.hi.form),
                    }
                };
                Interval { lo, hi }
            }
            Step::Sqrt => {
                if self.hi.value < 0.0 {
                    return empty();
                }
                let lo = if self.lo.value <= 0.0 {
                    Bound {
                        value: 0.0,
                        closed: true,
                        form: "0".into(),
                    }
                } else {
                    Bound {
                        value: self.lo.value * self.lo.value,
                        closed: self.lo.closed,
                        form: format!("({})^2", self.lo.form),
                    }
                };
                let hi = if self.hi.value.is_infinite() {
                    unbounded(f64::INFINITY)
                } else {
                    Bound {
                        value: self.hi.value * self.hi.value,
                        closed: self.hi.closed,
                        form: format!("({})^2", self.hi.form),
                    }
                };
                Interval { lo, hi }
            }
        }
    }
}

fn everything() -> Interval {
    Interval {
        lo: unbounded(f64::NEG_INFINITY),
        hi: unbounded(f64::INFINITY),
    }
}

fn empty() -> Interval {
    Interval {
        lo: unbounded(f64::INFINITY),
        hi: unbounded(f64::NEG_INFINITY),
    }
}

enum Var {
    Flag(usize),
    Group {
        name: String,
        used: Vec<usize>,
        other: bool,
    },
}

impl Var {
    fn domain(&self) -> usize {
        match self {
            Var::Flag(_) => 2,
            Var::Group { used, other, .. } => used.len() + usize::from(*other),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct RawCase {
    /// Value index per variable; `None` once merged away.
    values: Vec<Option<usize>>,
    outcome: Outcome,
}

struct Fact {
    coefs: BTreeMap<usize, f64>,
    bound: f64,
}

/// Proportionality factor `alpha` with `coefs = alpha · fact`, if any.
fn proportional(coefs: &BTreeMap<usize, f64>, fact: &BTreeMap<usize, f64>) -> Option<f64> {
    if coefs.len() != fact.len() || !coefs.keys().eq(fact.keys()) {
        return None;
    }
    let (&first, &c0) = coefs.iter().next()?;
    let alpha = c0 / fact[&first];
    let ok = coefs.iter().all(|(i, c)| {
        let expect = alpha * fact[i];
        (c - expect).abs() <= 1e-12 * c.abs().max(expect.abs()).max(1.0)
    });
    (ok && alpha != 0.0 && alpha.is_finite()).then_some(alpha)
}

/// Extracts a rule set from `tree` classified at threshold `t`.
pub fn extract_rules(
    tree: &ExprTree,
    lib: &Library,
    t: f64,
    spec: &FeatureSpec,
    opts: RuleOptions,
) -> Result<RuleSet, RulesError> {
    let theta = invert_threshold(t)?;
    spec.validate().map_err(|e| RulesError::InvalidSpec(e.to_string()))?;
    let names = lib.feature_names();
    let index_of = |n: &str| names.iter().position(|x| x == n);
    let mut used: Vec<usize> = tree
        .nodes()
        .iter()
        .filter_map(|n| match n.symbol() {
            Symbol::Feature(i) => Some(i),
            _ => None,
        })
        .collect();
    used.sort_unstable();
    used.dedup();

    let mut vars: Vec<Var> = Vec::new();
    for g in &spec.groups {
        let members: Vec<usize> = g.members.iter().filter_map(|m| index_of(m)).collect();
        let in_tree: Vec<usize> = members.iter().copied().filter(|i| used.contains(i)).collect();
        if in_tree.is_empty() {
            continue;
        }
        vars.push(Var::Group {
            name: g.name.clone(),
            other: in_tree.len() < g.members.len(),
            used: in_tree,
        });
    }
    for b in &spec.boolean {
        if let Some(i) = index_of(b) {
            if used.contains(&i) {
                vars.push(Var::Flag(i));
            }
        }
    }

    let facts: Vec<Fact> = spec
        .facts
        .iter()
        .filter_map(|f| {
            let mut coefs = BTreeMap::new();
            for (n, c) in &f.terms {
                *coefs.entry(index_of(n)?).or_insert(0.0) += c;
            }
            coefs.retain(|_, c| *c != 0.0);
            (!coefs.is_empty()).then_some(Fact { coefs, bound: f.bound })
        })
        .collect();

    let label = |v: f64| -> bool {
        if !v.is_finite() {
            return false;
        }
        let p = sigmoid(v);
        match opts.boundary {
            Boundary::Inclusive => p >= t,
            Boundary::Strict => p > t,
        }
    };
    let describe = |values: &[usize]| -> String {
        if vars.is_empty() {
            return "all rows".into();
        }
        vars.iter()
            .zip(values)
            .map(|(v, &k)| match v {
                Var::Flag(i) => format!("{} = {k}", names[*i]),
                Var::Group { name, used, .. } => match used.get(k) {
                    Some(&i) => format!("{name} = {}", short_member(name, &names[i])),
                    None => format!("{name} = other"),
                },
            })
            .collect::<Vec<_>>()
            .join(", ")
    };

    let total: usize = vars.iter().map(Var::domain).product();
    let mut cases = Vec::with_capacity(total);
    for code in 0..total {
        let mut values = Vec::with_capacity(vars.len());
        let mut rest = code;
        let mut fixed = HashMap::new();
        for v in &vars {
            let k = rest % v.domain();
            rest /= v.domain();
            values.push(k);
            match v {
                Var::Flag(i) => {
                    fixed.insert(*i, k as f64);
                }
                Var::Group { used, .. } => {
                    for (j, &i) in used.iter().enumerate() {
                        fixed.insert(i, if j == k { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        let not_reducible = |reason: String| RulesError::NotReducible {
            case: describe(&values),
            reason,
        };
        let reduced = reduce(tree, &fixed).map_err(not_reducible)?;
        let outcome = if let Some(c) = reduced.as_constant() {
            if label(c) {
                Outcome::Fraud
            } else {
                Outcome::Legitimate
            }
        } else {
            let (aff, steps) = match reduced {
                Reduced::Affine(a) => (a, Vec::new()),
                Reduced::Monotone { inner, steps } => (inner, steps),
            };
            if !aff.is_finite() {
                return Err(not_reducible("non-finite coefficients".into()));
            }
            // fraud set of the outer value, pulled back to the affine form
            let mut fraud = Interval {
                lo: Bound {
                    value: theta,
                    closed: opts.boundary == Boundary::Inclusive,
                    form: format!("ln({t} / (1 - {t}))"),
                },
                hi: unbounded(f64::INFINITY),
            };
            for &step in steps.iter().rev() {
                fraud = fraud.preimage(step);
            }
            // then to g = Σ w x, or to the fact's left-hand side v with g = alpha v
            let fraud = fraud.linear(1.0, aff.constant);
            let fact = facts
                .iter()
                .find_map(|f| proportional(&aff.coefs, &f.coefs).map(|a| (f, a)));
            let (coefs, mut set, cap) = match fact {
                Some((f, alpha)) => (f.coefs.clone(), fraud.linear(alpha, 0.0), Some(f.bound)),
                None => (aff.coefs.clone(), fraud, None),
            };
            if let Some(b) = cap {
                if set.hi.value > b || (set.hi.value == b && set.hi.closed) {
                    set.hi = unbounded(f64::INFINITY);
                }
                if set.lo.value > b || (set.lo.value == b && !set.lo.closed) {
                    set = empty();
                }
            }
            let terms: Vec<Term> = coefs
                .iter()
                .map(|(&i, &c)| Term {
                    feature: i,
                    name: names[i].clone(),
                    coef: c,
                })
                .collect();
            let has_lo = set.lo.value.is_finite();
            let has_hi = set.hi.value.is_finite();
            if set.is_empty() {
                Outcome::Legitimate
            } else if !has_lo && !has_hi {
                Outcome::Fraud
            } else if has_lo && has_hi {
                return Err(not_reducible(format!(
                    "fraud requires {} within a bounded interval",
                    Inequality {
                        terms,
                        cmp: Cmp::Ge,
                        bound: 0.0,
                        closed_form: String::new()
                    }
                    .lhs_string()
                )));
            } else {
                let (b, cmp) = if has_lo {
                    let c = if set.lo.closed { Cmp::Ge } else { Cmp::Gt };
                    (set.lo, c)
                } else {
                    let c = if set.hi.closed { Cmp::Le } else { Cmp::Lt };
                    (set.hi, c)
                };
                Outcome::FraudIf(Inequality {
                    terms,
                    cmp,
                    bound: b.value,
                    closed_form: b.form,
                })
            }
        };
        cases.push(RawCase {
            values: values.into_iter().map(Some).collect(),
            outcome,
        });
    }

    let fraud = cases.iter().filter(|c| c.outcome == Outcome::Fraud).count();
    let legit = cases.iter().filter(|c| c.outcome == Outcome::Legitimate).count();
    let default_fraud = fraud > legit;
    let default_outcome = if default_fraud {
        Outcome::Fraud
    } else {
        Outcome::Legitimate
    };
    cases.retain(|c| c.outcome != default_outcome);
    merge(&mut cases, &vars);

    let cases = cases
        .into_iter()
        .map(|c| RuleCase {
            conditions: vars
                .iter()
                .zip(&c.values)
                .filter_map(|(v, k)| {
                    let k = (*k)?;
                    Some(match v {
                        Var::Flag(i) => Condition::Flag {
                            feature: *i,
                            name: names[*i].clone(),
                            value: k == 1,
                        },
                        Var::Group { name, used, .. } => Condition::Group {
                            group: name.clone(),
                            member: used.get(k).map(|&i| (i, names[i].clone())),
                            used: used.iter().map(|&i| (i, names[i].clone())).collect(),
                        },
                    })
                })
                .collect(),
            outcome: c.outcome,
        })
        .collect();
    Ok(RuleSet {
        threshold: t,
        raw_threshold: theta,
        boundary: opts.boundary,
        cases,
        default_fraud,
    })
}

/// Collapses a variable whenever cases that differ only in it cover its
/// whole domain with the same outcome.
fn merge(cases: &mut Vec<RawCase>, vars: &[Var]) {
    loop {
        let mut changed = false;
        for (vi, var) in vars.iter().enumerate() {
            let mut i = 0;
            while i < cases.len() {
                if cases[i].values[vi].is_none() {
                    i += 1;
                    continue;
                }
                let peers: Vec<usize> = (0..cases.len())
                    .filter(|&j| {
                        cases[j].outcome == cases[i].outcome
                            && cases[j].values[vi].is_some()
                            && cases[j]
                                .values
                                .iter()
                                .zip(&cases[i].values)
                                .enumerate()
                                .all(|(k, (a, b))| k == vi || a == b)
                    })
                    .collect();
                let mut seen: Vec<usize> = peers.iter().filter_map(|&j| cases[j].values[vi]).collect();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() == var.domain() {
                    let mut merged = cases[i].clone();
                    merged.values[vi] = None;
                    let keep = peers[0];
                    for &j in peers.iter().rev() {
                        if j != keep {
                            cases.remove(j);
                        }
                    }
                    cases[keep] = merged;
                    changed = true;
                }
                i += 1;
            }
        }
        if !changed {
            break;
        }
    }
}
