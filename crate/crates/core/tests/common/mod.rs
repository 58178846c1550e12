#![allow(dead_code)]

use std::io::Write;

use dsc_core::data::{
    engineer_features, generate_synthetic, split_scale, Dataset, EngineerConfig, FeatureTable, RawTransaction,
    SplitFractions, SyntheticConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Writes one criterion line past the test harness capture, then fails the
/// test if the criterion did not hold.
pub fn report(n: u32, title: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "\ncriterion {n:>2} [{verdict}] {title}: {detail}");
    let _ = out.flush();
    assert!(ok, "criterion {n} failed: {title}: {detail}");
}

fn arity(name: &str) -> usize {
    match name {
        "+" | "-" | "*" | "/" => 2,
        "sin" | "cos" | "exp" | "log" | "square" | "sqrt" => 1,
        _ => 0,
    }
}

fn is_trig(name: &str) -> bool {
    matches!(name, "sin" | "cos")
}

fn inverse(name: &str) -> Option<&'static str> {
    match name {
        "exp" => Some("log"),
        "log" => Some("exp"),
        "square" => Some("sqrt"),
        "sqrt" => Some("square"),
        _ => None,
    }
}

/// Checks a preorder token-name sequence against the expression grammar:
/// length bounds, one complete tree, no trig operator anywhere below a trig
/// operator, no unary operator directly applied to its inverse, no binary
/// operator over two constants and no lone constant.
pub fn grammar_violations(seq: &[&str], min_len: usize, max_len: usize) -> Vec<String> {
    struct Walk<'a> {
        seq: &'a [&'a str],
        pos: usize,
        out: Vec<String>,
    }
    impl Walk<'_> {
        fn node(&mut self, parent: Option<&str>, under_trig: bool) -> Option<String> {
            let name = self.seq.get(self.pos)?.to_string();
            self.pos += 1;
            if under_trig && is_trig(&name) {
                self.out.push(format!("{name} below a trig operator"));
            }
            if let Some(p) = parent {
                if inverse(p) == Some(name.as_str()) {
                    self.out.push(format!("{name} directly under its inverse {p}"));
                }
            }
            let below = under_trig || is_trig(&name);
            let kids: Vec<Option<String>> = (0..arity(&name)).map(|_| self.node(Some(&name), below)).collect();
            if kids.len() == 2 && kids.iter().all(|k| k.as_deref() == Some("const")) {
                self.out.push(format!("{name} over two constants"));
            }
            if kids.iter().any(Option::is_none) {
                return None;
            }
            Some(name)
        }
    }
    let mut w = Walk {
        seq,
        pos: 0,
        out: Vec::new(),
    };
    if seq.len() < min_len || seq.len() > max_len {
        w.out
            .push(format!("length {} outside [{min_len}, {max_len}]", seq.len()));
    }
    if seq == ["const"] {
        w.out.push("lone constant".into());
    }
    let complete = w.node(None, false).is_some();
    if !complete || w.pos != seq.len() {
        w.out.push("not exactly one complete tree".into());
    }
    w.out
}

pub fn synthetic_rows(rows: usize, seed: u64) -> Vec<RawTransaction> {
    generate_synthetic(&SyntheticConfig {
        rows,
        seed,
        ..Default::default()
    })
    .expect("valid synthetic config")
}

/// Engineered table and 75/10/15 scaled splits of a synthetic log, built the
/// same way as a training run (without balancing).
pub fn planted_data(rows: usize, seed: u64) -> (FeatureTable, Dataset, ChaCha8Rng) {
    let raw = synthetic_rows(rows, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = engineer_features(&raw, &EngineerConfig::default(), &mut rng);
    let ds = split_scale(&table, SplitFractions::default(), &mut rng).expect("split");
    (table, ds, rng)
}
