//! Expression vocabulary, preorder syntax trees, batch evaluation,
//! complexity and rendering.

mod eval;
mod library;
mod render;
mod tree;

pub use eval::{Evaluation, FeatureMatrix};
pub use library::{parse_operator, token_complexity, BinaryOp, Library, Symbol, Token, TokenId, UnaryOp};
pub use render::ConstStyle;
pub use tree::{ExprTree, Node, PrefixItem, DEFAULT_CONSTANT};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("empty token sequence")]
    Empty,
    #[error("incomplete expression: {missing} operand slot(s) left open")]
    Incomplete { missing: usize },
    #[error("overfull expression: tree closes before token {position}")]
    Overfull { position: usize },
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("token id {0} is not in the library")]
    UnknownTokenId(TokenId),
    #[error("bad constant literal {0:?}")]
    BadConstant(String),
    #[error("feature index {index} out of range for {n_features} feature(s)")]
    FeatureIndexOutOfRange { index: usize, n_features: usize },
    #[error("ragged matrix: column/row {column} has {found} entries, expected {expected}")]
    RaggedMatrix {
        column: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid library: {0}")]
    InvalidLibrary(String),
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng;

    /// Random complete preorder sequence of at most `max_len` tokens.
    pub fn random_prefix<R: Rng>(lib: &Library, rng: &mut R, max_len: usize) -> Vec<TokenId> {
        let leaves = lib.ids_with_arity(0);
        let mut seq = Vec::new();
        let mut open = 1usize;
        while open > 0 {
            let budget_left = max_len - seq.len();
            let id = if budget_left <= open {
                leaves[rng.gen_range(0..leaves.len())]
            } else {
                loop {
                    let id = rng.gen_range(0..lib.len());
                    if open - 1 + lib.token(id).arity() < budget_left {
                        break id;
                    }
                }
            };
            open = open - 1 + lib.token(id).arity();
            seq.push(id);
        }
        seq
    }

    /// Straightforward recursive single-row evaluator.
    pub fn eval_row_naive(tree: &ExprTree, at: usize, row: &[f64]) -> f64 {
        let node = &tree.nodes()[at];
        let ch = node.children();
        match node.symbol() {
            Symbol::Feature(i) => row[i],
            Symbol::Const => tree.constants()[node.slot.unwrap()],
            Symbol::Unary(op) => {
                let v = eval_row_naive(tree, ch[0], row);
                match op {
                    UnaryOp::Sin => v.sin(),
                    UnaryOp::Cos => v.cos(),
                    UnaryOp::Exp => v.exp(),
                    UnaryOp::Log => v.ln(),
                    UnaryOp::Square => v * v,
                    UnaryOp::Sqrt => v.sqrt(),
                }
            }
            Symbol::Binary(op) => {
                let a = eval_row_naive(tree, ch[0], row);
                let b = eval_row_naive(tree, ch[1], row);
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a / b,
                }
            }
        }
    }
}
