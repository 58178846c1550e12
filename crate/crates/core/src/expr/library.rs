use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ExprError;

/// Index of a token inside a [`Library`].
pub type TokenId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Sin,
    Cos,
    Exp,
    Log,
    Square,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 6] = [
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Exp,
        UnaryOp::Log,
        UnaryOp::Square,
        UnaryOp::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Square => "square",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            UnaryOp::Sin => v.sin(),
            UnaryOp::Cos => v.cos(),
            UnaryOp::Exp => v.exp(),
            UnaryOp::Log => v.ln(),
            UnaryOp::Square => v * v,
            UnaryOp::Sqrt => v.sqrt(),
        }
    }

    pub fn is_trig(self) -> bool {
        matches!(self, UnaryOp::Sin | UnaryOp::Cos)
    }

    pub fn inverse(self) -> Option<UnaryOp> {
        match self {
            UnaryOp::Exp => Some(UnaryOp::Log),
            UnaryOp::Log => Some(UnaryOp::Exp),
            UnaryOp::Square => Some(UnaryOp::Sqrt),
            UnaryOp::Sqrt => Some(UnaryOp::Square),
            UnaryOp::Sin | UnaryOp::Cos => None,
        }
    }
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 4] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div];

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
        }
    }
}

/// What a token stands for. Constants carry no value here; values live in
/// the tree's constant slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Feature(usize),
    Const,
    Unary(UnaryOp),
    Binary(BinaryOp),
}

impl Symbol {
    pub fn arity(self) -> usize {
        match self {
            Symbol::Feature(_) | Symbol::Const => 0,
            Symbol::Unary(_) => 1,
            Symbol::Binary(_) => 2,
        }
    }

    pub fn is_trig(self) -> bool {
        matches!(self, Symbol::Unary(op) if op.is_trig())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Token {
    pub symbol: Symbol,
    pub complexity: u32,
}

impl Token {
    pub fn arity(&self) -> usize {
        self.symbol.arity()
    }
}

/// Per-token complexity weights.
///
/// | token                           | weight |
/// |---------------------------------|--------|
/// | `+`, `-`, `*`, feature, constant | 1      |
/// | `/`, `square`                   | 2      |
/// | `sin`, `cos`                    | 3      |
/// | `exp`, `log`, `sqrt`            | 4      |
///
/// Accepts canonical names as well as a few common aliases. Names outside the
/// table fail with [`ExprError::UnknownToken`].
pub fn token_complexity(name: &str) -> Result<u32, ExprError> {
    match name {
        "+" | "add" | "-" | "sub" | "−" | "*" | "mul" | "×" | "feature" | "const" | "constant" => Ok(1),
        "/" | "div" | "÷" | "square" => Ok(2),
        "sin" | "cos" => Ok(3),
        "exp" | "log" | "sqrt" | "square-root" | "√" => Ok(4),
        other => Err(ExprError::UnknownToken(other.to_string())),
    }
}

/// Parses an operator name (canonical or alias) into a symbol.
pub fn parse_operator(name: &str) -> Option<Symbol> {
    let sym = match name {
        "+" | "add" => Symbol::Binary(BinaryOp::Add),
        "-" | "sub" | "−" => Symbol::Binary(BinaryOp::Sub),
        "*" | "mul" | "×" => Symbol::Binary(BinaryOp::Mul),
        "/" | "div" | "÷" => Symbol::Binary(BinaryOp::Div),
        "sin" => Symbol::Unary(UnaryOp::Sin),
        "cos" => Symbol::Unary(UnaryOp::Cos),
        "exp" => Symbol::Unary(UnaryOp::Exp),
        "log" => Symbol::Unary(UnaryOp::Log),
        "square" => Symbol::Unary(UnaryOp::Square),
        "sqrt" | "square-root" | "√" => Symbol::Unary(UnaryOp::Sqrt),
        "const" | "constant" => Symbol::Const,
        _ => return None,
    };
    Some(sym)
}

fn symbol_name(sym: Symbol, features: &[String]) -> String {
    match sym {
        Symbol::Feature(i) => features[i].clone(),
        Symbol::Const => "const".to_string(),
        Symbol::Unary(op) => op.name().to_string(),
        Symbol::Binary(op) => op.symbol().to_string(),
    }
}

/// The token vocabulary an expression is drawn from.
///
/// Token order is fixed at construction and defines [`TokenId`]s, which are
/// also the policy's output indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Library {
    tokens: Vec<Token>,
    names: Vec<String>,
    inverse_of: Vec<Option<TokenId>>,
    feature_names: Vec<String>,
    by_name: HashMap<String, TokenId>,
    const_id: Option<TokenId>,
}

impl Library {
    /// Builds a library of the given operators (in order), an optional
    /// constant token, then one token per feature.
    pub fn new(operators: &[Symbol], with_const: bool, feature_names: &[String]) -> Result<Self, ExprError> {
        let mut symbols = Vec::new();
        for &op in operators {
            match op {
                Symbol::Unary(_) | Symbol::Binary(_) => symbols.push(op),
                Symbol::Const | Symbol::Feature(_) => {
                    return Err(ExprError::InvalidLibrary(format!("{op:?} is not an operator")))
                }
            }
        }
        if with_const {
            symbols.push(Symbol::Const);
        }
        symbols.extend((0..feature_names.len()).map(Symbol::Feature));
        Self::from_symbols(symbols, feature_names)
    }

    /// Default operator set: `+ - * / sin cos exp log square sqrt`, a constant
    /// and every feature.
    pub fn standard(feature_names: &[String]) -> Result<Self, ExprError> {
        let ops: Vec<Symbol> = BinaryOp::ALL
            .iter()
            .map(|&b| Symbol::Binary(b))
            .chain(UnaryOp::ALL.iter().map(|&u| Symbol::Unary(u)))
            .collect();
        Self::new(&ops, true, feature_names)
    }

    /// Builds a library from operator names such as `["+", "*", "sqrt", "const"]`.
    pub fn from_names(names: &[String], feature_names: &[String]) -> Result<Self, ExprError> {
        let mut ops = Vec::new();
        let mut with_const = false;
        for n in names {
            match parse_operator(n) {
                Some(Symbol::Const) => with_const = true,
                Some(sym) => ops.push(sym),
                None => return Err(ExprError::UnknownToken(n.clone())),
            }
        }
        Self::new(&ops, with_const, feature_names)
    }

    fn from_symbols(symbols: Vec<Symbol>, feature_names: &[String]) -> Result<Self, ExprError> {
        if symbols.is_empty() {
            return Err(ExprError::InvalidLibrary("empty library".into()));
        }
        let mut tokens = Vec::with_capacity(symbols.len());
        let mut names = Vec::with_capacity(symbols.len());
        let mut by_name = HashMap::new();
        let mut const_id = None;
        for (id, &sym) in symbols.iter().enumerate() {
            let name = symbol_name(sym, feature_names);
            if name.is_empty() || name.contains(char::is_whitespace) || name.starts_with("C=") {
                return Err(ExprError::InvalidLibrary(format!("bad token name {name:?}")));
            }
            let weight_key = match sym {
                Symbol::Feature(_) => "feature",
                _ => name.as_str(),
            };
            let complexity = token_complexity(weight_key)?;
            if by_name.insert(name.clone(), id).is_some() {
                return Err(ExprError::InvalidLibrary(format!("duplicate token {name:?}")));
            }
            if sym == Symbol::Const {
                const_id = Some(id);
            }
            tokens.push(Token {
                symbol: sym,
                complexity,
            });
            names.push(name);
        }
        let inverse_of = symbols
            .iter()
            .map(|sym| match sym {
                Symbol::Unary(op) => op
                    .inverse()
                    .and_then(|inv| symbols.iter().position(|s| *s == Symbol::Unary(inv))),
                _ => None,
            })
            .collect();
        Ok(Library {
            tokens,
            names,
            inverse_of,
            feature_names: feature_names.to_vec(),
            by_name,
            const_id,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> Token {
        self.tokens[id]
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn name(&self, id: TokenId) -> &str {
        &self.names[id]
    }

    pub fn id_of(&self, name: &str) -> Option<TokenId> {
        self.by_name.get(name).copied().or_else(|| {
            // operator aliases
            parse_operator(name).and_then(|sym| self.tokens.iter().position(|t| t.symbol == sym))
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn const_id(&self) -> Option<TokenId> {
        self.const_id
    }

    pub fn feature_id(&self, feature: usize) -> Option<TokenId> {
        self.tokens.iter().position(|t| t.symbol == Symbol::Feature(feature))
    }

    pub fn is_trig(&self, id: TokenId) -> bool {
        self.tokens[id].symbol.is_trig()
    }

    /// Partner token under the (exp, log) / (square, sqrt) inverse pairing.
    pub fn inverse_of(&self, id: TokenId) -> Option<TokenId> {
        self.inverse_of[id]
    }

    /// Token ids with the given arity, in library order.
    pub fn ids_with_arity(&self, arity: usize) -> Vec<TokenId> {
        (0..self.len()).filter(|&i| self.tokens[i].arity() == arity).collect()
    }
}

impl fmt::Display for Library {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.names.join(", "))
    }
}
