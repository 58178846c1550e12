use super::library::{BinaryOp, Library, Symbol};
use super::tree::{ExprTree, PrefixItem};
use super::ExprError;

/// How constants appear in infix output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstStyle {
    /// `c1`, `c2`, ... numbered by slot.
    Symbolic,
    /// The fitted value with a fixed number of decimals.
    Fixed(usize),
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_ATOM: u8 = 3;

impl ExprTree {
    /// Infix rendering with the minimal parentheses needed to preserve the
    /// tree's structure under left-associative `+ - * /`.
    pub fn render_infix(&self, lib: &Library, style: ConstStyle) -> String {
        self.render_node(lib, 0, style).0
    }

    fn render_node(&self, lib: &Library, at: usize, style: ConstStyle) -> (String, u8) {
        let node = &self.nodes()[at];
        match node.symbol() {
            Symbol::Feature(_) => (lib.name(node.id).to_string(), PREC_ATOM),
            Symbol::Const => {
                let slot = node.slot.expect("constant slot");
                let s = match style {
                    ConstStyle::Symbolic => format!("c{}", slot + 1),
                    ConstStyle::Fixed(p) => {
                        let v = self.constants()[slot];
                        if v < 0.0 {
                            format!("({v:.p$})")
                        } else {
                            format!("{v:.p$}")
                        }
                    }
                };
                (s, PREC_ATOM)
            }
            Symbol::Unary(op) => {
                let (arg, _) = self.render_node(lib, node.children()[0], style);
                (format!("{}({arg})", op.name()), PREC_ATOM)
            }
            Symbol::Binary(op) => {
                let prec = match op {
                    BinaryOp::Add | BinaryOp::Sub => PREC_ADD,
                    BinaryOp::Mul | BinaryOp::Div => PREC_MUL,
                };
                let (l, lp) = self.render_node(lib, node.children()[0], style);
                let (r, rp) = self.render_node(lib, node.children()[1], style);
                let l = if lp < prec { format!("({l})") } else { l };
                let strict_right = matches!(op, BinaryOp::Sub | BinaryOp::Div);
                let r = if rp < prec || (rp == prec && strict_right) {
                    format!("({r})")
                } else {
                    r
                };
                (format!("{l} {} {r}", op.symbol()), prec)
            }
        }
    }

    /// One-line prefix serialization: space-separated token names with
    /// constants written as `C=<decimal>`.
    pub fn to_line(&self, lib: &Library) -> String {
        self.items()
            .iter()
            .map(|&(id, value)| match value {
                Some(v) => format!("C={v}"),
                None => lib.name(id).to_string(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parses the format written by [`ExprTree::to_line`]. A bare `const`
    /// token is accepted as an unfitted constant.
    pub fn parse_line(lib: &Library, line: &str) -> Result<Self, ExprError> {
        let mut items: Vec<PrefixItem> = Vec::new();
        for word in line.split_whitespace() {
            if let Some(v) = word.strip_prefix("C=") {
                let value: f64 = v.parse().map_err(|_| ExprError::BadConstant(word.to_string()))?;
                let id = lib
                    .const_id()
                    .ok_or_else(|| ExprError::UnknownToken("const".to_string()))?;
                items.push((id, Some(value)));
            } else {
                let id = lib
                    .id_of(word)
                    .ok_or_else(|| ExprError::UnknownToken(word.to_string()))?;
                items.push((id, None));
            }
        }
        ExprTree::from_items(lib, &items)
    }
}
