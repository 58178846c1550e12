use super::library::{Library, Symbol, Token, TokenId};
use super::ExprError;

/// Value an unfitted constant slot starts from.
pub const DEFAULT_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: TokenId,
    pub token: Token,
    pub parent: Option<usize>,
    children: [usize; 2],
    /// One past the last preorder index of this node's subtree.
    pub end: usize,
    /// Constant slot index for constant leaves.
    pub slot: Option<usize>,
}

impl Node {
    pub fn children(&self) -> &[usize] {
        &self.children[..self.token.arity()]
    }

    pub fn symbol(&self) -> Symbol {
        self.token.symbol
    }
}

/// A syntax tree stored in preorder. Node `0` is the root and the subtree of
/// node `i` occupies `i..nodes[i].end`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprTree {
    nodes: Vec<Node>,
    constants: Vec<f64>,
}

/// One preorder entry with its constant value when the token is a constant.
pub type PrefixItem = (TokenId, Option<f64>);

impl ExprTree {
    /// Rebuilds the unique tree whose preorder traversal is `seq`. Constant
    /// slots are numbered left to right and start at [`DEFAULT_CONSTANT`].
    pub fn parse_prefix(lib: &Library, seq: &[TokenId]) -> Result<Self, ExprError> {
        let items: Vec<PrefixItem> = seq.iter().map(|&id| (id, None)).collect();
        Self::from_items(lib, &items)
    }

    /// Like [`ExprTree::parse_prefix`] with explicit constant values for the
    /// constant tokens (missing values fall back to the default).
    pub fn from_items(lib: &Library, items: &[PrefixItem]) -> Result<Self, ExprError> {
        if items.is_empty() {
            return Err(ExprError::Empty);
        }
        let mut nodes: Vec<Node> = Vec::with_capacity(items.len());
        let mut constants = Vec::new();
        // (node index, children still to attach)
        let mut open: Vec<(usize, usize)> = Vec::new();
        for (pos, &(id, value)) in items.iter().enumerate() {
            if id >= lib.len() {
                return Err(ExprError::UnknownTokenId(id));
            }
            if pos > 0 && open.is_empty() {
                return Err(ExprError::Overfull { position: pos });
            }
            let token = lib.token(id);
            let parent = match open.last_mut() {
                Some((p, remaining)) => {
                    let p = *p;
                    let k = nodes[p].token.arity() - *remaining;
                    nodes[p].children[k] = pos;
                    *remaining -= 1;
                    if *remaining == 0 {
                        open.pop();
                    }
                    Some(p)
                }
                None => None,
            };
            let slot = if token.symbol == Symbol::Const {
                constants.push(value.unwrap_or(DEFAULT_CONSTANT));
                Some(constants.len() - 1)
            } else {
                None
            };
            nodes.push(Node {
                id,
                token,
                parent,
                children: [0; 2],
                end: 0,
                slot,
            });
            if token.arity() > 0 {
                open.push((pos, token.arity()));
            }
        }
        if !open.is_empty() {
            let missing = open.iter().map(|(_, r)| r).sum();
            return Err(ExprError::Incomplete { missing });
        }
        for i in (0..nodes.len()).rev() {
            let end = match nodes[i].children().last() {
                Some(&last) => nodes[last].end,
                None => i + 1,
            };
            nodes[i].end = end;
        }
        Ok(ExprTree { nodes, constants })
    }

    pub fn to_prefix(&self) -> Vec<TokenId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    pub fn items(&self) -> Vec<PrefixItem> {
        self.nodes
            .iter()
            .map(|n| (n.id, n.slot.map(|s| self.constants[s])))
            .collect()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    pub fn n_constants(&self) -> usize {
        self.constants.len()
    }

    pub fn set_constants(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.constants.len(), "constant slot count");
        self.constants.copy_from_slice(values);
    }

    pub fn with_constants(mut self, values: &[f64]) -> Self {
        self.set_constants(values);
        self
    }

    /// Sum of token complexities over all nodes.
    pub fn complexity(&self) -> u32 {
        self.nodes.iter().map(|n| n.token.complexity).sum()
    }

    pub fn subtree_complexity(&self, at: usize) -> u32 {
        self.nodes[at..self.nodes[at].end]
            .iter()
            .map(|n| n.token.complexity)
            .sum()
    }

    pub fn subtree_items(&self, at: usize) -> Vec<PrefixItem> {
        let mut items = self.items();
        items.truncate(self.nodes[at].end);
        items.drain(..at);
        items
    }

    pub fn depth(&self) -> usize {
        let mut depth = vec![1usize; self.nodes.len()];
        for i in 1..self.nodes.len() {
            depth[i] = depth[self.nodes[i].parent.expect("non-root has parent")] + 1;
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Returns a copy of `self` with the subtree rooted at `at` replaced by
    /// `replacement` (preorder items of a complete subtree).
    pub fn replace_subtree(&self, lib: &Library, at: usize, replacement: &[PrefixItem]) -> Result<Self, ExprError> {
        let items = self.items();
        let end = self.nodes[at].end;
        let mut out = Vec::with_capacity(items.len() - (end - at) + replacement.len());
        out.extend_from_slice(&items[..at]);
        out.extend_from_slice(replacement);
        out.extend_from_slice(&items[end..]);
        Self::from_items(lib, &out)
    }
}
