//! Syntax-tree constraints applied while an expression is generated token by
//! token in preorder.

use serde::{Deserialize, Serialize};

use crate::expr::{ExprTree, Library, Symbol, TokenId};

use super::PolicyError;

/// Scope of the "no trigonometric operator below a trigonometric operator" rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrigScope {
    /// Forbid trig tokens anywhere under a trig ancestor.
    #[default]
    Descendants,
    /// Forbid trig tokens only as direct children of a trig token.
    Children,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrammarConfig {
    pub min_len: usize,
    pub max_len: usize,
    pub trig_scope: TrigScope,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        GrammarConfig {
            min_len: 4,
            max_len: 30,
            trig_scope: TrigScope::Descendants,
        }
    }
}

/// A library together with the length and structure rules sequences must obey.
#[derive(Debug, Clone)]
pub struct Grammar {
    library: Library,
    config: GrammarConfig,
}

/// Policy input for the next slot: its parent and elder sibling token.
/// `None` encodes EMPTY.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Observation {
    pub parent: Option<TokenId>,
    pub sibling: Option<TokenId>,
}

#[derive(Debug, Clone)]
struct PNode {
    id: TokenId,
    /// This node or one of its ancestors is a trig operator.
    trig_path: bool,
    first_child: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    parent: Option<usize>,
    position: usize,
}

/// Incremental preorder construction state.
#[derive(Debug, Clone, Default)]
pub struct PartialTree {
    nodes: Vec<PNode>,
    /// Open slots; the last entry is the leftmost one and gets filled next.
    open: Vec<Slot>,
}

impl PartialTree {
    pub fn new() -> Self {
        PartialTree {
            nodes: Vec::new(),
            open: vec![Slot {
                parent: None,
                position: 0,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn open_slots(&self) -> usize {
        self.open.len()
    }

    pub fn is_complete(&self) -> bool {
        self.open.is_empty()
    }

    pub fn tokens(&self) -> Vec<TokenId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    pub fn observation(&self) -> Observation {
        match self.open.last() {
            None
            | Some(Slot {
                parent: None,
                position: _,
            }) => Observation {
                parent: None,
                sibling: None,
            },
            Some(&Slot {
                parent: Some(p),
                position,
            }) => Observation {
                parent: Some(self.nodes[p].id),
                sibling: if position == 0 {
                    None
                } else {
                    self.nodes[p].first_child.map(|c| self.nodes[c].id)
                },
            },
        }
    }

    /// Appends a token to the leftmost open slot. The caller is responsible
    /// for consulting the mask first.
    pub fn push(&mut self, lib: &Library, id: TokenId) {
        let slot = self.open.pop().expect("push into a complete tree");
        let idx = self.nodes.len();
        let parent_trig = slot.parent.is_some_and(|p| self.nodes[p].trig_path);
        if let Some(p) = slot.parent {
            if slot.position == 0 {
                self.nodes[p].first_child = Some(idx);
            }
        }
        self.nodes.push(PNode {
            id,
            trig_path: parent_trig || lib.is_trig(id),
            first_child: None,
        });
        let arity = lib.token(id).arity();
        for position in (0..arity).rev() {
            self.open.push(Slot {
                parent: Some(idx),
                position,
            });
        }
    }
}

impl Grammar {
    pub fn new(library: Library, config: GrammarConfig) -> Result<Self, PolicyError> {
        if config.min_len == 0 || config.min_len > config.max_len {
            return Err(PolicyError::InvalidConfig(format!(
                "length bounds [{}, {}] are inconsistent",
                config.min_len, config.max_len
            )));
        }
        if library.n_features() == 0 {
            return Err(PolicyError::InvalidConfig("library has no feature tokens".into()));
        }
        Ok(Grammar { library, config })
    }

    pub fn library(&self) -> &Library {
        &self.library
    }

    pub fn config(&self) -> &GrammarConfig {
        &self.config
    }

    /// Allowed tokens for the next slot of `partial`.
    ///
    /// Enforced rules: the finished length must land in `[min_len, max_len]`;
    /// a constant may not sit next to a constant sibling nor form the whole
    /// tree; a unary operator's child may not be its inverse; no trig token
    /// below a trig token (scope per [`TrigScope`]).
    pub fn constraint_mask(&self, partial: &PartialTree) -> Result<Vec<bool>, PolicyError> {
        let lib = &self.library;
        let slot = *partial
            .open
            .last()
            .ok_or(PolicyError::DeadEnd { length: partial.len() })?;
        let obs = partial.observation();
        let parent_trig = match slot.parent {
            None => false,
            Some(p) => match self.config.trig_scope {
                TrigScope::Descendants => partial.nodes[p].trig_path,
                TrigScope::Children => lib.is_trig(partial.nodes[p].id),
            },
        };
        let forbidden_inverse = obs.parent.and_then(|p| match lib.token(p).symbol {
            Symbol::Unary(_) => lib.inverse_of(p),
            _ => None,
        });
        let sibling_is_const = obs.sibling.is_some_and(|s| lib.token(s).symbol == Symbol::Const);
        let new_len = partial.len() + 1;
        let open_after_pop = partial.open.len() - 1;

        let mut any = false;
        let mask = (0..lib.len())
            .map(|id| {
                let token = lib.token(id);
                let new_open = open_after_pop + token.arity();
                let ok = new_len + new_open <= self.config.max_len
                    && !(new_open == 0 && new_len < self.config.min_len)
                    && !(token.symbol == Symbol::Const && (slot.parent.is_none() || sibling_is_const))
                    && forbidden_inverse != Some(id)
                    && !(parent_trig && token.symbol.is_trig());
                any |= ok;
                ok
            })
            .collect();
        if any {
            Ok(mask)
        } else {
            Err(PolicyError::DeadEnd { length: partial.len() })
        }
    }

    /// Replays `seq` through the mask and reports the first violation.
    pub fn check(&self, seq: &[TokenId]) -> Result<(), PolicyError> {
        let mut partial = PartialTree::new();
        for (step, &id) in seq.iter().enumerate() {
            if id >= self.library.len() {
                return Err(PolicyError::Violation {
                    step,
                    token: id,
                    reason: "unknown token id",
                });
            }
            if partial.is_complete() {
                return Err(PolicyError::Violation {
                    step,
                    token: id,
                    reason: "tokens after the tree closed",
                });
            }
            let mask = self.constraint_mask(&partial)?;
            if !mask[id] {
                return Err(PolicyError::Violation {
                    step,
                    token: id,
                    reason: "token masked by grammar constraints",
                });
            }
            partial.push(&self.library, id);
        }
        if !partial.is_complete() {
            return Err(PolicyError::Violation {
                step: seq.len(),
                token: usize::MAX,
                reason: "sequence ends with open slots",
            });
        }
        Ok(())
    }

    pub fn is_valid(&self, seq: &[TokenId]) -> bool {
        self.check(seq).is_ok()
    }

    pub fn is_valid_tree(&self, tree: &ExprTree) -> bool {
        self.is_valid(&tree.to_prefix())
    }
}
