//! Genetic-programming refinement of a population of expressions: tournament
//! selection, subtree crossover and point mutation with elitism.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{ExprTree, PrefixItem, DEFAULT_CONSTANT};
use crate::policy::Grammar;

/// Attempts before an operator gives up and returns its inputs.
pub const MAX_ATTEMPTS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("invalid GP configuration: {0}")]
    InvalidConfig(String),
    #[error("empty seed population")]
    EmptySeed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub generations: usize,
    pub population_size: usize,
    pub crossover_prob: f64,
    /// Per-node mutation probability.
    pub mutation_prob: f64,
    pub tournament_size: usize,
    /// Depth cap on offspring (root depth is 1); `None` leaves only the
    /// grammar's length cap.
    pub max_depth: Option<usize>,
    /// Fraction of each generation, best first, handed to
    /// [`Fitness::refine`].
    pub refine_fraction: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            generations: 20,
            population_size: 500,
            crossover_prob: 0.5,
            mutation_prob: 0.05,
            tournament_size: 5,
            max_depth: None,
            refine_fraction: 0.25,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), GpError> {
        let bad = |m: String| Err(GpError::InvalidConfig(m));
        if self.population_size < 2 {
            return bad(format!(
                "population size must be at least 2, got {}",
                self.population_size
            ));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
            ("refine_fraction", self.refine_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.tournament_size == 0 {
            return bad("tournament size must be at least 1".into());
        }
        if self.max_depth == Some(0) {
            return bad("max depth must be positive".into());
        }
        Ok(())
    }
}

/// Scores individuals. Scores must be deterministic; invalid expressions
/// should score 0.
pub trait Fitness {
    fn fitness(&mut self, tree: &ExprTree) -> f64;

    /// Optionally improves a promising individual (for example by fitting its
    /// constants). Returning `None` keeps it as is.
    fn refine(&mut self, _tree: &ExprTree, _fitness: f64) -> Option<(ExprTree, f64)> {
        None
    }
}

impl<F: FnMut(&ExprTree) -> f64> Fitness for F {
    fn fitness(&mut self, tree: &ExprTree) -> f64 {
        self(tree)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub tree: ExprTree,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpResult {
    /// Final population with fitnesses.
    pub population: Vec<Scored>,
    /// Best fitness of the seed population, then of each generation.
    pub best_history: Vec<f64>,
}

impl GpResult {
    pub fn best(&self) -> &Scored {
        &self.population[best_index(&self.population)]
    }
}

fn clean(f: f64) -> f64 {
    if f.is_nan() {
        0.0
    } else {
        f
    }
}

/// `true` if `a` ranks above `b`: higher fitness, then lower complexity,
/// then (implicitly, by scan order) the earlier index.
fn better(a: &Scored, b: &Scored) -> bool {
    a.fitness > b.fitness || (a.fitness == b.fitness && a.tree.complexity() < b.tree.complexity())
}

fn best_index(pop: &[Scored]) -> usize {
    let mut best = 0;
    for i in 1..pop.len() {
        if better(&pop[i], &pop[best]) {
            best = i;
        }
    }
    best
}

/// Index of the winner of a tournament among `k` distinct uniformly drawn
/// members.
pub fn tournament_select<R: Rng>(pop: &[Scored], k: usize, rng: &mut R) -> usize {
    assert!(k >= 1 && k <= pop.len(), "tournament size {k} out of range");
    let mut picks = index::sample(rng, pop.len(), k).into_vec();
    picks.sort_unstable();
    let mut best = picks[0];
    for &i in &picks[1..] {
        if better(&pop[i], &pop[best]) {
            best = i;
        }
    }
    best
}

fn admissible(grammar: &Grammar, cfg: &GpConfig, tree: &ExprTree) -> bool {
    cfg.max_depth.is_none_or(|d| tree.depth() <= d) && grammar.is_valid_tree(tree)
}

/// Swaps a uniformly chosen subtree of `a` with one of `b`. Offspring that
/// break the grammar or the caps are redrawn; after [`MAX_ATTEMPTS`] the
/// parents are returned.
pub fn crossover<R: Rng>(
    a: &ExprTree,
    b: &ExprTree,
    grammar: &Grammar,
    cfg: &GpConfig,
    rng: &mut R,
) -> (ExprTree, ExprTree) {
    let lib = grammar.library();
    for _ in 0..MAX_ATTEMPTS {
        let i = rng.gen_range(0..a.len());
        let j = rng.gen_range(0..b.len());
        let (Ok(c1), Ok(c2)) = (
            a.replace_subtree(lib, i, &b.subtree_items(j)),
            b.replace_subtree(lib, j, &a.subtree_items(i)),
        ) else {
            continue;
        };
        if admissible(grammar, cfg, &c1) && admissible(grammar, cfg, &c2) {
            return (c1, c2);
        }
    }
    (a.clone(), b.clone())
}

/// Replaces each node with probability `p` by a different token of the same
/// arity, trying up to [`MAX_ATTEMPTS`] replacements that keep the tree
/// admissible and otherwise leaving the node alone. New constant slots start
/// at the default constant.
pub fn mutate<R: Rng>(tree: &ExprTree, grammar: &Grammar, cfg: &GpConfig, p: f64, rng: &mut R) -> ExprTree {
    let lib = grammar.library();
    let mut items: Vec<PrefixItem> = tree.items();
    let mut current = tree.clone();
    for pos in 0..items.len() {
        if !rng.gen_bool(p) {
            continue;
        }
        let old = items[pos];
        let arity = lib.token(old.0).arity();
        let mut options: Vec<_> = lib
            .ids_with_arity(arity)
            .into_iter()
            .filter(|&id| id != old.0)
            .collect();
        options.shuffle(rng);
        for &id in options.iter().take(MAX_ATTEMPTS) {
            let value = (Some(id) == lib.const_id()).then_some(DEFAULT_CONSTANT);
            items[pos] = (id, value);
            match ExprTree::from_items(lib, &items) {
                Ok(t) if admissible(grammar, cfg, &t) => {
                    current = t;
                    break;
                }
                _ => items[pos] = old,
            }
        }
    }
    current
}

/// Runs `cfg.generations` generations starting from `seed`.
///
/// Each generation keeps the best individual unchanged and fills the rest of
/// `cfg.population_size` with offspring of tournament winners: with
/// probability `crossover_prob` a crossover pair, otherwise a copy; every
/// child then goes through [`mutate`]. The best `refine_fraction` of each
/// new generation is passed to [`Fitness::refine`].
pub fn evolve<R: Rng, F: Fitness>(
    seed: Vec<ExprTree>,
    fitness: &mut F,
    grammar: &Grammar,
    cfg: &GpConfig,
    rng: &mut R,
) -> Result<GpResult, GpError> {
    cfg.validate()?;
    if seed.is_empty() {
        return Err(GpError::EmptySeed);
    }
    let mut pop: Vec<Scored> = seed
        .into_iter()
        .map(|tree| {
            let f = clean(fitness.fitness(&tree));
            Scored { tree, fitness: f }
        })
        .collect();
    let mut history = vec![pop[best_index(&pop)].fitness];
    for _ in 0..cfg.generations {
        let elite = pop[best_index(&pop)].clone();
        let k = cfg.tournament_size.min(pop.len());
        let mut children: Vec<ExprTree> = Vec::with_capacity(cfg.population_size);
        while children.len() + 1 < cfg.population_size {
            let a = &pop[tournament_select(&pop, k, rng)].tree;
            if children.len() + 2 < cfg.population_size && rng.gen_bool(cfg.crossover_prob) {
                let b = &pop[tournament_select(&pop, k, rng)].tree;
                let (c1, c2) = crossover(a, b, grammar, cfg, rng);
                children.push(mutate(&c1, grammar, cfg, cfg.mutation_prob, rng));
                children.push(mutate(&c2, grammar, cfg, cfg.mutation_prob, rng));
            } else {
                let a = a.clone();
                children.push(mutate(&a, grammar, cfg, cfg.mutation_prob, rng));
            }
        }
        let mut next = Vec::with_capacity(cfg.population_size);
        next.push(elite);
        for tree in children {
            let f = clean(fitness.fitness(&tree));
            next.push(Scored { tree, fitness: f });
        }
        refine_top(&mut next, fitness, cfg.refine_fraction);
        history.push(next[best_index(&next)].fitness);
        pop = next;
    }
    Ok(GpResult {
        population: pop,
        best_history: history,
    })
}

fn refine_top<F: Fitness>(pop: &mut [Scored], fitness: &mut F, fraction: f64) {
    let n = (fraction * pop.len() as f64).ceil() as usize;
    if n == 0 {
        return;
    }
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&i, &j| pop[j].fitness.total_cmp(&pop[i].fitness).then(i.cmp(&j)));
    for &i in order.iter().take(n) {
        if let Some((tree, f)) = fitness.refine(&pop[i].tree, pop[i].fitness) {
            let f = clean(f);
            if f > pop[i].fitness {
                pop[i] = Scored { tree, fitness: f };
            }
        }
    }
}
