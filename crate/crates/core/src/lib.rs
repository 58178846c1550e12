pub mod classify;
pub mod constopt;
pub mod data;
pub mod expr;
pub mod gp;
pub mod pareto;
pub mod policy;
pub mod rules;
pub mod trainer;
