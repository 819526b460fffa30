//! Scaffold extraction and the repeated grouped cross-validation plan.

mod murcko;
mod plan;

pub use murcko::{murcko_scaffold, scaffold_atoms, ACYCLIC};
pub use plan::{build_plan, grouped_kfold, scaffold_groups, AcyclicPolicy, FoldPlan, PlanCell, FOLDS, REPEATS};
