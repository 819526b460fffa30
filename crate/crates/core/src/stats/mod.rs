//! Metrics and the repeated-measures model comparison engine.

mod anova;
mod diagnostics;
mod metrics;
mod ptukey;
mod scores;

pub use anova::{rm_anova_tukey, TukeyResult, P_FLOOR};
pub use diagnostics::{
    icc1, levene, n_eff, paired_battery, paired_t, shapiro_wilk, wilcoxon_signed_rank, LeveneCenter, PairedBattery,
};
pub use metrics::{bootstrap_ci_r2, ccc, r2};
pub use ptukey::{ptukey, qtukey};
pub use scores::{compare_models, ComparisonReport, ModelDiagnostics, ScoreEntry, ScoreMatrix};
