//! Repeated-measures ANOVA with Tukey HSD over repeat-level means.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};
use crate::stats::metrics::{mean, sample_sd};
use crate::stats::ptukey::{ptukey, qtukey};

/// Reporting floor for p-values.
pub const P_FLOOR: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub models: Vec<String>,
    pub means: Vec<f64>,
    /// Half-width of the 95% interval `t_{0.975,n−1} · SEM`.
    pub ci_half: Vec<f64>,
    /// Unclamped pairwise p-values, diagonal 1.
    pub p_raw: Vec<Vec<f64>>,
    pub mse: f64,
    pub df_error: usize,
    pub q_crit: f64,
    /// Minimum significant difference at α = 0.05.
    pub msd: f64,
    pub f_stat: f64,
    pub f_p: f64,
    /// Set when the error mean square is zero.
    pub degenerate: bool,
}

impl TukeyResult {
    /// p-values clamped to [`P_FLOOR`] for tables.
    pub fn p_reported(&self) -> Vec<Vec<f64>> {
        self.p_raw.iter().map(|r| r.iter().map(|p| p.max(P_FLOOR)).collect()).collect()
    }

    pub fn significant(&self, i: usize, j: usize) -> bool {
        i != j && self.p_raw[i][j] < 0.05
    }
}

/// Two-way (model × repeat) design; `scores[m][r]` is the repeat-level mean
/// of model `m` in repeat `r`.
pub fn rm_anova_tukey(models: &[String], scores: &[Vec<f64>]) -> Result<TukeyResult> {
    let k = scores.len();
    if k < 2 || models.len() != k {
        return Err(Error::invalid("RM-ANOVA needs at least two named models"));
    }
    let n = scores[0].len();
    if n < 2 || scores.iter().any(|s| s.len() != n) {
        return Err(Error::invalid("RM-ANOVA needs a balanced design with at least two repeats"));
    }
    let grand = scores.iter().flatten().sum::<f64>() / (k * n) as f64;
    let model_means: Vec<f64> = scores.iter().map(|s| mean(s)).collect();
    let repeat_means: Vec<f64> = (0..n).map(|r| scores.iter().map(|s| s[r]).sum::<f64>() / k as f64).collect();
    let ss_tot: f64 = scores.iter().flatten().map(|v| (v - grand) * (v - grand)).sum();
    let ss_model = n as f64 * model_means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>();
    let ss_rep = k as f64 * repeat_means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>();
    let df_error = (k - 1) * (n - 1);
    let ss_err = (ss_tot - ss_model - ss_rep).max(0.0);
    let mse = ss_err / df_error as f64;
    let scale = ss_tot.max(grand * grand * (k * n) as f64).max(f64::MIN_POSITIVE);
    let degenerate = ss_err <= 1e-24 * scale;

    let q_crit = qtukey(0.95, k, df_error as f64)?;
    let msd = q_crit * (mse / n as f64).sqrt();
    let mut p_raw = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let gap = (model_means[i] - model_means[j]).abs();
            let p = if degenerate {
                if gap == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                let q = gap / (mse / n as f64).sqrt();
                (1.0 - ptukey(q, k, df_error as f64)?).clamp(0.0, 1.0)
            };
            p_raw[i][j] = p;
            p_raw[j][i] = p;
        }
    }
    let (f_stat, f_p) = if degenerate {
        (if ss_model > 0.0 { f64::INFINITY } else { 0.0 }, if ss_model > 0.0 { 0.0 } else { 1.0 })
    } else {
        let f = (ss_model / (k - 1) as f64) / mse;
        let dist = FisherSnedecor::new((k - 1) as f64, df_error as f64).map_err(|e| Error::numeric(e.to_string()))?;
        (f, dist.sf(f))
    };
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::numeric(e.to_string()))?;
    let tq = t.inverse_cdf(0.975);
    let ci_half = scores.iter().map(|s| tq * sample_sd(s) / (n as f64).sqrt()).collect();
    Ok(TukeyResult {
        models: models.to_vec(),
        means: model_means,
        ci_half,
        p_raw,
        mse,
        df_error,
        q_crit,
        msd,
        f_stat,
        f_p,
        degenerate,
    })
}
