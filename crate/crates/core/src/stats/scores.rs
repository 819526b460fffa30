//! Fold-level score tables and report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::{split_provenance, Provenance};
use crate::stats::anova::{rm_anova_tukey, TukeyResult};
use crate::stats::diagnostics::{icc1, levene, n_eff, shapiro_wilk, LeveneCenter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub model: String,
    /// 1-based.
    pub repeat: usize,
    /// 1-based.
    pub fold: usize,
    /// Environment label or `ALL`, joined with the property, e.g. `N_13/N`.
    pub stratum: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub entries: Vec<ScoreEntry>,
}

const HEADER: &str = "model,repeat,fold,stratum,metric,value";

impl ScoreMatrix {
    pub fn push(&mut self, model: &str, repeat: usize, fold: usize, stratum: &str, metric: &str, value: f64) {
        self.entries.push(ScoreEntry {
            model: model.into(),
            repeat,
            fold,
            stratum: stratum.into(),
            metric: metric.into(),
            value,
        });
    }

    pub fn models(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.entries.iter().filter(|e| seen.insert(e.model.clone())).map(|e| e.model.clone()).collect()
    }

    pub fn strata(&self) -> Vec<String> {
        let s: BTreeSet<&str> = self.entries.iter().map(|e| e.stratum.as_str()).collect();
        s.into_iter().map(String::from).collect()
    }

    fn cell_map(&self, model: &str, metric: &str) -> BTreeMap<(usize, usize, &str), f64> {
        self.entries
            .iter()
            .filter(|e| e.model == model && e.metric == metric)
            .map(|e| ((e.repeat, e.fold, e.stratum.as_str()), e.value))
            .collect()
    }

    /// Fold scores `[repeat][fold]`, averaged over `strata` first.
    pub fn fold_grid(&self, model: &str, metric: &str, strata: &[String], repeats: usize, folds: usize) -> Result<Vec<Vec<f64>>> {
        if strata.is_empty() {
            return Err(Error::invalid("no strata selected"));
        }
        let cells = self.cell_map(model, metric);
        (1..=repeats)
            .map(|r| {
                (1..=folds)
                    .map(|f| {
                        let mut acc = 0.0;
                        for s in strata {
                            acc += cells.get(&(r, f, s.as_str())).ok_or_else(|| {
                                Error::invalid(format!("missing score {model}/{metric}/{s} at repeat {r} fold {f}"))
                            })?;
                        }
                        Ok(acc / strata.len() as f64)
                    })
                    .collect()
            })
            .collect()
    }

    /// Repeat-level means over pooled strata.
    pub fn repeat_means(&self, model: &str, metric: &str, strata: &[String], repeats: usize, folds: usize) -> Result<Vec<f64>> {
        Ok(self
            .fold_grid(model, metric, strata, repeats, folds)?
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect())
    }

    pub fn to_csv(&self, prov: &Provenance) -> String {
        let mut s = format!("{}\n{HEADER}\n", prov.comment_line());
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{},{},{},{:?}", e.model, e.repeat, e.fold, e.stratum, e.metric, e.value);
        }
        s
    }

    /// Parses CSV with an optional leading provenance comment.
    pub fn from_csv(text: &str) -> Result<(Option<Provenance>, Self)> {
        let (prov, body) = if text.starts_with('#') {
            let (p, b) = split_provenance(text)?;
            (Some(p), b)
        } else {
            (None, text)
        };
        let offset = usize::from(prov.is_some());
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>().join(",") != HEADER {
            return Err(Error::parse(1 + offset, format!("expected header '{HEADER}'")));
        }
        let mut m = ScoreMatrix::default();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2 + offset;
            let num = |k: usize| -> Result<usize> {
                rec[k].trim().parse().map_err(|_| Error::parse(line, format!("bad integer '{}'", &rec[k])))
            };
            let value: f64 = rec[5].trim().parse().map_err(|_| Error::parse(line, format!("bad value '{}'", &rec[5])))?;
            m.push(&rec[0], num(1)?, num(2)?, &rec[3], &rec[4], value);
        }
        Ok((prov, m))
    }
}

/// Tukey table plus per-model diagnostics for one (metric, strata) slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub title: String,
    pub tukey: TukeyResult,
    pub diagnostics: Vec<ModelDiagnostics>,
    pub levene_stat: Option<f64>,
    pub levene_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub model: String,
    pub icc: Option<f64>,
    pub n_eff: Option<f64>,
    pub shapiro_w: Option<f64>,
    pub shapiro_p: Option<f64>,
}

pub fn compare_models(
    scores: &ScoreMatrix,
    models: &[String],
    metric: &str,
    strata: &[String],
    repeats: usize,
    folds: usize,
    title: &str,
) -> Result<ComparisonReport> {
    let mut means = Vec::new();
    let mut diagnostics = Vec::new();
    for m in models {
        let grid = scores.fold_grid(m, metric, strata, repeats, folds)?;
        let rm: Vec<f64> = grid.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
        let icc = icc1(&grid).ok();
        let sw = shapiro_wilk(&rm).ok();
        diagnostics.push(ModelDiagnostics {
            model: m.clone(),
            icc,
            n_eff: icc.map(|v| n_eff(v, folds, repeats * folds)),
            shapiro_w: sw.map(|s| s.0),
            shapiro_p: sw.map(|s| s.1),
        });
        means.push(rm);
    }
    let tukey = rm_anova_tukey(models, &means)?;
    let lev = levene(&means, LeveneCenter::Mean).ok();
    Ok(ComparisonReport {
        title: title.into(),
        tukey,
        diagnostics,
        levene_stat: lev.map(|l| l.0),
        levene_p: lev.map(|l| l.1),
    })
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.prec$}"))
}

impl ComparisonReport {
    /// Pairwise p-matrix with a mean ± CI column.
    pub fn tukey_csv(&self) -> String {
        let t = &self.tukey;
        let mut s = String::from("model,mean,ci95");
        for m in &t.models {
            let _ = write!(s, ",{m}");
        }
        s.push('\n');
        let p = t.p_reported();
        for (i, m) in t.models.iter().enumerate() {
            let _ = write!(s, "{m},{:.4},{:.4}", t.means[i], t.ci_half[i]);
            for v in &p[i] {
                let _ = write!(s, ",{v:.4}");
            }
            s.push('\n');
        }
        s
    }

    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from("model,icc,n_eff,shapiro_w,shapiro_p,levene_stat,levene_p\n");
        for d in &self.diagnostics {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                d.model,
                opt(d.icc, 3),
                opt(d.n_eff, 1),
                opt(d.shapiro_w, 3),
                opt(d.shapiro_p, 3),
                opt(self.levene_stat, 3),
                opt(self.levene_p, 3)
            );
        }
        s
    }

    pub fn render_text(&self) -> String {
        let t = &self.tukey;
        let w = t.models.iter().map(String::len).max().unwrap_or(5).max(5);
        let mut s = format!("{}\n", self.title);
        let _ = write!(s, "{:w$}  {:>17}", "model", "mean ± 95% CI");
        for m in &t.models {
            let _ = write!(s, "  {m:>w$}");
        }
        s.push('\n');
        let p = t.p_reported();
        for (i, m) in t.models.iter().enumerate() {
            let _ = write!(s, "{m:w$}  {:>8.4} ± {:<6.4}", t.means[i], t.ci_half[i]);
            for v in &p[i] {
                let _ = write!(s, "  {v:>w$.4}");
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "MSD = {:.4} (q = {:.4}, df = {}, MSE = {:.3e}){}",
            t.msd,
            t.q_crit,
            t.df_error,
            t.mse,
            if t.degenerate { " [degenerate: zero error variance]" } else { "" }
        );
        let _ = writeln!(s, "Levene p = {}", opt(self.levene_p, 3));
        for d in &self.diagnostics {
            let _ = writeln!(
                s,
                "  {}: ICC = {}, n_eff = {}, Shapiro-Wilk p = {}",
                d.model,
                opt(d.icc, 3),
                opt(d.n_eff, 1),
                opt(d.shapiro_p, 3)
            );
        }
        s
    }
}
