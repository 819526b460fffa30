use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::params::ATOM_OUTPUTS;
use crate::error::{Error, Result};
use crate::ingest::AtomTargets;

/// Normalization of per-atom targets: z-scores for N and λ, a single RMS
/// scale for the dipole components and one for the quadrupole.
///
/// The tensor scales are rotation invariant: `mu_rms² = mean |μ|²/3` and
/// `q_rms² = mean ‖Q‖²_F/5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub n_mean: f64,
    pub n_std: f64,
    pub li_mean: f64,
    pub li_std: f64,
    pub mu_rms: f64,
    pub q_rms: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

impl TargetStats {
    pub fn fit<'a>(atoms: impl IntoIterator<Item = &'a AtomTargets>) -> Result<TargetStats> {
        let (mut n, mut li) = (Vec::new(), Vec::new());
        let (mut mu2, mut q2) = (0.0, 0.0);
        for a in atoms {
            n.push(a.n_e);
            li.push(a.li);
            mu2 += a.mu.dot(a.mu);
            let f = a.quad.frob_norm();
            q2 += f * f;
        }
        if n.is_empty() {
            return Err(Error::invalid("target statistics need at least one atom"));
        }
        let count = n.len() as f64;
        let (n_mean, n_std) = mean_std(&n);
        let (li_mean, li_std) = mean_std(&li);
        let stats = TargetStats {
            n_mean,
            n_std,
            li_mean,
            li_std,
            mu_rms: (mu2 / (3.0 * count)).sqrt(),
            q_rms: (q2 / (5.0 * count)).sqrt(),
        };
        for (name, v) in [("N", n_std), ("λ", li_std), ("μ", stats.mu_rms), ("Q", stats.q_rms)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::numeric(format!("cannot normalize {name}: zero or non-finite spread")));
            }
        }
        Ok(stats)
    }

    pub fn apply(&self, a: &AtomTargets) -> [f64; ATOM_OUTPUTS] {
        let mut v = a.to_array();
        v[0] = (v[0] - self.n_mean) / self.n_std;
        v[1] = (v[1] - self.li_mean) / self.li_std;
        for x in &mut v[2..5] {
            *x /= self.mu_rms;
        }
        for x in &mut v[5..] {
            *x /= self.q_rms;
        }
        v
    }

    pub fn invert(&self, v: &[f64]) -> AtomTargets {
        assert_eq!(v.len(), ATOM_OUTPUTS, "normalized target width");
        let mut w = [0.0; ATOM_OUTPUTS];
        w.copy_from_slice(v);
        w[0] = w[0] * self.n_std + self.n_mean;
        w[1] = w[1] * self.li_std + self.li_mean;
        for x in &mut w[2..5] {
            *x *= self.mu_rms;
        }
        for x in &mut w[5..] {
            *x *= self.q_rms;
        }
        AtomTargets::from_array(&w)
    }

    /// Normalized `n_atoms × 10` matrix.
    pub fn apply_matrix(&self, atoms: &[AtomTargets]) -> Array2<f64> {
        let mut m = Array2::zeros((atoms.len(), ATOM_OUTPUTS));
        for (i, a) in atoms.iter().enumerate() {
            for (c, v) in self.apply(a).into_iter().enumerate() {
                m[(i, c)] = v;
            }
        }
        m
    }

    pub fn invert_matrix(&self, m: &Array2<f64>) -> Vec<AtomTargets> {
        m.rows().into_iter().map(|r| self.invert(&r.to_vec())).collect()
    }
}

/// Per-column z-score normalization of molecular targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalarStats {
    /// Fits on the rows of `values` (one row per molecule).
    pub fn fit(values: &[Vec<f64>]) -> Result<ScalarStats> {
        let k = values.first().map(|r| r.len()).ok_or_else(|| Error::invalid("scalar statistics need data"))?;
        let mut mean = Vec::with_capacity(k);
        let mut std = Vec::with_capacity(k);
        for c in 0..k {
            let col: Vec<f64> = values.iter().map(|r| r[c]).collect();
            let (m, s) = mean_std(&col);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::numeric(format!("cannot normalize target column {c}: zero or non-finite spread")));
            }
            mean.push(m);
            std.push(s);
        }
        Ok(ScalarStats { mean, std })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(self.mean.iter().zip(&self.std)).map(|(x, (m, s))| (x - m) / s).collect()
    }

    pub fn invert(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(self.mean.iter().zip(&self.std)).map(|(x, (m, s))| x * s + m).collect()
    }
}
