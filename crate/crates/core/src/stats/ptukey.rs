//! Studentized range distribution by Gauss–Legendre double integration.

use std::sync::OnceLock;

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature;

fn std_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(|| Normal::new(0.0, 1.0).expect("valid"))
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `P(range of k standard normals ≤ w)`.
fn range_cdf(w: f64, k: usize, z: &[f64], zw: &[f64]) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let nd = std_normal();
    let s: f64 = z
        .iter()
        .zip(zw)
        .map(|(&z, &wt)| {
            let inner = nd.cdf(z) - nd.cdf(z - w);
            wt * phi(z) * inner.max(0.0).powi(k as i32 - 1)
        })
        .sum();
    (k as f64 * s).clamp(0.0, 1.0)
}

fn inner_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| quadrature::composite(-9.0, 9.0, 36, 12))
}

/// CDF of the studentized range for `k` groups and `df` error degrees of
/// freedom; `df = ∞` gives the range of standard normals.
pub fn ptukey(q: f64, k: usize, df: f64) -> Result<f64> {
    if k < 2 || !(df > 0.0) {
        return Err(Error::invalid(format!("studentized range needs k ≥ 2 and df > 0 (k={k}, df={df})")));
    }
    if q <= 0.0 {
        return Ok(0.0);
    }
    let (z, zw) = inner_rule();
    if df.is_infinite() || df > 25_000.0 {
        return Ok(range_cdf(q, k, z, zw));
    }
    // S = sqrt(χ²_ν / ν) has density ν^{ν/2} s^{ν−1} e^{−νs²/2} / (Γ(ν/2) 2^{ν/2−1})
    let sd = 1.0 / (2.0 * df).sqrt();
    let lo = (1.0 - 10.0 * sd).max(0.0);
    let hi = 1.0 + 16.0 * sd;
    let ln_norm = 0.5 * df * df.ln() - ln_gamma(0.5 * df) - (0.5 * df - 1.0) * std::f64::consts::LN_2;
    let (s, sw) = quadrature::composite(lo, hi, 48, 12);
    let total: f64 = s
        .iter()
        .zip(&sw)
        .filter(|(&s, _)| s > 0.0)
        .map(|(&s, &w)| {
            let ln_f = ln_norm + (df - 1.0) * s.ln() - 0.5 * df * s * s;
            w * ln_f.exp() * range_cdf(q * s, k, z, zw)
        })
        .sum();
    Ok(total.clamp(0.0, 1.0))
}

/// Quantile of the studentized range by bisection on [`ptukey`].
pub fn qtukey(p: f64, k: usize, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability {p} outside (0, 1)")));
    }
    let mut lo = 0.0;
    let mut hi = 8.0;
    while ptukey(hi, k, df)? < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::numeric("studentized range quantile did not bracket"));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ptukey(mid, k, df)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_groups_infinite_df_is_scaled_normal() {
        // range of two normals = |Z1 − Z2| ~ √2 |Z|
        let q = 2.5;
        let want = 2.0 * std_normal().cdf(q / 2f64.sqrt()) - 1.0;
        assert!((ptukey(q, 2, f64::INFINITY).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn two_groups_matches_t() {
        // q/√2 is |t_ν|
        use statrs::distribution::StudentsT;
        let t = StudentsT::new(0.0, 1.0, 6.0).unwrap();
        for &q in &[0.5, 2.0, 4.0, 7.0] {
            let want = 2.0 * t.cdf(q / 2f64.sqrt()) - 1.0;
            assert!((ptukey(q, 2, 6.0).unwrap() - want).abs() < 1e-6, "q={q}");
        }
    }

    #[test]
    fn published_critical_values() {
        // q_{0.95}(3, 8) = 4.041, q_{0.95}(4, 12) = 4.199, q_{0.95}(5, ∞) = 3.858
        assert!((qtukey(0.95, 3, 8.0).unwrap() - 4.041).abs() < 2e-3);
        assert!((qtukey(0.95, 4, 12.0).unwrap() - 4.199).abs() < 2e-3);
        assert!((qtukey(0.95, 5, f64::INFINITY).unwrap() - 3.858).abs() < 2e-3);
    }
}
