//! Cross-validation diagnostics: ICC, effective sample size, normality,
//! homoscedasticity and paired tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::stats::metrics::{mean, sample_sd};

/// One-way ICC(1,1) over equal-size groups.
pub fn icc1(groups: &[Vec<f64>]) -> Result<f64> {
    let a = groups.len();
    if a < 2 {
        return Err(Error::invalid("ICC needs at least two groups"));
    }
    let k = groups[0].len();
    if k < 2 || groups.iter().any(|g| g.len() != k) {
        return Err(Error::invalid("ICC needs balanced groups of size ≥ 2"));
    }
    let grand = groups.iter().flatten().sum::<f64>() / (a * k) as f64;
    let gm: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let msb = k as f64 * gm.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (a - 1) as f64;
    let msw = groups
        .iter()
        .zip(&gm)
        .map(|(g, m)| g.iter().map(|v| (v - m) * (v - m)).sum::<f64>())
        .sum::<f64>()
        / (a * (k - 1)) as f64;
    let denom = msb + (k - 1) as f64 * msw;
    if denom == 0.0 {
        return Err(Error::numeric("ICC undefined for constant scores"));
    }
    Ok((msb - msw) / denom)
}

/// `n_total / (1 + (k − 1)·max(0, icc))`.
pub fn n_eff(icc: f64, k: usize, n_total: usize) -> f64 {
    n_total as f64 / (1.0 + (k as f64 - 1.0) * icc.max(0.0))
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid")
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

/// Shapiro–Wilk W and p-value for 3 ≤ n ≤ 5000 using Royston's (1995)
/// coefficient and p-value approximations.
pub fn shapiro_wilk(x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::invalid(format!("Shapiro–Wilk needs 3..=5000 observations, got {n}")));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let range = s[n - 1] - s[0];
    if !(range > 1e-12 * s[n - 1].abs().max(s[0].abs()).max(1e-300)) {
        return Err(Error::numeric("Shapiro–Wilk undefined for constant input"));
    }
    let nd = std_normal();
    let nf = n as f64;
    let mut a = vec![0.0; n];
    if n == 3 {
        a[0] = -std::f64::consts::FRAC_1_SQRT_2;
        a[2] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let m: Vec<f64> = (1..=n).map(|i| nd.inverse_cdf((i as f64 - 0.375) / (nf + 0.25))).collect();
        let summ2: f64 = m.iter().map(|v| v * v).sum();
        let ssumm2 = summ2.sqrt();
        let u = 1.0 / nf.sqrt();
        let c1 = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
        let c2 = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let an = m[n - 1] / ssumm2 + poly(&c1, u);
        if n > 5 {
            let an1 = m[n - 2] / ssumm2 + poly(&c2, u);
            let fac = ((summ2 - 2.0 * m[n - 1].powi(2) - 2.0 * m[n - 2].powi(2))
                / (1.0 - 2.0 * an * an - 2.0 * an1 * an1))
                .sqrt();
            for i in 2..n - 2 {
                a[i] = m[i] / fac;
            }
            a[n - 2] = an1;
            a[1] = -an1;
        } else {
            let fac = ((summ2 - 2.0 * m[n - 1].powi(2)) / (1.0 - 2.0 * an * an)).sqrt();
            for i in 1..n - 1 {
                a[i] = m[i] / fac;
            }
        }
        a[n - 1] = an;
        a[0] = -an;
    }
    let xm = mean(&s);
    let ssq: f64 = s.iter().map(|v| (v - xm) * (v - xm)).sum();
    let num: f64 = a.iter().zip(&s).map(|(a, v)| a * v).sum();
    let w = (num * num / ssq).min(1.0);
    let p = if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        (pi6 * (w.sqrt().asin() - (0.75f64).sqrt().asin())).max(0.0)
    } else {
        let y = (1.0 - w).ln();
        let (yv, m, sd) = if n <= 11 {
            let gamma = poly(&[-2.273, 0.459], nf);
            if y >= gamma {
                return Ok((w, 1e-99));
            }
            let yv = -(gamma - y).ln();
            (yv, poly(&[0.5440, -0.39978, 0.025054, -6.714e-4], nf), poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp())
        } else {
            let ln_n = nf.ln();
            (y, poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n), poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp())
        };
        1.0 - nd.cdf((yv - m) / sd)
    };
    Ok((w, p.clamp(0.0, 1.0)))
}

/// Centering used by [`levene`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeveneCenter {
    #[default]
    Mean,
    Median,
}

/// Levene's test for equal variances; returns (F, p).
pub fn levene(groups: &[Vec<f64>], center: LeveneCenter) -> Result<(f64, f64)> {
    let k = groups.len();
    if k < 2 || groups.iter().any(|g| g.len() < 2) {
        return Err(Error::invalid("Levene needs ≥ 2 groups with ≥ 2 observations each"));
    }
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let c = match center {
                LeveneCenter::Mean => mean(g),
                LeveneCenter::Median => {
                    let mut s = g.clone();
                    s.sort_by(f64::total_cmp);
                    let m = s.len() / 2;
                    if s.len() % 2 == 0 {
                        0.5 * (s[m - 1] + s[m])
                    } else {
                        s[m]
                    }
                }
            };
            g.iter().map(|v| (v - c).abs()).collect()
        })
        .collect();
    let n_total: usize = z.iter().map(Vec::len).sum();
    let zbar = z.iter().flatten().sum::<f64>() / n_total as f64;
    let zi: Vec<f64> = z.iter().map(|g| mean(g)).collect();
    let between: f64 = z.iter().zip(&zi).map(|(g, m)| g.len() as f64 * (m - zbar) * (m - zbar)).sum();
    let within: f64 = z.iter().zip(&zi).map(|(g, m)| g.iter().map(|v| (v - m) * (v - m)).sum::<f64>()).sum();
    let df1 = (k - 1) as f64;
    let df2 = (n_total - k) as f64;
    let scale = zbar * zbar * n_total as f64;
    if between <= 1e-24 * scale.max(f64::MIN_POSITIVE) {
        return Ok((0.0, 1.0));
    }
    if within == 0.0 {
        return Ok((f64::INFINITY, 0.0));
    }
    let f = (between / df1) / (within / df2);
    let dist = FisherSnedecor::new(df1, df2).map_err(|e| Error::numeric(e.to_string()))?;
    Ok((f, dist.sf(f)))
}

/// Two-sided paired t-test p-value; `None` when the differences have zero spread.
pub fn paired_t(d: &[f64]) -> Result<Option<(f64, f64)>> {
    if d.len() < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let sd = sample_sd(d);
    if sd <= 1e-12 * mean(d).abs() || sd == 0.0 {
        return Ok(None);
    }
    let t = mean(d) / (sd / (d.len() as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (d.len() - 1) as f64).map_err(|e| Error::numeric(e.to_string()))?;
    Ok(Some((t, (2.0 * dist.sf(t.abs())).min(1.0))))
}

/// Average ranks (1-based) with ties.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Wilcoxon signed-rank test. Zero differences are dropped before ranking.
/// Exact null distribution (by enumeration over doubled tied ranks) for up
/// to 25 non-zero differences, normal approximation with tie correction
/// beyond. Returns (W⁺, two-sided p), or `None` if every difference is zero.
pub fn wilcoxon_signed_rank(d: &[f64]) -> Option<(f64, f64)> {
    let nz: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return None;
    }
    let abs: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
    let r = ranks(&abs);
    let w_plus: f64 = nz.iter().zip(&r).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    if n <= 25 {
        let doubled: Vec<usize> = r.iter().map(|x| (2.0 * x).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        // counts[s] = number of sign assignments with doubled W⁺ = s
        let mut counts = vec![0f64; total + 1];
        counts[0] = 1.0;
        for &dr in &doubled {
            for s in (dr..=total).rev() {
                counts[s] += counts[s - dr];
            }
        }
        let all = 2f64.powi(n as i32);
        let w2 = (2.0 * w_plus).round() as usize;
        let lower: f64 = counts[..=w2].iter().sum::<f64>() / all;
        let upper: f64 = counts[w2..].iter().sum::<f64>() / all;
        Some((w_plus, (2.0 * lower.min(upper)).min(1.0)))
    } else {
        let nf = n as f64;
        let mean_w = nf * (nf + 1.0) / 4.0;
        let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
        let mut sorted = abs.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            var -= (t * t * t - t) / 48.0;
            i = j + 1;
        }
        let z = (w_plus - mean_w) / var.sqrt();
        Some((w_plus, (2.0 * std_normal().sf(z.abs())).min(1.0)))
    }
}

/// Five diagnostics on fold-level differences `a − b` grouped by repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedBattery {
    pub n: usize,
    pub mean_delta: f64,
    /// `std(Δ)/√n`.
    pub sem: f64,
    pub icc: Option<f64>,
    pub shapiro_p: Option<f64>,
    pub t_p: Option<f64>,
    pub wilcoxon_p: Option<f64>,
    /// True when the differences have no spread.
    pub degenerate: bool,
}

pub fn paired_battery(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<PairedBattery> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return Err(Error::invalid("paired battery needs matched fold grids"));
    }
    let grouped: Vec<Vec<f64>> =
        a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect();
    let d: Vec<f64> = grouped.iter().flatten().copied().collect();
    let n = d.len();
    if n < 2 {
        return Err(Error::invalid("paired battery needs at least two pairs"));
    }
    let sd = sample_sd(&d);
    let t = paired_t(&d)?;
    Ok(PairedBattery {
        n,
        mean_delta: mean(&d),
        sem: sd / (n as f64).sqrt(),
        icc: icc1(&grouped).ok(),
        shapiro_p: if (3..=5000).contains(&n) { shapiro_wilk(&d).ok().map(|r| r.1) } else { None },
        t_p: t.map(|r| r.1),
        wilcoxon_p: wilcoxon_signed_rank(&d).map(|r| r.1),
        degenerate: t.is_none(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icc_and_n_eff() {
        assert!((icc1(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap() - 1.0).abs() < 1e-15);
        assert!((n_eff(0.153, 5, 25) - 15.5).abs() < 0.05);
        assert!((n_eff(0.343, 5, 25) - 10.5).abs() < 0.05);
        assert_eq!(n_eff(-0.2, 5, 25), 25.0);
        assert!(icc1(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn shapiro_reference_values() {
        let (w, p) = shapiro_wilk(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(w > 0.95 && p > 0.5, "{w} {p}");
        // reference values from the AS R94 Fortran routine
        let x = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 9.7, 4.1, 3.0];
        let (w, p) = shapiro_wilk(&x).unwrap();
        assert!((w - 0.802_060_024_5).abs() < 1e-8, "{w}");
        assert!((p - 0.015_358_703).abs() < 1e-7, "{p}");
        let (w, p) = shapiro_wilk(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((w - 0.986_762_155).abs() < 1e-8 && (p - 0.967_173_935).abs() < 1e-7);
        assert!(shapiro_wilk(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn levene_cases() {
        let g = vec![vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]];
        assert_eq!(levene(&g, LeveneCenter::Mean).unwrap(), (0.0, 1.0));
        let g = vec![vec![1.0, 3.0, 5.0], vec![2.0, 2.5, 3.0], vec![0.0, 4.0, 8.0]];
        let (f, p) = levene(&g, LeveneCenter::Mean).unwrap();
        assert!((f - 1.827_160_493_8).abs() < 1e-9);
        assert!((p - 0.240_042_725).abs() < 1e-7);
    }

    #[test]
    fn wilcoxon_small_exact() {
        // all positive: p = 2 / 2^n
        let (w, p) = wilcoxon_signed_rank(&[0.5, 1.0, 1.5, 2.0]).unwrap();
        assert_eq!(w, 10.0);
        assert!((p - 2.0 / 16.0).abs() < 1e-15);
        assert!(wilcoxon_signed_rank(&[0.0, 0.0]).is_none());
    }

    #[test]
    fn battery_degenerate_on_equal_inputs() {
        let a = vec![vec![0.5; 5]; 5];
        let b = a.clone();
        let r = paired_battery(&a, &b).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.mean_delta, 0.0);
        assert!(r.wilcoxon_p.is_none() && r.t_p.is_none() && r.icc.is_none());
    }

    #[test]
    fn battery_constant_shift() {
        let a: Vec<Vec<f64>> = (0..5).map(|r| (0..5).map(|f| 0.5 + 0.01 * (r * 5 + f) as f64).collect()).collect();
        let b: Vec<Vec<f64>> = a.iter().map(|row| row.iter().map(|v| v - 0.01).collect()).collect();
        let r = paired_battery(&a, &b).unwrap();
        assert!(r.t_p.is_none());
        assert!((r.wilcoxon_p.unwrap() - 2.0 / 2f64.powi(25)).abs() < 1e-15);
    }
}
