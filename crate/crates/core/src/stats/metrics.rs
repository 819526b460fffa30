//! Agreement metrics and bootstrap intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", y.len(), yhat.len())));
    }
    if y.len() < 2 {
        return Err(Error::invalid("at least two observations required"));
    }
    Ok(())
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub(crate) fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Lin's concordance correlation coefficient with population moments.
/// Identical constant vectors give 1.
pub fn ccc(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let n = y.len() as f64;
    let (my, mp) = (mean(y), mean(yhat));
    let vy = y.iter().map(|v| (v - my) * (v - my)).sum::<f64>() / n;
    let vp = yhat.iter().map(|v| (v - mp) * (v - mp)).sum::<f64>() / n;
    let cov = y.iter().zip(yhat).map(|(a, b)| (a - my) * (b - mp)).sum::<f64>() / n;
    let denom = vy + vp + (my - mp) * (my - mp);
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0 * cov / denom)
}

pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let my = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if ss_tot == 0.0 {
        return Err(Error::numeric("R² undefined for constant targets"));
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over observations: 2.5% and 97.5% quantiles of the
/// resampled R². Resamples with constant targets are skipped.
pub fn bootstrap_ci_r2(y: &[f64], yhat: &[f64], resamples: usize, seed: u64) -> Result<(f64, f64)> {
    r2(y, yhat)?;
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(resamples);
    let mut ys = vec![0.0; n];
    let mut ps = vec![0.0; n];
    for _ in 0..resamples {
        for k in 0..n {
            let i = rng.random_range(0..n);
            ys[k] = y[i];
            ps[k] = yhat[i];
        }
        if let Ok(v) = r2(&ys, &ps) {
            stats.push(v);
        }
    }
    if stats.is_empty() {
        return Err(Error::numeric("every bootstrap resample had constant targets"));
    }
    stats.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&stats, 0.025), quantile_sorted(&stats, 0.975)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ccc_hand_cases() {
        let y = [0.0, 1.0, 2.0];
        assert!((ccc(&y, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((ccc(&y, &[1.0, 2.0, 3.0]).unwrap() - 4.0 / 7.0).abs() < 1e-12);
        assert!((ccc(&y, &[2.0, 1.0, 0.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(ccc(&[3.0, 3.0], &[3.0, 3.0]).unwrap(), 1.0);
        assert_eq!(ccc(&[3.0, 3.0], &[4.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn r2_cases() {
        let y = [1.0, 2.0, 4.0, 7.0];
        assert!(r2(&y, &[3.5; 4]).unwrap().abs() < 1e-15);
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        assert_eq!(bootstrap_ci_r2(&y, &y, 200, 3).unwrap(), (1.0, 1.0));
        assert!(r2(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }
}
