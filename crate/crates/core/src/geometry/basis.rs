use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Sine radial basis with a cosine envelope:
/// `√(2/c)·sin(nπr/c)/r·(1+cos(πr/c))/2` for `n = 1..=n_max`.
///
/// `r = 0` evaluates the removable singularity as its limit `√(2/c)·nπ/c`.
pub fn rbf_basis(r: f64, cutoff: f64, n_max: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n_max];
    rbf_basis_into(r, cutoff, &mut out)?;
    Ok(out)
}

/// Like [`rbf_basis`] but writes into a caller-provided slice.
pub fn rbf_basis_into(r: f64, cutoff: f64, out: &mut [f64]) -> Result<()> {
    if out.is_empty() {
        return Err(Error::invalid("rbf basis needs n_max >= 1"));
    }
    if !(cutoff > 0.0) {
        return Err(Error::invalid(format!("rbf cutoff must be positive, got {cutoff}")));
    }
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("rbf distance must be non-negative, got {r}")));
    }
    if r > cutoff {
        return Err(Error::invalid(format!("rbf distance {r} exceeds cutoff {cutoff}")));
    }
    let pref = (2.0 / cutoff).sqrt();
    if r == 0.0 {
        for (k, o) in out.iter_mut().enumerate() {
            *o = pref * (k + 1) as f64 * PI / cutoff;
        }
        return Ok(());
    }
    let env = if r == cutoff { 0.0 } else { 0.5 * (1.0 + (PI * r / cutoff).cos()) };
    for (k, o) in out.iter_mut().enumerate() {
        let n = (k + 1) as f64;
        *o = pref * (n * PI * r / cutoff).sin() / r * env;
    }
    Ok(())
}

/// Legendre polynomials `P_0..=P_degree` at `x` (clamped to `[-1, 1]`).
pub fn legendre_basis(x: f64, degree: usize) -> Vec<f64> {
    let x = x.clamp(-1.0, 1.0);
    let mut p = Vec::with_capacity(degree + 1);
    p.push(1.0);
    if degree >= 1 {
        p.push(x);
    }
    for n in 1..degree {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        p.push(next);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_vanishes_at_cutoff() {
        for v in rbf_basis(8.0, 8.0, 6).unwrap() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn rbf_reference_values() {
        let v = rbf_basis(4.0, 8.0, 1).unwrap();
        assert!((v[0] - 0.0625).abs() < 1e-15);
        let v0 = rbf_basis(0.0, 8.0, 1).unwrap();
        assert!((v0[0] - 0.5 * PI / 8.0).abs() < 1e-15);
        assert!((v0[0] - 0.19635).abs() < 1e-5);
    }

    #[test]
    fn rbf_continuous_at_origin() {
        let at0 = rbf_basis(0.0, 8.0, 8).unwrap();
        let near = rbf_basis(1e-7, 8.0, 8).unwrap();
        for (a, b) in at0.iter().zip(&near) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rbf_domain_errors() {
        assert!(rbf_basis(8.5, 8.0, 3).is_err());
        assert!(rbf_basis(-0.1, 8.0, 3).is_err());
        assert!(rbf_basis(1.0, 8.0, 0).is_err());
    }

    #[test]
    fn legendre_reference_values() {
        assert!(legendre_basis(1.0, 6).iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert_eq!(legendre_basis(0.0, 2), vec![1.0, 0.0, -0.5]);
        let p = legendre_basis(0.5, 3);
        for (a, b) in p.iter().zip([1.0, 0.5, -0.125, -0.4375]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(legendre_basis(1.0 + 1e-12, 2), legendre_basis(1.0, 2));
    }
}
