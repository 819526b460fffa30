//! Real spherical harmonics and scaled modified spherical Bessel functions.

use std::f64::consts::PI;

use crate::geometry::Vec3;

/// Number of (l, m) pairs up to `l_max`.
pub(crate) fn n_lm(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// Real orthonormal spherical harmonics of a unit vector, stored at index
/// `l² + l + m` for m in −l..=l. Cosine-type for m > 0, sine-type for m < 0.
pub(crate) fn real_sph_harm(u: Vec3, l_max: usize, out: &mut [f64]) {
    let (x, y, z) = (u.x, u.y, u.z);
    // q[l][m] = P_l^m(z) / (1 − z²)^{m/2}, a polynomial in z
    let mut q = vec![vec![0.0; l_max + 1]; l_max + 1];
    for m in 0..=l_max {
        q[m][m] = if m == 0 { 1.0 } else { q[m - 1][m - 1] * (2 * m - 1) as f64 };
        if m < l_max {
            q[m + 1][m] = z * (2 * m + 1) as f64 * q[m][m];
        }
        for l in (m + 2)..=l_max {
            q[l][m] = ((2 * l - 1) as f64 * z * q[l - 1][m] - (l + m - 1) as f64 * q[l - 2][m]) / (l - m) as f64;
        }
    }
    // (x + iy)^m
    let mut re = vec![1.0; l_max + 1];
    let mut im = vec![0.0; l_max + 1];
    for m in 1..=l_max {
        re[m] = re[m - 1] * x - im[m - 1] * y;
        im[m] = re[m - 1] * y + im[m - 1] * x;
    }
    for l in 0..=l_max {
        let base = l * l + l;
        let mut fact_ratio = 1.0; // (l−m)!/(l+m)!
        for m in 0..=l {
            if m > 0 {
                fact_ratio /= ((l + m) * (l - m + 1)) as f64;
            }
            let norm = ((2 * l + 1) as f64 / (4.0 * PI) * fact_ratio).sqrt();
            if m == 0 {
                out[base] = norm * q[l][0];
            } else {
                let s = std::f64::consts::SQRT_2 * norm * q[l][m];
                out[base + m] = s * re[m];
                out[base - m] = s * im[m];
            }
        }
    }
}

/// `e^{−x} i_l(x)` for l = 0..=l_max, x ≥ 0.
pub(crate) fn scaled_bessel_i(x: f64, l_max: usize, out: &mut [f64]) {
    if x < 20.0 {
        // positive power series, no cancellation
        let ex = (-x).exp();
        let h = 0.5 * x * x;
        let mut lead = 1.0; // x^l / (2l+1)!!
        for (l, o) in out.iter_mut().enumerate().take(l_max + 1) {
            if l > 0 {
                lead *= x / (2 * l + 1) as f64;
            }
            let mut term = 1.0;
            let mut sum = 1.0;
            let mut k = 1;
            loop {
                term *= h / (k as f64 * (2 * l + 2 * k + 1) as f64);
                sum += term;
                if term < 1e-17 * sum {
                    break;
                }
                k += 1;
            }
            *o = ex * lead * sum;
        }
    } else {
        // upward recurrence is stable once x exceeds l
        let e2 = (-2.0 * x).exp();
        out[0] = (1.0 - e2) / (2.0 * x);
        if l_max >= 1 {
            out[1] = (1.0 + e2) / (2.0 * x) - out[0] / x;
        }
        for l in 1..l_max {
            out[l + 1] = out[l - 1] - (2 * l + 1) as f64 / x * out[l];
        }
    }
}
