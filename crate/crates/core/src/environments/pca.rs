//! Mean-centered principal component analysis.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaTarget {
    /// Smallest k whose cumulative explained variance reaches the fraction.
    Variance(f64),
    Components(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Row-major `k × d` orthonormal components.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Fraction of total variance captured by the retained components.
    pub fn explained_ratio(&self) -> f64 {
        if self.total_variance <= 0.0 {
            return 1.0;
        }
        (self.explained_variance.iter().sum::<f64>() / self.total_variance).min(1.0)
    }
}

/// Fits PCA on the rows of `x`. Eigenvalues below zero (round-off on
/// rank-deficient data) are floored at zero.
pub fn pca_fit(x: ArrayView2<f64>, target: PcaTarget) -> Result<PcaModel> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two samples"));
    }
    match target {
        PcaTarget::Variance(v) if !(v > 0.0 && v <= 1.0) => {
            return Err(Error::invalid(format!("variance target {v} outside (0, 1]")))
        }
        PcaTarget::Components(0) => return Err(Error::invalid("fixed component count must be positive")),
        _ => {}
    }
    let mean: Array1<f64> = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &x - &mean.view().insert_axis(Axis(0));
    let denom = (n - 1) as f64;

    // eigenpairs sorted by decreasing variance, vectors in feature space
    let (vals, vecs): (Vec<f64>, Vec<Vec<f64>>) = if n < d {
        let gram = centered.dot(&centered.t()) / denom;
        let eig = SymmetricEigen::new(to_dmatrix(&gram));
        let order = descending(eig.eigenvalues.as_slice());
        let mut vals = Vec::new();
        let mut vecs = Vec::new();
        for i in order {
            let lam = eig.eigenvalues[i].max(0.0);
            if lam <= 1e-14 * eig.eigenvalues.max().max(1e-300) {
                continue;
            }
            let u = Array1::from_iter(eig.eigenvectors.column(i).iter().copied());
            let mut v = centered.t().dot(&u);
            let norm = v.dot(&v).sqrt();
            v /= norm;
            vals.push(lam);
            vecs.push(v.to_vec());
        }
        (vals, vecs)
    } else {
        let cov = centered.t().dot(&centered) / denom;
        let eig = SymmetricEigen::new(to_dmatrix(&cov));
        let order = descending(eig.eigenvalues.as_slice());
        let vals = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let vecs = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
        (vals, vecs)
    };
    let total: f64 = centered.iter().map(|v| v * v).sum::<f64>() / denom;

    let k = match target {
        PcaTarget::Components(k) => {
            if k > d {
                return Err(Error::invalid(format!("{k} components requested for {d} features")));
            }
            k
        }
        PcaTarget::Variance(frac) => {
            if total <= 0.0 {
                1
            } else {
                let mut acc = 0.0;
                let mut k = vals.len();
                for (i, v) in vals.iter().enumerate() {
                    acc += v;
                    if acc / total >= frac - 1e-12 {
                        k = i + 1;
                        break;
                    }
                }
                k.max(1)
            }
        }
    };
    let mut components: Vec<Vec<f64>> = vecs.into_iter().take(k).collect();
    let mut explained: Vec<f64> = vals.into_iter().take(k).collect();
    if components.len() < k {
        // fixed-k beyond the data rank: complete with an orthonormal basis
        complete_basis(&mut components, d, k);
        explained.resize(k, 0.0);
    }
    for c in components.iter_mut() {
        // sign convention: largest-magnitude entry positive
        let (imax, _) = c
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 + 1e-12 { (i, v.abs()) } else { acc });
        if c[imax] < 0.0 {
            c.iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(PcaModel { mean: mean.to_vec(), components, explained_variance: explained, total_variance: total })
}

pub fn pca_transform(model: &PcaModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let d = model.mean.len();
    if x.ncols() != d {
        return Err(Error::invalid(format!("PCA expects {d} features, got {}", x.ncols())));
    }
    let k = model.n_components();
    let mut out = Array2::zeros((x.nrows(), k));
    for (i, row) in x.outer_iter().enumerate() {
        for (c, comp) in model.components.iter().enumerate() {
            out[(i, c)] = row.iter().zip(&model.mean).zip(comp).map(|((v, m), w)| (v - m) * w).sum();
        }
    }
    Ok(out)
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn descending(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

/// Gram–Schmidt against unit vectors until `k` orthonormal rows exist.
fn complete_basis(rows: &mut Vec<Vec<f64>>, d: usize, k: usize) {
    for e in 0..d {
        if rows.len() >= k {
            break;
        }
        let mut v = vec![0.0; d];
        v[e] = 1.0;
        for r in rows.iter() {
            let p: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(x, y)| *x -= p * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthonormal(m: &PcaModel) {
        for (i, a) in m.components.iter().enumerate() {
            for (j, b) in m.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn subspace_data_needs_three_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let basis: Vec<Vec<f64>> = (0..3).map(|_| (0..8).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
        let x = Array2::from_shape_fn((60, 8), |(i, j)| {
            let c = [(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos(), (i as f64 * 0.11).sin() * 2.0];
            (0..3).map(|b| c[b] * basis[b][j]).sum::<f64>() + 1.5
        });
        let m = pca_fit(x.view(), PcaTarget::Variance(0.99)).unwrap();
        assert_eq!(m.n_components(), 3);
        assert!((m.explained_ratio() - 1.0).abs() < 1e-10);
        orthonormal(&m);
        // Gram path gives the same answer on the transposed regime
        let small = x.slice(ndarray::s![..5, ..]).to_owned();
        let g = pca_fit(small.view(), PcaTarget::Variance(0.99)).unwrap();
        assert!(g.n_components() <= 3);
        orthonormal(&g);
    }

    #[test]
    fn fixed_k_override() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((40, 30), |_| rng.random::<f64>());
        let m = pca_fit(x.view(), PcaTarget::Components(20)).unwrap();
        assert_eq!(m.n_components(), 20);
        assert_eq!(pca_transform(&m, x.view()).unwrap().ncols(), 20);
        orthonormal(&m);
    }

    #[test]
    fn transform_matches_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((30, 4), |_| rng.random::<f64>());
        let m = pca_fit(x.view(), PcaTarget::Components(4)).unwrap();
        let z = pca_transform(&m, x.view()).unwrap();
        // full-rank rotation preserves centered inner products
        let mean = x.mean_axis(Axis(0)).unwrap();
        let c = &x - &mean.insert_axis(Axis(0));
        let g1 = c.dot(&c.t());
        let g2 = z.dot(&z.t());
        assert!(g1.iter().zip(g2.iter()).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn rejects_bad_input() {
        let x = Array2::<f64>::zeros((1, 3));
        assert!(pca_fit(x.view(), PcaTarget::Variance(0.9)).is_err());
        let x = Array2::<f64>::zeros((3, 3));
        assert!(pca_fit(x.view(), PcaTarget::Variance(1.5)).is_err());
    }
}
