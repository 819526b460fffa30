//! SOAP power-spectrum descriptors.
//!
//! The neighbor density of each species is a sum of Gaussians of width σ
//! (the central atom included) expanded in real spherical harmonics up to
//! `l_max` and in `n_max` radial functions. The radial functions are
//! Gaussian-type primitives `exp(−α_n r²)` Löwdin-orthonormalized on
//! [0, cutoff] with the r² measure. The power spectrum couples every pair
//! of combined (species, radial) indices `I ≤ J`, giving
//! `M(M+1)/2 · (l_max+1)` features with `M = n_species · n_max`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::environments::harmonics::{n_lm, real_sph_harm, scaled_bessel_i};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::ingest::{Element, MoleculeRecord};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoapParams {
    /// Bohr.
    pub cutoff: f64,
    pub n_max: usize,
    pub l_max: usize,
    /// Gaussian smearing, Bohr.
    pub sigma: f64,
}

impl Default for SoapParams {
    fn default() -> Self {
        SoapParams { cutoff: 8.0, n_max: 8, l_max: 6, sigma: 0.7 }
    }
}

impl SoapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0) || self.n_max == 0 || !(self.sigma > 0.0) {
            return Err(Error::invalid(format!("invalid SOAP parameters {self:?}")));
        }
        Ok(())
    }

    pub fn dimension(&self, n_species: usize) -> usize {
        let m = n_species * self.n_max;
        m * (m + 1) / 2 * (self.l_max + 1)
    }
}

/// Precomputed radial basis and quadrature for one parameter set.
#[derive(Debug, Clone)]
pub struct SoapCalculator {
    params: SoapParams,
    species: Vec<Element>,
    r: Vec<f64>,
    /// `basis_w[n][q] = w_q r_q² g_n(r_q)`
    basis_w: Vec<Vec<f64>>,
}

const PANELS: usize = 24;
const ORDER: usize = 8;

impl SoapCalculator {
    pub fn new(params: SoapParams, species: &[Element]) -> Result<Self> {
        params.validate()?;
        if species.is_empty() {
            return Err(Error::invalid("SOAP species list is empty"));
        }
        let (r, w) = quadrature::composite(0.0, params.cutoff, PANELS, ORDER);
        let n = params.n_max;
        let alphas: Vec<f64> = (1..=n)
            .map(|k| {
                let rk = params.cutoff * k as f64 / n as f64;
                -(1e-3f64).ln() / (rk * rk)
            })
            .collect();
        let prim: Vec<Vec<f64>> = alphas.iter().map(|a| r.iter().map(|x| (-a * x * x).exp()).collect()).collect();
        let overlap = DMatrix::from_fn(n, n, |i, j| {
            (0..r.len()).map(|q| w[q] * r[q] * r[q] * prim[i][q] * prim[j][q]).sum::<f64>()
        });
        let eig = SymmetricEigen::new(overlap);
        if eig.eigenvalues.iter().any(|&v| !(v > 1e-14)) {
            return Err(Error::numeric("radial overlap matrix is numerically singular"));
        }
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
        let s_half = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
        let basis_w = (0..n)
            .map(|a| {
                (0..r.len())
                    .map(|q| {
                        let g: f64 = (0..n).map(|b| s_half[(a, b)] * prim[b][q]).sum();
                        w[q] * r[q] * r[q] * g
                    })
                    .collect()
            })
            .collect();
        Ok(SoapCalculator { params, species: species.to_vec(), r, basis_w })
    }

    pub fn params(&self) -> &SoapParams {
        &self.params
    }

    pub fn species(&self) -> &[Element] {
        &self.species
    }

    pub fn dimension(&self) -> usize {
        self.params.dimension(self.species.len())
    }

    /// Expansion coefficients `c[s][n][lm]` of the neighbor density around `center`.
    fn coefficients(&self, elements: &[Element], positions: &[Vec3], center: usize) -> Vec<f64> {
        let p = &self.params;
        let nlm = n_lm(p.l_max);
        let ns = self.species.len();
        let mut c = vec![0.0; ns * p.n_max * nlm];
        let mut ylm = vec![0.0; nlm];
        let mut bes = vec![0.0; p.l_max + 1];
        let mut radial = vec![0.0; (p.l_max + 1) * self.r.len()];
        let s2 = p.sigma * p.sigma;
        let origin = positions[center];
        for (j, (&el, &pos)) in elements.iter().zip(positions).enumerate() {
            let Some(s) = self.species.iter().position(|&e| e == el) else {
                continue;
            };
            let d = pos - origin;
            let rj = if j == center { 0.0 } else { d.norm() };
            if rj > p.cutoff {
                continue;
            }
            let l_top = if rj == 0.0 { 0 } else { p.l_max };
            if rj == 0.0 {
                ylm[0] = 0.5 / PI.sqrt();
            } else {
                real_sph_harm(d * (1.0 / rj), p.l_max, &mut ylm);
            }
            for (q, &rq) in self.r.iter().enumerate() {
                let gauss = (-(rq - rj) * (rq - rj) / (2.0 * s2)).exp();
                scaled_bessel_i(rq * rj / s2, l_top, &mut bes);
                for l in 0..=l_top {
                    radial[l * self.r.len() + q] = gauss * bes[l];
                }
            }
            for n in 0..p.n_max {
                let bw = &self.basis_w[n];
                let base = (s * p.n_max + n) * nlm;
                for l in 0..=l_top {
                    let rad = &radial[l * self.r.len()..(l + 1) * self.r.len()];
                    let integral: f64 = bw.iter().zip(rad).map(|(a, b)| a * b).sum();
                    let f = 4.0 * PI * integral;
                    for idx in l * l..(l + 1) * (l + 1) {
                        c[base + idx] += f * ylm[idx];
                    }
                }
            }
        }
        c
    }

    /// Power spectrum for atom `center`; pairs `I ≤ J` outer, `l` inner.
    pub fn descriptor_raw(&self, elements: &[Element], positions: &[Vec3], center: usize) -> Result<Vec<f64>> {
        if center >= elements.len() || elements.len() != positions.len() {
            return Err(Error::invalid(format!("atom index {center} out of range")));
        }
        let p = &self.params;
        let nlm = n_lm(p.l_max);
        let c = self.coefficients(elements, positions, center);
        let m = self.species.len() * p.n_max;
        let pref: Vec<f64> = (0..=p.l_max).map(|l| PI * (8.0 / (2 * l + 1) as f64).sqrt()).collect();
        let mut out = Vec::with_capacity(self.dimension());
        for i in 0..m {
            let ci = &c[i * nlm..(i + 1) * nlm];
            for j in i..m {
                let cj = &c[j * nlm..(j + 1) * nlm];
                for l in 0..=p.l_max {
                    let r = l * l..(l + 1) * (l + 1);
                    let dot: f64 = ci[r.clone()].iter().zip(&cj[r]).map(|(a, b)| a * b).sum();
                    out.push(pref[l] * dot);
                }
            }
        }
        Ok(out)
    }

    pub fn descriptor(&self, mol: &MoleculeRecord, atom_index: usize) -> Result<Vec<f64>> {
        self.descriptor_raw(&mol.elements, &mol.positions, atom_index)
    }
}

/// One-shot descriptor; prefer [`SoapCalculator`] when computing many.
pub fn soap_descriptor(
    mol: &MoleculeRecord,
    atom_index: usize,
    params: &SoapParams,
    species: &[Element],
) -> Result<Vec<f64>> {
    SoapCalculator::new(*params, species)?.descriptor(mol, atom_index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_dimension() {
        assert_eq!(SoapParams::default().dimension(4), 3696);
        let calc = SoapCalculator::new(SoapParams::default(), &[Element::H, Element::C, Element::N, Element::O]).unwrap();
        let d = calc
            .descriptor_raw(&[Element::C, Element::H], &[Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0)], 0)
            .unwrap();
        assert_eq!(d.len(), 3696);
        assert!(d.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn radial_basis_is_orthonormal() {
        let p = SoapParams { cutoff: 6.0, n_max: 6, l_max: 2, sigma: 0.5 };
        let calc = SoapCalculator::new(p, &[Element::C]).unwrap();
        let (_, w) = quadrature::composite(0.0, p.cutoff, PANELS, ORDER);
        for a in 0..p.n_max {
            for b in 0..p.n_max {
                // basis_w carries one factor of w r²; divide it back out of one side
                let s: f64 = (0..w.len())
                    .map(|q| calc.basis_w[a][q] * calc.basis_w[b][q] / (w[q] * calc.r[q] * calc.r[q]))
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-9, "({a},{b}) = {s}");
            }
        }
    }

    #[test]
    fn isolated_atom_has_only_radial_l0_signal() {
        let calc = SoapCalculator::new(SoapParams { cutoff: 5.0, n_max: 3, l_max: 2, sigma: 0.7 }, &[Element::C]).unwrap();
        let d = calc.descriptor_raw(&[Element::C], &[Vec3::new(1.0, 2.0, 3.0)], 0).unwrap();
        for (k, v) in d.iter().enumerate() {
            if k % 3 != 0 {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(d[0] > 0.0);
    }
}
