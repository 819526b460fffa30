//! WebAssembly entry points for the static demo page in `www/`.
//!
//! Each operation has a plain Rust function returning a serializable struct
//! and a `wasm_bindgen` wrapper that hands the page a JSON string.

use ndarray::ArrayView2;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use qtkit_core::environments::{hdbscan_cluster, ClusterParams};
use qtkit_core::geometry::{cos_gyration, gyration_tensor, legendre_basis, rbf_basis, Rotation, Vec3};
use qtkit_core::Error;

type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Serialize)]
pub struct BasisCurves {
    /// Sample distances in `[0, cutoff]`.
    pub r: Vec<f64>,
    /// `radial[n][i]` is basis function `n + 1` at `r[i]`.
    pub radial: Vec<Vec<f64>>,
    /// Sample cosines in `[-1, 1]`.
    pub x: Vec<f64>,
    /// `angular[l][i]` is `P_l(x[i])`.
    pub angular: Vec<Vec<f64>>,
}

pub fn basis_curves(cutoff: f64, n_max: usize, degree: usize, samples: usize) -> Result<BasisCurves> {
    if samples < 2 {
        return Err(Error::Validation("need at least two samples".into()));
    }
    let step = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (samples - 1) as f64;
    let r: Vec<f64> = (0..samples).map(|i| step(i, 0.0, cutoff)).collect();
    let mut radial = vec![Vec::with_capacity(samples); n_max];
    for &ri in &r {
        for (n, v) in rbf_basis(ri, cutoff, n_max)?.into_iter().enumerate() {
            radial[n].push(v);
        }
    }
    let x: Vec<f64> = (0..samples).map(|i| step(i, -1.0, 1.0)).collect();
    let mut angular = vec![Vec::with_capacity(samples); degree + 1];
    for &xi in &x {
        for (l, v) in legendre_basis(xi, degree).into_iter().enumerate() {
            angular[l].push(v);
        }
    }
    Ok(BasisCurves { r, radial, x, angular })
}

#[derive(Debug, Clone, Serialize)]
pub struct Clustering {
    /// Cluster per point, `-1` for noise.
    pub labels: Vec<i64>,
    pub n_clusters: usize,
    pub noise: usize,
}

/// Clusters points given as a flat `[x0, y0, x1, y1, ...]` array.
pub fn cluster_2d(flat: &[f64], min_cluster_size: usize, min_samples: usize) -> Result<Clustering> {
    if !flat.len().is_multiple_of(2) {
        return Err(Error::Validation("coordinate array has odd length".into()));
    }
    let x = ArrayView2::from_shape((flat.len() / 2, 2), flat).map_err(|e| Error::Validation(e.to_string()))?;
    let found = hdbscan_cluster(x, &ClusterParams { min_cluster_size, min_samples })?;
    let labels: Vec<i64> = found.iter().map(|l| l.map_or(-1, |c| c as i64)).collect();
    let n_clusters = found.iter().flatten().max().map_or(0, |m| m + 1);
    let noise = found.iter().filter(|l| l.is_none()).count();
    Ok(Clustering { labels, n_clusters, noise })
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationView {
    pub matrix: [[f64; 3]; 3],
    pub vector: [f64; 3],
    pub rotated: [f64; 3],
    /// Gyration tensor of the unit vector, five components.
    pub gyration: [f64; 5],
    /// `R G(v) Rᵀ`.
    pub gyration_rotated: [f64; 5],
    /// `G(R v)`; equals `gyration_rotated` up to rounding.
    pub gyration_of_rotated: [f64; 5],
    pub equivariance_error: f64,
    pub cos_angle: f64,
    /// Frobenius cosine of the two gyration tensors, `P₂(cos θ)`.
    pub cos_gyration: f64,
}

/// Rotates `vector` about `axis` by `angle_deg` and compares the gyration
/// tensor before and after.
pub fn rotation_view(axis: [f64; 3], angle_deg: f64, vector: [f64; 3]) -> Result<RotationView> {
    let axis = Vec3::from_array(axis).normalized().ok_or_else(|| Error::Validation("axis must be non-zero".into()))?;
    let v = Vec3::from_array(vector).normalized().ok_or_else(|| Error::Validation("vector must be non-zero".into()))?;
    let rot = Rotation::from_axis_angle(axis, angle_deg.to_radians());
    let rv = rot.rotate_vec(v);
    let g = gyration_tensor(v)?;
    let g_rot = rot.rotate5(g);
    let g_of_rot = gyration_tensor(rv.normalized().unwrap_or(rv))?;
    let equivariance_error = g_rot.sub(g_of_rot).frob_norm();
    Ok(RotationView {
        matrix: rot.matrix(),
        vector: v.to_array(),
        rotated: rv.to_array(),
        gyration: g.to_array(),
        gyration_rotated: g_rot.to_array(),
        gyration_of_rotated: g_of_rot.to_array(),
        equivariance_error,
        cos_angle: v.dot(rv).clamp(-1.0, 1.0),
        cos_gyration: cos_gyration(g, g_of_rot)?,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = basisCurves)]
pub fn basis_curves_js(cutoff: f64, n_max: usize, degree: usize, samples: usize) -> std::result::Result<String, JsError> {
    to_js(basis_curves(cutoff, n_max, degree, samples))
}

#[wasm_bindgen(js_name = cluster2d)]
pub fn cluster_2d_js(flat: &[f64], min_cluster_size: usize, min_samples: usize) -> std::result::Result<String, JsError> {
    to_js(cluster_2d(flat, min_cluster_size, min_samples))
}

#[wasm_bindgen(js_name = rotationView)]
pub fn rotation_view_js(
    ax: f64,
    ay: f64,
    az: f64,
    angle_deg: f64,
    vx: f64,
    vy: f64,
    vz: f64,
) -> std::result::Result<String, JsError> {
    to_js(rotation_view([ax, ay, az], angle_deg, [vx, vy, vz]))
}
