use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{Traceless5, Vec3};
use crate::error::{Error, Result};

/// Proper rotation matrix (orthogonal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    m: [[f64; 3]; 3],
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] };

    /// Validates orthogonality and determinant within `1e-12`.
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        let r = Rotation { m };
        let rrt = r.compose(&r.transpose());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                if (rrt.m[i][j] - want).abs() > 1e-12 {
                    return Err(Error::invalid("matrix is not orthogonal"));
                }
            }
        }
        let det = r.det();
        if (det - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("rotation determinant is {det}, expected +1")));
        }
        Ok(r)
    }

    /// Rotation from a unit quaternion `(w, x, y, z)`; the quaternion is
    /// normalized first.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|v| v / n);
        Rotation {
            m: [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ],
        }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let a = axis.normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0));
        let (s, c) = (angle / 2.0).sin_cos();
        Self::from_quaternion([c, a.x * s, a.y * s, a.z * s])
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn transpose(&self) -> Rotation {
        let m = &self.m;
        Rotation { m: std::array::from_fn(|i| std::array::from_fn(|j| m[j][i])) }
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let (a, b) = (&self.m, &other.m);
        Rotation { m: std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum())) }
    }

    pub fn rotate_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// `T → R T Rᵀ` carried out through the five-component convention.
    pub fn rotate5(&self, t: Traceless5) -> Traceless5 {
        let tm = t.to_matrix();
        let r = &self.m;
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += r[i][k] * tm[k][l] * r[j][l];
                    }
                }
                out[i][j] = s;
                out[j][i] = s;
            }
        }
        Traceless5 { xy: out[0][1], xz: out[0][2], yz: out[1][2], an: (out[0][0] - out[1][1]) / 2.0, zz: out[2][2] }
    }
}

/// Haar-uniform random rotation (Shoemake's unit-quaternion construction).
pub fn sample_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = [b * (2.0 * PI * u3).cos(), a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin()];
    Rotation::from_quaternion(q)
}
