use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector along `self`; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0).then(|| self * (1.0 / n))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Symmetric traceless 3×3 tensor stored as `[T_xy, T_xz, T_yz, T_an, T_zz]`
/// with `T_an = (T_xx - T_yy) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Traceless5 {
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
    pub an: f64,
    pub zz: f64,
}

/// Weights of the rotation-invariant inner product on the five components.
pub(crate) const FROB_WEIGHTS: [f64; 5] = [2.0, 2.0, 2.0, 2.0, 1.5];

impl Traceless5 {
    pub const ZERO: Traceless5 = Traceless5 { xy: 0.0, xz: 0.0, yz: 0.0, an: 0.0, zz: 0.0 };

    pub fn from_array(a: [f64; 5]) -> Self {
        Traceless5 { xy: a[0], xz: a[1], yz: a[2], an: a[3], zz: a[4] }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.xy, self.xz, self.yz, self.an, self.zz]
    }

    /// Projects a symmetric 3×3 tensor onto its traceless part.
    ///
    /// Fails when the input is not symmetric within `1e-9` relative to its
    /// largest entry.
    pub fn from_symmetric(m: [[f64; 3]; 3]) -> Result<Self> {
        let scale = m.iter().flatten().fold(1.0f64, |acc, v| acc.max(v.abs()));
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            if (m[i][j] - m[j][i]).abs() > 1e-9 * scale {
                return Err(Error::invalid(format!(
                    "tensor is not symmetric: T[{i}][{j}]={} vs T[{j}][{i}]={}",
                    m[i][j], m[j][i]
                )));
            }
        }
        let tr3 = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
        let sym = |i: usize, j: usize| 0.5 * (m[i][j] + m[j][i]);
        Ok(Traceless5 {
            xy: sym(0, 1),
            xz: sym(0, 2),
            yz: sym(1, 2),
            an: ((m[0][0] - tr3) - (m[1][1] - tr3)) / 2.0,
            zz: m[2][2] - tr3,
        })
    }

    /// Builds the tensor from the six Cartesian components
    /// `[T_xx, T_xy, T_xz, T_yy, T_yz, T_zz]`, removing any trace.
    pub fn from_cartesian6(c: [f64; 6]) -> Self {
        let [xx, xy, xz, yy, yz, zz] = c;
        Self::from_symmetric([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])
            .expect("six-component input is symmetric by construction")
    }

    pub fn to_matrix(self) -> [[f64; 3]; 3] {
        let xx = self.an - 0.5 * self.zz;
        let yy = -self.an - 0.5 * self.zz;
        [[xx, self.xy, self.xz], [self.xy, yy, self.yz], [self.xz, self.yz, self.zz]]
    }

    /// Rotation-invariant inner product, equal to `Tr(AᵀB)` of the full tensors.
    pub fn frob_dot(self, o: Traceless5) -> f64 {
        self.to_array()
            .iter()
            .zip(o.to_array())
            .zip(FROB_WEIGHTS)
            .map(|((a, b), w)| w * a * b)
            .sum()
    }

    /// Frobenius norm of the full 3×3 tensor.
    pub fn frob_norm(self) -> f64 {
        self.frob_dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::from_array(self.to_array().map(|v| v * s))
    }

    pub fn sub(self, o: Traceless5) -> Self {
        let (a, b) = (self.to_array(), o.to_array());
        Self::from_array(std::array::from_fn(|i| a[i] - b[i]))
    }

    pub fn add(self, o: Traceless5) -> Self {
        let (a, b) = (self.to_array(), o.to_array());
        Self::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

/// Unit-norm gyration tensor of a unit vector,
/// `√(3/2)·[r_x r_y, r_x r_z, r_y r_z, (r_x²−r_y²)/2, r_z²−1/3]`.
pub fn gyration_tensor(unit_r: Vec3) -> Result<Traceless5> {
    let n = unit_r.norm();
    if !((n - 1.0).abs() <= 1e-9) {
        return Err(Error::invalid(format!("gyration tensor needs a unit vector, got norm {n}")));
    }
    Ok(gyration_unchecked(unit_r))
}

pub(crate) fn gyration_unchecked(r: Vec3) -> Traceless5 {
    let s = 1.5f64.sqrt();
    Traceless5 {
        xy: s * r.x * r.y,
        xz: s * r.x * r.z,
        yz: s * r.y * r.z,
        an: s * (r.x * r.x - r.y * r.y) / 2.0,
        zz: s * (r.z * r.z - 1.0 / 3.0),
    }
}

/// Cosine between two unit-norm traceless tensors under the Frobenius inner
/// product. For gyration tensors of unit vectors at angle θ this is P₂(cos θ).
pub fn cos_gyration(a: Traceless5, b: Traceless5) -> Result<f64> {
    for (name, t) in [("first", a), ("second", b)] {
        let n = t.frob_norm();
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("{name} tensor is not unit norm ({n})")));
        }
    }
    Ok(a.frob_dot(b).clamp(-1.0, 1.0))
}
