//! Small fixed-size vector/matrix types used by the field kernels.
//!
//! `Vec3` is a real 3-vector generic over the scalar; `CVec3` carries one
//! complex amplitude per Cartesian component (the natural representation of
//! a time-harmonic field or dipole moment). `Mat3` is a concrete `f64`
//! 3x3 matrix used by the mirror-composition bookkeeping in the scene layer.

use num_complex::Complex;

use crate::scalar::RealScalar;

/// Real Cartesian 3-vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: RealScalar> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn unit_y() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    /// Unit vector in the same direction, or `None` for a (near-)zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self.scale(T::one() / n))
        } else {
            None
        }
    }

    /// Component by index (0 = x, 1 = y, 2 = z).
    pub fn component(self, axis: usize) -> T {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index out of range: {axis}"),
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: RealScalar> std::ops::Add for Vec3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: RealScalar> std::ops::Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: RealScalar> std::ops::Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Complex Cartesian 3-vector (one phasor per component).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CVec3<T> {
    pub x: Complex<T>,
    pub y: Complex<T>,
    pub z: Complex<T>,
}

impl<T: RealScalar> CVec3<T> {
    pub fn new(x: Complex<T>, y: Complex<T>, z: Complex<T>) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self::new(z, z, z)
    }

    pub fn from_real(v: Vec3<T>) -> Self {
        Self::new(
            Complex::new(v.x, T::zero()),
            Complex::new(v.y, T::zero()),
            Complex::new(v.z, T::zero()),
        )
    }

    pub fn from_arrays(re: [T; 3], im: [T; 3]) -> Self {
        Self::new(
            Complex::new(re[0], im[0]),
            Complex::new(re[1], im[1]),
            Complex::new(re[2], im[2]),
        )
    }

    /// Dot product against a *real* vector (no conjugation).
    pub fn dot_real(self, v: Vec3<T>) -> Complex<T> {
        self.x * v.x + self.y * v.y + self.z * v.z
    }

    /// Squared Euclidean norm, `sum |c_i|^2`.
    pub fn norm_sq(self) -> T {
        self.x.norm_sqr() + self.y.norm_sqr() + self.z.norm_sqr()
    }

    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: Complex<T>) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn scale_real(self, s: T) -> Self {
        Self::new(self.x.scale(s), self.y.scale(s), self.z.scale(s))
    }

    /// Component-wise multiply by real per-axis weights (used for the
    /// polarization sign corrections).
    pub fn mul_signs(self, s: [T; 3]) -> Self {
        Self::new(self.x.scale(s[0]), self.y.scale(s[1]), self.z.scale(s[2]))
    }

    pub fn component(self, axis: usize) -> Complex<T> {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index out of range: {axis}"),
        }
    }

    pub fn is_finite(self) -> bool {
        [self.x, self.y, self.z]
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl<T: RealScalar> std::ops::Add for CVec3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: RealScalar> std::ops::Sub for CVec3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// Concrete 3x3 real matrix (row-major), used for composed reflections.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3 {
    pub rows: [[f64; 3]; 3],
}

impl Mat3 {
    pub fn identity() -> Self {
        Self {
            rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Householder reflection `I - 2 n n^T` across the plane with unit
    /// normal `n` (maps positions).
    pub fn reflection(n: Vec3<f64>) -> Self {
        let mut rows = [[0.0; 3]; 3];
        let na = n.to_array();
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let delta = if i == j { 1.0 } else { 0.0 };
                *v = delta - 2.0 * na[i] * na[j];
            }
        }
        Self { rows }
    }

    /// Moment map of a mirror current: `2 n n^T - I` (normal component kept,
    /// tangential components negated). Equal to `-reflection(n)`.
    pub fn mirror_moment_map(n: Vec3<f64>) -> Self {
        let r = Self::reflection(n);
        let mut rows = r.rows;
        for row in rows.iter_mut() {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        Self { rows }
    }

    pub fn mul_vec(&self, v: Vec3<f64>) -> Vec3<f64> {
        let a = v.to_array();
        let r = |i: usize| self.rows[i][0] * a[0] + self.rows[i][1] * a[1] + self.rows[i][2] * a[2];
        Vec3::new(r(0), r(1), r(2))
    }

    pub fn mul_cvec(&self, v: CVec3<f64>) -> CVec3<f64> {
        let comp = [v.x, v.y, v.z];
        let r = |i: usize| {
            comp[0].scale(self.rows[i][0])
                + comp[1].scale(self.rows[i][1])
                + comp[2].scale(self.rows[i][2])
        };
        CVec3::new(r(0), r(1), r(2))
    }

    /// Matrix product `self * other` (apply `other` first).
    pub fn mul_mat(&self, other: &Mat3) -> Mat3 {
        let mut rows = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rows[i][j] = (0..3).map(|k| self.rows[i][k] * other.rows[k][j]).sum();
            }
        }
        Mat3 { rows }
    }

    pub fn diagonal(&self) -> [f64; 3] {
        [self.rows[0][0], self.rows[1][1], self.rows[2][2]]
    }

    /// Largest absolute off-diagonal entry (zero for axis-aligned mirror
    /// compositions, up to rounding).
    pub fn max_off_diagonal(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    m = m.max(self.rows[i][j].abs());
                }
            }
        }
        m
    }

    /// Entrywise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &Mat3) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((self.rows[i][j] - other.rows[i][j]).abs());
            }
        }
        m
    }
}
