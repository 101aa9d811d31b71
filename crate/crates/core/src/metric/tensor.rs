use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Symmetric 2x2 matrix stored by its three independent components.
///
/// Used for metric values (positive-definite) and for their partial
/// derivatives (symmetric, no sign constraint).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTensor {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

/// Eigenpairs of a symmetric 2x2 matrix, eigenvalues in increasing order.
#[derive(Clone, Copy, Debug)]
pub struct SymEigen {
    pub values: [f64; 2],
    /// Columns are the unit eigenvectors matching `values`.
    pub vectors: Matrix2<f64>,
}

impl MetricTensor {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0);
    pub const IDENTITY: Self = Self::new(1.0, 0.0, 1.0);

    pub const fn new(m11: f64, m12: f64, m22: f64) -> Self {
        Self { m11, m12, m22 }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, b)
    }

    /// Symmetric part of an arbitrary matrix.
    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Self::new(m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)])
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.m11, self.m12, self.m12, self.m22)
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn is_positive_definite(&self) -> bool {
        self.m11 > 0.0 && self.det() > 0.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.m11, s * self.m12, s * self.m22)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.m11 + o.m11, self.m12 + o.m12, self.m22 + o.m22)
    }

    pub fn mul_vec(&self, v: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(
            self.m11 * v.x + self.m12 * v.y,
            self.m12 * v.x + self.m22 * v.y,
        )
    }

    /// `u^T M v`
    pub fn inner(&self, u: &Vector2<f64>, v: &Vector2<f64>) -> f64 {
        u.dot(&self.mul_vec(v))
    }

    /// `v^T M v`
    pub fn quad(&self, v: &Vector2<f64>) -> f64 {
        self.m11 * v.x * v.x + 2.0 * self.m12 * v.x * v.y + self.m22 * v.y * v.y
    }

    pub fn norm(&self, v: &Vector2<f64>) -> f64 {
        self.quad(v).sqrt()
    }

    /// Closed-form eigendecomposition.
    pub fn eigen(&self) -> SymEigen {
        let half_diff = 0.5 * (self.m11 - self.m22);
        let mean = 0.5 * (self.m11 + self.m22);
        let radius = half_diff.hypot(self.m12);
        let theta = 0.5 * self.m12.atan2(half_diff);
        let (s, c) = theta.sin_cos();
        // (c, s) spans the eigenspace of the larger eigenvalue.
        SymEigen {
            values: [mean - radius, mean + radius],
            vectors: Matrix2::new(-s, c, c, s),
        }
    }

    /// `P f(Λ) P^T` for a scalar function applied to the eigenvalues.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> Matrix2<f64> {
        let e = self.eigen();
        let p = e.vectors;
        let d = Matrix2::new(f(e.values[0]), 0.0, 0.0, f(e.values[1]));
        let m = p * d * p.transpose();
        // Enforce exact symmetry.
        let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
        Matrix2::new(m[(0, 0)], off, off, m[(1, 1)])
    }

    fn check_spd(&self) -> Result<()> {
        if self.is_positive_definite() && self.m22 > 0.0 {
            Ok(())
        } else {
            Err(Error::Degenerate(format!("{self:?}")))
        }
    }

    /// `M^{-1/2}`: the linear map sending the metric's unit ball onto the Euclidean one.
    pub fn sqrt_inverse(&self) -> Result<Matrix2<f64>> {
        self.check_spd()?;
        Ok(self.map_eigenvalues(|l| 1.0 / l.sqrt()))
    }

    pub fn sqrt(&self) -> Result<Matrix2<f64>> {
        self.check_spd()?;
        Ok(self.map_eigenvalues(f64::sqrt))
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Degenerate(format!("singular {self:?}")));
        }
        Ok(Self::new(self.m22 / det, -self.m12 / det, self.m11 / det))
    }

    /// Largest ratio `det(M)^{1/4} / sqrt(lambda_i)`; 1 for isotropic metrics.
    pub fn anisotropic_quotient(&self) -> f64 {
        let e = self.eigen();
        let lmin = e.values[0];
        let q = self.det().sqrt().sqrt() / lmin.sqrt();
        q.max(1.0)
    }
}

/// Component matrix of the pullback `J^T [N] J`.
pub fn pullback(j: &Matrix2<f64>, n: &MetricTensor) -> MetricTensor {
    MetricTensor::from_matrix(&(j.transpose() * n.matrix() * j))
}

pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}
