//! Isotropic elastic tensor, strain operator and the rigid-motion basis.

use crate::error::{Error, Result};
use nalgebra::{Matrix2, Matrix3, Vector2};

/// Symmetric 2x2 matrix stored as a full `Matrix2`; symmetry is kept by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix2(Matrix2<f64>);

impl SymMatrix2 {
    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self(Matrix2::new(a11, a12, a12, a22))
    }

    /// Symmetric part of an arbitrary matrix.
    pub fn sym_part(m: &Matrix2<f64>) -> Self {
        Self((m + m.transpose()) * 0.5)
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &SymMatrix2) -> f64 {
        self.0.component_mul(&other.0).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticTensor {
    pub lambda: f64,
    pub mu: f64,
    pub dim: usize,
    /// Ellipticity floor: the largest d0 with d0 <= mu, d*lambda + 2mu <= 1/d0 and the reverse.
    pub delta0: f64,
}

impl ElasticTensor {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        Self::with_dim(lambda, mu, 2)
    }

    pub fn with_dim(lambda: f64, mu: f64, dim: usize) -> Result<Self> {
        if dim != 2 {
            return Err(Error::Domain(format!("only dim = 2 is supported, got {dim}")));
        }
        if !(lambda.is_finite() && mu.is_finite()) {
            return Err(Error::Domain("Lame parameters must be finite".into()));
        }
        let bulk = dim as f64 * lambda + 2.0 * mu;
        if mu <= 0.0 || bulk <= 0.0 {
            return Err(Error::Domain(format!(
                "strong convexity requires mu > 0 and d*lambda + 2*mu > 0 (mu = {mu}, d*lambda + 2*mu = {bulk})"
            )));
        }
        let delta0 = mu.min(bulk).min(1.0 / mu).min(1.0 / bulk);
        Ok(Self { lambda, mu, dim, delta0 })
    }

    /// Same tensor with both moduli multiplied by `m`.
    pub fn scaled(&self, m: f64) -> Result<Self> {
        Self::with_dim(self.lambda * m, self.mu * m, self.dim)
    }

    /// `lambda + 2 mu`, the longitudinal modulus.
    pub fn p_modulus(&self) -> f64 {
        self.lambda + 2.0 * self.mu
    }

    /// Lower and upper constants of `c |A|^2 <= (C A, A)` on symmetric matrices.
    pub fn ellipticity_bounds(&self) -> (f64, f64) {
        let a = 2.0 * self.mu;
        let b = 2.0 * self.lambda + 2.0 * self.mu;
        (a.min(b), a.max(b))
    }

    /// Voigt matrix for (e11, e22, 2 e12).
    pub fn voigt(&self) -> Matrix3<f64> {
        let (l, m) = (self.lambda, self.mu);
        Matrix3::new(l + 2.0 * m, l, 0.0, l, l + 2.0 * m, 0.0, 0.0, 0.0, m)
    }
}

/// `lambda tr(e) I + 2 mu e`.
pub fn stiffness_contract(tensor: &ElasticTensor, strain: &SymMatrix2) -> SymMatrix2 {
    let m = Matrix2::identity() * (tensor.lambda * strain.trace()) + strain.matrix() * (2.0 * tensor.mu);
    SymMatrix2(m)
}

/// Strain of a displacement gradient, `(G + G^T)/2`; `grad[(i, j)] = d u_i / d x_j`.
pub fn strain(grad_u: &Matrix2<f64>) -> SymMatrix2 {
    SymMatrix2::sym_part(grad_u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RigidKind {
    TranslationX,
    TranslationY,
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RigidMotion {
    pub kind: RigidKind,
}

impl RigidMotion {
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        match self.kind {
            RigidKind::TranslationX => [1.0, 0.0],
            RigidKind::TranslationY => [0.0, 1.0],
            RigidKind::Rotation => [x[1], -x[0]],
        }
    }

    pub fn eval_vec(&self, x: &Vector2<f64>) -> Vector2<f64> {
        let v = self.eval([x.x, x.y]);
        Vector2::new(v[0], v[1])
    }

    /// Constant gradient `d psi_i / d x_j`.
    pub fn gradient(&self) -> Matrix2<f64> {
        match self.kind {
            RigidKind::TranslationX | RigidKind::TranslationY => Matrix2::zeros(),
            RigidKind::Rotation => Matrix2::new(0.0, 1.0, -1.0, 0.0),
        }
    }
}

/// Translation in x, translation in y, rotation `(x2, -x1)`; this order indexes every 3-block.
pub fn rigid_basis() -> [RigidMotion; 3] {
    [
        RigidMotion { kind: RigidKind::TranslationX },
        RigidMotion { kind: RigidKind::TranslationY },
        RigidMotion { kind: RigidKind::Rotation },
    ]
}
