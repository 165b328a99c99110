//! Primal one-class SVM on random Fourier features.
//!
//! The slack variables are replaced by the hinge loss, giving the
//! unconstrained objective
//!
//! ```text
//! ½‖w‖² − ρ + (1/νn) Σᵢ max(0, ρ − wᵀz(xᵢ))
//! ```
//!
//! where `n` is the batch size. The margin is `g(x) = wᵀz(x) − ρ` and the
//! decision is `+1` (normal) when `g ≥ 0`, `−1` (anomaly) otherwise.

use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::dot;
use crate::rff::RffMap;
use crate::{Error, Matrix, Result};

/// Label produced by the decision function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Normal,
    Anomaly,
}

impl Decision {
    pub fn from_margin(margin: f64) -> Self {
        if margin >= 0.0 {
            Decision::Normal
        } else {
            Decision::Anomaly
        }
    }

    /// `+1` for normal, `−1` for anomaly.
    pub fn as_sign(self) -> i8 {
        match self {
            Decision::Normal => 1,
            Decision::Anomaly => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OcSvmHead {
    w: Vec<f64>,
    rho: f64,
    nu: f64,
}

/// Subgradient of the hinge objective.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub w: Vec<f64>,
    pub rho: f64,
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu <= 1.0 {
        Ok(())
    } else {
        Err(Error::argument("nu must lie in (0, 1]"))
    }
}

impl OcSvmHead {
    /// `w = 0`, `ρ = 0`.
    pub fn new(feature_dim: usize, nu: f64) -> Result<Self> {
        check_nu(nu)?;
        if feature_dim == 0 {
            return Err(Error::argument("OcSvmHead: feature dimension must be positive"));
        }
        Ok(OcSvmHead {
            w: vec![0.0; feature_dim],
            rho: 0.0,
            nu,
        })
    }

    pub fn from_parts(w: Vec<f64>, rho: f64, nu: f64) -> Result<Self> {
        check_nu(nu)?;
        if w.is_empty() {
            return Err(Error::argument("OcSvmHead: empty weight vector"));
        }
        if !rho.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("OcSvmHead: non-finite parameters"));
        }
        Ok(OcSvmHead { w, rho, nu })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn feature_dim(&self) -> usize {
        self.w.len()
    }

    /// Mutable `(w, ρ)` pair as optimizer segments.
    pub fn param_segments_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.w, core::slice::from_mut(&mut self.rho)]
    }

    pub fn margin(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.w.len() {
            return Err(Error::shape("OcSvmHead::margin", self.w.len(), z.len()));
        }
        Ok(dot(&self.w, z) - self.rho)
    }

    pub fn decide(&self, z: &[f64]) -> Result<Decision> {
        self.margin(z).map(Decision::from_margin)
    }

    fn check_batch(&self, z: &Matrix) -> Result<()> {
        if z.rows() == 0 {
            return Err(Error::argument("OC-SVM objective needs a non-empty batch"));
        }
        if z.cols() != self.w.len() {
            return Err(Error::shape("OC-SVM batch width", self.w.len(), z.cols()));
        }
        Ok(())
    }

    /// Hinge-form objective over a batch.
    pub fn objective(&self, z: &Matrix) -> Result<f64> {
        self.check_batch(z)?;
        let scale = 1.0 / (self.nu * z.rows() as f64);
        let hinge: f64 = z
            .iter_rows()
            .map(|zi| f64::max(0.0, self.rho - dot(&self.w, zi)))
            .sum();
        Ok(0.5 * dot(&self.w, &self.w) - self.rho + scale * hinge)
    }

    /// Rows whose hinge term is strictly positive.
    fn active_mask(&self, z: &Matrix) -> Vec<bool> {
        z.iter_rows().map(|zi| self.rho - dot(&self.w, zi) > 0.0).collect()
    }

    /// Subgradient w.r.t. `w` and `ρ`; zero is taken at the kink.
    pub fn param_grads(&self, z: &Matrix) -> Result<HeadGrads> {
        self.check_batch(z)?;
        let scale = 1.0 / (self.nu * z.rows() as f64);
        let mut grad_w = self.w.clone();
        let mut active = 0usize;
        for (zi, is_active) in z.iter_rows().zip(self.active_mask(z)) {
            if is_active {
                active += 1;
                for (g, &v) in grad_w.iter_mut().zip(zi) {
                    *g -= scale * v;
                }
            }
        }
        Ok(HeadGrads {
            w: grad_w,
            rho: -1.0 + scale * active as f64,
        })
    }

    /// ∂objective/∂z for every row of the batch: `−w/(νn)` on active rows.
    pub fn feature_grads(&self, z: &Matrix) -> Result<Matrix> {
        self.check_batch(z)?;
        let scale = 1.0 / (self.nu * z.rows() as f64);
        let mut out = Matrix::zeros(z.rows(), z.cols());
        for (i, is_active) in self.active_mask(z).into_iter().enumerate() {
            if is_active {
                for (o, &w) in out.row_mut(i).iter_mut().zip(&self.w) {
                    *o = -scale * w;
                }
            }
        }
        Ok(out)
    }

    /// Gradient of `g(map(x))` with respect to the latent input `x`:
    /// `∂g/∂x_k = √(1/D) Σ_j ω_jk [−w_j sin(ω_jᵀx) + w_{j+D} cos(ω_jᵀx)]`.
    pub fn margin_input_grad(&self, rff: &RffMap, x: &[f64]) -> Result<Vec<f64>> {
        if self.w.len() != rff.output_dim() {
            return Err(Error::shape("margin_input_grad head/rff", rff.output_dim(), self.w.len()));
        }
        let proj = rff.projections(x)?;
        let dim = rff.num_features();
        let scale = libm::sqrt(1.0 / dim as f64);
        let mut grad = vec![0.0; x.len()];
        for (j, &p) in proj.iter().enumerate() {
            let (s, c) = libm::sincos(p);
            let coeff = scale * (-self.w[j] * s + self.w[dim + j] * c);
            for (g, &omega) in grad.iter_mut().zip(rff.omegas().row(j)) {
                *g += coeff * omega;
            }
        }
        Ok(grad)
    }

    /// Backpropagates ∂loss/∂z through the feature map to ∂loss/∂x for a
    /// batch of latent codes.
    pub(crate) fn backprop_through_rff(rff: &RffMap, latent: &Matrix, dz: &Matrix) -> Result<Matrix> {
        let dim = rff.num_features();
        let scale = libm::sqrt(1.0 / dim as f64);
        let proj = latent.matmul_t(rff.omegas())?;
        // ∂z_j/∂p_j = −scale·sin p_j, ∂z_{D+j}/∂p_j = scale·cos p_j
        let mut dp = Matrix::zeros(latent.rows(), dim);
        for i in 0..latent.rows() {
            let dzi = dz.row(i);
            let pi = proj.row(i);
            for (j, out) in dp.row_mut(i).iter_mut().enumerate() {
                let (s, c) = libm::sincos(pi[j]);
                *out = scale * (-s * dzi[j] + c * dzi[dim + j]);
            }
        }
        dp.matmul(rff.omegas())
    }
}
