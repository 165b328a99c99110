//! Gradient of the OC-SVM margin with respect to raw input features.
//!
//! The per-layer jacobian of `u = act(xW + b)` has entries
//! `∂u_n/∂x_m = w_mn · act′(u_n)` with `act′` written through the output
//! (`u(1−u)` for sigmoid, `1−u²` for tanh). These are chained across the
//! encoder, multiplied by the margin gradient in latent space and by the
//! min-max scaling jacobian, giving the gradient in raw input units.
//!
//! For an anomalous sample a large positive gradient on a feature means
//! that feature sits below the normal range; a large negative gradient
//! means it exceeds it.

use alloc::vec::Vec;

use crate::model::Ae1SvmModel;
use crate::nn::DenseLayer;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub sample_index: usize,
    pub gradient: Vec<f64>,
    pub positive_part: Vec<f64>,
    pub negative_part: Vec<f64>,
}

impl AttributionResult {
    pub fn new(sample_index: usize, gradient: Vec<f64>) -> Self {
        let positive_part = gradient.iter().map(|g| g.max(0.0)).collect();
        let negative_part = gradient.iter().map(|g| (-g).max(0.0)).collect();
        AttributionResult {
            sample_index,
            gradient,
            positive_part,
            negative_part,
        }
    }
}

/// Jacobian `∂u/∂x` of a single layer at `input`, shaped `fan_out × fan_in`.
pub fn layer_grad(layer: &DenseLayer, input: &[f64]) -> Result<Matrix> {
    let u = layer.forward_one(input)?;
    let w = layer.weights();
    let act = layer.activation();
    Ok(Matrix::from_fn(layer.fan_out(), layer.fan_in(), |n, m| {
        w[(m, n)] * act.derivative_from_output(u[n])
    }))
}

/// Jacobian of the encoder output with respect to its (scaled) input,
/// `latent × input`, as the product of per-layer jacobians.
pub fn encoder_jacobian(model: &Ae1SvmModel, scaled: &[f64]) -> Result<Matrix> {
    let mut h = scaled.to_vec();
    let mut jac: Option<Matrix> = None;
    for layer in model.encoder().layers() {
        let j = layer_grad(layer, &h)?;
        jac = Some(match jac {
            None => j,
            Some(prev) => j.matmul(&prev)?,
        });
        h = layer.forward_one(&h)?;
    }
    jac.ok_or_else(|| Error::Contract("encoder has no layers".into()))
}

/// End-to-end gradient `∂g/∂x_raw` for one raw sample.
pub fn end_to_end_grad(model: &Ae1SvmModel, raw_sample: &[f64], sample_index: usize) -> Result<AttributionResult> {
    model.validate()?;
    if raw_sample.len() != model.input_dim() {
        return Err(Error::shape("end_to_end_grad", model.input_dim(), raw_sample.len()));
    }
    let mut scaled = alloc::vec![0.0; raw_sample.len()];
    model.scaler().transform_row(raw_sample, &mut scaled);
    let latent = model.encoder().predict_one(&scaled)?;
    let dg_dlatent = model.head().margin_input_grad(model.rff(), &latent)?;

    // Reverse-mode walk: a row vector times each layer jacobian in turn.
    let mut outputs = Vec::with_capacity(model.encoder().layers().len());
    let mut h = scaled;
    for layer in model.encoder().layers() {
        let u = layer.forward_one(&h)?;
        outputs.push((h, u.clone()));
        h = u;
    }
    let mut upstream = dg_dlatent;
    for (layer, (_, u)) in model.encoder().layers().iter().zip(&outputs).rev() {
        let act = layer.activation();
        let delta: Vec<f64> = upstream
            .iter()
            .zip(u)
            .map(|(g, &un)| g * act.derivative_from_output(un))
            .collect();
        let w = layer.weights();
        upstream = (0..layer.fan_in())
            .map(|m| delta.iter().zip(w.row(m)).map(|(d, wmn)| d * wmn).sum())
            .collect();
    }
    let gradient = upstream
        .iter()
        .zip(model.scaler().jacobian_diag())
        .map(|(g, s)| g * s)
        .collect();
    Ok(AttributionResult::new(sample_index, gradient))
}

/// The same gradient computed by explicitly multiplying jacobian matrices.
pub fn end_to_end_grad_by_jacobians(model: &Ae1SvmModel, raw_sample: &[f64]) -> Result<Vec<f64>> {
    if raw_sample.len() != model.input_dim() {
        return Err(Error::shape("end_to_end_grad_by_jacobians", model.input_dim(), raw_sample.len()));
    }
    let mut scaled = alloc::vec![0.0; raw_sample.len()];
    model.scaler().transform_row(raw_sample, &mut scaled);
    let jac = encoder_jacobian(model, &scaled)?;
    let latent = model.encoder().predict_one(&scaled)?;
    let g = Matrix::from_vec(1, latent.len(), model.head().margin_input_grad(model.rff(), &latent)?)?;
    let row = g.matmul(&jac)?;
    Ok(row
        .as_slice()
        .iter()
        .zip(model.scaler().jacobian_diag())
        .map(|(v, s)| v * s)
        .collect())
}

/// Row-major 2-D views of an attribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMaps {
    pub positive: Matrix,
    pub negative: Matrix,
    /// Elementwise `|gradient|`.
    pub full: Matrix,
}

pub fn gradient_map(result: &AttributionResult, height: usize, width: usize) -> Result<GradientMaps> {
    let n = result.gradient.len();
    if height == 0 || width == 0 || height * width != n {
        return Err(Error::argument(alloc::format!(
            "gradient map {height}x{width} does not hold {n} values"
        )));
    }
    Ok(GradientMaps {
        positive: Matrix::from_vec(height, width, result.positive_part.clone())?,
        negative: Matrix::from_vec(height, width, result.negative_part.clone())?,
        full: Matrix::from_vec(height, width, result.gradient.iter().map(|g| g.abs()).collect())?,
    })
}
