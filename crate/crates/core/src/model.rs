//! The joint autoencoder + OC-SVM model.
//!
//! Raw inputs are min-max scaled per column, encoded to a latent code,
//! decoded back, and the latent code is mapped through random Fourier
//! features into the OC-SVM head. Training minimizes
//!
//! ```text
//! Q = α·L(x, x′) + ½‖w‖² − ρ + (1/νn) Σ max(0, ρ − wᵀz(encode(x)))
//! ```
//!
//! over all encoder, decoder and head parameters with a single Adam
//! learning rate. [`TrainMode::TwoStage`] instead trains the autoencoder on
//! `α·L` first, freezes it, and then fits the head on the latent codes.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::nn::{
    reconstruction_loss, reconstruction_loss_grad, Activation, AdamConfig, AdamState, DenseNetwork,
    NetworkGrads,
};
use crate::ocsvm::{Decision, HeadGrads, OcSvmHead};
use crate::rff::RffMap;
use crate::rng::{stream, stream_rng, substream};
use crate::{Error, Matrix, Result};

/// Per-column min-max scaling to `[0, 1]`.
///
/// Constant columns are shifted to zero and left unscaled.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MinMaxScaler {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: &Matrix) -> Result<Self> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(Error::argument("MinMaxScaler::fit: empty data"));
        }
        let mut mins = data.row(0).to_vec();
        let mut maxs = mins.clone();
        for row in data.iter_rows().skip(1) {
            for ((lo, hi), &v) in mins.iter_mut().zip(maxs.iter_mut()).zip(row) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        Self::from_parts(mins, maxs)
    }

    /// Maps every column unchanged.
    pub fn identity(dim: usize) -> Self {
        MinMaxScaler {
            mins: alloc::vec![0.0; dim],
            maxs: alloc::vec![1.0; dim],
        }
    }

    pub fn from_parts(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Self> {
        if mins.len() != maxs.len() || mins.is_empty() {
            return Err(Error::shape("MinMaxScaler bounds", mins.len(), maxs.len()));
        }
        if mins.iter().zip(&maxs).any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return Err(Error::argument("MinMaxScaler: bounds must be finite with min <= max"));
        }
        Ok(MinMaxScaler { mins, maxs })
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }

    /// Diagonal of the transform's jacobian, `1/(max − min)`.
    pub fn jacobian_diag(&self) -> Vec<f64> {
        self.mins
            .iter()
            .zip(&self.maxs)
            .map(|(lo, hi)| if hi > lo { 1.0 / (hi - lo) } else { 1.0 })
            .collect()
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for ((o, &v), (lo, s)) in out
            .iter_mut()
            .zip(row)
            .zip(self.mins.iter().zip(self.jacobian_diag()))
        {
            *o = (v - lo) * s;
        }
    }

    pub fn transform(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.dim() {
            return Err(Error::shape("MinMaxScaler::transform", self.dim(), data.cols()));
        }
        let scale = self.jacobian_diag();
        let mut out = data.clone();
        for r in 0..out.rows() {
            for ((v, lo), s) in out.row_mut(r).iter_mut().zip(&self.mins).zip(&scale) {
                *v = (*v - lo) * s;
            }
        }
        Ok(out)
    }
}

/// Architecture and regularization knobs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    /// Encoder layer widths after the input, ending with the bottleneck.
    pub encoder_dims: Vec<usize>,
    pub nu: f64,
    pub alpha: f64,
    pub sigma: f64,
    /// Number of frequency vectors `D`; the head sees `2D` features.
    pub num_features: usize,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder_dims: alloc::vec![128, 32],
            nu: 0.4,
            alpha: 1000.0,
            sigma: 3.0,
            num_features: 500,
            activation: Activation::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TrainMode {
    Joint,
    TwoStage,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.01,
            seed: 1,
            mode: TrainMode::Joint,
        }
    }
}

/// Which objective an epoch minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Phase {
    Joint,
    Autoencoder,
    Head,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub phase: Phase,
    pub epoch: usize,
    /// Mean minibatch objective over the epoch, evaluated before each step.
    pub objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn objectives(&self, phase: Phase) -> Vec<f64> {
        self.epochs.iter().filter(|e| e.phase == phase).map(|e| e.objective).collect()
    }
}

/// Gradients of the joint objective for every parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGrads {
    pub encoder: NetworkGrads,
    pub decoder: NetworkGrads,
    pub head: HeadGrads,
}

/// Objective value split into its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts {
    pub reconstruction: f64,
    pub svm: f64,
    pub alpha: f64,
}

impl ObjectiveParts {
    pub fn total(&self) -> f64 {
        self.alpha * self.reconstruction + self.svm
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ae1SvmModel {
    scaler: MinMaxScaler,
    encoder: DenseNetwork,
    decoder: DenseNetwork,
    rff: RffMap,
    head: OcSvmHead,
    alpha: f64,
}

#[derive(Clone, Copy)]
enum StepKind {
    Joint { update_head: bool },
    Autoencoder,
    Head,
}

impl Ae1SvmModel {
    /// Freshly initialized model whose scaler is fitted on `train`.
    pub fn for_data(train: &Matrix, config: &ModelConfig, seed: u64) -> Result<Self> {
        Self::new(MinMaxScaler::fit(train)?, config, seed)
    }

    pub fn new(scaler: MinMaxScaler, config: &ModelConfig, seed: u64) -> Result<Self> {
        if config.encoder_dims.is_empty() || config.encoder_dims.contains(&0) {
            return Err(Error::argument("encoder_dims must be a non-empty list of positive widths"));
        }
        if !(config.alpha.is_finite() && config.alpha >= 0.0) {
            return Err(Error::argument("alpha must be finite and non-negative"));
        }
        let mut enc_dims = alloc::vec![scaler.dim()];
        enc_dims.extend_from_slice(&config.encoder_dims);
        let dec_dims: Vec<usize> = enc_dims.iter().rev().copied().collect();
        let latent = enc_dims[enc_dims.len() - 1];

        let encoder = DenseNetwork::new(&enc_dims, config.activation, &mut stream_rng(seed, stream::ENCODER))?;
        let decoder = DenseNetwork::new(&dec_dims, config.activation, &mut stream_rng(seed, stream::DECODER))?;
        let rff = RffMap::sample(latent, config.num_features, config.sigma, seed)?;
        let head = OcSvmHead::new(rff.output_dim(), config.nu)?;
        Self::from_parts(scaler, encoder, decoder, rff, head, config.alpha)
    }

    pub fn from_parts(
        scaler: MinMaxScaler,
        encoder: DenseNetwork,
        decoder: DenseNetwork,
        rff: RffMap,
        head: OcSvmHead,
        alpha: f64,
    ) -> Result<Self> {
        let model = Ae1SvmModel {
            scaler,
            encoder,
            decoder,
            rff,
            head,
            alpha,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks that all components fit together.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::Contract(msg));
        if self.scaler.dim() != self.encoder.input_dim() {
            return fail(format!(
                "scaler width {} != encoder input {}",
                self.scaler.dim(),
                self.encoder.input_dim()
            ));
        }
        if self.decoder.output_dim() != self.encoder.input_dim() {
            return fail(format!(
                "decoder output {} != encoder input {}",
                self.decoder.output_dim(),
                self.encoder.input_dim()
            ));
        }
        if self.decoder.input_dim() != self.encoder.output_dim() {
            return fail(format!(
                "decoder input {} != bottleneck {}",
                self.decoder.input_dim(),
                self.encoder.output_dim()
            ));
        }
        if self.rff.input_dim() != self.encoder.output_dim() {
            return fail(format!(
                "rff input {} != bottleneck {}",
                self.rff.input_dim(),
                self.encoder.output_dim()
            ));
        }
        if self.rff.output_dim() != self.head.feature_dim() {
            return fail(format!(
                "rff output {} != head width {}",
                self.rff.output_dim(),
                self.head.feature_dim()
            ));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return fail(format!("alpha {} is not a finite non-negative number", self.alpha));
        }
        if !(self.encoder.is_finite() && self.decoder.is_finite()) {
            return fail("non-finite network parameters".into());
        }
        Ok(())
    }

    pub fn scaler(&self) -> &MinMaxScaler {
        &self.scaler
    }

    pub fn encoder(&self) -> &DenseNetwork {
        &self.encoder
    }

    pub fn decoder(&self) -> &DenseNetwork {
        &self.decoder
    }

    pub fn rff(&self) -> &RffMap {
        &self.rff
    }

    pub fn head(&self) -> &OcSvmHead {
        &self.head
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encoder_mut(&mut self) -> &mut DenseNetwork {
        &mut self.encoder
    }

    pub fn decoder_mut(&mut self) -> &mut DenseNetwork {
        &mut self.decoder
    }

    pub fn head_mut(&mut self) -> &mut OcSvmHead {
        &mut self.head
    }

    fn check_width(&self, batch: &Matrix, context: &'static str) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(context, self.input_dim(), batch.cols()));
        }
        Ok(())
    }

    /// Latent codes for raw (unscaled) samples.
    pub fn encode(&self, raw: &Matrix) -> Result<Matrix> {
        self.check_width(raw, "Ae1SvmModel::encode")?;
        self.encoder.predict(&self.scaler.transform(raw)?)
    }

    /// Reconstruction in scaled input space.
    pub fn reconstruct(&self, raw: &Matrix) -> Result<Matrix> {
        self.decoder.predict(&self.encode(raw)?)
    }

    /// Objective parts on a raw batch; the reconstruction term is measured in
    /// scaled input space.
    pub fn objective_parts(&self, batch_raw: &Matrix) -> Result<ObjectiveParts> {
        self.check_width(batch_raw, "Ae1SvmModel::joint_objective")?;
        if batch_raw.rows() == 0 {
            return Err(Error::argument("joint_objective: empty batch"));
        }
        self.objective_parts_scaled(&self.scaler.transform(batch_raw)?)
    }

    fn objective_parts_scaled(&self, x: &Matrix) -> Result<ObjectiveParts> {
        let latent = self.encoder.predict(x)?;
        let rec = self.decoder.predict(&latent)?;
        let z = self.rff.map_batch(&latent)?;
        Ok(ObjectiveParts {
            reconstruction: reconstruction_loss(x, &rec)?,
            svm: self.head.objective(&z)?,
            alpha: self.alpha,
        })
    }

    pub fn joint_objective(&self, batch_raw: &Matrix) -> Result<f64> {
        self.objective_parts(batch_raw).map(|p| p.total())
    }

    /// Gradients of the joint objective on a raw batch.
    pub fn joint_grads(&self, batch_raw: &Matrix) -> Result<JointGrads> {
        self.check_width(batch_raw, "Ae1SvmModel::joint_grads")?;
        let x = self.scaler.transform(batch_raw)?;
        self.grads_scaled(&x, true).map(|(g, _)| g)
    }

    /// Returns gradients and the objective value at the current parameters.
    fn grads_scaled(&self, x: &Matrix, with_svm: bool) -> Result<(JointGrads, ObjectiveParts)> {
        let (latent, enc_cache) = self.encoder.forward(x)?;
        let (rec, dec_cache) = self.decoder.forward(&latent)?;
        let mut d_rec = reconstruction_loss_grad(x, &rec)?;
        d_rec.as_mut_slice().iter_mut().for_each(|v| *v *= self.alpha);
        let (decoder, mut d_latent) = self.decoder.backward(&dec_cache, &d_rec)?;

        let z = self.rff.map_batch(&latent)?;
        let head = self.head.param_grads(&z)?;
        let svm = self.head.objective(&z)?;
        if with_svm {
            let dz = self.head.feature_grads(&z)?;
            let d_latent_svm = OcSvmHead::backprop_through_rff(&self.rff, &latent, &dz)?;
            for (a, b) in d_latent.as_mut_slice().iter_mut().zip(d_latent_svm.as_slice()) {
                *a += b;
            }
        }
        let (encoder, _) = self.encoder.backward(&enc_cache, &d_latent)?;
        let parts = ObjectiveParts {
            reconstruction: reconstruction_loss(x, &rec)?,
            svm,
            alpha: self.alpha,
        };
        Ok((JointGrads { encoder, decoder, head }, parts))
    }

    /// Margins `g(x)` for raw samples; higher means more normal.
    pub fn score(&self, samples: &Matrix) -> Result<Vec<f64>> {
        let latent = self.encode(samples)?;
        let z = self.rff.map_batch(&latent)?;
        z.iter_rows().map(|zi| self.head.margin(zi)).collect()
    }

    pub fn score_one(&self, sample: &[f64]) -> Result<f64> {
        if sample.len() != self.input_dim() {
            return Err(Error::shape("Ae1SvmModel::score_one", self.input_dim(), sample.len()));
        }
        let mut scaled = alloc::vec![0.0; sample.len()];
        self.scaler.transform_row(sample, &mut scaled);
        let latent = self.encoder.predict_one(&scaled)?;
        self.head.margin(&self.rff.map(&latent)?)
    }

    pub fn decide(&self, samples: &Matrix) -> Result<Vec<Decision>> {
        Ok(self.score(samples)?.into_iter().map(Decision::from_margin).collect())
    }

    /// Trains on all rows of `data` (raw features).
    pub fn fit(&mut self, data: &Matrix, cfg: &TrainConfig) -> Result<TrainReport> {
        validate_train_config(cfg, data.rows())?;
        self.check_width(data, "Ae1SvmModel::fit")?;
        let x = self.scaler.transform(data)?;
        let adam = AdamConfig::new(cfg.learning_rate);
        let mut report = TrainReport::default();
        match cfg.mode {
            TrainMode::Joint => {
                let mut opt = Optimizers::new(self, adam)?;
                let mut rng = stream_rng(cfg.seed, stream::SHUFFLE);
                self.run_phase(&x, cfg, StepKind::Joint { update_head: true }, &mut opt, &mut rng, &mut report)?;
            }
            TrainMode::TwoStage => {
                let mut opt = Optimizers::new(self, adam)?;
                let mut rng = stream_rng(cfg.seed, stream::SHUFFLE);
                self.run_phase(&x, cfg, StepKind::Autoencoder, &mut opt, &mut rng, &mut report)?;
                let mut rng = stream_rng(cfg.seed, substream(stream::SHUFFLE, 1));
                self.run_phase(&x, cfg, StepKind::Head, &mut opt, &mut rng, &mut report)?;
            }
        }
        Ok(report)
    }

    fn run_phase(
        &mut self,
        x: &Matrix,
        cfg: &TrainConfig,
        kind: StepKind,
        opt: &mut Optimizers,
        rng: &mut rand_chacha::ChaCha8Rng,
        report: &mut TrainReport,
    ) -> Result<()> {
        let phase = match kind {
            StepKind::Joint { .. } => Phase::Joint,
            StepKind::Autoencoder => Phase::Autoencoder,
            StepKind::Head => Phase::Head,
        };
        let mut order: Vec<usize> = (0..x.rows()).collect();
        // latent codes are fixed while only the head trains
        let frozen_latent = match kind {
            StepKind::Head => Some(self.encoder.predict(x)?),
            _ => None,
        };
        for epoch in 0..cfg.epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            let mut batches = 0usize;
            for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let fail = |reason: alloc::string::String| Error::Training {
                    epoch,
                    batch: batch_idx,
                    reason,
                };
                let value = match kind {
                    StepKind::Joint { update_head } => {
                        let batch = x.select_rows(chunk);
                        let (g, parts) = self.grads_scaled(&batch, true)?;
                        let value = parts.total();
                        if !value.is_finite() {
                            return Err(fail(format!("objective is {value}")));
                        }
                        self.apply(&g, opt, true, update_head).map_err(|e| fail(format!("{e}")))?;
                        value
                    }
                    StepKind::Autoencoder => {
                        let batch = x.select_rows(chunk);
                        let (g, parts) = self.grads_scaled(&batch, false)?;
                        let value = parts.alpha * parts.reconstruction;
                        if !value.is_finite() {
                            return Err(fail(format!("objective is {value}")));
                        }
                        self.apply(&g, opt, true, false).map_err(|e| fail(format!("{e}")))?;
                        value
                    }
                    StepKind::Head => {
                        let latent = frozen_latent.as_ref().expect("latent codes").select_rows(chunk);
                        let z = self.rff.map_batch(&latent)?;
                        let value = self.head.objective(&z)?;
                        if !value.is_finite() {
                            return Err(fail(format!("objective is {value}")));
                        }
                        let g = self.head.param_grads(&z)?;
                        opt.head
                            .step(&mut self.head.param_segments_mut(), &[&g.w, core::slice::from_ref(&g.rho)])
                            .map_err(|e| fail(format!("{e}")))?;
                        value
                    }
                };
                total += value;
                batches += 1;
            }
            report.epochs.push(EpochRecord {
                phase,
                epoch,
                objective: total / batches as f64,
            });
        }
        Ok(())
    }

    fn apply(&mut self, g: &JointGrads, opt: &mut Optimizers, update_ae: bool, update_head: bool) -> Result<()> {
        if update_ae {
            self.encoder.apply_adam(&g.encoder, &mut opt.encoder)?;
            self.decoder.apply_adam(&g.decoder, &mut opt.decoder)?;
        }
        if update_head {
            opt.head.step(
                &mut self.head.param_segments_mut(),
                &[&g.head.w, core::slice::from_ref(&g.head.rho)],
            )?;
        }
        Ok(())
    }
}

struct Optimizers {
    encoder: AdamState,
    decoder: AdamState,
    head: AdamState,
}

impl Optimizers {
    fn new(model: &Ae1SvmModel, cfg: AdamConfig) -> Result<Self> {
        Ok(Optimizers {
            encoder: AdamState::new(model.encoder.num_params(), cfg)?,
            decoder: AdamState::new(model.decoder.num_params(), cfg)?,
            head: AdamState::new(model.head.feature_dim() + 1, cfg)?,
        })
    }
}

/// Rejects configurations that cannot be trained on `n_rows` samples.
pub fn validate_train_config(cfg: &TrainConfig, n_rows: usize) -> Result<()> {
    if n_rows == 0 {
        return Err(Error::argument("training data is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::argument("batch_size must be positive"));
    }
    if cfg.batch_size > n_rows {
        return Err(Error::argument(format!(
            "batch_size {} exceeds the {} training rows",
            cfg.batch_size, n_rows
        )));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(Error::argument("learning_rate must be positive"));
    }
    Ok(())
}
