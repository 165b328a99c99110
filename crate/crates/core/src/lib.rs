//! Deep autoencoding one-class SVM.
//!
//! A dense autoencoder whose bottleneck feeds a random-Fourier-feature
//! approximation of the RBF kernel, on top of which a primal one-class SVM
//! with hinge loss is trained. The reconstruction loss and the SVM objective
//! are minimized jointly with Adam. Because every stage is differentiable,
//! the SVM margin can be differentiated end to end with respect to the raw
//! input features to explain individual decisions.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, CSV ingestion
//! and the command-line tool live in the `ae1svm` crate.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`nn`] | dense layers, activations, Xavier init, backprop, Adam |
//! | [`rff`] | random Fourier feature map and the exact RBF kernel |
//! | [`ocsvm`] | hinge-form OC-SVM head and its gradients |
//! | [`model`] | the joint model, training loop and scoring |
//! | [`attribution`] | end-to-end margin gradients and gradient maps |
//! | [`data`] | synthetic generators and stratified splitting |
//! | [`eval`] | AUROC, AUPRC, curves and histograms |
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attribution;
pub mod data;
mod error;
pub mod eval;
mod matrix;
pub mod model;
pub mod nn;
pub mod ocsvm;
pub mod rff;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::Matrix;
