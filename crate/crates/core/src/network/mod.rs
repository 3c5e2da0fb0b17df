//! Small residual image classifier with exact gradients and activation
//! capture.
//!
//! The architecture is declared as data ([`NetSpec`]), checked once, and
//! interpreted by hand-written 64-bit forward and backward kernels. Named
//! capture points expose intermediate activations as trial-by-unit
//! matrices, the penultimate pooled layer being the one every analysis
//! reads. Training, initialization, splitting, and augmentation all derive
//! from a single run seed.

mod layers;
mod net;
mod params;
mod spec;
mod train;

pub use net::{backprop, forward, ForwardOutput};
pub use params::{LayerParams, Params};
pub use spec::{CapturePoint, LayerSpec, NetSpec, Shape};
pub use train::{
    capture_activations, classify, evaluate, train, ActivationCapture, TrainConfig, TrainHistory,
};
