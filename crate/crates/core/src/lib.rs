//! Generalized exponential systems `E(Λ, φ) = {e^{2πiλ·φ(x)} : λ ∈ Λ}` over
//! finite Borel measures.
//!
//! The crate builds measures, phase maps and frequency sets, and checks
//! numerically whether a system is orthogonal, complete, a frame, or whether
//! `φ([0,1)^d)` tiles by a lattice. Everything is generic over the scalar
//! type (`f32` or `f64`); the aliases at the crate root fix `f64`.

// `!(a <= b)` is used on purpose so that NaN falls on the failing side
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod measures;
pub mod phases;
pub mod quadrature;
pub mod real;
pub mod reconstruct;
pub mod repdisc;
pub mod rng;
pub mod spectra;
pub mod tiling;

pub use error::{Error, Result};
pub use quadrature::QuadratureSpec;
pub use real::Real;

pub type Mat = linalg::Mat<f64>;
pub type Measure = measures::Measure<f64>;
pub type PhaseMap = phases::PhaseMap<f64>;
pub type ScalarFn = phases::ScalarFn<f64>;
pub type SpectrumSet = spectra::SpectrumSet<f64>;
pub type GramReport = analysis::GramReport<f64>;
pub type FrameBoundsReport = analysis::FrameBoundsReport<f64>;
pub type TestFunction = analysis::TestFunction<f64>;
pub type GroupData = repdisc::GroupData<f64>;
pub type WindowSystem = repdisc::WindowSystem<f64>;
