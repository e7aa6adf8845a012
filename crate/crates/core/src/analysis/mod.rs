//! Gram matrices, orthonormal-basis verdicts and frame-bound estimates for
//! `E(Λ, φ)` in `L²(μ)`.

mod battery;
mod frame;
mod gram;
mod onb;

pub use battery::{standard_battery, TestFunction};
pub use frame::{frame_bounds, FrameBoundsReport, TestBasis};
pub use gram::{
    gram, unimodular_conjugation_check, ConjugationReport, GramMethod, GramOptions, GramReport, GramSummary,
};
pub(crate) use onb::coefficients_and_norm;
pub use onb::{verify_onb, OnbReport, ParsevalEntry, Verdict};
