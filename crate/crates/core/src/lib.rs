//! Two-point local-time penalization for recurrent symmetric Lévy processes.
//!
//! Layers, bottom up: [`models`] (characteristic exponents),
//! [`resolvent`] (`r_q`, `h_q`, `h`), [`calculus`] (hitting and local-time
//! laws built from `h`), [`penalization`] (the martingale density `φ` and
//! exact clock expectations), [`montecarlo`] (path simulation) and
//! [`bm_oracle`] (Brownian closed forms).

pub mod bm_oracle;
pub mod calculus;
pub mod error;
pub mod models;
pub mod montecarlo;
pub mod penalization;
pub mod quadrature;
pub mod resolvent;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use penalization::{ClockSpec, PenalizationParams, PhiEvaluator, TwoPointExpectation, WeightState};
pub use models::{AdmissibilityReport, ModelKind, ModelSpec, SecondMoment};
pub use resolvent::{
    ExtrapolationConfig, HFunction, HTable, HValue, QuadratureConfig, ZeroResolvent,
};
