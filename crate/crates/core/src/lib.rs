//! Continuous stabilizing feedback for input-affine systems
//! `ẋ = f(x) + G(x)u` whose control values are confined to a compact convex
//! set `U = {u : φ(u) ≤ 1}` described by a gauge `φ`.
//!
//! The pipeline is:
//!
//! 1. pick a hyperbox `H ⊇ U` ([`Hyperbox`]) and the gauge ([`ConvexGauge`]),
//! 2. evaluate the decentralized continuous box stabilizer `u^ε(x) ∈ H`
//!    ([`stabilizer::feedback_box`]),
//! 3. radially normalize it onto `U` ([`stabilizer::feedback_gauge`]), which
//!    stabilizes the drift-scaled plant `ẋ = f(x)/M + G(x)w` with
//!    `M = max_H φ` ([`ScaledSystem`]).
//!
//! [`clf`] holds the plant, the Lyapunov candidate and the numerical
//! verifiers, [`simulator`] integrates closed loops with fixed-step RK4, and
//! [`builtin`] registers the ready-made example systems.

// Negated comparisons are used so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builtin;
pub mod clf;
mod error;
pub mod gauge;
pub mod simulator;
pub mod stabilizer;
mod vecops;

pub use clf::{AffineSystem, LieData, LyapunovCandidate, ScaledSystem};
pub use error::{Error, Result};
pub use gauge::{ConvexGauge, Hyperbox};
pub use simulator::{Controller, SimConfig, Trajectory};
pub use stabilizer::{FeedbackEval, GaugeStabilizer, StabilizerParams};
