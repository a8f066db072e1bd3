//! Shared fixtures for the criterion benches.

use polystab::builtin;
use polystab::clf::{self, ScaledSystem};
use polystab::gauge::{triangle_box, triangle_gauge};
use polystab::{GaugeStabilizer, LyapunovCandidate, StabilizerParams};

/// Triangle example closed loop with `ε = 1`.
pub fn triangle_loop() -> (ScaledSystem, LyapunovCandidate, GaugeStabilizer) {
    let (sys, lyap) = builtin::triangle_example_vdot();
    let stab = GaugeStabilizer::new(
        sys.clone(),
        lyap.clone(),
        triangle_box(),
        triangle_gauge(),
        StabilizerParams::new(1.0).expect("valid epsilon"),
    )
    .expect("matching dimensions");
    let plant = clf::scale_system(&sys, stab.box_max().expect("small box")).expect("M ≥ 1");
    (plant, lyap, stab)
}
