//! Best-rate vertex controls and the continuous decentralized stabilizer.
//!
//! For Lie data `(a, β)` at `x` and a box `H`, write
//! `B = Σ |β_i| r_i↓` and `s = (|a| + a) / (2B)`. Then
//!
//! ```text
//! λ     = 1 − s
//! τ_i   = m ln(λ)/λ − ε |β_i| r_i↓
//! q_i   = |β_i| r_i↓ / B
//! ϱ_i   = 1 − (1 − s q_i) exp(τ_i q_i)
//! u_i   = ϱ_i ω̄_i
//! ```
//!
//! with `ω̄` the minimizer of `β·u` over the corners of `H`. The result is
//! continuous in `x` because `ϱ_i → 0` where `β_i` changes sign. Radially
//! normalizing `u` onto `U_φ` gives the admissible feedback `w`.
//!
//! Sign convention: `ω̄` and the polytope vertex map are *minimizers* of
//! `β·u`, so that `a + β·ω̄ = a − B` is the steepest admissible decrease.

use serde::Serialize;

use crate::clf::{self, AffineSystem, LieData, LyapunovCandidate};
use crate::error::{check_dim, Error, Result};
use crate::gauge::{self, ConvexGauge, Hyperbox};
use crate::simulator::Controller;
use crate::vecops::dot;

/// Largest `f64` strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilizerParams {
    pub epsilon: f64,
    /// Floor applied to `λ` so that `ln(λ)/λ` stays finite.
    pub lambda_floor: f64,
}

impl StabilizerParams {
    pub const DEFAULT_LAMBDA_FLOOR: f64 = 1e-12;

    pub fn new(epsilon: f64) -> Result<Self> {
        Self::with_lambda_floor(epsilon, Self::DEFAULT_LAMBDA_FLOOR)
    }

    pub fn with_lambda_floor(epsilon: f64, lambda_floor: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(
                "epsilon",
                format!("{epsilon} is not positive"),
            ));
        }
        if !(lambda_floor > 0.0 && lambda_floor < 1.0) {
            return Err(Error::invalid(
                "lambda floor",
                format!("{lambda_floor} is outside (0, 1)"),
            ));
        }
        Ok(Self {
            epsilon,
            lambda_floor,
        })
    }
}

/// Every intermediate of one feedback evaluation at a state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackEval {
    pub lie: LieData,
    pub omega_bar: Vec<f64>,
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
    pub lambda: f64,
    /// Box stabilizer `u^ε(x) ∈ H`.
    pub u: Vec<f64>,
    /// Admissible feedback `w(x) ∈ U_φ` (equal to `u` for the box alone).
    pub w: Vec<f64>,
    /// `Σ |β_i| r_i↓`.
    pub beta_r: f64,
    /// `φ(u)` for the target gauge.
    pub gauge_of_u: f64,
    /// Set when `λ ≤ 0` or a regulator needed clamping, i.e. the box CLF
    /// inequality fails at this state.
    pub clf_violation: bool,
}

/// Corner of `H` minimizing `β·u`: `-r_i⁻` for `β_i > 0`, `+r_i⁺` otherwise.
pub fn omega_bar(lie: &LieData, bounds: &Hyperbox) -> Vec<f64> {
    lie.beta
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if *b > 0.0 {
                -bounds.lower()[i]
            } else {
                bounds.upper()[i]
            }
        })
        .collect()
}

/// Index of the vertex minimizing `β·v`, lowest index on ties.
pub fn omega_polytope_index(lie: &LieData, vertices: &[Vec<f64>]) -> Result<usize> {
    if vertices.is_empty() {
        return Err(Error::invalid("vertex list", "empty"));
    }
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (k, v) in vertices.iter().enumerate() {
        check_dim(lie.beta.len(), v.len())?;
        let val = dot(&lie.beta, v);
        if val < best_val {
            best = k;
            best_val = val;
        }
    }
    Ok(best)
}

/// Vertex-valued optimal control for a polytopic control set.
pub fn omega_polytope(lie: &LieData, vertices: &[Vec<f64>]) -> Result<Vec<f64>> {
    omega_polytope_index(lie, vertices).map(|k| vertices[k].clone())
}

/// `1 − (|a|+a)/(2B)` before any clamping; `1` when `B = 0`.
pub fn lambda_raw(lie: &LieData, beta_r: f64) -> f64 {
    if beta_r == 0.0 {
        1.0
    } else {
        1.0 - (lie.a.abs() + lie.a) / (2.0 * beta_r)
    }
}

/// `λ`, clamped below at `params.lambda_floor`.
pub fn lambda_fn(lie: &LieData, beta_r: f64, params: &StabilizerParams) -> f64 {
    lambda_raw(lie, beta_r).max(params.lambda_floor)
}

pub fn tau_fn(
    lie: &LieData,
    beta_r: f64,
    bounds: &Hyperbox,
    i: usize,
    params: &StabilizerParams,
) -> f64 {
    if beta_r == 0.0 {
        return 0.0;
    }
    let m = lie.beta.len() as f64;
    let lambda = lambda_fn(lie, beta_r, params);
    let reach = lie.beta[i].abs() * bounds.descent_reach(i, lie.beta[i]);
    m * lambda.ln() / lambda - params.epsilon * reach
}

/// Regulator `ϱ_i` together with a flag raised when it had to be clamped.
fn rho_checked(
    lie: &LieData,
    beta_r: f64,
    bounds: &Hyperbox,
    i: usize,
    params: &StabilizerParams,
) -> (f64, bool) {
    let reach = lie.beta[i].abs() * bounds.descent_reach(i, lie.beta[i]);
    if reach == 0.0 {
        return (0.0, false);
    }
    let share = reach / beta_r;
    let s = (lie.a.abs() + lie.a) / (2.0 * beta_r);
    let inner = 1.0 - s * share;
    let tau = tau_fn(lie, beta_r, bounds, i, params);
    // exp underflows to 0 as λ → 0⁺, giving the analytic limit ϱ → 1
    let rho = 1.0 - inner * (tau * share).exp();
    if inner <= 0.0 || !(0.0..=1.0).contains(&rho) {
        (rho.clamp(0.0, BELOW_ONE), true)
    } else {
        (rho, false)
    }
}

pub fn rho_fn(
    lie: &LieData,
    beta_r: f64,
    bounds: &Hyperbox,
    i: usize,
    params: &StabilizerParams,
) -> f64 {
    rho_checked(lie, beta_r, bounds, i, params).0
}

/// Full stabilizer evaluation from Lie data. With `gauge = None` the
/// target set is the box itself and `w = u`.
pub fn feedback_from_lie(
    lie: LieData,
    bounds: &Hyperbox,
    gauge: Option<&ConvexGauge>,
    params: &StabilizerParams,
) -> Result<FeedbackEval> {
    let m = bounds.dim();
    check_dim(m, lie.beta.len())?;
    if let Some(g) = gauge {
        check_dim(m, g.dim())?;
    }
    let beta_r = lie.beta_r(bounds);
    let omega = omega_bar(&lie, bounds);
    let raw_lambda = lambda_raw(&lie, beta_r);
    let lambda = raw_lambda.max(params.lambda_floor);
    let mut violation = raw_lambda <= 0.0 || (beta_r == 0.0 && lie.a > 0.0);
    let mut rho = Vec::with_capacity(m);
    let mut tau = Vec::with_capacity(m);
    for i in 0..m {
        let (r, clamped) = rho_checked(&lie, beta_r, bounds, i, params);
        violation |= clamped;
        rho.push(r);
        tau.push(tau_fn(&lie, beta_r, bounds, i, params));
    }
    let u: Vec<f64> = rho.iter().zip(&omega).map(|(r, o)| r * o).collect();
    let (w, gauge_of_u) = match gauge {
        Some(g) => {
            let phi = g.eval_unchecked(&u);
            (gauge::normalize_with(&u, phi), phi)
        }
        None => {
            let phi = ConvexGauge::hyperbox(bounds.clone()).eval_unchecked(&u);
            (u.clone(), phi)
        }
    };
    Ok(FeedbackEval {
        lie,
        omega_bar: omega,
        rho,
        tau,
        lambda,
        u,
        w,
        beta_r,
        gauge_of_u,
        clf_violation: violation,
    })
}

/// Continuous box stabilizer `u^ε(x) ∈ H`.
pub fn feedback_box(
    sys: &AffineSystem,
    lyap: &LyapunovCandidate,
    bounds: &Hyperbox,
    params: &StabilizerParams,
    x: &[f64],
) -> Result<FeedbackEval> {
    check_dim(sys.input_dim(), bounds.dim())?;
    let lie = clf::lie_derivatives(sys, lyap, x)?;
    feedback_from_lie(lie, bounds, None, params)
}

/// Box stabilizer normalized onto `U_φ`: `w = u` if `φ(u) ≤ 1`, else `u/φ(u)`.
/// `U_φ ⊆ H` is the caller's responsibility (see [`gauge::check_contained`]).
pub fn feedback_gauge(
    sys: &AffineSystem,
    lyap: &LyapunovCandidate,
    bounds: &Hyperbox,
    gauge: &ConvexGauge,
    params: &StabilizerParams,
    x: &[f64],
) -> Result<FeedbackEval> {
    check_dim(sys.input_dim(), bounds.dim())?;
    let lie = clf::lie_derivatives(sys, lyap, x)?;
    feedback_from_lie(lie, bounds, Some(gauge), params)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonLimitReport {
    pub x: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// `‖u^ε(x) − ω̄(x)‖` per entry of `epsilons`; empty when the
    /// precondition fails. Underflows to zero for large `ε`.
    pub distances: Vec<f64>,
    /// `log10` of the same distances, computed from `1 − ϱ_i` in log space
    /// so that it stays finite after `distances` underflows.
    pub log10_distances: Vec<f64>,
    /// All `β_i(x) ≠ 0`.
    pub precondition_met: bool,
    pub final_tolerance: f64,
}

impl EpsilonLimitReport {
    pub fn passed(&self) -> bool {
        self.precondition_met
            && self.log10_distances.windows(2).all(|d| d[1] < d[0])
            && self
                .distances
                .last()
                .is_some_and(|d| *d <= self.final_tolerance)
    }
}

/// Tolerance on the last distance in [`epsilon_limit_check`].
pub const EPSILON_LIMIT_TOL: f64 = 1e-3;

/// `ln(1 − ϱ_i) = ln(1 − s q_i) + τ_i q_i`, or `None` when `ϱ_i` is
/// identically zero or had to be clamped.
pub fn regulator_gap_ln(
    lie: &LieData,
    beta_r: f64,
    bounds: &Hyperbox,
    i: usize,
    params: &StabilizerParams,
) -> Option<f64> {
    let reach = lie.beta[i].abs() * bounds.descent_reach(i, lie.beta[i]);
    if reach == 0.0 {
        return None;
    }
    let share = reach / beta_r;
    let inner = 1.0 - (lie.a.abs() + lie.a) / (2.0 * beta_r) * share;
    (inner > 0.0).then(|| inner.ln() + tau_fn(lie, beta_r, bounds, i, params) * share)
}

/// Tracks `u^ε(x) → ω̄(x)` along an increasing sequence of `ε`.
pub fn epsilon_limit_check(
    sys: &AffineSystem,
    lyap: &LyapunovCandidate,
    bounds: &Hyperbox,
    epsilons: &[f64],
    lambda_floor: f64,
    x: &[f64],
) -> Result<EpsilonLimitReport> {
    if epsilons.is_empty() || epsilons.windows(2).any(|e| e[1] <= e[0]) {
        return Err(Error::invalid(
            "epsilon list",
            "must be nonempty and strictly increasing",
        ));
    }
    let lie = clf::lie_derivatives(sys, lyap, x)?;
    let mut report = EpsilonLimitReport {
        x: x.to_vec(),
        epsilons: epsilons.to_vec(),
        distances: Vec::new(),
        log10_distances: Vec::new(),
        precondition_met: lie.beta.iter().all(|b| *b != 0.0),
        final_tolerance: EPSILON_LIMIT_TOL,
    };
    if !report.precondition_met {
        return Ok(report);
    }
    let beta_r = lie.beta_r(bounds);
    for &eps in epsilons {
        let params = StabilizerParams::with_lambda_floor(eps, lambda_floor)?;
        let eval = feedback_from_lie(lie.clone(), bounds, None, &params)?;
        let d = eval
            .u
            .iter()
            .zip(&eval.omega_bar)
            .map(|(u, o)| (u - o).powi(2))
            .sum::<f64>()
            .sqrt();
        // ‖u − ω̄‖² = Σ ((1 − ϱ_i)|ω̄_i|)², summed as a log-sum-exp
        let logs: Option<Vec<f64>> = (0..bounds.dim())
            .map(|i| {
                regulator_gap_ln(&lie, beta_r, bounds, i, &params)
                    .map(|g| 2.0 * (g + eval.omega_bar[i].abs().ln()))
            })
            .collect();
        let log10 = match logs {
            Some(logs) => {
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ln_sq = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
                0.5 * ln_sq / std::f64::consts::LN_10
            }
            None => d.log10(),
        };
        report.distances.push(d);
        report.log10_distances.push(log10);
    }
    Ok(report)
}

/// Which output of the stabilizer drives the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeedbackMode {
    /// `u^ε(x) ∈ H`.
    Box,
    /// `w(x) ∈ U_φ`.
    Gauge,
}

/// A configured stabilizer usable as a closed-loop controller.
#[derive(Debug, Clone)]
pub struct GaugeStabilizer {
    system: AffineSystem,
    lyapunov: LyapunovCandidate,
    bounds: Hyperbox,
    gauge: ConvexGauge,
    params: StabilizerParams,
    mode: FeedbackMode,
}

impl GaugeStabilizer {
    pub fn new(
        system: AffineSystem,
        lyapunov: LyapunovCandidate,
        bounds: Hyperbox,
        gauge: ConvexGauge,
        params: StabilizerParams,
    ) -> Result<Self> {
        check_dim(system.state_dim(), lyapunov.state_dim())?;
        check_dim(system.input_dim(), bounds.dim())?;
        check_dim(system.input_dim(), gauge.dim())?;
        Ok(Self {
            system,
            lyapunov,
            bounds,
            gauge,
            params,
            mode: FeedbackMode::Gauge,
        })
    }

    pub fn with_mode(mut self, mode: FeedbackMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn system(&self) -> &AffineSystem {
        &self.system
    }

    pub fn lyapunov(&self) -> &LyapunovCandidate {
        &self.lyapunov
    }

    pub fn bounds(&self) -> &Hyperbox {
        &self.bounds
    }

    pub fn gauge(&self) -> &ConvexGauge {
        &self.gauge
    }

    pub fn params(&self) -> &StabilizerParams {
        &self.params
    }

    /// `M = max_H φ`.
    pub fn box_max(&self) -> Result<f64> {
        gauge::max_over_box(&self.gauge, &self.bounds)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<FeedbackEval> {
        feedback_gauge(
            &self.system,
            &self.lyapunov,
            &self.bounds,
            &self.gauge,
            &self.params,
            x,
        )
    }
}

impl Controller for GaugeStabilizer {
    fn input_dim(&self) -> usize {
        self.bounds.dim()
    }

    fn control(&self, x: &[f64]) -> Result<Vec<f64>> {
        let eval = self.evaluate(x)?;
        Ok(match self.mode {
            FeedbackMode::Box => eval.u,
            FeedbackMode::Gauge => eval.w,
        })
    }
}
