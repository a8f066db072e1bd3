//! Fixed-step RK4 integration of `ẋ = f(x)/M + G(x)·k(x)` for a feedback `k`.

use rayon::prelude::*;
use serde::Serialize;

use crate::clf::{LyapunovCandidate, ScaledSystem};
use crate::error::{check_dim, Error, Result};
use crate::vecops::{all_finite, dot, norm};

/// State feedback evaluated at every RK stage.
pub trait Controller: Sync {
    fn input_dim(&self) -> usize;
    fn control(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Open loop, `k(x) = 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroControl {
    pub inputs: usize,
}

impl Controller for ZeroControl {
    fn input_dim(&self) -> usize {
        self.inputs
    }

    fn control(&self, _x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.inputs])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Stop once `‖x‖` falls below this.
    pub converge_tol: f64,
    /// Keep every `record_stride`-th step (the final state is always kept).
    pub record_stride: usize,
    /// States with `‖x‖` above this count as diverged.
    pub divergence_bound: f64,
}

fn default_divergence_bound() -> f64 {
    1e6
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_max: 50.0,
            converge_tol: 1e-3,
            record_stride: 1,
            divergence_bound: default_divergence_bound(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.dt) || !positive(self.t_max) || self.dt > self.t_max {
            return Err(Error::invalid(
                "sim config",
                format!(
                    "need 0 < dt ≤ t_max, got dt = {}, t_max = {}",
                    self.dt, self.t_max
                ),
            ));
        }
        if !positive(self.converge_tol) || !positive(self.divergence_bound) {
            return Err(Error::invalid(
                "sim config",
                "converge_tol and divergence_bound must be positive",
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid(
                "sim config",
                "record_stride must be at least 1",
            ));
        }
        Ok(())
    }

    /// Largest one-step increase of `V` not counted as a violation:
    /// `10·dt⁴·(1 + |∇V·ẋ|)`, well above the RK4 local error.
    fn violation_threshold(&self, rate: f64) -> f64 {
        10.0 * self.dt.powi(4) * (1.0 + rate.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub lyapunov: Vec<f64>,
    pub converged: bool,
    pub diverged: bool,
    /// Steps where `V` rose by more than the discretization allowance.
    pub violation_count: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

struct Loop<'a, C: ?Sized> {
    plant: &'a ScaledSystem,
    controller: &'a C,
}

impl<C: Controller + ?Sized> Loop<'_, C> {
    fn rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.controller.control(x)?;
        self.plant.velocity(x, &u)
    }

    fn rk4(&self, x: &[f64], dt: f64) -> Result<Vec<f64>> {
        let shift = |k: &[f64], h: f64| -> Vec<f64> {
            x.iter().zip(k).map(|(xi, ki)| xi + h * ki).collect()
        };
        let k1 = self.rhs(x)?;
        let k2 = self.rhs(&shift(&k1, 0.5 * dt))?;
        let k3 = self.rhs(&shift(&k2, 0.5 * dt))?;
        let k4 = self.rhs(&shift(&k3, dt))?;
        Ok((0..x.len())
            .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect())
    }
}

/// Integrates one closed-loop orbit from `x0`.
///
/// Stops at `t_max`, on convergence (`‖x‖ < converge_tol`), or on blow-up
/// (non-finite state or `‖x‖ > divergence_bound`), in which case the
/// trajectory is truncated and flagged as diverged.
pub fn simulate<C: Controller + ?Sized>(
    plant: &ScaledSystem,
    lyap: &LyapunovCandidate,
    controller: &C,
    config: &SimConfig,
    x0: &[f64],
) -> Result<Trajectory> {
    config.validate()?;
    let n = plant.base().state_dim();
    check_dim(n, x0.len())?;
    check_dim(n, lyap.state_dim())?;
    check_dim(plant.base().input_dim(), controller.input_dim())?;
    if !all_finite(x0) {
        return Err(Error::NonFinite {
            what: "initial state",
        });
    }

    let lp = Loop { plant, controller };
    let steps = (config.t_max / config.dt).round() as usize;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        controls: Vec::new(),
        lyapunov: Vec::new(),
        converged: false,
        diverged: false,
        violation_count: 0,
    };
    let record = |traj: &mut Trajectory, t: f64, x: &[f64], v: f64| -> Result<()> {
        traj.times.push(t);
        traj.states.push(x.to_vec());
        traj.controls.push(controller.control(x)?);
        traj.lyapunov.push(v);
        Ok(())
    };

    let mut x = x0.to_vec();
    let mut v = lyap.value(&x)?;
    record(&mut traj, 0.0, &x, v)?;
    for k in 0..steps {
        if norm(&x) < config.converge_tol {
            traj.converged = true;
            break;
        }
        let rate = match (lyap.gradient(&x), lp.rhs(&x)) {
            (Ok(g), Ok(xdot)) => dot(&g, &xdot),
            _ => f64::NAN,
        };
        let next = match lp.rk4(&x, config.dt) {
            Ok(next) if all_finite(&next) => next,
            Ok(_) | Err(Error::NonFinite { .. }) => {
                traj.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let v_next = lyap.value(&next)?;
        if !v_next.is_finite() {
            traj.diverged = true;
            break;
        }
        if v_next - v > config.violation_threshold(if rate.is_finite() { rate } else { 0.0 }) {
            traj.violation_count += 1;
        }
        x = next;
        v = v_next;
        let step = k + 1;
        let t = step as f64 * config.dt;
        let blown_up = norm(&x) > config.divergence_bound;
        let done = blown_up || step == steps || norm(&x) < config.converge_tol;
        if step % config.record_stride == 0 || done {
            record(&mut traj, t, &x, v)?;
        }
        if blown_up {
            traj.diverged = true;
            break;
        }
    }
    if !traj.diverged && norm(&x) < config.converge_tol {
        traj.converged = true;
    }
    Ok(traj)
}

/// One orbit per initial state, in input order, possibly in parallel.
/// Divergence is reported per trajectory.
pub fn phase_portrait<C: Controller + ?Sized>(
    plant: &ScaledSystem,
    lyap: &LyapunovCandidate,
    controller: &C,
    config: &SimConfig,
    grid: &[Vec<f64>],
) -> Result<Vec<Trajectory>> {
    if grid.is_empty() {
        return Err(Error::invalid("initial grid", "empty"));
    }
    grid.par_iter()
        .map(|x0| simulate(plant, lyap, controller, config, x0))
        .collect()
}
