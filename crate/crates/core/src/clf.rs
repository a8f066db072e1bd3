//! Affine plants `ẋ = f(x) + Σ g_i(x) u_i`, Lyapunov candidates, Lie data
//! `a = L_f V`, `β_i = L_{g_i} V`, and numerical checks of the control
//! Lyapunov and small-control conditions.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::gauge::{self, ConvexGauge, Hyperbox};
use crate::stabilizer::{self, StabilizerParams};
use crate::vecops::{all_finite, dot, norm};

pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Tolerance on `|f(0)|` accepted by [`AffineSystem::new`].
pub const ORIGIN_DRIFT_TOL: f64 = 1e-12;

#[derive(Clone)]
pub struct AffineSystem {
    n: usize,
    drift: VectorField,
    inputs: Vec<VectorField>,
}

impl fmt::Debug for AffineSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineSystem")
            .field("n", &self.n)
            .field("m", &self.inputs.len())
            .finish_non_exhaustive()
    }
}

impl AffineSystem {
    /// Builds the plant and rejects drifts with `|f(0)| > 1e-12`.
    pub fn new(n: usize, drift: VectorField, inputs: Vec<VectorField>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid(
                "affine system",
                "state dimension must be positive",
            ));
        }
        if inputs.is_empty() {
            return Err(Error::invalid(
                "affine system",
                "at least one input column required",
            ));
        }
        let sys = Self { n, drift, inputs };
        let origin = vec![0.0; n];
        let f0 = sys.drift(&origin)?;
        let f0_norm = norm(&f0);
        if !(f0_norm <= ORIGIN_DRIFT_TOL) {
            return Err(Error::DriftNotZero { norm: f0_norm });
        }
        for i in 0..sys.inputs.len() {
            sys.input_column(i, &origin)?;
        }
        Ok(sys)
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.len()
    }

    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        let fx = (self.drift)(x);
        check_dim(self.n, fx.len())?;
        Ok(fx)
    }

    pub fn input_column(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        let gx = (self.inputs[i])(x);
        check_dim(self.n, gx.len())?;
        Ok(gx)
    }

    /// `f(x) + G(x)u`.
    pub fn velocity(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), u.len())?;
        let mut v = self.drift(x)?;
        for (i, ui) in u.iter().enumerate() {
            if *ui == 0.0 {
                continue;
            }
            let g = self.input_column(i, x)?;
            v.iter_mut().zip(&g).for_each(|(vk, gk)| *vk += ui * gk);
        }
        Ok(v)
    }
}

#[derive(Clone)]
pub struct LyapunovCandidate {
    n: usize,
    value: ScalarField,
    gradient: VectorField,
}

impl fmt::Debug for LyapunovCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovCandidate")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl LyapunovCandidate {
    pub fn new(n: usize, value: ScalarField, gradient: VectorField) -> Result<Self> {
        let lyap = Self { n, value, gradient };
        let v0 = lyap.value(&vec![0.0; n])?;
        if v0.abs() > ORIGIN_DRIFT_TOL {
            return Err(Error::invalid(
                "lyapunov candidate",
                format!("V(0) = {v0} is not zero"),
            ));
        }
        Ok(lyap)
    }

    /// `½‖x‖²`.
    pub fn half_squared_norm(n: usize) -> Self {
        Self {
            n,
            value: Arc::new(|x| 0.5 * dot(x, x)),
            gradient: Arc::new(|x| x.to_vec()),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n, x.len())?;
        Ok((self.value)(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        let g = (self.gradient)(x);
        check_dim(self.n, g.len())?;
        Ok(g)
    }

    /// Largest relative error `‖∇V − D_h V‖ / max(‖∇V‖, 1)` over `points`,
    /// with `D_h` the central difference of step `h`.
    pub fn gradient_error(&self, points: &[Vec<f64>], h: f64) -> Result<f64> {
        let mut worst = 0.0_f64;
        for x in points {
            let g = self.gradient(x)?;
            let mut xp = x.clone();
            let fd: Vec<f64> = (0..self.n)
                .map(|k| {
                    xp[k] = x[k] + h;
                    let up = (self.value)(&xp);
                    xp[k] = x[k] - h;
                    let down = (self.value)(&xp);
                    xp[k] = x[k];
                    (up - down) / (2.0 * h)
                })
                .collect();
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            worst = worst.max(norm(&diff) / norm(&g).max(1.0));
        }
        Ok(worst)
    }

    /// True when `V(x) > 0` at every nonzero sample.
    pub fn is_positive_on(&self, points: &[Vec<f64>]) -> Result<bool> {
        for x in points.iter().filter(|x| x.iter().any(|v| *v != 0.0)) {
            if !(self.value(x)? > 0.0) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `a(x) = ∇V·f` and `β_i(x) = ∇V·g_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LieData {
    pub a: f64,
    pub beta: Vec<f64>,
}

impl LieData {
    pub fn new(a: f64, beta: Vec<f64>) -> Self {
        Self { a, beta }
    }

    /// `Σ |β_i| r_i↓`, the largest decrease of `V̇` the box can buy.
    pub fn beta_r(&self, bounds: &Hyperbox) -> f64 {
        self.beta
            .iter()
            .enumerate()
            .map(|(i, b)| b.abs() * bounds.descent_reach(i, *b))
            .sum()
    }

    /// `min_{u∈H} (a + β·u) = a − Σ |β_i| r_i↓`.
    pub fn best_decrease(&self, bounds: &Hyperbox) -> f64 {
        self.a - self.beta_r(bounds)
    }

    /// `(|a| + a) / 2` divided by `beta_r`; zero when both vanish or `a ≤ 0`.
    pub fn drift_ratio(&self, bounds: &Hyperbox) -> f64 {
        let pos = 0.5 * (self.a.abs() + self.a);
        if pos == 0.0 {
            0.0
        } else {
            pos / self.beta_r(bounds)
        }
    }
}

pub fn lie_derivatives(sys: &AffineSystem, lyap: &LyapunovCandidate, x: &[f64]) -> Result<LieData> {
    check_dim(sys.state_dim(), lyap.state_dim())?;
    let grad = lyap.gradient(x)?;
    let a = dot(&grad, &sys.drift(x)?);
    let beta = (0..sys.input_dim())
        .map(|i| sys.input_column(i, x).map(|g| dot(&grad, &g)))
        .collect::<Result<Vec<_>>>()?;
    if !a.is_finite() || !all_finite(&beta) {
        return Err(Error::NonFinite {
            what: "lie derivatives",
        });
    }
    Ok(LieData { a, beta })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClfViolation {
    pub x: Vec<f64>,
    pub a: f64,
    pub beta: Vec<f64>,
    /// `a − Σ|β_i| r_i↓`; a violation has this `≥ 0`.
    pub best_decrease: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClfReport {
    pub checked: usize,
    pub skipped_origin: usize,
    pub violations: Vec<ClfViolation>,
}

impl ClfReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `a(x) − Σ|β_i(x)| r_i↓ < 0` at every nonzero sample.
pub fn verify_clf(
    sys: &AffineSystem,
    lyap: &LyapunovCandidate,
    bounds: &Hyperbox,
    samples: &[Vec<f64>],
) -> Result<ClfReport> {
    check_dim(sys.input_dim(), bounds.dim())?;
    let mut report = ClfReport {
        checked: 0,
        skipped_origin: 0,
        violations: Vec::new(),
    };
    for x in samples {
        if x.iter().all(|v| *v == 0.0) {
            report.skipped_origin += 1;
            continue;
        }
        let lie = lie_derivatives(sys, lyap, x)?;
        let best = lie.best_decrease(bounds);
        report.checked += 1;
        if !(best < 0.0) {
            report.violations.push(ClfViolation {
                x: x.clone(),
                a: lie.a,
                beta: lie.beta,
                best_decrease: best,
            });
        }
    }
    Ok(report)
}

/// Default tolerance of [`verify_scp`].
pub const SCP_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScpShell {
    pub radius: f64,
    /// `max_{‖x‖=r} (|a|+a) / (2 Σ|β_i| r_i↓)`; infinite on degenerate shells.
    pub ratio: f64,
    /// Samples on the shell where `Σ|β_i| r_i↓ = 0` while `a > 0`.
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScpReport {
    pub tolerance: f64,
    pub shells: Vec<ScpShell>,
}

impl ScpReport {
    /// Ratios must be non-increasing up to the tolerance, end within the
    /// tolerance of zero, and no shell may be degenerate.
    pub fn passed(&self) -> bool {
        let monotone = self
            .shells
            .windows(2)
            .all(|w| w[1].ratio <= w[0].ratio + self.tolerance);
        let vanishing = self
            .shells
            .last()
            .is_some_and(|s| s.ratio <= self.tolerance);
        monotone && vanishing && self.shells.iter().all(|s| s.degenerate == 0)
    }
}

/// Unit directions used to sample a sphere shell in `R^n`: `±1` for
/// `n = 1`, `count` equally spaced angles for `n = 2`, and `count`
/// seeded random directions otherwise.
pub fn shell_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5c9);
            let mut dirs = Vec::with_capacity(count);
            while dirs.len() < count {
                let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r = norm(&d);
                if r > 1e-3 && r <= 1.0 {
                    dirs.push(d.iter().map(|v| v / r).collect());
                }
            }
            dirs
        }
    }
}

/// Samples the small-control ratio on shells of decreasing radius.
pub fn verify_scp(
    sys: &AffineSystem,
    lyap: &LyapunovCandidate,
    bounds: &Hyperbox,
    radii: &[f64],
    directions: usize,
    tolerance: f64,
) -> Result<ScpReport> {
    check_dim(sys.input_dim(), bounds.dim())?;
    if radii.is_empty() || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::invalid(
            "scp radii",
            "radii must be positive and finite",
        ));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid(
            "scp radii",
            "radii must be strictly decreasing",
        ));
    }
    let dirs = shell_directions(sys.state_dim(), directions.max(1));
    let mut shells = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut ratio = 0.0_f64;
        let mut degenerate = 0;
        for d in &dirs {
            let x: Vec<f64> = d.iter().map(|v| v * r).collect();
            let lie = lie_derivatives(sys, lyap, &x)?;
            let br = lie.beta_r(bounds);
            if br == 0.0 {
                if lie.a > 0.0 {
                    degenerate += 1;
                    ratio = f64::INFINITY;
                }
                continue;
            }
            ratio = ratio.max((lie.a.abs() + lie.a) / (2.0 * br));
        }
        shells.push(ScpShell {
            radius: r,
            ratio,
            degenerate,
        });
    }
    Ok(ScpReport { tolerance, shells })
}

/// The plant with its drift divided by `M ≥ 1`; input columns unchanged.
#[derive(Debug, Clone)]
pub struct ScaledSystem {
    base: AffineSystem,
    scale: f64,
}

impl ScaledSystem {
    pub fn base(&self) -> &AffineSystem {
        &self.base
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut f = self.base.drift(x)?;
        f.iter_mut().for_each(|v| *v /= self.scale);
        Ok(f)
    }

    /// `f(x)/M + G(x)w`.
    pub fn velocity(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.base.input_dim(), w.len())?;
        let mut v = self.drift(x)?;
        for (i, wi) in w.iter().enumerate() {
            if *wi == 0.0 {
                continue;
            }
            let g = self.base.input_column(i, x)?;
            v.iter_mut().zip(&g).for_each(|(vk, gk)| *vk += wi * gk);
        }
        Ok(v)
    }
}

pub fn scale_system(sys: &AffineSystem, scale: f64) -> Result<ScaledSystem> {
    if !(scale >= 1.0 && scale.is_finite()) {
        return Err(Error::invalid(
            "drift scale",
            format!("{scale} is not a finite value ≥ 1"),
        ));
    }
    Ok(ScaledSystem {
        base: sys.clone(),
        scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffViolation {
    pub x: Vec<f64>,
    pub margin: f64,
}

/// Margin counts: `≥ 0`, `(-1e-6, 0)`, `(-1e-3, -1e-6]`, `(-1, -1e-3]`, `≤ -1`.
pub const MARGIN_BIN_EDGES: [f64; 4] = [0.0, -1e-6, -1e-3, -1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffReport {
    pub k: f64,
    pub box_max: f64,
    pub checked: usize,
    /// Samples at the origin or with `β = 0`.
    pub excluded: usize,
    pub violations: Vec<TradeoffViolation>,
    /// Largest (least negative) margin `(1/k)a + β·w` seen.
    pub worst_margin: f64,
    pub histogram: [usize; 5],
}

impl TradeoffReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `(1/k) a(x) + β(x)·w(x) < 0` with `w` the gauge-normalized
/// feedback, for `k ≥ M = max_H φ ≥ 1`.
#[allow(clippy::too_many_arguments)]
pub fn verify_tradeoff(
    sys: &AffineSystem,
    lyap: &LyapunovCandidate,
    gauge: &ConvexGauge,
    bounds: &Hyperbox,
    params: &StabilizerParams,
    k: f64,
    samples: &[Vec<f64>],
) -> Result<TradeoffReport> {
    let box_max = gauge::max_over_box(gauge, bounds)?;
    if box_max < 1.0 {
        return Err(Error::invalid(
            "tradeoff",
            format!("max_H φ = {box_max} < 1, the box lies strictly inside the control set"),
        ));
    }
    if !(k >= box_max) {
        return Err(Error::invalid(
            "tradeoff",
            format!("k = {k} is below max_H φ = {box_max}"),
        ));
    }
    let mut report = TradeoffReport {
        k,
        box_max,
        checked: 0,
        excluded: 0,
        violations: Vec::new(),
        worst_margin: f64::NEG_INFINITY,
        histogram: [0; 5],
    };
    for x in samples {
        let eval = stabilizer::feedback_gauge(sys, lyap, bounds, gauge, params, x)?;
        if x.iter().all(|v| *v == 0.0) || eval.lie.beta.iter().all(|b| *b == 0.0) {
            report.excluded += 1;
            continue;
        }
        let margin = eval.lie.a / k + dot(&eval.lie.beta, &eval.w);
        report.checked += 1;
        report.worst_margin = report.worst_margin.max(margin);
        let bin = MARGIN_BIN_EDGES
            .iter()
            .position(|edge| margin > *edge || (*edge == 0.0 && margin >= 0.0))
            .unwrap_or(4);
        report.histogram[bin] += 1;
        if !(margin < 0.0) {
            report.violations.push(TradeoffViolation {
                x: x.clone(),
                margin,
            });
        }
    }
    Ok(report)
}

/// Points of a rectangular grid, first coordinate varying slowest.
pub fn grid_points(lower: &[f64], upper: &[f64], counts: &[usize]) -> Result<Vec<Vec<f64>>> {
    check_dim(lower.len(), upper.len())?;
    check_dim(lower.len(), counts.len())?;
    if counts.contains(&0) {
        return Err(Error::invalid("grid", "every count must be at least 1"));
    }
    let axes: Vec<Vec<f64>> = lower
        .iter()
        .zip(upper)
        .zip(counts)
        .map(|((lo, hi), c)| {
            if *c == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..*c)
                    .map(|j| lo + (hi - lo) * j as f64 / (*c - 1) as f64)
                    .collect()
            }
        })
        .collect();
    let mut points = vec![Vec::with_capacity(axes.len())];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}
