#![allow(dead_code)]

use polystab::gauge::Hyperbox;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SQRT_3: f64 = 1.732_050_807_568_877_2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.random_range(-half_width..half_width))
        .collect()
}

/// Minimum of `a + β·u` over a `k × k` grid on a planar box, corners included.
pub fn grid_min_planar(a: f64, beta: &[f64], h: &Hyperbox, k: usize) -> (f64, [f64; 2]) {
    let axis = |i: usize| -> Vec<f64> {
        let (lo, hi) = (-h.lower()[i], h.upper()[i]);
        (0..k)
            .map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64)
            .collect()
    };
    let (xs, ys) = (axis(0), axis(1));
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for &u1 in &xs {
        for &u2 in &ys {
            let v = a + beta[0] * u1 + beta[1] * u2;
            if v < best.0 {
                best = (v, [u1, u2]);
            }
        }
    }
    best
}

/// Grid spacing of `grid_min_planar`, per axis.
pub fn grid_step(h: &Hyperbox, k: usize) -> [f64; 2] {
    [0, 1].map(|i| (h.lower()[i] + h.upper()[i]) / (k - 1) as f64)
}

/// Facet normals of a counterclockwise polygon with the origin inside:
/// for each edge `(p, q)` solve `n·p = n·q = 1` by Cramer's rule.
pub fn polygon_normals(vertices: &[[f64; 2]]) -> Vec<Vec<f64>> {
    (0..vertices.len())
        .map(|k| {
            let p = vertices[k];
            let q = vertices[(k + 1) % vertices.len()];
            let det = p[0] * q[1] - p[1] * q[0];
            vec![(q[1] - p[1]) / det, (p[0] - q[0]) / det]
        })
        .collect()
}

/// `max{u₂, (√3u₁−u₂)/2, (−√3u₁−u₂)/2}`, written out independently.
pub fn triangle_phi(u: &[f64]) -> f64 {
    let a = u[1];
    let b = (SQRT_3 * u[0] - u[1]) / 2.0;
    let c = (-SQRT_3 * u[0] - u[1]) / 2.0;
    a.max(b).max(c).max(0.0)
}

/// Values at x = (1, 1), ε = 1 for the triangle example, from a 40-digit
/// evaluation of the closed-form expressions.
#[allow(clippy::excessive_precision)]
pub mod reference {
    pub const LAMBDA: f64 = 0.5;
    pub const TAU: [f64; 2] = [-4.504_639_529_808_658_5, -4.772_588_722_239_781_2];
    pub const RHO: [f64; 2] = [0.905_072_533_080_282_4, 0.943_274_302_149_230_1];
    pub const U: [f64; 2] = [-1.567_631_611_830_112_5, -1.886_548_604_298_460_2];
    pub const PHI_U: f64 = 2.300_883_101_769_653_7;
    pub const W: [f64; 2] = [-0.681_317_364_895_425_0, -0.819_923_707_922_179_6];
    /// `a + β·u` at the same point.
    pub const DECREASE: f64 = -1.588_154_812_344_134_1;
}
