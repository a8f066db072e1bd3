//! Control value sets as unit sublevel sets of positively homogeneous
//! convex gauges, `U_φ = {u : φ(u) ≤ 1}`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::vecops::dot;

/// Slack used by [`is_member`].
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Largest box dimension accepted by [`max_over_box`] (2^24 vertices).
pub const MAX_VERTEX_ENUM_DIM: usize = 24;

/// Asymmetric box `[-r₁⁻, r₁⁺] × … × [-r_m⁻, r_m⁺]`, all radii strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperbox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Hyperbox {
    /// `lower` holds the magnitudes `r_i⁻`, `upper` the `r_i⁺`.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("hyperbox", "dimension must be at least 1"));
        }
        check_dim(lower.len(), upper.len())?;
        if let Some(r) = lower
            .iter()
            .chain(&upper)
            .find(|r| !(r.is_finite() && **r > 0.0))
        {
            return Err(Error::invalid(
                "hyperbox",
                format!("radius {r} is not strictly positive and finite"),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn symmetric(radii: Vec<f64>) -> Result<Self> {
        Self::new(radii.clone(), radii)
    }

    /// Smallest box containing every point of `points`. Fails if the origin
    /// is not strictly inside the hull's bounding box.
    pub fn bounding(points: &[Vec<f64>]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::invalid("hyperbox", "empty point list"))?;
        let m = first.len();
        let mut lower = vec![0.0_f64; m];
        let mut upper = vec![0.0_f64; m];
        for p in points {
            check_dim(m, p.len())?;
            for i in 0..m {
                lower[i] = lower[i].max(-p[i]);
                upper[i] = upper[i].max(p[i]);
            }
        }
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Radius reached when moving against the sign of `beta`: the
    /// minimizer of `beta·u_i` over `[-r_i⁻, r_i⁺]` sits at `-r_i⁻` for
    /// `beta > 0` and at `+r_i⁺` otherwise.
    #[inline]
    pub fn descent_reach(&self, i: usize, beta: f64) -> f64 {
        if beta > 0.0 {
            self.lower[i]
        } else {
            self.upper[i]
        }
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= -lo - tol && *x <= hi + tol)
    }

    /// All `2^m` corners, bit `i` of the index selecting `+r_i⁺`.
    pub fn vertices(&self) -> Result<impl Iterator<Item = Vec<f64>> + '_> {
        let m = self.dim();
        if m > MAX_VERTEX_ENUM_DIM {
            return Err(Error::Capacity {
                dim: m,
                max: MAX_VERTEX_ENUM_DIM,
            });
        }
        Ok((0u32..(1u32 << m)).map(move |mask| {
            (0..m)
                .map(|i| {
                    if mask & (1 << i) != 0 {
                        self.upper[i]
                    } else {
                        -self.lower[i]
                    }
                })
                .collect()
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    WeightedL1 { weights: Vec<f64> },
    Ellipsoid { dim: usize, q: Vec<f64> },
    PolytopeFacets { dim: usize, normals: Vec<Vec<f64>> },
    BoxGauge { bounds: Hyperbox },
}

/// Nonnegative, convex, degree-1 positively homogeneous function whose unit
/// sublevel set is the control value set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexGauge {
    kind: Kind,
}

impl ConvexGauge {
    /// `φ(u) = Σ l_i |u_i|`, a cross-polytope with `2m` vertices.
    pub fn weighted_l1(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weighted-l1 gauge", "no weights"));
        }
        if weights.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::invalid(
                "weighted-l1 gauge",
                "weights must be positive and finite",
            ));
        }
        Ok(Self {
            kind: Kind::WeightedL1 { weights },
        })
    }

    /// `φ(u) = √(uᵀQu)` for symmetric positive definite `Q` (given by rows).
    pub fn ellipsoid(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::invalid("ellipsoid gauge", "empty matrix"));
        }
        for row in &rows {
            check_dim(m, row.len())?;
        }
        let q: Vec<f64> = rows.into_iter().flatten().collect();
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("ellipsoid gauge", "non-finite entry"));
        }
        let scale = q.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
        for i in 0..m {
            for j in 0..i {
                if (q[i * m + j] - q[j * m + i]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::invalid("ellipsoid gauge", "matrix is not symmetric"));
                }
            }
        }
        if DMatrix::from_row_slice(m, m, &q).cholesky().is_none() {
            return Err(Error::invalid(
                "ellipsoid gauge",
                "matrix is not positive definite",
            ));
        }
        Ok(Self {
            kind: Kind::Ellipsoid { dim: m, q },
        })
    }

    /// `φ(u) = max(0, max_i v_iᵀu)`. The normals must positively span the
    /// space so that the polytope is bounded; this is probed along the
    /// coordinate axes, the sign vectors (for small `m`) and a fixed set of
    /// pseudo-random directions.
    pub fn polytope(normals: Vec<Vec<f64>>) -> Result<Self> {
        let dim = normals
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("polytope gauge", "no facet normals"))?;
        if dim == 0 {
            return Err(Error::invalid("polytope gauge", "zero-dimensional normals"));
        }
        for v in &normals {
            check_dim(dim, v.len())?;
            if v.iter().any(|x| !x.is_finite()) || v.iter().all(|x| *x == 0.0) {
                return Err(Error::invalid(
                    "polytope gauge",
                    "normals must be finite and nonzero",
                ));
            }
        }
        let gauge = Self {
            kind: Kind::PolytopeFacets { dim, normals },
        };
        if let Some(d) = probe_directions(dim).find(|d| gauge.raw_polytope_max(d) <= 0.0) {
            return Err(Error::invalid(
                "polytope gauge",
                format!("normals do not bound the set along direction {d:?}"),
            ));
        }
        Ok(gauge)
    }

    pub fn hyperbox(bounds: Hyperbox) -> Self {
        Self {
            kind: Kind::BoxGauge { bounds },
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::WeightedL1 { weights } => weights.len(),
            Kind::Ellipsoid { dim, .. } | Kind::PolytopeFacets { dim, .. } => *dim,
            Kind::BoxGauge { bounds } => bounds.dim(),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match &self.kind {
            Kind::WeightedL1 { .. } => "weighted-l1",
            Kind::Ellipsoid { .. } => "ellipsoid",
            Kind::PolytopeFacets { .. } => "polytope",
            Kind::BoxGauge { .. } => "box",
        }
    }

    /// Facet normals when this is a polytope gauge.
    pub fn facet_normals(&self) -> Option<&[Vec<f64>]> {
        match &self.kind {
            Kind::PolytopeFacets { normals, .. } => Some(normals),
            _ => None,
        }
    }

    fn raw_polytope_max(&self, u: &[f64]) -> f64 {
        match &self.kind {
            Kind::PolytopeFacets { normals, .. } => normals
                .iter()
                .map(|v| dot(v, u))
                .fold(f64::NEG_INFINITY, f64::max),
            _ => unreachable!("only called on polytope gauges"),
        }
    }

    /// Gauge value without the dimension check; `u` must have length `dim()`.
    pub(crate) fn eval_unchecked(&self, u: &[f64]) -> f64 {
        match &self.kind {
            Kind::WeightedL1 { weights } => weights.iter().zip(u).map(|(l, x)| l * x.abs()).sum(),
            Kind::Ellipsoid { dim, q } => {
                let quad: f64 = (0..*dim)
                    .map(|i| u[i] * dot(&q[i * dim..(i + 1) * dim], u))
                    .sum();
                quad.max(0.0).sqrt()
            }
            Kind::PolytopeFacets { .. } => self.raw_polytope_max(u).max(0.0),
            Kind::BoxGauge { bounds } => u
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let r = if *x >= 0.0 {
                        bounds.upper[i]
                    } else {
                        bounds.lower[i]
                    };
                    x.abs() / r
                })
                .fold(0.0, f64::max),
        }
    }
}

fn probe_directions(m: usize) -> impl Iterator<Item = Vec<f64>> {
    let axes = (0..m).flat_map(move |j| {
        [1.0, -1.0].into_iter().map(move |s| {
            let mut e = vec![0.0; m];
            e[j] = s;
            e
        })
    });
    let signs = (0u32..if m <= 12 { 1u32 << m } else { 0 }).map(move |mask| {
        (0..m)
            .map(|i| if mask & (1 << i) != 0 { 1.0 } else { -1.0 })
            .collect::<Vec<f64>>()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a09e);
    let random = (0..512).map(move |_| {
        (0..m)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    });
    axes.chain(signs).chain(random)
}

/// Built-in triangle `T = conv{(0,-2), (√3,1), (-√3,1)}`.
pub fn triangle_gauge() -> ConvexGauge {
    let h = 3f64.sqrt() / 2.0;
    ConvexGauge {
        kind: Kind::PolytopeFacets {
            dim: 2,
            normals: vec![vec![0.0, 1.0], vec![h, -0.5], vec![-h, -0.5]],
        },
    }
}

/// Vertices of the built-in triangle, in the order `v₀, v₁, v₂`.
pub fn triangle_vertices() -> Vec<Vec<f64>> {
    let s = 3f64.sqrt();
    vec![vec![0.0, -2.0], vec![s, 1.0], vec![-s, 1.0]]
}

/// Smallest box around the triangle, `[-√3, √3] × [-2, 1]`.
pub fn triangle_box() -> Hyperbox {
    let s = 3f64.sqrt();
    Hyperbox::new(vec![s, 2.0], vec![s, 1.0]).expect("static box")
}

pub fn evaluate(gauge: &ConvexGauge, u: &[f64]) -> Result<f64> {
    check_dim(gauge.dim(), u.len())?;
    Ok(gauge.eval_unchecked(u))
}

pub fn is_member(gauge: &ConvexGauge, u: &[f64]) -> Result<bool> {
    Ok(evaluate(gauge, u)? <= 1.0 + MEMBERSHIP_TOL)
}

/// Radial projection onto `U_φ`: `u` if `φ(u) ≤ 1`, otherwise `u / φ(u)`.
pub fn normalize_into(gauge: &ConvexGauge, u: &[f64]) -> Result<Vec<f64>> {
    let phi = evaluate(gauge, u)?;
    Ok(normalize_with(u, phi))
}

pub(crate) fn normalize_with(u: &[f64], phi: f64) -> Vec<f64> {
    if phi <= 1.0 {
        u.to_vec()
    } else {
        u.iter().map(|x| x / phi).collect()
    }
}

/// `M = max_H φ`, attained at a vertex of `H` because `φ` is convex.
pub fn max_over_box(gauge: &ConvexGauge, bounds: &Hyperbox) -> Result<f64> {
    check_dim(gauge.dim(), bounds.dim())?;
    Ok(bounds
        .vertices()?
        .map(|v| gauge.eval_unchecked(&v))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ContainmentReport {
    pub samples: usize,
    pub outside: usize,
    /// Largest box-gauge value seen on sampled points of `∂U_φ`.
    pub worst_box_gauge: f64,
}

impl ContainmentReport {
    pub fn passed(&self) -> bool {
        self.outside == 0
    }
}

/// Samples `samples` points of `∂U_φ` (random directions scaled to `φ = 1`)
/// and checks that each lies in `bounds`.
pub fn check_contained(
    gauge: &ConvexGauge,
    bounds: &Hyperbox,
    samples: usize,
    seed: u64,
) -> Result<ContainmentReport> {
    let m = gauge.dim();
    check_dim(m, bounds.dim())?;
    let box_gauge = ConvexGauge::hyperbox(bounds.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outside = 0;
    let mut worst = 0.0_f64;
    let mut taken = 0;
    while taken < samples {
        let d: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi = gauge.eval_unchecked(&d);
        if phi <= 0.0 {
            continue;
        }
        let p: Vec<f64> = d.iter().map(|x| x / phi).collect();
        let g = box_gauge.eval_unchecked(&p);
        worst = worst.max(g);
        if g > 1.0 + MEMBERSHIP_TOL {
            outside += 1;
        }
        taken += 1;
    }
    Ok(ContainmentReport {
        samples,
        outside,
        worst_box_gauge: worst,
    })
}
