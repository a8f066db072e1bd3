//! TOML run configuration.

use std::path::Path;

use polystab::builtin::{self, BuiltinExample};
use polystab::gauge::{self, ConvexGauge, Hyperbox};
use polystab::{SimConfig, StabilizerParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Control value set, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeSpec {
    /// The built-in triangle with vertices `(0,−2)`, `(±√3,1)`.
    Triangle,
    WeightedL1 {
        weights: Vec<f64>,
    },
    /// `φ(u) = √(uᵀQu)`, `Q` given by rows.
    Ellipsoid {
        matrix: Vec<Vec<f64>>,
    },
    /// `φ(u) = max(0, max_i v_iᵀu)`.
    Polytope {
        normals: Vec<Vec<f64>>,
    },
    /// Signed corners, `lower < 0 < upper` componentwise.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

/// Input box in signed coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Rectangular grid of initial states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// State grid for the CLF and tradeoff checks.
    pub samples: GridSpec,
    pub scp_radii: Vec<f64>,
    pub scp_directions: usize,
    pub scp_tolerance: f64,
    /// Defaults to `M = max_H φ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tradeoff_k: Option<f64>,
    pub limit_epsilons: Vec<f64>,
    /// States for the large-ε check. Empty picks up to ten sample points
    /// with every `β_i ≠ 0`.
    pub limit_states: Vec<Vec<f64>>,
    pub containment_samples: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            samples: GridSpec {
                lower: vec![-3.0, -3.0],
                upper: vec![3.0, 3.0],
                counts: vec![21, 21],
            },
            scp_radii: vec![1.0, 0.1, 0.01, 0.001],
            scp_directions: 64,
            scp_tolerance: polystab::clf::SCP_TOL,
            tradeoff_k: None,
            limit_epsilons: vec![1.0, 10.0, 100.0, 1e4],
            limit_states: Vec::new(),
            containment_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub example: String,
    pub epsilon: f64,
    pub output_path: String,
    pub cvs: GaugeSpec,
    #[serde(rename = "box")]
    pub bounds: BoxSpec,
    pub sim: SimConfig,
    pub grid: GridSpec,
    pub verify: VerifySpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s3 = 3f64.sqrt();
        Self {
            example: builtin::TRIANGLE_EXAMPLE.to_string(),
            epsilon: 1.0,
            output_path: "portrait.csv".to_string(),
            cvs: GaugeSpec::Triangle,
            bounds: BoxSpec {
                lower: vec![-s3, -2.0],
                upper: vec![s3, 1.0],
            },
            sim: SimConfig::default(),
            grid: GridSpec {
                lower: vec![-3.0, -3.0],
                upper: vec![3.0, 3.0],
                counts: vec![4, 4],
            },
            verify: VerifySpec::default(),
        }
    }
}

/// Everything a command needs, built from a validated [`RunConfig`].
pub struct Setup {
    pub example: BuiltinExample,
    pub gauge: ConvexGauge,
    pub bounds: Hyperbox,
    pub params: StabilizerParams,
}

fn field(name: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field `{name}`: {reason}"))
}

fn check_len(name: &str, expected: usize, got: usize) -> Result<(), CliError> {
    if expected == got {
        Ok(())
    } else {
        Err(field(
            name,
            format!("expected {expected} entries, got {got}"),
        ))
    }
}

impl GaugeSpec {
    pub fn build(&self) -> Result<ConvexGauge, CliError> {
        let built = match self {
            GaugeSpec::Triangle => Ok(gauge::triangle_gauge()),
            GaugeSpec::WeightedL1 { weights } => ConvexGauge::weighted_l1(weights.clone()),
            GaugeSpec::Ellipsoid { matrix } => ConvexGauge::ellipsoid(matrix.clone()),
            GaugeSpec::Polytope { normals } => ConvexGauge::polytope(normals.clone()),
            GaugeSpec::Box { lower, upper } => signed_box(lower, upper).map(ConvexGauge::hyperbox),
        };
        built.map_err(|e| field("cvs", e))
    }
}

fn signed_box(lower: &[f64], upper: &[f64]) -> polystab::Result<Hyperbox> {
    Hyperbox::new(lower.iter().map(|v| -v).collect(), upper.to_vec())
}

impl GridSpec {
    fn validate(&self, name: &str, n: usize) -> Result<(), CliError> {
        check_len(&format!("{name}.lower"), n, self.lower.len())?;
        check_len(&format!("{name}.upper"), n, self.upper.len())?;
        check_len(&format!("{name}.counts"), n, self.counts.len())?;
        if self.counts.contains(&0) {
            return Err(field(
                &format!("{name}.counts"),
                "counts must be at least 1",
            ));
        }
        let ordered = self
            .lower
            .iter()
            .zip(&self.upper)
            .all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo <= hi);
        if !ordered {
            return Err(field(name, "need finite bounds with lower ≤ upper"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        polystab::clf::grid_points(&self.lower, &self.upper, &self.counts)
            .expect("grid validated with its config")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable in TOML")
    }

    /// Checks every invariant and builds the objects the commands use.
    pub fn setup(&self) -> Result<Setup, CliError> {
        let example = builtin::lookup(&self.example).map_err(|_| {
            field(
                "example",
                format!(
                    "unknown `{}`, expected one of {}",
                    self.example,
                    builtin::names().join(", ")
                ),
            )
        })?;
        let (n, m) = (example.system.state_dim(), example.system.input_dim());

        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(field(
                "epsilon",
                format!("must be positive and finite, got {}", self.epsilon),
            ));
        }
        let params = StabilizerParams::new(self.epsilon).map_err(|e| field("epsilon", e))?;

        let gauge = self.cvs.build()?;
        check_len("cvs", m, gauge.dim())?;
        check_len("box.lower", m, self.bounds.lower.len())?;
        check_len("box.upper", m, self.bounds.upper.len())?;
        let bounds = signed_box(&self.bounds.lower, &self.bounds.upper)
            .map_err(|e| field("box", format!("{e} (need lower < 0 < upper)")))?;

        self.sim.validate().map_err(|e| field("sim", e))?;
        self.grid.validate("grid", n)?;

        let v = &self.verify;
        v.samples.validate("verify.samples", n)?;
        if let Some(k) = v.tradeoff_k {
            if !(k.is_finite() && k > 0.0) {
                return Err(field("verify.tradeoff_k", "must be positive and finite"));
            }
        }
        if v.scp_radii.is_empty() || v.scp_radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(field(
                "verify.scp_radii",
                "must be nonempty and strictly decreasing",
            ));
        }
        if v.limit_epsilons.is_empty() || v.limit_epsilons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field(
                "verify.limit_epsilons",
                "must be nonempty and strictly increasing",
            ));
        }
        for x in &v.limit_states {
            check_len("verify.limit_states", n, x.len())?;
        }
        Ok(Setup {
            example,
            gauge,
            bounds,
            params,
        })
    }
}
