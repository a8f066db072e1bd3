//! Subcommand implementations. Reports go to the given writer; a failed
//! check is returned as [`CliError::Verification`] after the report is written.

use std::io::Write;
use std::path::Path;

use polystab::clf::{self, ClfReport, ScpReport, TradeoffReport};
use polystab::gauge::{self, ContainmentReport};
use polystab::simulator::{self, Trajectory};
use polystab::stabilizer::{self, EpsilonLimitReport};
use polystab::{GaugeStabilizer, ScaledSystem};
use serde_json::json;

use crate::config::{RunConfig, Setup};
use crate::error::CliError;

/// Violating points listed per check in the text report.
const LISTED_VIOLATIONS: usize = 20;
const CONTAINMENT_SEED: u64 = 0x5eed;

fn io(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn emit_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out).map_err(io)
}

fn vec_str(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn gauge_eval(
    cfg: &RunConfig,
    u: &[f64],
    json: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let setup = cfg.setup()?;
    if u.len() != setup.gauge.dim() {
        return Err(CliError::Config(format!(
            "control vector has {} entries, the configured set lives in R^{}",
            u.len(),
            setup.gauge.dim()
        )));
    }
    let phi = gauge::evaluate(&setup.gauge, u)?;
    let member = gauge::is_member(&setup.gauge, u)?;
    let normalized = gauge::normalize_into(&setup.gauge, u)?;
    let box_max = gauge::max_over_box(&setup.gauge, &setup.bounds)?;
    if json {
        return emit_json(
            out,
            &json!({
                "gauge": setup.gauge.variant_name(),
                "u": u,
                "phi": phi,
                "member": member,
                "normalized": normalized,
                "box_max": box_max,
            }),
        );
    }
    let facets = setup
        .gauge
        .facet_normals()
        .map(|f| format!(", {} facets", f.len()))
        .unwrap_or_default();
    writeln!(out, "gauge       {}{facets}", setup.gauge.variant_name()).map_err(io)?;
    writeln!(out, "u           {}", vec_str(u)).map_err(io)?;
    writeln!(out, "phi(u)      {phi}").map_err(io)?;
    writeln!(out, "member      {member}").map_err(io)?;
    writeln!(out, "normalized  {}", vec_str(&normalized)).map_err(io)?;
    writeln!(out, "box max M   {box_max}").map_err(io)
}

struct VerifyOutcome {
    clf: ClfReport,
    scp: ScpReport,
    tradeoff: Result<TradeoffReport, String>,
    limit: Result<Vec<EpsilonLimitReport>, String>,
    containment: ContainmentReport,
}

impl VerifyOutcome {
    fn verdicts(&self) -> [(&'static str, bool); 5] {
        [
            ("clf", self.clf.passed()),
            ("scp", self.scp.passed()),
            ("tradeoff", self.tradeoff.as_ref().is_ok_and(|r| r.passed())),
            (
                "epsilon-limit",
                self.limit
                    .as_ref()
                    .is_ok_and(|rs| rs.iter().all(|r| r.passed())),
            ),
            ("containment", self.containment.passed()),
        ]
    }
}

/// Up to ten sample states where every `β_i` is nonzero, evenly spread.
fn limit_states(setup: &Setup, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, CliError> {
    let ex = &setup.example;
    let mut usable = Vec::new();
    for x in samples {
        let lie = clf::lie_derivatives(&ex.system, &ex.lyapunov, x)?;
        if lie.beta.iter().all(|b| *b != 0.0) {
            usable.push(x.clone());
        }
    }
    let stride = usable.len().div_ceil(10).max(1);
    Ok(usable.into_iter().step_by(stride).collect())
}

fn run_checks(cfg: &RunConfig, setup: &Setup) -> Result<VerifyOutcome, CliError> {
    let (sys, lyap) = (&setup.example.system, &setup.example.lyapunov);
    let v = &cfg.verify;
    let samples = v.samples.points();

    let clf = clf::verify_clf(sys, lyap, &setup.bounds, &samples)?;
    let scp = clf::verify_scp(
        sys,
        lyap,
        &setup.bounds,
        &v.scp_radii,
        v.scp_directions,
        v.scp_tolerance,
    )?;
    let box_max = gauge::max_over_box(&setup.gauge, &setup.bounds)?;
    let tradeoff = clf::verify_tradeoff(
        sys,
        lyap,
        &setup.gauge,
        &setup.bounds,
        &setup.params,
        v.tradeoff_k.unwrap_or(box_max),
        &samples,
    )
    .map_err(|e| e.to_string());

    let states = if v.limit_states.is_empty() {
        limit_states(setup, &samples)?
    } else {
        v.limit_states.clone()
    };
    let limit = if states.is_empty() {
        Err("no sample state has every β_i ≠ 0".to_string())
    } else {
        let reports = states
            .iter()
            .map(|x| {
                stabilizer::epsilon_limit_check(
                    sys,
                    lyap,
                    &setup.bounds,
                    &v.limit_epsilons,
                    setup.params.lambda_floor,
                    x,
                )
            })
            .collect::<polystab::Result<Vec<_>>>()?;
        Ok(reports)
    };
    let containment = gauge::check_contained(
        &setup.gauge,
        &setup.bounds,
        v.containment_samples,
        CONTAINMENT_SEED,
    )?;
    Ok(VerifyOutcome {
        clf,
        scp,
        tradeoff,
        limit,
        containment,
    })
}

fn verify_text(cfg: &RunConfig, r: &VerifyOutcome, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "example      {}", cfg.example)?;
    writeln!(
        out,
        "clf          {}  {} states, {} violations",
        verdict(r.clf.passed()),
        r.clf.checked,
        r.clf.violations.len()
    )?;
    for v in r.clf.violations.iter().take(LISTED_VIOLATIONS) {
        writeln!(
            out,
            "               x = {}  a = {:.6e}  min a+β·u = {:.6e}",
            vec_str(&v.x),
            v.a,
            v.best_decrease
        )?;
    }
    if r.clf.violations.len() > LISTED_VIOLATIONS {
        writeln!(
            out,
            "               ... {} more",
            r.clf.violations.len() - LISTED_VIOLATIONS
        )?;
    }

    let shells: Vec<String> = r
        .scp
        .shells
        .iter()
        .map(|s| format!("{:.3e}@{}", s.ratio, s.radius))
        .collect();
    writeln!(
        out,
        "scp          {}  ratio@radius {}",
        verdict(r.scp.passed()),
        shells.join(" ")
    )?;

    match &r.tradeoff {
        Ok(t) => {
            writeln!(
                out,
                "tradeoff     {}  k = {}, {} states, worst margin {:.6e}",
                verdict(t.passed()),
                t.k,
                t.checked,
                t.worst_margin
            )?;
            for v in t.violations.iter().take(LISTED_VIOLATIONS) {
                writeln!(
                    out,
                    "               x = {}  margin = {:.6e}",
                    vec_str(&v.x),
                    v.margin
                )?;
            }
        }
        Err(e) => writeln!(out, "tradeoff     FAIL  {e}")?,
    }

    match &r.limit {
        Ok(reports) => {
            let ok = reports.iter().all(|r| r.passed());
            let worst = reports
                .iter()
                .filter_map(|r| r.distances.last())
                .fold(0.0_f64, |a, b| a.max(*b));
            writeln!(
                out,
                "eps-limit    {}  {} states, largest final distance {worst:.3e}",
                verdict(ok),
                reports.len()
            )?;
            for rep in reports.iter().filter(|r| !r.passed()) {
                let d: Vec<String> = rep.distances.iter().map(|d| format!("{d:.3e}")).collect();
                writeln!(
                    out,
                    "               x = {}  distances {}",
                    vec_str(&rep.x),
                    d.join(" ")
                )?;
            }
        }
        Err(e) => writeln!(out, "eps-limit    FAIL  {e}")?,
    }

    writeln!(
        out,
        "containment  {}  {} boundary samples, {} outside the box",
        verdict(r.containment.passed()),
        r.containment.samples,
        r.containment.outside
    )
}

fn verify_json(cfg: &RunConfig, r: &VerifyOutcome) -> serde_json::Value {
    let failure = |e: &String| json!({ "passed": false, "error": e });
    let verdicts = r.verdicts();
    json!({
        "example": cfg.example,
        "passed": verdicts.iter().all(|(_, ok)| *ok),
        "clf": { "passed": r.clf.passed(), "report": r.clf },
        "scp": { "passed": r.scp.passed(), "report": r.scp },
        "tradeoff": match &r.tradeoff {
            Ok(t) => json!({ "passed": t.passed(), "report": t }),
            Err(e) => failure(e),
        },
        "epsilon_limit": match &r.limit {
            Ok(rs) => json!({ "passed": rs.iter().all(|r| r.passed()), "reports": rs }),
            Err(e) => failure(e),
        },
        "containment": { "passed": r.containment.passed(), "report": r.containment },
    })
}

pub fn verify(cfg: &RunConfig, json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let setup = cfg.setup()?;
    let outcome = run_checks(cfg, &setup)?;
    if json {
        emit_json(out, &verify_json(cfg, &outcome))?;
    } else {
        verify_text(cfg, &outcome, out).map_err(io)?;
    }
    let failed: Vec<&str> = outcome
        .verdicts()
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| *name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}

fn closed_loop(setup: &Setup) -> Result<(ScaledSystem, GaugeStabilizer), CliError> {
    let ex = &setup.example;
    let stab = GaugeStabilizer::new(
        ex.system.clone(),
        ex.lyapunov.clone(),
        setup.bounds.clone(),
        setup.gauge.clone(),
        setup.params,
    )?;
    let plant = clf::scale_system(&ex.system, stab.box_max()?)
        .map_err(|e| CliError::Config(format!("field `box`: {e}")))?;
    Ok((plant, stab))
}

/// Writes trajectories as `traj_id,t,x1..xn,u1..um,V`, 17 significant digits.
pub fn write_csv(
    path: &Path,
    trajectories: &[Trajectory],
    n: usize,
    m: usize,
) -> Result<(), CliError> {
    let fail = |e: csv::Error| CliError::Io(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    let mut header = vec!["traj_id".to_string(), "t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.push("V".to_string());
    w.write_record(&header).map_err(fail)?;
    let num = |v: f64| format!("{v:.16e}");
    for (id, tr) in trajectories.iter().enumerate() {
        for k in 0..tr.len() {
            let mut row = vec![id.to_string(), num(tr.times[k])];
            row.extend(tr.states[k].iter().map(|v| num(*v)));
            row.extend(tr.controls[k].iter().map(|v| num(*v)));
            row.push(num(tr.lyapunov[k]));
            w.write_record(&row).map_err(fail)?;
        }
    }
    w.flush()
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

pub fn simulate(
    cfg: &RunConfig,
    x0: &[f64],
    path: &Path,
    json: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let setup = cfg.setup()?;
    let (n, m) = (
        setup.example.system.state_dim(),
        setup.example.system.input_dim(),
    );
    if x0.len() != n {
        return Err(CliError::Config(format!(
            "initial state has {} entries, `{}` has {n} states",
            x0.len(),
            cfg.example
        )));
    }
    let (plant, stab) = closed_loop(&setup)?;
    let tr = simulator::simulate(&plant, &setup.example.lyapunov, &stab, &cfg.sim, x0)?;
    write_csv(path, std::slice::from_ref(&tr), n, m)?;
    let t_final = tr.times.last().copied().unwrap_or(0.0);
    let v_final = tr.lyapunov.last().copied().unwrap_or(0.0);
    if json {
        return emit_json(
            out,
            &json!({
                "output": path.display().to_string(),
                "x0": x0,
                "records": tr.len(),
                "converged": tr.converged,
                "diverged": tr.diverged,
                "t_final": t_final,
                "final_state": tr.final_state(),
                "final_lyapunov": v_final,
                "violation_count": tr.violation_count,
            }),
        );
    }
    writeln!(
        out,
        "x0 = {}  converged {}  t = {t_final:.4}  x = {}  V = {v_final:.3e}  violations {}  -> {}",
        vec_str(x0),
        tr.converged,
        vec_str(tr.final_state()),
        tr.violation_count,
        path.display()
    )
    .map_err(io)
}

/// Runs the grid, on `jobs` worker threads when given. Output order follows
/// the grid regardless of scheduling.
pub fn portrait(
    cfg: &RunConfig,
    path: &Path,
    jobs: Option<usize>,
    json: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let setup = cfg.setup()?;
    let (n, m) = (
        setup.example.system.state_dim(),
        setup.example.system.input_dim(),
    );
    let (plant, stab) = closed_loop(&setup)?;
    let grid = cfg.grid.points();
    let run = || simulator::phase_portrait(&plant, &setup.example.lyapunov, &stab, &cfg.sim, &grid);
    let trajectories = match jobs {
        None => run()?,
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?
            .install(run)?,
    };
    write_csv(path, &trajectories, n, m)?;
    let converged = trajectories.iter().filter(|t| t.converged).count();
    let max_violations = trajectories
        .iter()
        .map(|t| t.violation_count)
        .max()
        .unwrap_or(0);
    if json {
        let runs: Vec<_> = trajectories
            .iter()
            .zip(&grid)
            .map(|(t, x0)| {
                json!({
                    "x0": x0,
                    "converged": t.converged,
                    "diverged": t.diverged,
                    "t_final": t.times.last(),
                    "violation_count": t.violation_count,
                })
            })
            .collect();
        return emit_json(
            out,
            &json!({
                "output": path.display().to_string(),
                "trajectories": trajectories.len(),
                "converged": converged,
                "max_violation_count": max_violations,
                "runs": runs,
            }),
        );
    }
    writeln!(out, "trajectories  {}", trajectories.len()).map_err(io)?;
    writeln!(out, "converged     {converged}").map_err(io)?;
    writeln!(out, "violations    {max_violations} (max per trajectory)").map_err(io)?;
    writeln!(out, "wrote         {}", path.display()).map_err(io)
}
