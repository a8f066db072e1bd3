use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use polystab_cli::RunConfig;
use tempfile::TempDir;

fn polystab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polystab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("run.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("valid json on stdout")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn gauge_eval_at_vertex() {
    let o = polystab(&["gauge-eval", "--json", "1.7320508075688772", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert!((v["phi"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["member"], true);
    assert_eq!(v["box_max"].as_f64().unwrap(), 2.5);
}

#[test]
fn gauge_eval_origin_and_text() {
    let o = polystab(&["gauge-eval", "0", "0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("phi(u)      0\n"), "{text}");
    assert!(text.contains("box max M   2.5"), "{text}");
}

#[test]
fn gauge_eval_normalizes_outside_points() {
    let v = json(&polystab(&[
        "gauge-eval",
        "--json",
        "--",
        "-1.5676316118301125",
        "-1.8865486042984602",
    ]));
    assert_eq!(v["member"], false);
    let w: Vec<f64> = v["normalized"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((w[0] + 0.681_317_364_895_425).abs() < 1e-12);
    assert!((w[1] + 0.8199237079221796).abs() < 1e-12);
}

#[test]
fn gauge_eval_wrong_dimension_is_config_error() {
    let o = polystab(&["gauge-eval", "1", "2", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn default_verify_passes() {
    let o = polystab(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    for check in ["clf", "scp", "tradeoff", "eps-limit", "containment"] {
        let line = text.lines().find(|l| l.starts_with(check)).unwrap();
        assert!(line.contains("PASS"), "{line}");
    }
    let v = json(&polystab(&["verify", "--json"]));
    assert_eq!(v["passed"], true);
}

#[test]
fn shrunk_box_lists_clf_violations() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[box]\nlower = [-0.1, -0.1]\nupper = [0.1, 0.1]\n");
    let o = polystab(&["verify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("clf          FAIL"), "{text}");
    assert!(
        text.lines().any(|l| l.trim_start().starts_with("x = (")),
        "{text}"
    );

    let v = json(&polystab(&["verify", "--json", "--config", &cfg]));
    assert_eq!(v["clf"]["passed"], false);
    let violations = v["clf"]["report"]["violations"].as_array().unwrap();
    assert!(!violations.is_empty());
    for viol in violations {
        assert!(viol["best_decrease"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn nonpositive_epsilon_is_config_error() {
    for eps in ["0", "-1"] {
        let o = polystab(&["verify", "--epsilon", eps]);
        assert_eq!(o.status.code(), Some(2), "ε = {eps}");
        assert!(stderr(&o).contains("epsilon"), "{}", stderr(&o));
    }
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "epsilon = -0.5\n");
    assert_eq!(
        polystab(&["verify", "--config", &cfg]).status.code(),
        Some(2)
    );
}

#[test]
fn malformed_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[sim]\ndt = \"fast\"\n");
    let o = polystab(&["verify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dt"), "{}", stderr(&o));

    let cfg = write_config(&dir, "example = \"pendulum\"\n");
    let o = polystab(&["portrait", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("example"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_io_error() {
    let o = polystab(&["verify", "--config", "/definitely/not/here.toml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn default_portrait_converges_and_has_schema() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("portrait.csv");
    let o = polystab(&["portrait", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("trajectories  16"), "{text}");
    assert!(text.contains("converged     16"), "{text}");

    let (header, rows) = read_csv(&out);
    assert_eq!(header.join(","), "traj_id,t,x1,x2,u1,u2,V");
    assert!(rows.iter().all(|r| r.len() == 7));
    let ids: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ids.len(), 16);
    // 17 significant digits in scientific notation
    let mantissa = rows[0][2].split('e').next().unwrap();
    assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17);
    for r in &rows {
        let u = [r[4].parse::<f64>().unwrap(), r[5].parse::<f64>().unwrap()];
        let phi = polystab::gauge::evaluate(&polystab::gauge::triangle_gauge(), &u).unwrap();
        assert!(phi <= 1.0 + 1e-12);
    }
}

#[test]
fn portrait_jobs_do_not_change_output() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(polystab(&["portrait", "--out", a.to_str().unwrap()])
        .status
        .success());
    assert!(
        polystab(&["portrait", "--jobs", "3", "--out", b.to_str().unwrap()])
            .status
            .success()
    );
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        polystab(&["portrait", "--jobs", "0", "--out", b.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn portrait_single_origin_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[grid]\nlower = [0.0, 0.0]\nupper = [0.0, 0.0]\ncounts = [1, 1]\n",
    );
    let out = dir.path().join("one.csv");
    let o = polystab(&[
        "portrait",
        "--json",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["trajectories"], 1);
    assert_eq!(v["converged"], 1);
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 1);
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("missing").join("portrait.csv");
    let o = polystab(&["portrait", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("portrait.csv"), "{}", stderr(&o));
}

#[test]
fn simulate_first_control_matches_reference() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim.csv");
    let o = polystab(&[
        "simulate",
        "--json",
        "--out",
        out.to_str().unwrap(),
        "1",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(&o)["converged"], true);
    let (header, rows) = read_csv(&out);
    assert_eq!(header.join(","), "traj_id,t,x1,x2,u1,u2,V");
    let u1: f64 = rows[0][4].parse().unwrap();
    let u2: f64 = rows[0][5].parse().unwrap();
    assert!((u1 + 0.68131).abs() < 1e-4 && (u2 + 0.81994).abs() < 1e-4);
}

#[test]
fn simulate_from_two_two_is_monotone() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim.csv");
    let v = json(&polystab(&[
        "simulate",
        "--json",
        "--out",
        out.to_str().unwrap(),
        "2",
        "2",
    ]));
    assert_eq!(v["converged"], true);
    assert_eq!(v["violation_count"], 0);
    let (_, rows) = read_csv(&out);
    let vs: Vec<f64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(vs.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn simulate_origin_and_bad_state() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim.csv");
    let v = json(&polystab(&[
        "simulate",
        "--json",
        "--out",
        out.to_str().unwrap(),
        "0",
        "0",
    ]));
    assert_eq!(v["converged"], true);
    assert_eq!(v["records"], 1);
    let o = polystab(&["simulate", "--out", out.to_str().unwrap(), "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dump_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "epsilon = 2.5\n[cvs]\nkind = \"ellipsoid\"\nmatrix = [[1.0, 0.2], [0.2, 3.0]]\n[sim]\ndt = 0.005\n",
    );
    let first = polystab(&["--dump-config", "--config", &cfg, "--epsilon", "0.75"]);
    assert!(first.status.success(), "{}", stderr(&first));
    let dumped = stdout(&first);
    let parsed = RunConfig::parse(&dumped).unwrap();
    assert_eq!(parsed.epsilon, 0.75);
    assert_eq!(parsed.sim.dt, 0.005);

    let again = write_config(&dir, &dumped);
    let second = polystab(&["--dump-config", "--config", &again]);
    assert_eq!(stdout(&second), dumped);
    assert_eq!(RunConfig::parse(&stdout(&second)).unwrap(), parsed);
}

#[test]
fn default_dump_is_the_default_config() {
    let o = polystab(&["--dump-config"]);
    assert_eq!(RunConfig::parse(&stdout(&o)).unwrap(), RunConfig::default());
}

#[test]
fn scalar_example_runs_end_to_end() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "example = \"scalar-unstable\"\n\
         [cvs]\nkind = \"weighted_l1\"\nweights = [1.0]\n\
         [box]\nlower = [-2.0]\nupper = [2.0]\n\
         [grid]\nlower = [-1.0]\nupper = [1.0]\ncounts = [3]\n\
         [verify.samples]\nlower = [-1.5]\nupper = [1.5]\ncounts = [9]\n",
    );
    let o = polystab(&["verify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let out = dir.path().join("scalar.csv");
    let v = json(&polystab(&[
        "portrait",
        "--json",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(v["converged"], 3);
    let (header, _) = read_csv(&out);
    assert_eq!(header.join(","), "traj_id,t,x1,u1,V");
}
