use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tvfilter::harness::{
    Algorithm, CsvStream, ExperimentConfig, LinearParamSpec, ProblemSpec, Regime, StreamSource, SweepConfig,
};
use tvfilter::operators::PredictorKind;
use tvfilter::problem::{NoiseModel, Nominal, Regularizer, SinusoidTerm, StreamSpec};

fn tvfilter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvfilter")).args(args).output().expect("binary runs")
}

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::synthetic_default();
    cfg.problem = ProblemSpec::LinearParam(LinearParamSpec {
        hessian: vec![vec![2.0, 0.3], vec![0.3, 1.0]],
        b: vec![0.5, -0.5],
        a: vec![vec![-1.0, 0.0], vec![0.0, -0.5]],
        regularizer: Regularizer::Zero,
    });
    cfg.stream = StreamSource::Synthetic(StreamSpec {
        h: 0.1,
        horizon: 200,
        nominal: Nominal::SinusoidMixture {
            offset: vec![1.0, -1.0],
            terms: vec![SinusoidTerm { amplitude: vec![1.0, 0.5], omega: 0.5, phase: 0.0 }],
        },
        noise: NoiseModel::Isotropic { variance: 0.05 },
        seed: 0,
    });
    cfg.steps = None;
    cfg.regime = Regime::ExtrapolationA;
    cfg.predictor = PredictorKind::TwoPoint;
    cfg.with_algorithm(Algorithm::Pc, 2, 1)
}

fn write_json(path: &Path, value: &impl serde::Serialize) {
    fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

#[test]
fn run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    write_json(&cfg_path, &small_config());
    let csv_path = dir.path().join("out.csv");
    let steps_path = dir.path().join("steps.csv");
    let out = tvfilter(&[
        "run",
        "--config",
        cfg_path.to_str().unwrap(),
        "--algorithm",
        "tv_ekf",
        "--out",
        csv_path.to_str().unwrap(),
        "--per-step",
        steps_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "regime,algorithm,P,C,mean_err,p25,p75,ae_bound,wall_ms");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("extrapolation_a,tv_ekf,2,1,"));
    assert_eq!(fs::read_to_string(&steps_path).unwrap().lines().count(), 201);

    let out = tvfilter(&["run", "--config", cfg_path.to_str().unwrap(), "--format", "json", "--seed", "3"]);
    assert!(out.status.success());
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reports[0]["seed"], 3);
    assert_eq!(reports[0]["per_step_err"].as_array().unwrap().len(), 200);
}

#[test]
fn designed_run_reports_a_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    write_json(&cfg_path, &small_config());
    let out = tvfilter(&["run", "--config", cfg_path.to_str().unwrap(), "--algorithm", "tv_contract", "--design", "static"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = stdout.lines().nth(1).unwrap().split(',').collect();
    assert!(row[7].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn sweep_expands_cells_and_summarizes() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = SweepConfig {
        base: small_config(),
        algorithms: vec![Algorithm::Pc, Algorithm::StochCorrectionOnly],
        step_counts: vec![[1, 1], [3, 1]],
        regimes: vec![],
        seeds: vec![0, 1],
    };
    let cfg_path = dir.path().join("sweep.json");
    write_json(&cfg_path, &sweep);
    let summary = dir.path().join("summary.csv");
    let out = tvfilter(&["sweep", "--config", cfg_path.to_str().unwrap(), "--summary", summary.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // Per seed: pc at two (P, C) pairs, stoch once.
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1 + 2 * 3);
    assert_eq!(fs::read_to_string(&summary).unwrap().lines().count(), 1 + 3);
}

#[test]
fn design_from_params_writes_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.json");
    fs::write(&params, r#"{"omega1": 0.5, "omega2": 0.5, "q": 0.3, "r": 1.0, "delta": 0.1}"#).unwrap();
    let cert_path = dir.path().join("cert.json");
    let out = tvfilter(&["design", "--params", params.to_str().unwrap(), "--dim", "3", "--out", cert_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cert: tvfilter::design::GainCertificate = serde_json::from_str(&fs::read_to_string(&cert_path).unwrap()).unwrap();
    assert!(cert.verify().unwrap());
    assert_eq!(cert.params_echo.dim, 3);
}

#[test]
fn ground_truth_from_csv_stream() {
    let dir = tempfile::tempdir().unwrap();
    let mut data = String::from("t,y1,y2\n");
    for k in 0..50 {
        let t = k as f64 * 0.5;
        data.push_str(&format!("{t},{},{}\n", t.sin(), (0.3 * t).cos()));
    }
    fs::write(dir.path().join("stream.csv"), data).unwrap();
    let mut cfg = small_config();
    cfg.stream = StreamSource::Csv(CsvStream { csv_path: "stream.csv".into(), smoothing_window: 5 });
    let cfg_path = dir.path().join("cfg.json");
    write_json(&cfg_path, &cfg);
    let out = tvfilter(&["ground-truth", "--config", cfg_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "k,t,x1,x2");
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"problem": {"kind": "ride_hail"}, "bogus": 1}"#).unwrap();
    assert_eq!(tvfilter(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(tvfilter(&["run", "--p", "0", "--c", "0"]).status.code(), Some(2));
    assert_eq!(tvfilter(&["run", "--config", "/definitely/missing.json"]).status.code(), Some(4));

    let params = dir.path().join("params.json");
    fs::write(&params, r#"{"omega1": 0.9999, "omega2": 0.9999, "q": 0.3, "r": 1.0, "delta": 0.1}"#).unwrap();
    assert_eq!(tvfilter(&["design", "--params", params.to_str().unwrap()]).status.code(), Some(3));

    let mut cfg = small_config();
    cfg.stream = StreamSource::Csv(CsvStream { csv_path: "nowhere.csv".into(), smoothing_window: 5 });
    let cfg_path = dir.path().join("cfg.json");
    write_json(&cfg_path, &cfg);
    assert_eq!(tvfilter(&["ground-truth", "--config", cfg_path.to_str().unwrap()]).status.code(), Some(4));
}
