mod common;

use std::fs;

use pinn_osc::data::{generate_training_data, TrainingSet};
use pinn_osc::harness::{loss_csv, read_loss_csv, run_experiment, ExperimentConfig, RunReport, PREDICTION_HEADER};
use pinn_osc::network::{MlpConfig, ParameterVector};
use pinn_osc::problems::OscillatorProblem;
use pinn_osc::reference::rk4_integrate;
use pinn_osc::training::LossBreakdown;

#[test]
fn loss_history_round_trips_exactly() {
    let history: Vec<LossBreakdown> = (0..20)
        .map(|i| {
            let x = (i as f64 + 0.1).powf(-1.7) * std::f64::consts::PI;
            LossBreakdown {
                total: x,
                data: x / 3.0,
                governing: x * 1e-9,
                initial: 0.0,
                boundary: 0.0,
                regularization: 1e300,
            }
        })
        .collect();
    let text = loss_csv(&history);
    assert_eq!(read_loss_csv(&text).unwrap(), history);
    assert!(read_loss_csv("epoch,total\n1,2\n").is_err());
}

#[test]
fn training_set_round_trips_exactly() {
    let p = OscillatorProblem::van_der_pol(3.0);
    let reference = rk4_integrate(&p.to_first_order_system(), &p.initial_state(), 0.0, 1.5, 500).unwrap();
    let set = generate_training_data(&reference, [0.0, 0.75], 17, 0.08, 9).unwrap();
    let mut buf = Vec::new();
    set.write_csv(&mut buf).unwrap();
    let back = TrainingSet::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.points, set.points);
    assert_eq!(back.window, [set.points[0].0, set.points[16].0]);
}

#[test]
fn trajectory_csv_has_one_row_per_node() {
    let p = OscillatorProblem::duffing();
    let traj = rk4_integrate(&p.to_first_order_system(), &p.initial_state(), 0.0, 1.5, 40).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,u,du"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 41);
    for (row, (t, s)) in rows.iter().zip(traj.times.iter().zip(&traj.states)) {
        assert_eq!(row, &vec![*t, s[0], s[1]]);
    }
}

#[test]
fn parameters_round_trip_through_a_file() {
    let cfg = MlpConfig::new(2, 5).unwrap();
    let params = ParameterVector::init(&cfg, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("params.csv");
    params.save(&path).unwrap();
    assert_eq!(ParameterVector::load(&path).unwrap(), params);
}

#[test]
fn run_directory_is_self_describing() {
    let cfg = ExperimentConfig::from_json(&common::tiny_config_json()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&cfg, dir.path()).unwrap();

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    common::validate(&common::report_schema(), &json, "$").unwrap();
    let parsed: RunReport = serde_json::from_value(json).unwrap();
    assert_eq!(parsed, report);
    assert_eq!(parsed.config, cfg);

    for seed in &report.seeds {
        let loss = fs::read_to_string(dir.path().join(seed.loss_history.as_ref().unwrap())).unwrap();
        let history = read_loss_csv(&loss).unwrap();
        assert_eq!(history.len(), cfg.epochs);
        let metrics = seed.metrics.as_ref().unwrap();
        assert_eq!(metrics.epochs_run, cfg.epochs);

        let pred = fs::read_to_string(dir.path().join(seed.predictions.as_ref().unwrap())).unwrap();
        let mut lines = pred.lines();
        assert_eq!(lines.next(), Some(PREDICTION_HEADER));
        let rows: Vec<[f64; 3]> = lines
            .map(|l| {
                let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
                [v[0], v[1], v[2]]
            })
            .collect();
        assert_eq!(rows.len(), cfg.test_grid);
        // The prediction file reproduces the reported test MSE.
        let mse = rows.iter().map(|r| (r[1] - r[2]).powi(2)).sum::<f64>() / rows.len() as f64;
        assert!((mse - metrics.test_mse).abs() <= 1e-12 * metrics.test_mse.max(1e-300));
    }
}
