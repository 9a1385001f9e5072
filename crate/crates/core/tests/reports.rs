use std::collections::BTreeMap;

use hdwalk::harness::{run_experiment, ExperimentConfig, Format, Report};

fn config(pairs: &[(&str, &str)]) -> ExperimentConfig {
    let map: BTreeMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    ExperimentConfig::from_pairs(&map).unwrap()
}

fn small_simulate(threads: &str) -> ExperimentConfig {
    config(&[
        ("experiment", "simulate"),
        ("model", "rotinv"),
        ("law", "twopoint:0.5"),
        ("n", "16"),
        ("d", "8"),
        ("reps", "200"),
        ("seed", "5"),
        ("threads", threads),
    ])
}

#[test]
fn json_round_trip_is_exact() {
    let report = run_experiment(&small_simulate("1")).unwrap();
    let text = report.to_json().unwrap();
    let mut back = Report::from_json(&text).unwrap();
    // Run-time settings are not part of the serialized config.
    back.config.threads = report.config.threads;
    assert_eq!(back, report);
}

#[test]
fn csv_layout() {
    let report = run_experiment(&small_simulate("1")).unwrap();
    let csv = report.to_csv().unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    let footer = report.footer_lines().unwrap().len();
    assert_eq!(lines.len(), 1 + report.rows.len() + footer);
    assert!(lines[0].starts_with("replicate,"));
    assert_eq!(lines[0].split(',').count(), report.columns.len() + 1);
    assert!(lines[1 + report.rows.len()..].iter().all(|l| l.starts_with('#')));
    // Every data value parses back to the stored double.
    for (row, line) in report.rows.iter().zip(&lines[1..]) {
        let parsed: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert_eq!(&parsed, row);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let one = run_experiment(&small_simulate("1")).unwrap();
    let eight = run_experiment(&small_simulate("8")).unwrap();
    for format in [Format::Csv, Format::Json] {
        assert_eq!(
            one.without_wall_clock().render(format).unwrap(),
            eight.without_wall_clock().render(format).unwrap()
        );
    }
    let ladder = |t: &str| {
        config(&[
            ("experiment", "align_check"),
            ("ladder", "32x32,64x64"),
            ("reps", "6"),
            ("seed", "9"),
            ("threads", t),
        ])
    };
    let a = run_experiment(&ladder("1")).unwrap().without_wall_clock();
    let b = run_experiment(&ladder("8")).unwrap().without_wall_clock();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn config_errors_are_reported() {
    let bad = |pairs: &[(&str, &str)]| {
        let map: BTreeMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        ExperimentConfig::from_pairs(&map)
    };
    assert!(bad(&[("experiment", "clt_model1"), ("n", "10"), ("d", "10"), ("bogus", "1")]).is_err());
    assert!(bad(&[("experiment", "clt_model2"), ("model", "iid"), ("n", "10"), ("d", "10")]).is_err());
    assert!(bad(&[("experiment", "clt_model1"), ("n", "10"), ("d", "10"), ("reps", "0")]).is_err());
    assert!(bad(&[("experiment", "no_such_thing")]).is_err());
}
