use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use twinswarm_cli::{AGGREGATE_HEADER, SUMMARY_HEADER, TIMESERIES_HEADER};

fn twinswarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinswarm")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn header(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().next().unwrap().split(',').map(str::to_owned).collect()
}

#[test]
fn help_exits_zero() {
    let o = twinswarm(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in ["--config", "--mode", "--agents", "--runs", "--seed", "--out", "--export-per-field", "--max-rounds", "--jobs"] {
        assert!(text.contains(flag), "help is missing {flag}");
    }
}

#[test]
fn unknown_mode_is_a_config_error_listing_valid_modes() {
    let o = twinswarm(&["--mode", "DT3"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for m in ["P2P", "DT1", "DT2", "RW1", "RW2"] {
        assert!(err.contains(m), "{err}");
    }
}

#[test]
fn bad_config_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[scenario]\nn_agents = 0\n").unwrap();
    let o = twinswarm(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n_agents"), "{}", stderr(&o));

    fs::write(&cfg, "[scenario]\nmode = \"DT9\"\n").unwrap();
    let o = twinswarm(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("valid modes"), "{}", stderr(&o));

    fs::write(&cfg, "[scenario]\nbogus_key = 3\n").unwrap();
    assert_eq!(twinswarm(&["--config", cfg.to_str().unwrap()]).status.code(), Some(1));

    let missing = dir.path().join("absent.toml");
    assert_eq!(twinswarm(&["--config", missing.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(twinswarm(&["--jobs", "0"]).status.code(), Some(1));
    assert_eq!(twinswarm(&["--agents", "0"]).status.code(), Some(1));
}

#[test]
fn map_file_with_target_in_obstacle_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("walled.toml"),
        "width = 600.0\nheight = 600.0\ncell_size = 5.0\ntarget = [320.0, 290.0]\nbase_station = [300.0, 300.0]\nobstacles = [[310.0, 280.0, 330.0, 300.0]]\n",
    )
    .unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[scenario]\nmap = \"walled.toml\"\n").unwrap();
    let out = dir.path().join("out");
    let o = twinswarm(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("out");
    let o = twinswarm(&["--runs", "1", "--max-rounds", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn sweep_writes_every_output_with_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = twinswarm(&[
        "--mode", "DT1,P2P",
        "--agents", "3,5",
        "--runs", "2",
        "--max-rounds", "40",
        "--seed", "11",
        "--out", out.to_str().unwrap(),
        "--export-per-field",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("[sweep]") && err.contains("[scenario]"), "effective config not echoed: {err}");

    assert_eq!(header(&out.join("summary.csv")), SUMMARY_HEADER);
    assert_eq!(header(&out.join("aggregate.csv")), AGGREGATE_HEADER);
    assert_eq!(header(&out.join("timeseries.csv")), TIMESERIES_HEADER);

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2 * 2);
    let aggregate = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().count(), 1 + 4);

    // Round counts in the time series match the summary.
    let mut rdr = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    let rounds: u64 = rdr.records().map(|r| r.unwrap()[5].parse::<u64>().unwrap()).sum();
    let series = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert_eq!(series.lines().count() as u64, 1 + rounds);

    let field = fs::read_to_string(out.join("per_field.csv")).unwrap();
    let rows: Vec<&str> = field.lines().collect();
    assert_eq!(rows.len(), 120);
    for row in rows {
        let vals: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals.len(), 120);
        assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    let effective = fs::read_to_string(out.join("effective_config.toml")).unwrap();
    let reparsed = twinswarm_cli::parse_config_str(&effective).unwrap();
    assert_eq!(reparsed.scenario.max_rounds, 40);
    assert_eq!(reparsed.sweep.runs, Some(2));
}

#[test]
fn per_field_export_honours_an_explicit_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let target = dir.path().join("field.csv");
    let o = twinswarm(&[
        "--runs", "1",
        "--agents", "2",
        "--max-rounds", "3",
        "--out", out.to_str().unwrap(),
        "--export-per-field", target.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(target.exists());
    assert!(!out.join("per_field.csv").exists());
}

#[test]
fn config_file_sweep_section_is_honoured_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    let out = dir.path().join("from_file");
    fs::write(
        &cfg,
        format!(
            "[scenario]\nmax_rounds = 10\n\n[scenario.pso]\nv_max = 7.5\n\n[sweep]\nmodes = [\"RW1\", \"DT2\"]\nagents = [4]\nruns = 2\nseed_base = 5\nout = {:?}\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = twinswarm(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let aggregate = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert!(aggregate.lines().any(|l| l.starts_with("RW1,4,2,")));
    assert!(aggregate.lines().any(|l| l.starts_with("DT2,4,2,")));

    let o = twinswarm(&["--config", cfg.to_str().unwrap(), "--mode", "P2P", "--runs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let aggregate = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().count(), 2);
    assert!(aggregate.lines().nth(1).unwrap().starts_with("P2P,4,1,"));
}
