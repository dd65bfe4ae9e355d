use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use v2x::config::Experiment;
use v2x::error::exit;
use v2x::traces::{read_traces, write_traces};

const SMALL: &str = r#"
[scenario]
days = 2
history_days = 1
seed = 11
communities = [{ node = 4, prosumers = 2 }, { node = 25, prosumers = 1 }]
"#;

fn v2x(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_v2x")).args(args).output().unwrap()
}

fn code(o: &Output) -> u8 {
    o.status.code().unwrap() as u8
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Rows of `slots` values for each `(prosumer, day)`.
fn trace_rows(keys: &[(usize, i64)], slots: usize, value: f64) -> BTreeMap<(usize, i64), Vec<f64>> {
    keys.iter().map(|&k| (k, vec![value; slots])).collect()
}

#[test]
fn run_twice_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = v2x(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (fa, fb) = (files_under(&a), files_under(&b));
    let names: Vec<_> = fa.keys().map(|p| p.to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["ledgers/day_0.csv", "ledgers/day_1.csv", "summary.json"]);
    assert_eq!(fa, fb);

    let ledger = String::from_utf8(fa[Path::new("ledgers/day_0.csv")].clone()).unwrap();
    assert_eq!(ledger.lines().count(), 1 + 3 * 24);
    assert!(ledger.starts_with("prosumer_id,slot,p_grid,"));
    let summary: serde_json::Value = serde_json::from_slice(&fa[Path::new("summary.json")]).unwrap();
    assert_eq!(summary["assumptions"]["arrival_hour"], 18.0);
    assert_eq!(summary["assumptions"]["day_start_hour"], 12.0);
    assert_eq!(summary["prosumers"], 3);
    assert_eq!(summary["days"].as_array().unwrap().len(), 2);

    // a different seed changes the results
    let c = tmp.path().join("c");
    v2x(&["run", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(files_under(&c)[Path::new("summary.json")], fa[Path::new("summary.json")]);
}

#[test]
fn jobs_do_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    v2x(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--jobs", "1"]);
    v2x(&["run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(files_under(&a), files_under(&b));
}

#[test]
fn broken_csv_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let rows = trace_rows(&[(0, 0), (1, 0)], 24, 0.5);
    let csv = tmp.path().join("load.csv");
    write_traces(&csv, &rows).unwrap();
    let text = fs::read_to_string(&csv).unwrap();
    let without_13: String = text.lines().filter(|l| *l != "1,0,13,0.5").map(|l| format!("{l}\n")).collect();
    fs::write(&csv, without_13).unwrap();
    let cfg = write_config(tmp.path(), "[data]\nload = \"load.csv\"\n");

    let o = v2x(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), exit::DATA);
    assert_ne!(exit::DATA, exit::SOLVER);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("error[gap]") && err.contains("prosumer 1 day 0") && err.contains("slot 13"), "{err}");

    // the same rows complete are accepted
    write_traces(&csv, &rows).unwrap();
    assert_eq!(code(&v2x(&["validate", "--config", cfg.to_str().unwrap()])), exit::OK);
}

#[test]
fn each_trace_defect_has_its_own_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("t.csv");
    let cases = [
        ("prosumer_id,day,slot,kw\n0,0,0,1\n0,0,1,-0.2\n", "negative"),
        ("prosumer_id,day,slot\n0,0,0\n", "schema"),
        ("prosumer_id,day,slot,kw\n0,0,0,abc\n", "schema"),
        ("prosumer_id,day,slot,kw\n0,0,0,1\n0,0,0,1\n", "duplicate"),
        ("prosumer_id,day,slot,kw\n0,0,0,1\n", "gap"),
        ("prosumer_id,day,slot,kw\n0,0,2,1\n", "range"),
    ];
    for (text, kind) in cases {
        fs::write(&p, text).unwrap();
        let e = read_traces(&p, 2).unwrap_err();
        assert_eq!(e.kind(), kind, "{text}: {e}");
        assert_eq!(e.exit_code(), exit::DATA);
    }
}

#[test]
fn zeros_file_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    // every prosumer on both days plus the history day
    let keys: Vec<(usize, i64)> = (0..3).flat_map(|u| [(u, -1), (u, 0), (u, 1)]).collect();
    write_traces(&tmp.path().join("zeros.csv"), &trace_rows(&keys, 24, 0.0)).unwrap();
    let cfg = write_config(tmp.path(), "[data]\nload = \"zeros.csv\"\npv = \"zeros.csv\"\n");
    assert_eq!(code(&v2x(&["validate", "--config", cfg.to_str().unwrap()])), exit::OK);

    let loaded = v2x::load(&Experiment::load(&cfg).unwrap()).unwrap();
    let sc = &loaded.scenario;
    for day in &sc.days {
        for p in &day.prosumers {
            assert!(p.load_trace.iter().chain(&p.pv_cap_trace).all(|v| *v == 0.0));
        }
    }
    assert!(sc.history[0].load.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn traces_override_only_listed_prosumers() {
    let tmp = tempfile::tempdir().unwrap();
    write_traces(&tmp.path().join("load.csv"), &trace_rows(&[(2, 1)], 24, 1.25)).unwrap();
    let cfg = write_config(tmp.path(), "[data]\nload = \"load.csv\"\n");
    let with = v2x::load(&Experiment::load(&cfg).unwrap()).unwrap().scenario;
    let without = v2x::load(&Experiment::from_toml(SMALL, &cfg).unwrap()).unwrap().scenario;
    assert_eq!(with.days[1].prosumers[2].load_trace, vec![1.25; 24]);
    assert_eq!(with.days[0], without.days[0]);
    assert_eq!(with.days[1].prosumers[..2], without.days[1].prosumers[..2]);
    assert_eq!(with.days[1].prosumers[2].pv_cap_trace, without.days[1].prosumers[2].pv_cap_trace);

    write_traces(&tmp.path().join("load.csv"), &trace_rows(&[(3, 0)], 24, 1.0)).unwrap();
    let o = v2x(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), exit::DATA);
    assert!(String::from_utf8_lossy(&o.stderr).contains("prosumer 3 does not exist"));
}

#[test]
fn baselines_table_has_eight_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("one.toml");
    fs::write(
        &cfg,
        "[scenario]\ndays = 1\nhistory_days = 0\ncommunities = [{ node = 4, prosumers = 2 }]\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = v2x(&["baselines", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("baselines.csv")).unwrap();
    let names: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        names,
        ["full", "v2h_alone", "v2g_alone", "et_alone", "without_v2h", "without_v2g", "without_et", "reference"]
    );
    let reduction = |row: &str| row.rsplit(',').next().unwrap().parse::<f64>().unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(reduction(rows[7]), 0.0);
    assert!(rows.iter().all(|r| reduction(r) <= reduction(rows[0]) + 1e-6));
    let marginals = fs::read_to_string(out.join("marginals.csv")).unwrap();
    assert_eq!(marginals.lines().count(), 4);
}

#[test]
fn dump_problem_writes_the_triplets() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("out");
    for slot in ["0", "10"] {
        let o = v2x(&[
            "dump-problem",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--day",
            "1",
            "--slot",
            slot,
        ]);
        assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let full = fs::read_to_string(out.join("problems/day_1_slot_0.txt")).unwrap();
    let tail = fs::read_to_string(out.join("problems/day_1_slot_10.txt")).unwrap();
    assert!(full.starts_with("qp ") && tail.starts_with("qp "));
    let vars = |s: &str| s.split_whitespace().nth(1).unwrap().parse::<usize>().unwrap();
    assert!(vars(&tail) < vars(&full));

    let o = v2x(&["dump-problem", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--day", "5"]);
    assert_eq!(code(&o), exit::DATA);
}

#[test]
fn bad_arguments_and_configs() {
    let o = v2x(&["run", "--streams", "v2h,solar"]);
    assert_eq!(code(&o), 2);
    let o = v2x(&["fly"]);
    assert_eq!(code(&o), 2);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[scenario]\ndayz = 3\n").unwrap();
    let o = v2x(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), exit::CONFIG);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dayz"));

    fs::write(&cfg, "[scenario]\ncommunities = [{ node = 40, prosumers = 1 }]\n").unwrap();
    assert_eq!(code(&v2x(&["validate", "--config", cfg.to_str().unwrap()])), exit::DATA);

    let o = v2x(&["validate", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(code(&o), exit::IO);
}

#[test]
fn overrides_reach_the_scenario() {
    use clap::Parser;
    use v2x::cli::Cli;
    use v2x_core::model::TariffKind;
    use v2x_core::optimizer::MiqpMode;
    use v2x_core::scenario::MarketKind;

    let cli = Cli::parse_from([
        "v2x", "run", "--seed", "9", "--tariff", "tpt", "--market", "isone", "--streams", "v2g,et", "--mode", "branch",
    ]);
    let exp = cli.common.experiment().unwrap();
    assert_eq!(exp.scenario.seed, 9);
    assert_eq!(exp.scenario.tariff, TariffKind::Tpt);
    assert_eq!(exp.scenario.market, MarketKind::Isone);
    assert_eq!(exp.scenario.streams.label(), "v2g+et");
    assert_eq!(exp.solver.mode, MiqpMode::Branch);
    assert_eq!(v2x::cli::parse_streams("none").unwrap().label(), "none");
}

#[test]
fn experiment_survives_toml() {
    let exp = Experiment::from_toml(SMALL, Path::new("x.toml")).unwrap();
    let back = Experiment::from_toml(&exp.to_toml(), Path::new("x.toml")).unwrap();
    assert_eq!(back, exp);
    assert_eq!(Experiment::from_toml("", Path::new("x.toml")).unwrap(), Experiment::default());
}

#[test]
fn saved_forecasts_replay_the_same_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let first = tmp.path().join("first");
    let o = v2x(&["run", "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap(), "--save-forecasts"]);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));

    // both days in one file
    let mut merged = fs::read_to_string(first.join("forecasts/day_0.csv")).unwrap();
    merged.extend(fs::read_to_string(first.join("forecasts/day_1.csv")).unwrap().lines().skip(1).map(|l| format!("{l}\n")));
    fs::write(tmp.path().join("saved.csv"), merged).unwrap();
    let replay_cfg = tmp.path().join("replay.toml");
    fs::write(&replay_cfg, format!("{SMALL}[data]\nforecasts = \"saved.csv\"\n")).unwrap();
    let second = tmp.path().join("second");
    let o = v2x(&["run", "--config", replay_cfg.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    for d in 0..2 {
        let name = format!("ledgers/day_{d}.csv");
        assert_eq!(fs::read(first.join(&name)).unwrap(), fs::read(second.join(&name)).unwrap());
    }
}
