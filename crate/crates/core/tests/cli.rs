use std::path::Path;
use std::process::{Command, Output};

use pvgrid::cli::exit;
use pvgrid::csv;
use pvgrid::presets::{self, PRESET_FILES};
use pvgrid::scenario_file::{parse_scenario, write_scenario};
use pvgrid::sim::{self, Channel};

fn pvgrid(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvgrid")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn preset_files_match_constructors() {
    for (i, text) in PRESET_FILES.iter().enumerate() {
        let case = i as u8 + 1;
        let from_file = parse_scenario(text).unwrap();
        let built = presets::preset(case).unwrap().unwrap();
        assert_eq!(from_file, built, "case {case}");
        let on_disk =
            std::fs::read_to_string(format!("{}/presets/case{case}.scn", env!("CARGO_MANIFEST_DIR"))).unwrap();
        assert_eq!(&on_disk, text);
    }
    assert!(presets::preset(0).is_none() && presets::preset(6).is_none());
}

#[test]
fn written_scenarios_parse_back() {
    for case in 1..=5 {
        let s = presets::preset(case).unwrap().unwrap();
        assert_eq!(parse_scenario(&write_scenario(&s)).unwrap(), s);
    }
}

/// `b` agrees with `a` to 6 significant digits of the channel's scale.
fn agrees(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 5e-6 * scale.max(f64::MIN_POSITIVE)
}

#[test]
fn csv_round_trip_preserves_summary() {
    let out = sim::run(&presets::case2().unwrap()).unwrap();
    let text = csv::to_string(&out.records);
    let back = csv::read_records(text.as_bytes()).unwrap();
    assert_eq!(back.len(), out.records.len());
    assert_eq!(csv::to_string(&back), text, "re-writing parsed records is lossless");
    let mem = sim::steady_state_summary(&out.records, 1.0).unwrap();
    let file = sim::steady_state_summary(&back, 1.0).unwrap();
    for c in Channel::ALL {
        let (m, f) = (mem.get(c), file.get(c));
        let scale = m.min.abs().max(m.max.abs());
        assert!(agrees(m.mean, f.mean, scale), "{}: {} vs {}", c.name(), m.mean, f.mean);
        assert!(agrees(m.min, f.min, scale) && agrees(m.max, f.max, scale), "{}", c.name());
    }
}

#[test]
fn case_summary_audit_flow() {
    let dir = tempfile::tempdir().unwrap();
    let o = pvgrid(&["case", "1", "--out", "c1.csv"], dir.path());
    assert_eq!(o.status.code(), Some(exit::OK), "{}", stderr(&o));
    let o = pvgrid(&["summary", "c1.csv", "--window", "1"], dir.path());
    assert_eq!(o.status.code(), Some(exit::OK));
    let table = stdout(&o);
    let mean = |name: &str| -> f64 {
        let line = table.lines().find(|l| l.split_whitespace().next() == Some(name)).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    assert!((mean("p_grid_kw") - 105.0).abs() <= 2.1);
    assert!((mean("p_bat_kw") + 10.0).abs() <= 1.0);
    assert!(table.contains("case1"));
    let o = pvgrid(&["audit", "c1.csv"], dir.path());
    assert_eq!(o.status.code(), Some(exit::OK), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("PASS"));
}

#[test]
fn run_matches_case_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let preset = format!("{}/presets/case4.scn", env!("CARGO_MANIFEST_DIR"));
    assert_eq!(pvgrid(&["run", &preset, "--out", "a.csv"], dir.path()).status.code(), Some(0));
    assert_eq!(pvgrid(&["case", "4", "--out", "b.csv"], dir.path()).status.code(), Some(0));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn run_writes_csv_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.scn"), "[meta]\nduration = 0.01\n").unwrap();
    let o = pvgrid(&["run", "s.scn"], dir.path());
    assert_eq!(o.status.code(), Some(exit::OK));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), csv::header());
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pvgrid(&["run", "missing.file"], dir.path());
    assert_eq!(o.status.code(), Some(exit::IO));
    assert!(stderr(&o).contains("file not found"));
    assert_eq!(pvgrid(&["audit", "nope.csv"], dir.path()).status.code(), Some(exit::IO));
}

#[test]
fn usage_and_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pvgrid(&["case", "6"], dir.path()).status.code(), Some(exit::PARSE));
    assert_eq!(pvgrid(&["frobnicate"], dir.path()).status.code(), Some(exit::PARSE));
    assert_eq!(pvgrid(&["summary", "x.csv"], dir.path()).status.code(), Some(exit::PARSE));
    std::fs::write(dir.path().join("bad.scn"), "[meta]\nduration = 1\n[battery]\nsoc_min=0.95 soc_max=0.20\n").unwrap();
    let o = pvgrid(&["run", "bad.scn"], dir.path());
    assert_eq!(o.status.code(), Some(exit::PARSE));
    assert!(stderr(&o).contains("bad.scn:4:1"), "{}", stderr(&o));
    assert!(stderr(&o).contains("soc_min < soc_max"));
    std::fs::write(dir.path().join("junk.csv"), "not,a,csv\n").unwrap();
    assert_eq!(pvgrid(&["summary", "junk.csv", "--window", "1"], dir.path()).status.code(), Some(exit::PARSE));
    let o = pvgrid(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(exit::OK));
    assert!(stdout(&o).contains("audit"));
}

#[test]
fn fault_run_writes_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = "[meta]\nduration = 3\n[battery]\ninitial_soc = 0.1\n[ems]\np_import_limit = 10\n\
                    [events]\nt=0.5 load 300\n";
    std::fs::write(dir.path().join("f.scn"), scenario).unwrap();
    let o = pvgrid(&["run", "f.scn", "--out", "f.csv"], dir.path());
    assert_eq!(o.status.code(), Some(exit::RUN_FAULT));
    assert!(stderr(&o).contains("FAULT"), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let rows = text.lines().count() - 1;
    assert!(rows > 500 && rows < 3000, "{rows}");
}

#[test]
fn audit_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = sim::run(&presets::case1().unwrap()).unwrap().records;
    records[100].balance_residual = 0.2;
    std::fs::write(dir.path().join("t.csv"), csv::to_string(&records)).unwrap();
    let o = pvgrid(&["audit", "t.csv"], dir.path());
    assert_eq!(o.status.code(), Some(exit::AUDIT_FAILURE));
    assert!(stdout(&o).starts_with("FAIL"));
    assert_eq!(pvgrid(&["audit", "t.csv", "--rated-kw", "1000"], dir.path()).status.code(), Some(exit::OK));
}

#[test]
fn exit_codes_are_distinct() {
    let codes = [exit::OK, exit::IO, exit::PARSE, exit::RUN_FAULT, exit::AUDIT_FAILURE];
    for (i, a) in codes.iter().enumerate() {
        assert!(codes[i + 1..].iter().all(|b| a != b));
    }
}
