use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qhhg::photonics::HarmonicRange;
use qhhg::runner::{self, CachePolicy, RunConfig, SectorChoice, SectorName};

fn small_config(dir: &Path, sites: usize, cycles: u32) -> RunConfig {
    let mut cfg = RunConfig::standard(sites, cycles);
    cfg.photonics.p_truncation = 8;
    cfg.photonics.harmonics = HarmonicRange { start: 1.0, stop: 15.0, step: 1.0 };
    cfg.output.dir = dir.join("out");
    cfg
}

fn run_cli(dir: &Path, cfg: &RunConfig, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_qhhg"))
        .arg("--config")
        .arg(&path)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn diagonalize_two_sites_against_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 2, 2);
    cfg.sector = SectorChoice::Named(SectorName::Full);
    let out = run_cli(dir.path(), &cfg, &["diagonalize"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("full dimension 4"), "{text}");
    // Two sites with the doubled wrap bond: singlet energy U/2 - sqrt(U^2/4 + 4(2t0)^2).
    let (t, u) = (cfg.model.hopping, cfg.model.onsite_u);
    let oracle = u / 2.0 - (u * u / 4.0 + 16.0 * t * t).sqrt();
    let e0: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("ground energy "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((e0 - oracle).abs() < 1e-10, "{e0} vs {oracle}");
    assert!(!text.contains("from cache"));

    let again = run_cli(dir.path(), &cfg, &["diagonalize"]);
    assert!(stdout(&again).contains("loaded from cache"));
    let forced = run_cli(dir.path(), &cfg, &["diagonalize", "--force"]);
    assert!(!stdout(&forced).contains("from cache"));
}

#[test]
fn invalid_configs_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 2, 2);
    cfg.model.sites = 1;
    let out = run_cli(dir.path(), &cfg, &["diagonalize"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));

    let path = dir.path().join("typo.toml");
    let text = small_config(dir.path(), 2, 2).to_toml_string().unwrap().replace("t0_au", "t_au");
    fs::write(&path, text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qhhg")).arg("--config").arg(&path).arg("diagonalize").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let cfg = small_config(dir.path(), 2, 2);
    let out = run_cli(dir.path(), &cfg, &["observables", "--levels", "1,7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn observables_table_is_deterministic_and_comparable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 4, 2);
    let first = run_cli(dir.path(), &cfg, &["observables"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let csv_path = cfg.output.dir.join("observables.csv");
    let a = fs::read(&csv_path).unwrap();
    let summary_a = fs::read(cfg.output.dir.join("summary.json")).unwrap();

    // Second run reads both caches; third recomputes everything.
    let second = run_cli(dir.path(), &cfg, &["observables"]);
    assert!(second.status.success());
    assert_eq!(fs::read(&csv_path).unwrap(), a);
    let third = run_cli(dir.path(), &cfg, &["observables", "--force", "--threads", "2"]);
    assert!(third.status.success());
    assert_eq!(fs::read(&csv_path).unwrap(), a);
    assert_eq!(fs::read(cfg.output.dir.join("summary.json")).unwrap(), summary_a);

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega_over_omegaL,level,S,Q,eta,n_mean,flags,Q_all"));
    assert_eq!(lines.count(), 4 * 15);

    let summary: serde_json::Value = serde_json::from_slice(&summary_a).unwrap();
    assert_eq!(summary["levels"].as_array().unwrap().len(), 4);
    assert!(summary["msa_semiclassical_max_rel"].as_f64().unwrap() < 1e-10);

    let cmp = run_cli(dir.path(), &cfg, &["compare"]);
    assert!(cmp.status.success(), "{}", String::from_utf8_lossy(&cmp.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(cfg.output.dir.join("compare.json")).unwrap()).unwrap();
    assert_eq!(report["baseline"], 1);
    for level in ["2", "3", "4"] {
        assert_eq!(report["levels"][level].as_array().unwrap().len(), 2);
    }
}

#[test]
fn compare_reports_missing_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 4, 2);
    let out = run_cli(dir.path(), &cfg, &["compare"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `observables` first"));

    let out = run_cli(dir.path(), &cfg, &["observables", "--levels", "2,4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_cli(dir.path(), &cfg, &["compare"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("available: 2, 4"), "{err}");
}

#[test]
fn level_compared_with_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 4, 2);
    cfg.photonics.levels = vec![2, 3];
    cfg.compare.baseline = 3;
    let ev = runner::evaluate(&cfg, &CachePolicy::default()).unwrap();
    let report = runner::compare_levels(&cfg, &ev.levels, &[3]).unwrap();
    for m in &report.levels[&3] {
        assert_eq!((m.mean_abs_dq, m.mean_abs_deta, m.mean_abs_dq_all), (0.0, 0.0, 0.0));
    }
}

#[test]
fn level_one_needs_full_currents() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 4, 2);
    cfg.photonics.levels = vec![2];
    let policy = CachePolicy::from_config(&cfg, false);
    let el = runner::electronic(&cfg, &policy).unwrap();
    let rec = runner::currents(&cfg, &el, cfg.record_mode(), &policy).unwrap();
    let grid = cfg.mode_grid().unwrap();
    let err = runner::level_observables(&rec, &grid, 1, &cfg.photonics).unwrap_err().to_string();
    assert!(err.contains("full current record"), "{err}");
}

#[test]
fn sweep_writes_one_report_per_pulse_length() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 4, 2);
    cfg.photonics.levels = vec![1, 4];
    cfg.sweep.cycles = vec![2, 3];
    let out = run_cli(dir.path(), &cfg, &["sweep-nc"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for nc in ["nc_02", "nc_03"] {
        assert!(cfg.output.dir.join(nc).join("compare.json").exists());
        assert!(cfg.output.dir.join(nc).join("observables.csv").exists());
    }
    let sweep: serde_json::Value =
        serde_json::from_slice(&fs::read(cfg.output.dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["reports"].as_array().unwrap().len(), 2);
    assert_eq!(sweep["q_non_decreasing"]["4"].as_array().unwrap().len(), 2);
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let chain8 = RunConfig::load(&dir.join("chain8.toml")).unwrap();
    assert_eq!(chain8, {
        let mut cfg = RunConfig::standard(8, 10);
        cfg.output.dir = "out/chain8".into();
        cfg
    });
    let quick = RunConfig::load(&dir.join("quick.toml")).unwrap();
    assert_eq!(quick.mode_grid().unwrap().len(), 237);
}
