//! Configuration, caching and the end-to-end pipeline behind the CLI.

mod cache;
mod config;
mod report;

pub use cache::{
    content_hash, current_cache_path, current_hash, eigen_cache_path, eigen_hash, read_eigen_cache,
    write_eigen_cache, EigenCacheHeader, EIGEN_CACHE_VERSION,
};
pub use config::{CompareConfig, OutputConfig, PhotonicsConfig, RunConfig, SectorChoice, SectorName, SweepConfig};
pub use report::{read_observables_csv, write_observables_csv, ObservableRow};

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{build_basis, DrivenHubbard, SymmetrySector};
use crate::observables::{
    deviation_metrics, emission_prefactor, hierarchy_observables, msa_observables, semiclassical_spectrum,
    DeviationMetrics, ModeObservables,
};
use crate::photonics::{
    integrated_currents, msa_quantities, solve_level1_decoupled, solve_level2_groundrow, solve_level3_markov,
    ModeGrid,
};
use crate::propagate::{
    propagate_and_record, read_current_cache, write_current_cache, CurrentCacheHeader, CurrentRecord, RecordMode,
    CURRENT_CACHE_VERSION,
};
use crate::spectral::{diagonalize, ground_sector, EigenSystem};

/// Where caches live and whether to trust them.
#[derive(Clone, Debug, Default)]
pub struct CachePolicy {
    /// `None` disables caching.
    pub dir: Option<PathBuf>,
    /// Recompute and overwrite even when a matching cache exists.
    pub force: bool,
}

impl CachePolicy {
    pub fn from_config(cfg: &RunConfig, force: bool) -> Self {
        Self { dir: Some(cfg.cache_dir()), force }
    }

    fn usable(&self, path: &std::path::Path) -> bool {
        !self.force && path.exists()
    }
}

pub fn resolve_sector(cfg: &RunConfig) -> Result<Option<SymmetrySector>> {
    Ok(match &cfg.sector {
        SectorChoice::Named(SectorName::Full) => None,
        SectorChoice::Named(SectorName::Ground) => Some(ground_sector(&cfg.model)?),
        SectorChoice::Explicit(s) => Some(*s),
    })
}

/// The field-free electronic problem.
pub struct Electronic {
    pub sector: Option<SymmetrySector>,
    pub full_dim: usize,
    pub sys: DrivenHubbard,
    pub eig: EigenSystem,
    pub from_cache: bool,
}

pub fn electronic(cfg: &RunConfig, policy: &CachePolicy) -> Result<Electronic> {
    let sector = resolve_sector(cfg)?;
    let basis = build_basis(&cfg.model, sector)?;
    let full_dim = build_basis(&cfg.model, None)?.dim();
    let sys = DrivenHubbard::new(&basis)?;
    let hash = eigen_hash(&cfg.model, sector)?;
    if let Some(dir) = &policy.dir {
        let path = eigen_cache_path(dir, &hash);
        if policy.usable(&path) {
            let (_, eig) = read_eigen_cache(&path, &hash)?;
            if eig.dim() != sys.dim() {
                return Err(Error::DimensionMismatch { expected: sys.dim(), found: eig.dim() });
            }
            log::info!("eigensystem cache hit: {}", path.display());
            return Ok(Electronic { sector, full_dim, sys, eig, from_cache: true });
        }
    }
    let eig = diagonalize(&sys.hamiltonian(0.0))?;
    if let Some(dir) = &policy.dir {
        fs::create_dir_all(dir)?;
        let header = EigenCacheHeader {
            format_version: EIGEN_CACHE_VERSION,
            model: cfg.model.clone(),
            sector,
            dim: eig.dim(),
            n_states: eig.len(),
            config_hash: hash.clone(),
        };
        write_eigen_cache(&eigen_cache_path(dir, &hash), &header, &eig)?;
    }
    Ok(Electronic { sector, full_dim, sys, eig, from_cache: false })
}

fn current_header(cfg: &RunConfig, el: &Electronic, mode: RecordMode, n_samples: usize) -> Result<CurrentCacheHeader> {
    Ok(CurrentCacheHeader {
        format_version: CURRENT_CACHE_VERSION,
        model: cfg.model.clone(),
        sector: el.sector,
        pulse: cfg.pulse.clone(),
        propagation: cfg.propagation.clone(),
        mode,
        n_states: el.eig.len(),
        n_samples,
        config_hash: current_hash(&cfg.model, el.sector, &cfg.pulse, &cfg.propagation, mode)?,
    })
}

/// Transition currents for `cfg`, from cache when a matching one exists.
pub fn currents(cfg: &RunConfig, el: &Electronic, mode: RecordMode, policy: &CachePolicy) -> Result<CurrentRecord> {
    let grid = crate::propagate::TimeGrid::new(&cfg.pulse, &cfg.propagation)?;
    let header = current_header(cfg, el, mode, grid.n_samples())?;
    let path = policy.dir.as_ref().map(|d| current_cache_path(d, &header.config_hash));
    if let Some(path) = &path {
        if policy.usable(path) {
            let (_, rec) = read_current_cache(path, Some(&header))?;
            log::info!("current cache hit: {}", path.display());
            return Ok(rec);
        }
    }
    let rec = propagate_and_record(&el.sys, &el.eig, &cfg.pulse, &cfg.propagation, mode)?;
    if let Some(path) = &path {
        fs::create_dir_all(path.parent().unwrap())?;
        write_current_cache(path, &header, &rec)?;
    }
    Ok(rec)
}

/// Per-mode observables at one level of the hierarchy, in grid order.
pub fn level_observables(
    rec: &CurrentRecord,
    grid: &ModeGrid,
    level: u8,
    ph: &PhotonicsConfig,
) -> Result<Vec<ModeObservables>> {
    if level == 1 && rec.mode() != RecordMode::Full {
        return Err(Error::MissingInput(
            "level 1 needs a full current record; rerun propagate with level 1 selected".into(),
        ));
    }
    let p = ph.p_truncation;
    let out: Vec<ModeObservables> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let mode = grid.mode(k);
            Ok(match level {
                1 => hierarchy_observables(&solve_level1_decoupled(rec, mode, p)?, ph.photon_state, ph.q_floor),
                2 => hierarchy_observables(&solve_level2_groundrow(rec, mode, p)?, ph.photon_state, ph.q_floor),
                3 => hierarchy_observables(&solve_level3_markov(rec, mode, p)?, ph.photon_state, ph.q_floor),
                4 => {
                    let q = msa_quantities(&integrated_currents(rec, mode)?);
                    msa_observables(&q, mode.omega, mode.g0, ph.q_floor)
                }
                _ => return Err(Error::Config(format!("unknown level {level}"))),
            })
        })
        .collect::<Result<_>>()?;
    let count = |f: fn(&ModeObservables) -> bool| out.iter().filter(|o| f(o)).count();
    let trunc = count(|o| o.flags.truncation);
    if trunc > 0 {
        log::warn!("level {level}: {trunc} modes have Fock population at the truncation edge");
    }
    let loss = count(|o| o.flags.markov_norm_loss);
    if loss > 0 {
        log::warn!("level {level}: {loss} modes lost more than 10% norm (Markov approximation questionable)");
    }
    let var = count(|o| o.flags.invalid_variance);
    if var > 0 {
        log::warn!("level {level}: {var} modes have a non-positive minimized quadrature variance");
    }
    Ok(out)
}

/// Observables at every requested level plus the semiclassical spectrum.
pub struct Evaluation {
    pub grid: ModeGrid,
    pub levels: BTreeMap<u8, Vec<ModeObservables>>,
    /// `ω²|ĵ̃_{i,i}|²/((2π)²c³)` per mode.
    pub semiclassical: Vec<f64>,
}

pub fn evaluate(cfg: &RunConfig, policy: &CachePolicy) -> Result<Evaluation> {
    let el = electronic(cfg, policy)?;
    let rec = currents(cfg, &el, cfg.record_mode(), policy)?;
    evaluate_record(cfg, &rec)
}

pub fn evaluate_record(cfg: &RunConfig, rec: &CurrentRecord) -> Result<Evaluation> {
    let grid = cfg.mode_grid()?;
    let mut levels = BTreeMap::new();
    for level in cfg.levels() {
        levels.insert(level, level_observables(rec, &grid, level, &cfg.photonics)?);
    }
    let pre = emission_prefactor();
    let semiclassical = semiclassical_spectrum(rec, &grid).into_iter().map(|s| s * pre).collect();
    Ok(Evaluation { grid, levels, semiclassical })
}

#[derive(Debug, Serialize)]
struct LevelSummary {
    level: u8,
    modes: usize,
    peak_s: f64,
    peak_harmonic: f64,
    modes_with_q: usize,
    truncation_flags: usize,
    markov_norm_loss_flags: usize,
    invalid_variance_flags: usize,
}

#[derive(Debug, Serialize)]
struct ObservablesSummary {
    config_hash: String,
    sites: usize,
    cycles: u32,
    g0_au: f64,
    p_truncation: usize,
    levels: Vec<LevelSummary>,
    /// Largest relative gap between the level-4 and semiclassical spectra.
    msa_semiclassical_max_rel: Option<f64>,
}

fn summarize(cfg: &RunConfig, ev: &Evaluation) -> Result<ObservablesSummary> {
    let omega_l = cfg.pulse.omega;
    let levels = ev
        .levels
        .iter()
        .map(|(&level, obs)| {
            let peak = obs.iter().max_by(|a, b| a.s.total_cmp(&b.s)).unwrap();
            LevelSummary {
                level,
                modes: obs.len(),
                peak_s: peak.s,
                peak_harmonic: peak.omega / omega_l,
                modes_with_q: obs.iter().filter(|o| o.q.is_some()).count(),
                truncation_flags: obs.iter().filter(|o| o.flags.truncation).count(),
                markov_norm_loss_flags: obs.iter().filter(|o| o.flags.markov_norm_loss).count(),
                invalid_variance_flags: obs.iter().filter(|o| o.flags.invalid_variance).count(),
            }
        })
        .collect();
    let msa_semiclassical_max_rel = ev.levels.get(&4).map(|obs| {
        obs.iter()
            .zip(&ev.semiclassical)
            .filter(|(o, _)| o.s > 0.0)
            .map(|(o, s)| (o.s - s).abs() / o.s)
            .fold(0.0, f64::max)
    });
    Ok(ObservablesSummary {
        config_hash: content_hash(cfg)?,
        sites: cfg.model.sites,
        cycles: cfg.pulse.cycles,
        g0_au: cfg.photonics.g0_au,
        p_truncation: cfg.photonics.p_truncation,
        levels,
        msa_semiclassical_max_rel,
    })
}

fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_diagonalize(cfg: &RunConfig, policy: &CachePolicy) -> Result<Electronic> {
    let el = electronic(cfg, policy)?;
    let sector = match el.sector {
        Some(s) => format!("momentum {} parity {:+}", s.total_momentum, s.spin_parity),
        None => "full basis".into(),
    };
    println!("full dimension {}", el.full_dim);
    println!("sector {sector}: dimension {}", el.eig.len());
    println!("ground energy {:.12} a.u.", el.eig.ground_energy());
    if el.from_cache {
        println!("eigensystem loaded from cache");
    }
    Ok(el)
}

pub fn cmd_propagate(cfg: &RunConfig, policy: &CachePolicy) -> Result<CurrentRecord> {
    let el = electronic(cfg, policy)?;
    let mode = cfg.record_mode();
    let rec = currents(cfg, &el, mode, policy)?;
    println!(
        "{} states, {} samples every {:.4} a.u., storage {:?}",
        rec.n_states(),
        rec.n_samples(),
        rec.spacing(),
        mode
    );
    Ok(rec)
}

fn observable_rows(cfg: &RunConfig, ev: &Evaluation) -> Vec<ObservableRow> {
    let mut rows = Vec::new();
    for (&level, obs) in &ev.levels {
        for o in obs {
            rows.push(ObservableRow::from_observables(o, cfg.pulse.omega, level));
        }
    }
    rows
}

pub fn cmd_observables(cfg: &RunConfig, policy: &CachePolicy) -> Result<Evaluation> {
    let ev = evaluate(cfg, policy)?;
    write_evaluation(cfg, &ev)?;
    println!("{} modes x {} levels written to {}", ev.grid.len(), ev.levels.len(), cfg.output.dir.display());
    Ok(ev)
}

fn write_evaluation(cfg: &RunConfig, ev: &Evaluation) -> Result<()> {
    fs::create_dir_all(&cfg.output.dir)?;
    write_observables_csv(&cfg.output.dir.join("observables.csv"), &observable_rows(cfg, ev))?;
    let mut w = csv::Writer::from_path(cfg.output.dir.join("semiclassical.csv"))?;
    w.write_record(["omega_over_omegaL", "S"])?;
    for (&omega, s) in ev.grid.omegas().iter().zip(&ev.semiclassical) {
        w.write_record([format!("{:.6}", omega / cfg.pulse.omega), format!("{s:e}")])?;
    }
    w.flush()?;
    write_json(&cfg.output.dir.join("summary.json"), &summarize(cfg, ev)?)
}

/// Deviations of each level from a baseline level, per band.
#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub baseline: u8,
    pub cycles: u32,
    pub levels: BTreeMap<u8, Vec<DeviationMetrics>>,
}

pub fn compare_levels(
    cfg: &RunConfig,
    levels: &BTreeMap<u8, Vec<ModeObservables>>,
    others: &[u8],
) -> Result<CompareReport> {
    let available = || levels.keys().map(|l| l.to_string()).collect::<Vec<_>>().join(", ");
    let baseline = cfg.compare.baseline;
    let base = levels.get(&baseline).ok_or_else(|| {
        Error::MissingInput(format!("baseline level {baseline} not in results; available: {}", available()))
    })?;
    let mut out = BTreeMap::new();
    for &level in others {
        let obs = levels.get(&level).ok_or_else(|| {
            Error::MissingInput(format!("level {level} not in results; available: {}", available()))
        })?;
        let metrics = cfg
            .compare
            .bands
            .iter()
            .map(|&band| deviation_metrics(base, obs, cfg.pulse.omega, band))
            .collect::<Result<Vec<_>>>()?;
        out.insert(level, metrics);
    }
    Ok(CompareReport { baseline, cycles: cfg.pulse.cycles, levels: out })
}

/// Reads `observables.csv` from the output directory and compares the
/// configured levels against the baseline.
pub fn cmd_compare(cfg: &RunConfig) -> Result<CompareReport> {
    let path = cfg.output.dir.join("observables.csv");
    if !path.exists() {
        return Err(Error::MissingInput(format!("{} not found; run `observables` first", path.display())));
    }
    let levels = read_observables_csv(&path, cfg.pulse.omega)?;
    let others: Vec<u8> = cfg.levels().into_iter().filter(|&l| l != cfg.compare.baseline).collect();
    let report = compare_levels(cfg, &levels, &others)?;
    write_json(&cfg.output.dir.join("compare.json"), &report)?;
    print_report(&report, &cfg.compare.bands);
    Ok(report)
}

fn print_report(report: &CompareReport, bands: &[[f64; 2]]) {
    for (level, metrics) in &report.levels {
        for (m, band) in metrics.iter().zip(bands) {
            println!(
                "Nc={} level {level} vs {} band {:?}: mean|dQ| = {:.4e} over all harmonics, {:.4e} above the floor ({} excluded), mean|deta| = {:.4e} dB",
                report.cycles, report.baseline, band, m.mean_abs_dq_all, m.mean_abs_dq, m.excluded_q, m.mean_abs_deta
            );
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub cycles: Vec<u32>,
    pub reports: Vec<CompareReport>,
    /// Per compared level and band: is the all-harmonics mean |ΔQ| non-decreasing in Nc?
    pub q_non_decreasing: BTreeMap<u8, Vec<bool>>,
    /// The same for the mean restricted to modes above the ⟨n⟩ floor.
    pub q_floored_non_decreasing: BTreeMap<u8, Vec<bool>>,
}

/// Runs the pipeline at each configured pulse length and compares levels.
pub fn cmd_sweep_nc(cfg: &RunConfig, policy: &CachePolicy) -> Result<SweepSummary> {
    let others: Vec<u8> = cfg.levels().into_iter().filter(|&l| l != cfg.compare.baseline).collect();
    let mut run_levels = others.clone();
    run_levels.push(cfg.compare.baseline);
    let mut reports = Vec::new();
    for &nc in &cfg.sweep.cycles {
        let mut sub = cfg.clone();
        sub.pulse.cycles = nc;
        sub.photonics.levels = run_levels.clone();
        sub.output.dir = cfg.output.dir.join(format!("nc_{nc:02}"));
        sub.output.cache_dir = Some(cfg.cache_dir());
        let ev = evaluate(&sub, policy)?;
        write_evaluation(&sub, &ev)?;
        let report = compare_levels(&sub, &ev.levels, &others)?;
        write_json(&sub.output.dir.join("compare.json"), &report)?;
        print_report(&report, &cfg.compare.bands);
        reports.push(report);
    }
    let trend = |get: fn(&DeviationMetrics) -> f64| {
        let mut out = BTreeMap::new();
        for &level in &others {
            let flags = (0..cfg.compare.bands.len())
                .map(|b| {
                    let series: Vec<f64> = reports.iter().map(|r| get(&r.levels[&level][b])).collect();
                    series.windows(2).all(|w| w[1] >= w[0])
                })
                .collect();
            out.insert(level, flags);
        }
        out
    };
    let summary = SweepSummary {
        cycles: cfg.sweep.cycles.clone(),
        q_non_decreasing: trend(|m| m.mean_abs_dq_all),
        q_floored_non_decreasing: trend(|m| m.mean_abs_dq),
        reports,
    };
    fs::create_dir_all(&cfg.output.dir)?;
    write_json(&cfg.output.dir.join("sweep.json"), &summary)?;
    Ok(summary)
}
