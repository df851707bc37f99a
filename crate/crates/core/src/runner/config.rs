use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ModelParams, SymmetrySector};
use crate::observables::{PhotonState, Q_FLOOR};
use crate::photonics::{HarmonicRange, ModeGrid, DEFAULT_G0_AU};
use crate::propagate::{PropagationConfig, RecordMode};
use crate::pulse::PulseParams;

/// Which symmetry sector the electronic problem is solved in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SectorChoice {
    Named(SectorName),
    Explicit(SymmetrySector),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorName {
    /// Spin-even momentum sector holding the field-free ground state.
    Ground,
    /// No symmetry reduction.
    Full,
}

impl Default for SectorChoice {
    fn default() -> Self {
        SectorChoice::Named(SectorName::Ground)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhotonicsConfig {
    pub g0_au: f64,
    pub p_truncation: usize,
    pub levels: Vec<u8>,
    pub photon_state: PhotonState,
    pub harmonics: HarmonicRange,
    pub q_floor: f64,
    /// Current storage; defaults to `full` when level 1 is requested.
    pub record: Option<RecordMode>,
}

impl Default for PhotonicsConfig {
    fn default() -> Self {
        Self {
            g0_au: DEFAULT_G0_AU,
            p_truncation: 50,
            levels: vec![1, 2, 3, 4],
            photon_state: PhotonState::default(),
            harmonics: HarmonicRange::default(),
            q_floor: Q_FLOOR,
            record: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub baseline: u8,
    /// Harmonic bands `[lo, hi]` in units of ω_L.
    pub bands: Vec<[f64; 2]>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { baseline: 1, bands: vec![[1.0, 60.0], [10.0, 60.0]] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub cycles: Vec<u32>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { cycles: vec![6, 10, 14, 18] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Defaults to `<dir>/cache`.
    pub cache_dir: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), cache_dir: None }
    }
}

/// Everything a run needs. Physical quantities are in atomic units and
/// their keys carry an `_au` suffix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub sector: SectorChoice,
    pub pulse: PulseParams,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub photonics: PhotonicsConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// Half-filled chain of `sites` with the reference material and pulse parameters.
    pub fn standard(sites: usize, cycles: u32) -> Self {
        Self {
            model: ModelParams::standard(sites),
            sector: SectorChoice::default(),
            pulse: PulseParams::standard(cycles),
            propagation: PropagationConfig::default(),
            photonics: PhotonicsConfig::default(),
            compare: CompareConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.model.validate().map_err(wrap)?;
        self.pulse.validate().map_err(wrap)?;
        self.propagation.validate().map_err(wrap)?;
        self.photonics.harmonics.validate().map_err(wrap)?;
        let ph = &self.photonics;
        if !(ph.g0_au > 0.0) {
            return Err(Error::Config(format!("photonics.g0_au must be > 0, got {}", ph.g0_au)));
        }
        if ph.p_truncation < 2 {
            return Err(Error::Config("photonics.p_truncation must be at least 2".into()));
        }
        if ph.levels.is_empty() {
            return Err(Error::Config("photonics.levels must select at least one level".into()));
        }
        if let Some(bad) = ph.levels.iter().find(|l| !(1..=4).contains(*l)) {
            return Err(Error::Config(format!("unknown level {bad}; levels are 1, 2, 3, 4")));
        }
        if ph.levels.contains(&1) && ph.record == Some(RecordMode::GroundRow) {
            return Err(Error::Config(
                "level 1 needs the full current matrix; set photonics.record = \"full\" or drop level 1".into(),
            ));
        }
        if !(1..=4).contains(&self.compare.baseline) {
            return Err(Error::Config(format!("compare.baseline {} is not a level", self.compare.baseline)));
        }
        if let SectorChoice::Explicit(s) = &self.sector {
            if s.total_momentum >= self.model.sites || (s.spin_parity != 1 && s.spin_parity != -1) {
                return Err(Error::Config(format!("invalid sector {s:?}")));
            }
        }
        Ok(())
    }

    /// Selected levels, sorted and deduplicated.
    pub fn levels(&self) -> Vec<u8> {
        let mut l = self.photonics.levels.clone();
        l.sort_unstable();
        l.dedup();
        l
    }

    pub fn record_mode(&self) -> RecordMode {
        self.photonics.record.unwrap_or(if self.photonics.levels.contains(&1) {
            RecordMode::Full
        } else {
            RecordMode::GroundRow
        })
    }

    pub fn mode_grid(&self) -> Result<ModeGrid> {
        ModeGrid::harmonics(self.pulse.omega, &self.photonics.harmonics, self.photonics.g0_au)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.output.cache_dir.clone().unwrap_or_else(|| self.output.dir.join("cache"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
sites = 4
n_up = 2
n_dn = 2
t0_au = 0.0191
u_au = 0.191
a_lat_au = 7.5589

[pulse]
a0_au = 0.194
omega_l_au = 0.005
cycles = 4
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.sector, SectorChoice::Named(SectorName::Ground));
        assert_eq!(cfg.propagation, PropagationConfig::default());
        assert_eq!(cfg.levels(), vec![1, 2, 3, 4]);
        assert_eq!(cfg.record_mode(), RecordMode::Full);
        assert_eq!(cfg.mode_grid().unwrap().len(), 1196);
    }

    #[test]
    fn round_trip_and_sector_forms() {
        let cfg = RunConfig::standard(4, 6);
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let text = format!("sector = \"full\"\n{MINIMAL}");
        assert_eq!(RunConfig::from_toml_str(&text).unwrap().sector, SectorChoice::Named(SectorName::Full));
        let text = format!("{MINIMAL}\n[sector]\ntotal_momentum = 2\nspin_parity = 1\n");
        assert_eq!(
            RunConfig::from_toml_str(&text).unwrap().sector,
            SectorChoice::Explicit(SymmetrySector { total_momentum: 2, spin_parity: 1 })
        );
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad_l = MINIMAL.replace("sites = 4", "sites = 1");
        assert!(matches!(RunConfig::from_toml_str(&bad_l), Err(Error::Config(_))));
        let unknown = format!("{MINIMAL}\n[photonics]\ng0 = 1.0\n");
        assert!(matches!(RunConfig::from_toml_str(&unknown), Err(Error::Config(_))));
        let level = format!("{MINIMAL}\n[photonics]\nlevels = [5]\n");
        assert!(RunConfig::from_toml_str(&level).is_err());
        let row = format!("{MINIMAL}\n[photonics]\nlevels = [1, 2]\nrecord = \"ground_row\"\n");
        let err = RunConfig::from_toml_str(&row).unwrap_err().to_string();
        assert!(err.contains("level 1 needs the full current matrix"), "{err}");
    }
}
