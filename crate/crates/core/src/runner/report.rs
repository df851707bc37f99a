use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::ModeObservables;
use crate::photonics::Flags;

/// One line of `observables.csv`. Absent values are written as empty fields.
/// `Q` is blank below the ⟨n⟩ floor; `Q_all` is the same quantity without it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    #[serde(rename = "omega_over_omegaL")]
    pub omega_over_omega_l: String,
    pub level: u8,
    #[serde(rename = "S")]
    pub s: String,
    #[serde(rename = "Q")]
    pub q: String,
    pub eta: String,
    pub n_mean: String,
    pub flags: String,
    /// Q with the floor lifted.
    #[serde(rename = "Q_all")]
    pub q_all: String,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

impl ObservableRow {
    pub fn from_observables(o: &ModeObservables, omega_l: f64, level: u8) -> Self {
        ObservableRow {
            omega_over_omega_l: format!("{:.6}", o.omega / omega_l),
            level,
            s: num(o.s),
            q: o.q.map(num).unwrap_or_default(),
            eta: o.eta.map(num).unwrap_or_default(),
            n_mean: num(o.n_mean),
            flags: o.flags.to_string(),
            q_all: o.q_all.map(num).unwrap_or_default(),
        }
    }
}

pub fn write_observables_csv(path: &Path, rows: &[ObservableRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn parse(field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| Error::Config(format!("bad {what} value {field:?} in observables table")))
}

fn parse_flags(s: &str) -> Flags {
    let has = |n: &str| s.split('|').any(|f| f == n);
    Flags {
        truncation: has("truncation"),
        markov_norm_loss: has("markov_norm_loss"),
        no_signal: has("no_signal"),
        invalid_variance: has("invalid_variance"),
    }
}

/// Reads `observables.csv` back into per-level observables. Only the
/// columns present in the table are filled; moments are left at zero.
pub fn read_observables_csv(path: &Path, omega_l: f64) -> Result<BTreeMap<u8, Vec<ModeObservables>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: BTreeMap<u8, Vec<ModeObservables>> = BTreeMap::new();
    for row in r.deserialize() {
        let row: ObservableRow = row?;
        let h = parse(&row.omega_over_omega_l, "omega_over_omegaL")?
            .ok_or_else(|| Error::Config("missing omega_over_omegaL".into()))?;
        let n = parse(&row.n_mean, "n_mean")?.unwrap_or(0.0);
        out.entry(row.level).or_default().push(ModeObservables {
            omega: h * omega_l,
            level: row.level,
            n_mean: n,
            n2_mean: 0.0,
            a_mean: Complex64::default(),
            a2_mean: Complex64::default(),
            s: parse(&row.s, "S")?.unwrap_or(0.0),
            q: parse(&row.q, "Q")?,
            q_all: parse(&row.q_all, "Q_all")?,
            eta: parse(&row.eta, "eta")?,
            theta_min: None,
            flags: parse_flags(&row.flags),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_absent_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let o = ModeObservables {
            omega: 0.0125,
            level: 3,
            n_mean: 1.25e-9,
            n2_mean: 0.0,
            a_mean: Complex64::default(),
            a2_mean: Complex64::default(),
            s: 3.5e-4,
            q: None,
            q_all: Some(-2.5e-3),
            eta: Some(-1.5e-7),
            theta_min: None,
            flags: Flags { no_signal: true, ..Flags::default() },
        };
        write_observables_csv(&path, &[ObservableRow::from_observables(&o, 0.005, 3)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("omega_over_omegaL,level,S,Q,eta,n_mean,flags,Q_all\n"), "{text}");
        let back = read_observables_csv(&path, 0.005).unwrap();
        let b = &back[&3][0];
        assert_eq!((b.q, b.q_all, b.eta, b.s, b.n_mean), (None, Some(-2.5e-3), Some(-1.5e-7), 3.5e-4, 1.25e-9));
        assert!((b.omega - 0.0125).abs() < 1e-15);
        assert!(b.flags.no_signal);
    }
}
