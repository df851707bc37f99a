//! Single-mode photonic states driven by transition currents: the decoupled
//! (level 1), ground-row (level 2) and Markov-type (level 3) equations of
//! motion, and the closed-form Markov-state approximation (level 4).

mod covariance;
mod fock;
mod levels;
mod msa;

pub use covariance::{covariance_identity_check, CovarianceCheck};
pub use fock::{ladder_matrices, SingleModeFockState};
pub use levels::{solve_level1_decoupled, solve_level2_groundrow, solve_level3_markov, HierarchyStateSet};
pub use msa::{integrated_currents, msa_quantities, msa_state, IntegratedCurrents, MsaQuantities};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default quantized-field coupling `g0` (a.u.).
pub const DEFAULT_G0_AU: f64 = 4e-8;
/// Fock population at the truncation edge above which a state is flagged.
pub const TRUNCATION_TOL: f64 = 1e-6;
/// Level-3 norm loss above which the Markov solution is flagged.
pub const MARKOV_NORM_LOSS_TOL: f64 = 0.1;

/// One field mode: angular frequency and its coupling `g = g0/√ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub omega: f64,
    pub g0: f64,
}

impl Mode {
    pub fn new(omega: f64, g0: f64) -> Self {
        Self { omega, g0 }
    }

    pub fn coupling(&self) -> f64 {
        self.g0 / self.omega.sqrt()
    }
}

/// Ordered set of modes sharing one `g0`, polarized along the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeGrid {
    omegas: Vec<f64>,
    g0: f64,
}

impl ModeGrid {
    pub fn new(omegas: Vec<f64>, g0: f64) -> Result<Self> {
        if !(g0 > 0.0) {
            return Err(Error::InvalidParameter(format!("g0 must be > 0, got {g0}")));
        }
        if omegas.is_empty() || !(omegas[0] > 0.0) || omegas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "mode frequencies must be positive and strictly ascending".into(),
            ));
        }
        Ok(Self { omegas, g0 })
    }

    /// Modes at `ω = h ω_L` for `h = start, start + step, …, stop`.
    pub fn harmonics(omega_l: f64, spec: &HarmonicRange, g0: f64) -> Result<Self> {
        spec.validate()?;
        let n = ((spec.stop - spec.start) / spec.step + 1e-9).floor() as usize + 1;
        Self::new((0..n).map(|k| (spec.start + k as f64 * spec.step) * omega_l).collect(), g0)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn mode(&self, k: usize) -> Mode {
        Mode::new(self.omegas[k], self.g0)
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        self.omegas.iter().map(move |&w| Mode::new(w, self.g0))
    }
}

/// Harmonic orders `start..=stop` in steps of `step` (units of ω_L).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for HarmonicRange {
    fn default() -> Self {
        Self { start: 0.25, stop: 60.0, step: 0.05 }
    }
}

impl HarmonicRange {
    pub fn validate(&self) -> Result<()> {
        if !(self.start > 0.0) || !(self.step > 0.0) || !(self.stop >= self.start) {
            return Err(Error::InvalidParameter(format!(
                "harmonic range needs 0 < start <= stop and step > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Diagnostic flags attached to a per-mode result.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// Population at the Fock cutoff exceeded [`TRUNCATION_TOL`].
    pub truncation: bool,
    /// Level-3 norm loss exceeded [`MARKOV_NORM_LOSS_TOL`].
    pub markov_norm_loss: bool,
    /// `⟨n⟩` at or below the Mandel-Q floor.
    pub no_signal: bool,
    /// Minimized quadrature variance not positive.
    pub invalid_variance: bool,
}

impl Flags {
    pub fn merge(self, other: Flags) -> Flags {
        Flags {
            truncation: self.truncation || other.truncation,
            markov_norm_loss: self.markov_norm_loss || other.markov_norm_loss,
            no_signal: self.no_signal || other.no_signal,
            invalid_variance: self.invalid_variance || other.invalid_variance,
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Flags::default()
    }
}

impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.truncation, "truncation"),
            (self.markov_norm_loss, "markov_norm_loss"),
            (self.no_signal, "no_signal"),
            (self.invalid_variance, "invalid_variance"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        write!(f, "{}", names.join("|"))
    }
}
