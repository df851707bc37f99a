use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// sin²-envelope driving pulse, `A(t) = A0 sin(ωt + π/2) sin²(ωt / 2Nc)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseParams {
    #[serde(rename = "a0_au")]
    pub amplitude: f64,
    #[serde(rename = "omega_l_au")]
    pub omega: f64,
    pub cycles: u32,
    #[serde(rename = "t_start_au", default)]
    pub t_start: f64,
}

pub const DEFAULT_A0_AU: f64 = 0.194;
pub const DEFAULT_OMEGA_L_AU: f64 = 0.005;

impl PulseParams {
    pub fn standard(cycles: u32) -> Self {
        Self { amplitude: DEFAULT_A0_AU, omega: DEFAULT_OMEGA_L_AU, cycles, t_start: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!("A0 must be >= 0, got {}", self.amplitude)));
        }
        if !(self.omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega_L must be > 0, got {}", self.omega)));
        }
        if self.cycles < 1 {
            return Err(Error::InvalidParameter("pulse needs at least one cycle".into()));
        }
        Ok(())
    }

    /// Carrier period `2π/ω_L`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Pulse length `2π Nc / ω_L`.
    pub fn duration(&self) -> f64 {
        self.cycles as f64 * self.period()
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration()
    }

    /// Vector potential at time `t`; zero outside the pulse window.
    pub fn vector_potential(&self, t: f64) -> f64 {
        let tau = t - self.t_start;
        if tau <= 0.0 || tau >= self.duration() {
            return 0.0;
        }
        let env = (self.omega * tau / (2.0 * self.cycles as f64)).sin();
        self.amplitude * (self.omega * tau + PI / 2.0).sin() * env * env
    }

    /// Time derivative of [`Self::vector_potential`] (minus the electric field).
    pub fn vector_potential_rate(&self, t: f64) -> f64 {
        let tau = t - self.t_start;
        if tau <= 0.0 || tau >= self.duration() {
            return 0.0;
        }
        let nc = self.cycles as f64;
        let x = self.omega * tau / (2.0 * nc);
        let carrier = self.omega * tau + PI / 2.0;
        self.amplitude
            * (self.omega * carrier.cos() * x.sin().powi(2)
                + carrier.sin() * x.sin() * x.cos() * self.omega / nc)
    }
}
