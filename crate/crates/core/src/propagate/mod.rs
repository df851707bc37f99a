//! Krylov time propagation of the field-free eigenstates and recording of
//! transition currents `j_{m,n}(t) = ⟨φ_m(t)| ĵ(t) |φ_n(t)⟩`.

mod cache;
mod krylov;
mod record;

pub use cache::{read_current_cache, write_current_cache, CurrentCacheHeader, CURRENT_CACHE_VERSION};
pub use krylov::{krylov_step, KrylovWorkspace};
pub use record::{CurrentRecord, RecordMode};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::DrivenHubbard;
use crate::pulse::PulseParams;
use crate::spectral::EigenSystem;

/// Norm drift that aborts a propagation.
pub const NORM_ABORT: f64 = 1e-6;

/// How the time dependence of `H(t)` is handled inside one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// One exponential of `H` frozen at the step midpoint (second order).
    Midpoint,
    /// Two exponentials of Gauss-point combinations of `H` (commutator-free
    /// Magnus, fourth order).
    #[default]
    Magnus4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationConfig {
    #[serde(rename = "dt_au")]
    pub dt: f64,
    pub krylov_dim: usize,
    pub sample_stride: usize,
    /// Field-free propagation appended after the pulse.
    #[serde(rename = "tail_au")]
    pub tail: f64,
    pub integrator: Integrator,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 10f64.sqrt(),
            krylov_dim: 4,
            sample_stride: 4,
            tail: 0.0,
            integrator: Integrator::default(),
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.krylov_dim < 2 {
            return Err(Error::InvalidParameter("krylov_dim must be at least 2".into()));
        }
        if self.sample_stride < 1 {
            return Err(Error::InvalidParameter("sample_stride must be at least 1".into()));
        }
        if !(self.tail >= 0.0) {
            return Err(Error::InvalidParameter("tail must be >= 0".into()));
        }
        Ok(())
    }
}

/// Uniform step grid covering the pulse (plus tail).
///
/// The requested `dt` is shrunk slightly so that a whole number of sampling
/// intervals spans the window and the last sample lands on its end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub stride: usize,
}

impl TimeGrid {
    pub fn new(pulse: &PulseParams, cfg: &PropagationConfig) -> Result<Self> {
        pulse.validate()?;
        cfg.validate()?;
        let total = pulse.duration() + cfg.tail;
        let interval = cfg.dt * cfg.sample_stride as f64;
        let n_intervals = ((total / interval) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let n_steps = n_intervals * cfg.sample_stride;
        Ok(Self { t_start: pulse.t_start, dt: total / n_steps as f64, n_steps, stride: cfg.sample_stride })
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps / self.stride + 1
    }

    pub fn step_time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.n_samples()).map(|s| self.step_time(s * self.stride)).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.step_time(self.n_steps)
    }
}

/// Steps states of one driven system across a [`TimeGrid`].
///
/// Step `k` takes a state from `t_k` to `t_{k+1}`; see [`Integrator`].
pub struct Propagator<'a> {
    sys: &'a DrivenHubbard,
    pulse: &'a PulseParams,
    grid: TimeGrid,
    krylov_dim: usize,
    integrator: Integrator,
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6

// exp(-i dt (a1 H1 + a2 H2)) exp(-i dt (a2 H1 + a1 H2)) with H1, H2 at the Gauss points
const MAGNUS_A1: f64 = (3.0 - 2.0 * 1.732_050_807_568_877_2) / 12.0;
const MAGNUS_A2: f64 = (3.0 + 2.0 * 1.732_050_807_568_877_2) / 12.0;

impl<'a> Propagator<'a> {
    pub fn new(sys: &'a DrivenHubbard, pulse: &'a PulseParams, cfg: &PropagationConfig) -> Result<Self> {
        let grid = TimeGrid::new(pulse, cfg)?;
        Ok(Self { sys, pulse, grid, krylov_dim: cfg.krylov_dim, integrator: cfg.integrator })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn system(&self) -> &DrivenHubbard {
        self.sys
    }

    pub fn workspace(&self) -> KrylovWorkspace {
        KrylovWorkspace::new(self.sys.dim(), self.krylov_dim)
    }

    fn field_at(&self, k: usize, frac: f64) -> f64 {
        self.pulse.vector_potential(self.grid.step_time(k) + frac * self.grid.dt)
    }

    /// Applies step `k` forwards, or its inverse when `forward` is false.
    pub fn step(&self, ws: &mut KrylovWorkspace, psi: &mut [Complex64], k: usize, forward: bool) {
        let dt = if forward { self.grid.dt } else { -self.grid.dt };
        match self.integrator {
            Integrator::Midpoint => {
                let a = self.field_at(k, 0.5);
                ws.step(psi, |x, y| self.sys.apply_hamiltonian(a, x, y), dt);
            }
            Integrator::Magnus4 => {
                let a1 = self.field_at(k, 0.5 - GAUSS_OFFSET);
                let a2 = self.field_at(k, 0.5 + GAUSS_OFFSET);
                let first = [(MAGNUS_A2, a1), (MAGNUS_A1, a2)];
                let second = [(MAGNUS_A1, a1), (MAGNUS_A2, a2)];
                let (p, q) = if forward { (first, second) } else { (second, first) };
                ws.step(psi, |x, y| self.sys.apply_hamiltonian_mix(&p, x, y), dt);
                ws.step(psi, |x, y| self.sys.apply_hamiltonian_mix(&q, x, y), dt);
            }
        }
    }

    /// Moves `psi` from step index `from` to step index `to` (either direction).
    pub fn evolve(&self, ws: &mut KrylovWorkspace, psi: &mut [Complex64], from: usize, to: usize) {
        if to >= from {
            for k in from..to {
                self.step(ws, psi, k, true);
            }
        } else {
            for k in (to..from).rev() {
                self.step(ws, psi, k, false);
            }
        }
    }

    /// `y = ĵ(t_k) x` at step index `k`.
    pub fn apply_current(&self, k: usize, x: &[Complex64], y: &mut [Complex64]) {
        self.sys.apply_current(self.pulse.vector_potential(self.grid.step_time(k)), x, y);
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Evolves every eigenstate through the pulse and records transition currents.
///
/// Both modes propagate all `M` states; `GroundRow` only stores less.
pub fn propagate_and_record(
    sys: &DrivenHubbard,
    eig: &EigenSystem,
    pulse: &PulseParams,
    cfg: &PropagationConfig,
    mode: RecordMode,
) -> Result<CurrentRecord> {
    if eig.dim() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), found: eig.dim() });
    }
    let prop = Propagator::new(sys, pulse, cfg)?;
    let grid = *prop.grid();
    let dim = sys.dim();
    let m = eig.len();
    let mut states: Vec<Vec<Complex64>> = (0..m).map(|s| eig.state(s)).collect();
    let mut values = Vec::with_capacity(
        grid.n_samples() * if mode == RecordMode::Full { m * m } else { m },
    );

    for sample in 0..grid.n_samples() {
        let k = sample * grid.stride;
        if sample > 0 {
            let t = grid.step_time(k);
            states.par_iter_mut().enumerate().try_for_each(|(s, psi)| {
                let mut ws = prop.workspace();
                prop.evolve(&mut ws, psi, k - grid.stride, k);
                let drift = (norm(psi) - 1.0).abs();
                if drift > NORM_ABORT {
                    return Err(Error::NormDrift { state: s, time: t, drift });
                }
                Ok(())
            })?;
        }

        let currents: Vec<Vec<Complex64>> = states
            .par_iter()
            .map(|psi| {
                let mut y = vec![Complex64::default(); dim];
                prop.apply_current(k, psi, &mut y);
                y
            })
            .collect();
        match mode {
            RecordMode::Full => {
                let phi = DMatrix::from_fn(dim, m, |r, c| states[c][r]);
                let jphi = DMatrix::from_fn(dim, m, |r, c| currents[c][r]);
                let mat = phi.adjoint() * jphi;
                for r in 0..m {
                    for c in 0..m {
                        values.push(mat[(r, c)]);
                    }
                }
            }
            RecordMode::GroundRow => {
                let bra = &states[0];
                for jn in &currents {
                    values.push(bra.iter().zip(jn).map(|(a, b)| a.conj() * b).sum());
                }
            }
        }
    }
    CurrentRecord::from_parts(mode, m, grid.sample_times(), values)
}
