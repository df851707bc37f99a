use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a [`CurrentRecord`] stores per sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    /// The whole `M x M` matrix `j_{m,n}(t)`.
    Full,
    /// Only the ground row `j_{0,m}(t)`.
    GroundRow,
}

/// Transition-current samples on a uniform time grid.
///
/// Values are sample-major; within a sample the layout is row-major
/// (`Full`) or the single ground row (`GroundRow`). In both layouts the
/// ground row of sample `k` is the contiguous slice starting at `k * stride`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentRecord {
    mode: RecordMode,
    n_states: usize,
    times: Vec<f64>,
    values: Vec<Complex64>,
}

impl CurrentRecord {
    pub fn from_parts(
        mode: RecordMode,
        n_states: usize,
        times: Vec<f64>,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        let per = match mode {
            RecordMode::Full => n_states * n_states,
            RecordMode::GroundRow => n_states,
        };
        if n_states == 0 || times.len() < 2 {
            return Err(Error::InvalidParameter(
                "current record needs at least one state and two samples".into(),
            ));
        }
        if values.len() != per * times.len() {
            return Err(Error::DimensionMismatch { expected: per * times.len(), found: values.len() });
        }
        let spacing = times[1] - times[0];
        let uniform = times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - spacing).abs() <= 1e-9 * spacing.abs().max(1.0));
        if !(spacing > 0.0) || !uniform {
            return Err(Error::InvalidParameter("sample times must be uniform and ascending".into()));
        }
        Ok(Self { mode, n_states, times, values })
    }

    pub fn mode(&self) -> RecordMode {
        self.mode
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_samples(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    fn per_sample(&self) -> usize {
        match self.mode {
            RecordMode::Full => self.n_states * self.n_states,
            RecordMode::GroundRow => self.n_states,
        }
    }

    /// `j_{0,m}` for all `m` at sample `k`.
    pub fn ground_row(&self, k: usize) -> &[Complex64] {
        let start = k * self.per_sample();
        &self.values[start..start + self.n_states]
    }

    /// Row-major `M x M` matrix at sample `k`; `None` for ground-row records.
    pub fn matrix(&self, k: usize) -> Option<&[Complex64]> {
        match self.mode {
            RecordMode::Full => {
                let per = self.per_sample();
                Some(&self.values[k * per..(k + 1) * per])
            }
            RecordMode::GroundRow => None,
        }
    }

    /// `j_{m,n}` at sample `k`, when the record holds it (ground-row records
    /// answer for `m = 0` or `n = 0` through Hermiticity).
    pub fn element(&self, k: usize, m: usize, n: usize) -> Option<Complex64> {
        match self.mode {
            RecordMode::Full => Some(self.values[k * self.per_sample() + m * self.n_states + n]),
            RecordMode::GroundRow if m == 0 => Some(self.ground_row(k)[n]),
            RecordMode::GroundRow if n == 0 => Some(self.ground_row(k)[m].conj()),
            RecordMode::GroundRow => None,
        }
    }

    /// The semiclassical current `j_{0,0}(t)` (real part; the imaginary part is round-off).
    pub fn ground_current(&self) -> Vec<f64> {
        (0..self.n_samples()).map(|k| self.ground_row(k)[0].re).collect()
    }

    pub fn to_ground_row(&self) -> CurrentRecord {
        let values = (0..self.n_samples()).flat_map(|k| self.ground_row(k).to_vec()).collect();
        CurrentRecord {
            mode: RecordMode::GroundRow,
            n_states: self.n_states,
            times: self.times.clone(),
            values,
        }
    }

    /// Copy with every off-diagonal element set to zero.
    pub fn diagonal_only(&self) -> CurrentRecord {
        let mut out = self.clone();
        let m = self.n_states;
        let per = self.per_sample();
        for (idx, v) in out.values.iter_mut().enumerate() {
            let within = idx % per;
            let (row, col) = match self.mode {
                RecordMode::Full => (within / m, within % m),
                RecordMode::GroundRow => (0, within),
            };
            if row != col {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Copy with `f(k, m, n)` applied to every stored element.
    pub fn map_elements<F>(&self, mut f: F) -> CurrentRecord
    where
        F: FnMut(usize, usize, usize, Complex64) -> Complex64,
    {
        let mut out = self.clone();
        let m = self.n_states;
        let per = self.per_sample();
        for (idx, v) in out.values.iter_mut().enumerate() {
            let k = idx / per;
            let within = idx % per;
            let (row, col) = match self.mode {
                RecordMode::Full => (within / m, within % m),
                RecordMode::GroundRow => (0, within),
            };
            *v = f(k, row, col, *v);
        }
        out
    }

    /// `max |j_{m,n} − j_{n,m}*|` over all samples (zero for ground-row records
    /// apart from the diagonal element).
    pub fn hermiticity_residual(&self) -> f64 {
        let m = self.n_states;
        let mut worst: f64 = 0.0;
        for k in 0..self.n_samples() {
            match self.matrix(k) {
                Some(mat) => {
                    for r in 0..m {
                        for c in r..m {
                            worst = worst.max((mat[r * m + c] - mat[c * m + r].conj()).norm());
                        }
                    }
                }
                None => worst = worst.max(self.ground_row(k)[0].im.abs() * 2.0),
            }
        }
        worst
    }
}
