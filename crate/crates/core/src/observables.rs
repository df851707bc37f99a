//! Spectra, photon statistics and squeezing from single-mode photonic states,
//! and deviation metrics between hierarchy levels.

use std::f64::consts::{LN_10, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photonics::{Flags, HierarchyStateSet, ModeGrid, MsaQuantities, SingleModeFockState};
use crate::propagate::CurrentRecord;

type C = Complex64;

/// Speed of light in atomic units.
pub const SPEED_OF_LIGHT_AU: f64 = 137.036;
/// `⟨n⟩` at or below which Mandel-Q is not reported.
pub const Q_FLOOR: f64 = 1e-18;

/// Normally ordered moments of one mode. `fact2 = ⟨a†²a²⟩` is kept
/// separately so that Mandel-Q avoids the `⟨n²⟩ − ⟨n⟩²` cancellation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n_mean: f64,
    pub n2_mean: f64,
    pub a_mean: C,
    pub a2_mean: C,
    pub fact2: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct RawMoments {
    norm: f64,
    n: f64,
    fact2: f64,
    a: C,
    a2: C,
}

impl RawMoments {
    fn of(state: &SingleModeFockState) -> Self {
        let c = &state.amps;
        let mut r = RawMoments::default();
        for k in 0..c.len() {
            let p = c[k].norm_sqr();
            let kf = k as f64;
            r.norm += p;
            r.n += kf * p;
            r.fact2 += kf * (kf - 1.0) * p;
            if k + 1 < c.len() {
                r.a += (kf + 1.0).sqrt() * c[k].conj() * c[k + 1];
            }
            if k + 2 < c.len() {
                r.a2 += ((kf + 1.0) * (kf + 2.0)).sqrt() * c[k].conj() * c[k + 2];
            }
        }
        r
    }

    fn add(self, o: Self) -> Self {
        RawMoments { norm: self.norm + o.norm, n: self.n + o.n, fact2: self.fact2 + o.fact2, a: self.a + o.a, a2: self.a2 + o.a2 }
    }

    fn finish(self) -> Moments {
        if self.norm == 0.0 {
            return Moments::default();
        }
        let s = 1.0 / self.norm;
        let n = self.n * s;
        let fact2 = self.fact2 * s;
        Moments { n_mean: n, n2_mean: fact2 + n, a_mean: self.a * s, a2_mean: self.a2 * s, fact2 }
    }
}

/// Moments of the state after normalization.
pub fn moments(state: &SingleModeFockState) -> Moments {
    RawMoments::of(state).finish()
}

/// Moments of the mixture `Σ_m |χ^(m)⟩⟨χ^(m)|`, normalized by its trace.
pub fn mixture_moments<'a>(states: impl IntoIterator<Item = &'a SingleModeFockState>) -> Moments {
    states.into_iter().map(RawMoments::of).fold(RawMoments::default(), RawMoments::add).finish()
}

/// `1/((2π)² c³)`, the factor shared by all spectra.
pub fn emission_prefactor() -> f64 {
    1.0 / ((2.0 * PI).powi(2) * SPEED_OF_LIGHT_AU.powi(3))
}

/// `S(ω) = ω³ ⟨n⟩ / (g0² (2π)² c³)`.
pub fn spectral_density(omega: f64, g0: f64, n_mean: f64) -> f64 {
    omega.powi(3) * n_mean / (g0 * g0) * emission_prefactor()
}

pub fn spectrum(n_mean: &[f64], grid: &ModeGrid) -> Result<Vec<f64>> {
    if n_mean.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: n_mean.len() });
    }
    Ok(grid.omegas().iter().zip(n_mean).map(|(&w, &n)| spectral_density(w, grid.g0(), n)).collect())
}

/// `ĵ̃(ω) = ∫ e^{iωt} j_{i,i}(t) dt` by the trapezoid rule on the record grid.
pub fn ground_current_transform(rec: &CurrentRecord, omega: f64) -> C {
    let n = rec.n_samples();
    let h = rec.spacing();
    let mut acc = C::default();
    for k in 0..n {
        let w = if k == 0 || k == n - 1 { 0.5 * h } else { h };
        let e = C::from_polar(1.0, -omega * rec.times()[k]).conj();
        acc += w * (e * rec.ground_row(k)[0]);
    }
    acc
}

/// `ω² |ĵ̃_{i,i}(ω)|²` per mode, without the emission prefactor.
pub fn semiclassical_spectrum(rec: &CurrentRecord, grid: &ModeGrid) -> Vec<f64> {
    grid.omegas().iter().map(|&w| w * w * ground_current_transform(rec, w).norm_sqr()).collect()
}

/// `Q = (⟨n²⟩ − ⟨n⟩²)/⟨n⟩ − 1`, or `None` when `⟨n⟩ ≤ q_floor`.
pub fn mandel_q(m: &Moments, q_floor: f64) -> Option<f64> {
    if m.n_mean <= q_floor {
        return None;
    }
    Some(m.fact2 / m.n_mean - m.n_mean)
}

/// Squeezing `η = −10 log10(4 Var_min)` in dB and the minimizing quadrature
/// angle in `[0, π)`; `None` if the minimized variance is not positive.
pub fn squeezing(m: &Moments) -> Option<(f64, f64)> {
    let z = m.a2_mean - m.a_mean * m.a_mean;
    let x = 2.0 * (m.n_mean - m.a_mean.norm_sqr()) - 2.0 * z.norm();
    if !(1.0 + x > 0.0) {
        return None;
    }
    let eta = -10.0 / LN_10 * x.ln_1p();
    let theta = if z.norm() == 0.0 { 0.0 } else { (0.5 * (z.arg() - PI)).rem_euclid(PI) };
    Some((eta, theta))
}

/// `Var X(θ)` with `X(θ) = (a e^{−iθ} + a† e^{iθ})/2`.
pub fn quadrature_variance(m: &Moments, theta: f64) -> f64 {
    let z = m.a2_mean - m.a_mean * m.a_mean;
    0.25 * (1.0 + 2.0 * (m.n_mean - m.a_mean.norm_sqr()) + 2.0 * (z * C::from_polar(1.0, -2.0 * theta)).re)
}

/// Everything reported for one mode at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeObservables {
    pub omega: f64,
    pub level: u8,
    pub n_mean: f64,
    pub n2_mean: f64,
    pub a_mean: C,
    pub a2_mean: C,
    pub s: f64,
    pub q: Option<f64>,
    /// Q with the floor lifted; absent only when it is undefined outright.
    pub q_all: Option<f64>,
    pub eta: Option<f64>,
    pub theta_min: Option<f64>,
    pub flags: Flags,
}

impl ModeObservables {
    fn from_moments(m: &Moments, omega: f64, g0: f64, level: u8, q_floor: f64, flags: Flags) -> Self {
        let q = mandel_q(m, q_floor);
        let sq = squeezing(m);
        ModeObservables {
            omega,
            level,
            n_mean: m.n_mean,
            n2_mean: m.n2_mean,
            a_mean: m.a_mean,
            a2_mean: m.a2_mean,
            s: spectral_density(omega, g0, m.n_mean),
            q,
            q_all: mandel_q(m, 0.0),
            eta: sq.map(|s| s.0),
            theta_min: sq.map(|s| s.1),
            flags: flags.merge(Flags { no_signal: q.is_none(), invalid_variance: sq.is_none(), ..Flags::default() }),
        }
    }
}

/// Which photonic state levels 1 and 2 report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonState {
    /// `χ^(i)` alone, normalized: the light left with the electrons back in
    /// their initial state. Levels 3 and 4 only have this state.
    #[default]
    Ground,
    /// The reduced photonic state `Σ_m |χ^(m)⟩⟨χ^(m)|`.
    Traced,
}

pub fn state_observables(state: &SingleModeFockState, omega: f64, g0: f64, level: u8, q_floor: f64) -> ModeObservables {
    ModeObservables::from_moments(&moments(state), omega, g0, level, q_floor, Flags::default())
}

pub fn hierarchy_observables(set: &HierarchyStateSet, which: PhotonState, q_floor: f64) -> ModeObservables {
    let m = match which {
        PhotonState::Ground => moments(set.ground()),
        PhotonState::Traced => mixture_moments(&set.states),
    };
    ModeObservables::from_moments(&m, set.mode.omega, set.mode.g0, set.level, q_floor, set.flags())
}

/// Level-4 observables from the closed forms of the Markov-state approximation.
pub fn msa_observables(q: &MsaQuantities, omega: f64, g0: f64, q_floor: f64) -> ModeObservables {
    let n = q.beta.norm_sqr();
    let denom = n * (1.0 - q.d) + q.b * q.b;
    let num = q.b * q.b + n * n - 2.0 * q.b * (q.beta * q.beta * C::from_polar(1.0, q.phi)).re;
    let q_all = (denom > 0.0).then(|| num / denom - n);
    let mandel = q_all.filter(|_| denom > q_floor);
    let (eta, theta) = if q.b < 0.5 {
        (Some(-10.0 / LN_10 * (-2.0 * q.b).ln_1p()), Some((0.5 * q.phi).rem_euclid(PI)))
    } else {
        (None, None)
    };
    ModeObservables {
        omega,
        level: 4,
        n_mean: n,
        n2_mean: n + n * n + q_all.unwrap_or(0.0) * n,
        a_mean: q.beta,
        a2_mean: q.beta * q.beta - C::from_polar(q.b, q.phi),
        s: spectral_density(omega, g0, n),
        q: mandel,
        q_all,
        eta,
        theta_min: theta,
        flags: Flags { no_signal: mandel.is_none(), invalid_variance: eta.is_none(), ..Flags::default() },
    }
}

/// Mean absolute deviations between two levels over one harmonic band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationMetrics {
    /// `[lo, hi]` in units of ω_L.
    pub band: [f64; 2],
    pub modes: usize,
    /// Means over modes where both levels report the quantity.
    pub mean_abs_dq: f64,
    pub mean_abs_deta: f64,
    pub excluded_q: usize,
    pub excluded_eta: usize,
    /// Mean |ΔQ| with the ⟨n⟩ floor lifted, i.e. over all harmonics in the band.
    pub mean_abs_dq_all: f64,
    pub excluded_q_all: usize,
}

pub fn deviation_metrics(
    base: &[ModeObservables],
    other: &[ModeObservables],
    omega_l: f64,
    band: [f64; 2],
) -> Result<DeviationMetrics> {
    if base.len() != other.len() {
        return Err(Error::DimensionMismatch { expected: base.len(), found: other.len() });
    }
    let tol = 1e-9;
    let pairs: Vec<(&ModeObservables, &ModeObservables)> = base
        .iter()
        .zip(other)
        .filter(|(b, _)| {
            let h = b.omega / omega_l;
            h >= band[0] - tol && h <= band[1] + tol
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidParameter(format!("no modes in band {band:?}")));
    }
    if pairs.iter().any(|(b, o)| (b.omega - o.omega).abs() > 1e-12 * b.omega) {
        return Err(Error::Validation("levels were evaluated on different mode grids".into()));
    }
    let stat = |get: fn(&ModeObservables) -> Option<f64>| {
        let (mut sum, mut count) = (0.0, 0usize);
        for (b, o) in &pairs {
            if let (Some(x), Some(y)) = (get(b), get(o)) {
                sum += (x - y).abs();
                count += 1;
            }
        }
        let mean = if count > 0 { sum / count as f64 } else { f64::NAN };
        (mean, pairs.len() - count)
    };
    let (dq, xq) = stat(|m| m.q);
    let (de, xe) = stat(|m| m.eta);
    let (dq_all, xq_all) = stat(|m| m.q_all);
    Ok(DeviationMetrics {
        band,
        modes: pairs.len(),
        mean_abs_dq: dq,
        mean_abs_deta: de,
        excluded_q: xq,
        excluded_eta: xe,
        mean_abs_dq_all: dq_all,
        excluded_q_all: xq_all,
    })
}
