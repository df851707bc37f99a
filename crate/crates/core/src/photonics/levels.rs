//! Time-stepping of the photonic amplitudes on the current-record grid.
//!
//! All levels use classical RK4 with one step per record sample. The drive
//! enters through the phase-weighted currents `e^{∓iωt} j(t)`. At the half-step
//! these are linearly interpolated between the two samples, so a drive that
//! is linear in the field integrates to exactly the trapezoid sum.

use num_complex::Complex64;

use super::{Flags, Mode, SingleModeFockState, MARKOV_NORM_LOSS_TOL, TRUNCATION_TOL};
use crate::error::{Error, Result};
use crate::propagate::{CurrentRecord, RecordMode};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
// Amplitudes this small are set to zero after each step to keep deep Fock
// tails out of subnormal arithmetic.
const FLUSH: f64 = 1e-200;

/// Final photonic amplitudes for one mode at one level of the hierarchy.
///
/// `states[m]` is `χ^(m)`; index 0 belongs to the initial electronic state.
/// Level 3 carries only `χ^(i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyStateSet {
    pub level: u8,
    pub mode: Mode,
    pub states: Vec<SingleModeFockState>,
}

impl HierarchyStateSet {
    pub fn ground(&self) -> &SingleModeFockState {
        &self.states[0]
    }

    pub fn total_norm(&self) -> f64 {
        self.states.iter().map(|s| s.norm_sqr()).sum()
    }

    /// `1 − ‖χ^(i)‖²`; only meaningful at level 3, where nothing else carries norm.
    pub fn norm_loss(&self) -> f64 {
        1.0 - self.ground().norm_sqr()
    }

    /// Population at the Fock cutoff relative to the total norm.
    pub fn edge_population(&self) -> f64 {
        let total = self.total_norm();
        if total == 0.0 {
            return 0.0;
        }
        self.states.iter().map(|s| s.amps[s.amps.len() - 1].norm_sqr()).sum::<f64>() / total
    }

    pub fn flags(&self) -> Flags {
        Flags {
            truncation: self.edge_population() > TRUNCATION_TOL,
            markov_norm_loss: self.level == 3 && self.norm_loss().abs() > MARKOV_NORM_LOSS_TOL,
            ..Flags::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Node {
    Sample(usize),
    Mid(usize),
}

trait Rhs {
    fn eval(&mut self, node: Node, y: &[C], dy: &mut [C]);
}

fn rk4<R: Rhs>(rhs: &mut R, y: &mut [C], n_samples: usize, h: f64) {
    let n = y.len();
    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut k3 = vec![ZERO; n];
    let mut k4 = vec![ZERO; n];
    let mut tmp = vec![ZERO; n];
    // Kahan compensation: the increments are tiny next to y near spectral zeros.
    let mut comp = vec![ZERO; n];
    for k in 0..n_samples - 1 {
        rhs.eval(Node::Sample(k), y, &mut k1);
        axpy_into(&mut tmp, y, 0.5 * h, &k1);
        rhs.eval(Node::Mid(k), &tmp, &mut k2);
        axpy_into(&mut tmp, y, 0.5 * h, &k2);
        rhs.eval(Node::Mid(k), &tmp, &mut k3);
        axpy_into(&mut tmp, y, h, &k3);
        rhs.eval(Node::Sample(k + 1), &tmp, &mut k4);
        let w = h / 6.0;
        for i in 0..n {
            let inc = w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) - comp[i];
            let v = y[i] + inc;
            comp[i] = (v - y[i]) - inc;
            if v.re.abs() < FLUSH && v.im.abs() < FLUSH {
                y[i] = ZERO;
                comp[i] = ZERO;
            } else {
                y[i] = v;
            }
        }
    }
}

fn axpy_into(out: &mut [C], y: &[C], s: f64, k: &[C]) {
    for ((o, a), b) in out.iter_mut().zip(y).zip(k) {
        *o = a + s * b;
    }
}

/// Phase-weighted drive coefficients `p = e^{-iωt} j`, `q = e^{iωt} j` at a node.
struct Drive<'a> {
    rec: &'a CurrentRecord,
    omega: f64,
    width: usize,
    node: Option<Node>,
    p: Vec<C>,
    q: Vec<C>,
}

impl<'a> Drive<'a> {
    fn new(rec: &'a CurrentRecord, omega: f64, width: usize) -> Self {
        Self { rec, omega, width, node: None, p: vec![ZERO; width], q: vec![ZERO; width] }
    }

    fn phase(&self, k: usize) -> C {
        C::from_polar(1.0, -self.omega * self.rec.times()[k])
    }

    fn slice(&self, k: usize) -> &'a [C] {
        if self.width == self.rec.n_states() {
            self.rec.ground_row(k)
        } else {
            self.rec.matrix(k).expect("full record")
        }
    }

    fn update(&mut self, node: Node) {
        if self.node == Some(node) {
            return;
        }
        self.node = Some(node);
        match node {
            Node::Sample(k) => {
                let e = self.phase(k);
                let ec = e.conj();
                let js = self.slice(k);
                for ((p, q), j) in self.p.iter_mut().zip(self.q.iter_mut()).zip(js) {
                    *p = e * j;
                    *q = ec * j;
                }
            }
            Node::Mid(k) => {
                let (e0, e1) = (self.phase(k), self.phase(k + 1));
                let (c0, c1) = (e0.conj(), e1.conj());
                let (j0, j1) = (self.slice(k), self.slice(k + 1));
                for i in 0..self.width {
                    self.p[i] = 0.5 * (e0 * j0[i] + e1 * j1[i]);
                    self.q[i] = 0.5 * (c0 * j0[i] + c1 * j1[i]);
                }
            }
        }
    }
}

fn check_inputs(rec: &CurrentRecord, mode: Mode, p: usize) -> Result<()> {
    if p < 1 {
        return Err(Error::InvalidParameter("Fock truncation must be at least 1".into()));
    }
    if !(mode.omega > 0.0) || !(mode.g0 > 0.0) {
        return Err(Error::InvalidParameter(format!("invalid mode {mode:?}")));
    }
    if rec.n_samples() < 2 {
        return Err(Error::InvalidParameter("current record needs at least two samples".into()));
    }
    Ok(())
}

fn sqrt_table(p: usize) -> Vec<f64> {
    (0..=p + 1).map(|n| (n as f64).sqrt()).collect()
}

fn split_columns(x: &[C], d: usize, m: usize) -> Vec<SingleModeFockState> {
    (0..m)
        .map(|col| SingleModeFockState { amps: (0..d).map(|n| x[n * m + col]).collect() })
        .collect()
}

struct DecoupledRhs<'a> {
    drive: Drive<'a>,
    m: usize,
    d: usize,
    g: f64,
    sq: Vec<f64>,
    ym: Vec<C>,
    yp: Vec<C>,
}

impl DecoupledRhs<'_> {
    // out[n][a] = Σ_b x[n][b] mat[a][b]
    fn product(x: &[C], mat: &[C], out: &mut [C], d: usize, m: usize) {
        for n in 0..d {
            let row = &x[n * m..(n + 1) * m];
            if row.iter().all(|c| *c == ZERO) {
                out[n * m..(n + 1) * m].fill(ZERO);
                continue;
            }
            for a in 0..m {
                let mrow = &mat[a * m..(a + 1) * m];
                let mut acc = ZERO;
                for b in 0..m {
                    acc += row[b] * mrow[b];
                }
                out[n * m + a] = acc;
            }
        }
    }
}

impl Rhs for DecoupledRhs<'_> {
    fn eval(&mut self, node: Node, x: &[C], dx: &mut [C]) {
        let (d, m) = (self.d, self.m);
        self.drive.update(node);
        Self::product(x, &self.drive.p, &mut self.ym, d, m);
        match node {
            Node::Sample(k) => {
                // q = e^{2iωt} p at a sample
                let f = self.drive.phase(k).conj().powi(2);
                for (yp, ym) in self.yp.iter_mut().zip(&self.ym) {
                    *yp = f * ym;
                }
            }
            Node::Mid(_) => Self::product(x, &self.drive.q, &mut self.yp, d, m),
        }
        let s = C::new(0.0, -self.g);
        for n in 0..d {
            for a in 0..m {
                let mut v = ZERO;
                if n + 1 < d {
                    v += self.sq[n + 1] * self.ym[(n + 1) * m + a];
                }
                if n > 0 {
                    v += self.sq[n] * self.yp[(n - 1) * m + a];
                }
                dx[n * m + a] = s * v;
            }
        }
    }
}

/// Level 1: every `χ^(m)` coupled to every `χ^(n)` through `j_{m,n}(t)`.
/// Needs a `Full` record.
pub fn solve_level1_decoupled(rec: &CurrentRecord, mode: Mode, p: usize) -> Result<HierarchyStateSet> {
    check_inputs(rec, mode, p)?;
    if rec.mode() != RecordMode::Full {
        return Err(Error::MissingInput("level 1 needs the full transition-current matrix".into()));
    }
    let (m, d) = (rec.n_states(), p + 1);
    let mut x = vec![ZERO; d * m];
    x[0] = C::new(1.0, 0.0);
    let mut rhs = DecoupledRhs {
        drive: Drive::new(rec, mode.omega, m * m),
        m,
        d,
        g: mode.coupling(),
        sq: sqrt_table(p),
        ym: vec![ZERO; d * m],
        yp: vec![ZERO; d * m],
    };
    rk4(&mut rhs, &mut x, rec.n_samples(), rec.spacing());
    Ok(HierarchyStateSet { level: 1, mode, states: split_columns(&x, d, m) })
}

struct GroundRowRhs<'a> {
    drive: Drive<'a>,
    m: usize,
    d: usize,
    g: f64,
    sq: Vec<f64>,
}

impl Rhs for GroundRowRhs<'_> {
    fn eval(&mut self, node: Node, x: &[C], dx: &mut [C]) {
        let (d, m) = (self.d, self.m);
        self.drive.update(node);
        let (p, q) = (&self.drive.p, &self.drive.q);
        let s = C::new(0.0, -self.g);
        for n in 0..d {
            // χ^(i) ← Σ_m j_{i,m} χ^(m)
            let mut v = ZERO;
            if n + 1 < d {
                let row = &x[(n + 1) * m..(n + 2) * m];
                v += self.sq[n + 1] * row.iter().zip(p).map(|(a, b)| a * b).sum::<C>();
            }
            if n > 0 {
                let row = &x[(n - 1) * m..n * m];
                v += self.sq[n] * row.iter().zip(q).map(|(a, b)| a * b).sum::<C>();
            }
            dx[n * m] = s * v;
            // χ^(m) ← j_{m,i} χ^(i), with e^{∓iωt} j_{m,i} = conj(q_m), conj(p_m)
            let lo = if n + 1 < d { self.sq[n + 1] * x[(n + 1) * m] } else { ZERO };
            let hi = if n > 0 { self.sq[n] * x[(n - 1) * m] } else { ZERO };
            for a in 1..m {
                dx[n * m + a] = s * (q[a].conj() * lo + p[a].conj() * hi);
            }
        }
    }
}

/// Level 2: `χ^(i)` couples to all `χ^(m)`; the others couple only back to `χ^(i)`.
pub fn solve_level2_groundrow(rec: &CurrentRecord, mode: Mode, p: usize) -> Result<HierarchyStateSet> {
    check_inputs(rec, mode, p)?;
    let (m, d) = (rec.n_states(), p + 1);
    let mut x = vec![ZERO; d * m];
    x[0] = C::new(1.0, 0.0);
    let mut rhs = GroundRowRhs {
        drive: Drive::new(rec, mode.omega, m),
        m,
        d,
        g: mode.coupling(),
        sq: sqrt_table(p),
    };
    rk4(&mut rhs, &mut x, rec.n_samples(), rec.spacing());
    Ok(HierarchyStateSet { level: 2, mode, states: split_columns(&x, d, m) })
}

struct MarkovRhs<'a> {
    drive: Drive<'a>,
    m: usize,
    d: usize,
    g: f64,
    sq: Vec<f64>,
}

impl Rhs for MarkovRhs<'_> {
    // y = [χ (d), I⁻ (m), I⁺ (m)], I^±_m = g ∫ e^{±iωt'} j_{m,i}(t') dt'
    fn eval(&mut self, node: Node, y: &[C], dy: &mut [C]) {
        let (d, m, g) = (self.d, self.m, self.g);
        self.drive.update(node);
        let (p, q) = (&self.drive.p, &self.drive.q);
        let (chi, rest) = y.split_at(d);
        let (im, ip) = rest.split_at(m);
        let (dchi, drest) = dy.split_at_mut(d);
        let (dim, dip) = drest.split_at_mut(m);

        dim[0] = ZERO;
        dip[0] = ZERO;
        let (mut spm, mut spp, mut sqm, mut sqp) = (ZERO, ZERO, ZERO, ZERO);
        for a in 1..m {
            dim[a] = g * q[a].conj();
            dip[a] = g * p[a].conj();
            spm += p[a] * im[a];
            spp += p[a] * ip[a];
            sqm += q[a] * im[a];
            sqp += q[a] * ip[a];
        }
        let sq = &self.sq;
        let s = C::new(0.0, -g);
        for n in 0..d {
            let mut lin = ZERO;
            let mut quad = ZERO;
            if n + 1 < d {
                lin += p[0] * sq[n + 1] * chi[n + 1];
                quad += spp * (n + 1) as f64 * chi[n];
            }
            if n > 0 {
                lin += q[0] * sq[n] * chi[n - 1];
            }
            if n + 2 < d {
                quad += spm * sq[n + 1] * sq[n + 2] * chi[n + 2];
            }
            quad += sqm * n as f64 * chi[n];
            if n > 1 {
                quad += sqp * sq[n] * sq[n - 1] * chi[n - 2];
            }
            dchi[n] = s * lin - g * quad;
        }
    }
}

/// Level 3: `χ^(i)` alone, with the other states' feedback folded into the
/// time-nonlocal term `−i Σ_m j_{i,m}(t) ∫^t A_Q(t') j_{m,i}(t') dt'`.
///
/// The result is not normalized; [`HierarchyStateSet::norm_loss`] reports the drift.
pub fn solve_level3_markov(rec: &CurrentRecord, mode: Mode, p: usize) -> Result<HierarchyStateSet> {
    check_inputs(rec, mode, p)?;
    let (m, d) = (rec.n_states(), p + 1);
    let mut y = vec![ZERO; d + 2 * m];
    y[0] = C::new(1.0, 0.0);
    let mut rhs = MarkovRhs {
        drive: Drive::new(rec, mode.omega, m),
        m,
        d,
        g: mode.coupling(),
        sq: sqrt_table(p),
    };
    rk4(&mut rhs, &mut y, rec.n_samples(), rec.spacing());
    let state = SingleModeFockState { amps: y[..d].to_vec() };
    if !state.is_finite() {
        return Err(Error::Validation("level-3 amplitudes diverged".into()));
    }
    Ok(HierarchyStateSet { level: 3, mode, states: vec![state] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photonics::{integrated_currents, ladder_matrices};
    use nalgebra::{DMatrix, DVector};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn synthetic(m: usize, n: usize, h: f64, full: bool, f: impl Fn(f64, usize, usize) -> C) -> CurrentRecord {
        let times: Vec<f64> = (0..n).map(|k| 0.3 + k as f64 * h).collect();
        let mut values = Vec::new();
        for &t in &times {
            let rows = if full { m } else { 1 };
            for a in 0..rows {
                for b in 0..m {
                    values.push(f(t, a, b));
                }
            }
        }
        let mode = if full { RecordMode::Full } else { RecordMode::GroundRow };
        CurrentRecord::from_parts(mode, m, times, values).unwrap()
    }

    // Hermitian toy currents with a real diagonal.
    fn toy(t: f64, a: usize, b: usize) -> C {
        let (x, y) = (a.min(b) as f64, a.max(b) as f64);
        let base = c(0.2 * (0.7 * t + x).cos() + 0.05 * y, 0.0);
        if a == b {
            base
        } else {
            let v = c(0.1 * (0.3 * t + y).sin(), 0.08 * (0.5 * t - x).cos());
            if a < b { v } else { v.conj() }
        }
    }

    #[test]
    fn coherent_limit_matches_trapezoid_displacement() {
        let rec = synthetic(3, 400, 0.05, true, |t, a, b| if a == b { toy(t, a, b) } else { ZERO });
        let mode = Mode::new(1.3, 0.5);
        let ic = integrated_currents(&rec, mode).unwrap();
        let beta = -C::i() * ic.j_plus_ground_row[0];
        let coherent = SingleModeFockState::coherent(12, beta);
        for set in [
            solve_level1_decoupled(&rec, mode, 12).unwrap(),
            solve_level2_groundrow(&rec, mode, 12).unwrap(),
            solve_level3_markov(&rec, mode, 12).unwrap(),
        ] {
            let s = set.ground();
            let overlap: C = s.amps.iter().zip(&coherent.amps).map(|(a, b)| a.conj() * b).sum();
            assert!((overlap.norm() - 1.0).abs() < 1e-9, "level {} |<β|χ>| = {}", set.level, overlap.norm());
            assert!(set.flags().is_empty());
        }
    }

    #[test]
    fn level1_level2_agree_when_only_ground_row_couples() {
        let f = |t: f64, a: usize, b: usize| if a == 0 || b == 0 { toy(t, a, b) } else { ZERO };
        let rec = synthetic(4, 300, 0.05, true, f);
        let mode = Mode::new(0.9, 0.3);
        let l1 = solve_level1_decoupled(&rec, mode, 8).unwrap();
        let l2 = solve_level2_groundrow(&rec, mode, 8).unwrap();
        for (s1, s2) in l1.states.iter().zip(&l2.states) {
            for (a, b) in s1.amps.iter().zip(&s2.amps) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn level1_conserves_total_norm() {
        let rec = synthetic(4, 400, 0.05, true, toy);
        let set = solve_level1_decoupled(&rec, Mode::new(0.7, 0.4), 14).unwrap();
        assert!((set.total_norm() - 1.0).abs() < 1e-9, "{}", set.total_norm());
    }

    #[test]
    fn level1_matches_dense_propagation() {
        // Oracle: exact exponentials of the joint generator at the Gauss points
        // of a fine grid, with the current interpolated linearly in e^{∓iωt} j.
        let (m, p, h) = (3usize, 6usize, 0.04);
        let rec = synthetic(m, 120, h, true, toy);
        let mode = Mode::new(1.1, 0.6);
        let g = mode.coupling();
        let set = solve_level1_decoupled(&rec, mode, p).unwrap();
        let (a, ad, _) = ladder_matrices(p).unwrap();
        let d = p + 1;
        let gen = |t: f64, k: usize| -> DMatrix<C> {
            let frac = (t - rec.times()[k]) / h;
            let mut out = DMatrix::<C>::zeros(d * m, d * m);
            for r in 0..m {
                for s in 0..m {
                    let lerp = |sign: f64| {
                        let e0 = C::from_polar(1.0, sign * mode.omega * rec.times()[k]);
                        let e1 = C::from_polar(1.0, sign * mode.omega * rec.times()[k + 1]);
                        (1.0 - frac) * e0 * rec.element(k, r, s).unwrap()
                            + frac * e1 * rec.element(k + 1, r, s).unwrap()
                    };
                    let block = (&a * lerp(-1.0) + &ad * lerp(1.0)) * C::new(g, 0.0);
                    for i in 0..d {
                        for j in 0..d {
                            out[(r * d + i, s * d + j)] = block[(i, j)];
                        }
                    }
                }
            }
            out
        };
        let mut psi = DVector::<C>::zeros(d * m);
        psi[0] = c(1.0, 0.0);
        let sub = 8;
        let off = 0.5 - 3f64.sqrt() / 6.0;
        for k in 0..rec.n_samples() - 1 {
            for s in 0..sub {
                let t0 = rec.times()[k] + s as f64 * h / sub as f64;
                let dt = h / sub as f64;
                let h1 = gen(t0 + off * dt, k);
                let h2 = gen(t0 + (1.0 - off) * dt, k);
                let w = 3f64.sqrt() / 12.0;
                let omega = (&h1 + &h2) * C::new(0.5 * dt, 0.0)
                    + (&h1 * &h2 - &h2 * &h1) * C::new(w * dt * dt, 0.0) * C::i();
                psi = expm(&(omega * C::new(0.0, -1.0))) * psi;
            }
        }
        for r in 0..m {
            for i in 0..d {
                let got = set.states[r].amps[i];
                let want = psi[r * d + i];
                assert!((got - want).norm() < 1e-9, "m={r} n={i}: {got} vs {want}");
            }
        }
    }

    fn expm(x: &DMatrix<C>) -> DMatrix<C> {
        let norm = x.iter().map(|v| v.norm()).fold(0.0, f64::max) * x.nrows() as f64;
        let s = (norm.max(1.0).log2().ceil() as i32 + 1).max(0);
        let y = x * C::new(0.5f64.powi(s), 0.0);
        let mut term = DMatrix::<C>::identity(x.nrows(), x.ncols());
        let mut acc = term.clone();
        for k in 1..30 {
            term = &term * &y * C::new(1.0 / k as f64, 0.0);
            acc += &term;
        }
        for _ in 0..s {
            acc = &acc * &acc;
        }
        acc
    }

    #[test]
    fn level3_single_transition_tracks_closed_form_at_weak_coupling() {
        let rec = synthetic(2, 600, 0.05, false, toy);
        let mode = Mode::new(1.7, 0.02);
        let set = solve_level3_markov(&rec, mode, 6).unwrap();
        let ic = integrated_currents(&rec, mode).unwrap();
        let beta = -C::i() * ic.j_plus_ground_row[0];
        let chi = set.ground().normalized();
        let (a, _, _) = ladder_matrices(6).unwrap();
        let v = DVector::from_column_slice(&chi.amps);
        let mean = v.dotc(&(&a * &v));
        assert!((mean - beta).norm() < 1e-4 * beta.norm(), "{mean} vs {beta}");
        assert!(set.norm_loss().abs() < 1e-2);
    }

    #[test]
    fn level1_requires_full_record() {
        let rec = synthetic(2, 10, 0.1, false, toy);
        assert!(matches!(solve_level1_decoupled(&rec, Mode::new(1.0, 0.1), 4), Err(Error::MissingInput(_))));
        assert!(solve_level2_groundrow(&rec, Mode::new(1.0, 0.1), 0).is_err());
    }
}
