use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Mode, SingleModeFockState};
use crate::error::{Error, Result};
use crate::propagate::CurrentRecord;

type C = Complex64;

/// Integrated transition currents `J^±_{m,n} = g ∫ e^{±iωt} j_{m,n}(t) dt`
/// for the ground row and column, by the trapezoid rule on the record grid.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratedCurrents {
    /// `J⁺_{i,m}`
    pub j_plus_ground_row: Vec<C>,
    /// `J⁻_{i,m}`
    pub j_minus_ground_row: Vec<C>,
    /// `J⁺_{m,i}`, equal to `conj(J⁻_{i,m})` bit for bit.
    pub j_plus_to_ground: Vec<C>,
}

pub fn integrated_currents(rec: &CurrentRecord, mode: Mode) -> Result<IntegratedCurrents> {
    let n = rec.n_samples();
    if n < 2 {
        return Err(Error::InvalidParameter("current record needs at least two samples".into()));
    }
    let m = rec.n_states();
    let h = rec.spacing();
    let mut plus = vec![C::default(); m];
    let mut minus = vec![C::default(); m];
    let mut back = vec![C::default(); m];
    for k in 0..n {
        let w = if k == 0 || k == n - 1 { 0.5 * h } else { h };
        let e = C::from_polar(1.0, -mode.omega * rec.times()[k]);
        let ec = e.conj();
        for (a, j) in rec.ground_row(k).iter().enumerate() {
            let t = e * j;
            plus[a] += w * (ec * j);
            minus[a] += w * t;
            back[a] += w * t.conj();
        }
    }
    let g = mode.coupling();
    let scale = |v: Vec<C>| v.into_iter().map(|x| g * x).collect::<Vec<_>>();
    Ok(IntegratedCurrents {
        j_plus_ground_row: scale(plus),
        j_minus_ground_row: scale(minus),
        j_plus_to_ground: scale(back),
    })
}

/// Per-mode scalars of the Markov-state approximation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsaQuantities {
    pub beta: C,
    pub b: f64,
    pub phi: f64,
    pub c: f64,
    pub d: f64,
}

/// `β = −i J⁺_{i,i}`, `B e^{iφ} = Σ_{m≠i} J⁺_{i,m} J⁺_{m,i}`,
/// `C = Σ_{m≠i} |J⁺_{i,m}|²`, `D = Σ_{m≠i} |J⁻_{i,m}|²`.
pub fn msa_quantities(ic: &IntegratedCurrents) -> MsaQuantities {
    let beta = C::new(0.0, -1.0) * ic.j_plus_ground_row[0];
    let mut sum = C::default();
    let (mut c, mut d) = (0.0, 0.0);
    for a in 1..ic.j_plus_ground_row.len() {
        sum += ic.j_plus_ground_row[a] * ic.j_plus_to_ground[a];
        c += ic.j_plus_ground_row[a].norm_sqr();
        d += ic.j_minus_ground_row[a].norm_sqr();
    }
    let b = sum.norm();
    let phi = if b == 0.0 { 0.0 } else { sum.arg() };
    MsaQuantities { beta, b, phi, c, d }
}

/// `D(β)[(1 − D/2)|0⟩ − (B e^{iφ}/√2)|2⟩]`, normalized, with the displacement
/// exponentiated on the truncated space `0..=p`.
pub fn msa_state(q: &MsaQuantities, p: usize) -> Result<SingleModeFockState> {
    if p < 2 {
        return Err(Error::InvalidParameter("MSA state needs a Fock truncation of at least 2".into()));
    }
    if q.beta.norm_sqr() > 0.9 * p as f64 {
        log::warn!("|β|² = {:.3} is within 10% of the Fock truncation p = {p}", q.beta.norm_sqr());
    }
    let mut v = DVector::<C>::zeros(p + 1);
    v[0] = C::new(1.0 - 0.5 * q.d, 0.0);
    v[2] = -C::from_polar(q.b / 2f64.sqrt(), q.phi);
    let v = displacement(q.beta, p) * v;
    let state = SingleModeFockState { amps: v.iter().copied().collect() };
    Ok(state.normalized())
}

/// `exp(β a† − β* a)` on Fock states `0..=p`, via the Hermitian generator `i(β a† − β* a)`.
fn displacement(beta: C, p: usize) -> DMatrix<C> {
    let d = p + 1;
    if beta == C::default() {
        return DMatrix::identity(d, d);
    }
    let mut k = DMatrix::<C>::zeros(d, d);
    for n in 0..p {
        let s = ((n + 1) as f64).sqrt();
        // β a† has (n+1, n) entry β√(n+1); −β* a has (n, n+1) entry −β*√(n+1)
        k[(n + 1, n)] = C::i() * beta * s;
        k[(n, n + 1)] = -C::i() * beta.conj() * s;
    }
    let eig = SymmetricEigen::new(k);
    let u = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C::from_polar(1.0, -l)));
    u * phases * u.adjoint()
}
