use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::propagate::{CurrentRecord, Propagator, RecordMode};

type C = Complex64;

/// Both sides of `⟨ĵ_H(t')ĵ_H(t'')⟩ − ⟨ĵ_H(t')⟩⟨ĵ_H(t'')⟩ = Σ_{m≠i} j_{i,m}(t') j_{m,i}(t'')`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceCheck {
    /// Left side from direct propagation, no eigenbasis insertion.
    pub lhs: C,
    /// Right side from the recorded transition currents.
    pub rhs: C,
    /// `j_{i,m}(t') j_{m,i}(t'')` for every `m`; entry `i` is zero.
    pub terms: Vec<C>,
}

impl CovarianceCheck {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).norm()
    }

    /// Residual when only the states in `keep` enter the sum.
    pub fn partial_residual(&self, keep: impl IntoIterator<Item = usize>) -> f64 {
        let partial: C = keep.into_iter().map(|m| self.terms[m]).sum();
        (self.lhs - partial).norm()
    }
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Compares the current covariance at record samples `s1` (t') and `s2` (t'')
/// with the transition-current sum. `ground` is the field-free initial state;
/// `prop` must be the propagator that produced `rec`.
pub fn covariance_identity_check(
    prop: &Propagator,
    ground: &[C],
    rec: &CurrentRecord,
    s1: usize,
    s2: usize,
) -> Result<CovarianceCheck> {
    if rec.mode() != RecordMode::Full {
        return Err(Error::MissingInput("covariance check needs the full transition-current matrix".into()));
    }
    let grid = prop.grid();
    if rec.n_samples() != grid.n_samples() || s1 >= rec.n_samples() || s2 >= rec.n_samples() {
        return Err(Error::InvalidParameter(format!(
            "sample indices ({s1}, {s2}) outside a record of {} samples",
            rec.n_samples()
        )));
    }
    if ground.len() != prop.system().dim() {
        return Err(Error::DimensionMismatch { expected: prop.system().dim(), found: ground.len() });
    }
    let (k1, k2) = (s1 * grid.stride, s2 * grid.stride);
    let mut ws = prop.workspace();
    let dim = ground.len();

    let mut psi2 = ground.to_vec();
    prop.evolve(&mut ws, &mut psi2, 0, k2);
    let mut moved = vec![C::default(); dim];
    prop.apply_current(k2, &psi2, &mut moved);
    let mean2 = dot(&psi2, &moved);
    prop.evolve(&mut ws, &mut moved, k2, k1);

    let mut psi1 = ground.to_vec();
    prop.evolve(&mut ws, &mut psi1, 0, k1);
    let mut jpsi1 = vec![C::default(); dim];
    prop.apply_current(k1, &psi1, &mut jpsi1);
    let mean1 = dot(&psi1, &jpsi1);
    let lhs = dot(&jpsi1, &moved) - mean1 * mean2;

    let m = rec.n_states();
    let mut terms = vec![C::default(); m];
    for (a, term) in terms.iter_mut().enumerate().skip(1) {
        *term = rec.element(s1, 0, a).unwrap() * rec.element(s2, a, 0).unwrap();
    }
    let rhs = terms.iter().sum();
    Ok(CovarianceCheck { lhs, rhs, terms })
}
