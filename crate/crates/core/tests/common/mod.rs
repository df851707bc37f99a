//! Independent dense oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qhhg::lattice::{build_basis, DrivenHubbard, ModelParams, SymmetrySector};
use qhhg::pulse::PulseParams;
use qhhg::spectral::{diagonalize, EigenSystem};

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// `exp(M)` by scaling and squaring with a long Taylor series.
pub fn dense_expm(m: &DMatrix<C>) -> DMatrix<C> {
    let n = m.nrows();
    let norm: f64 = (0..n).map(|r| m.row(r).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let a = m / C::new(2f64.powi(s), 0.0);
    let mut term = DMatrix::<C>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a / C::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub struct Setup {
    pub sys: DrivenHubbard,
    pub eig: EigenSystem,
}

pub fn setup(l: usize, sector: Option<SymmetrySector>) -> Setup {
    let p = ModelParams::standard(l);
    let sys = DrivenHubbard::new(&build_basis(&p, sector).unwrap()).unwrap();
    let eig = diagonalize(&sys.hamiltonian(0.0)).unwrap();
    Setup { sys, eig }
}

/// Ground-state current `⟨ψ(t)| ĵ(t) |ψ(t)⟩` from a dense Crank–Nicolson
/// propagation with `refine` substeps per step of `dt`, reported every
/// `stride * refine` substeps.
pub fn crank_nicolson_ground_current(
    sys: &DrivenHubbard,
    psi0: &[C],
    pulse: &PulseParams,
    dt: f64,
    n_steps: usize,
    stride: usize,
    refine: usize,
) -> Vec<f64> {
    let n = sys.dim();
    let h_dt = dt / refine as f64;
    let mut psi = DVector::from_column_slice(psi0);
    let eye = DMatrix::<C>::identity(n, n);
    let measure = |psi: &DVector<C>, t: f64| {
        let j = sys.current(pulse.vector_potential(t)).to_dense();
        (psi.adjoint() * j * psi)[(0, 0)].re
    };
    let mut out = vec![measure(&psi, pulse.t_start)];
    for k in 0..n_steps * refine {
        let t_mid = pulse.t_start + (k as f64 + 0.5) * h_dt;
        let h = sys.hamiltonian(pulse.vector_potential(t_mid)).to_dense();
        let half = h * C::new(0.0, 0.5 * h_dt);
        let lhs = &eye + &half;
        let rhs = (&eye - &half) * &psi;
        psi = lhs.lu().solve(&rhs).unwrap();
        if (k + 1) % (stride * refine) == 0 {
            out.push(measure(&psi, pulse.t_start + (k + 1) as f64 * h_dt));
        }
    }
    out
}

pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
