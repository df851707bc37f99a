use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Truncated ladder operators `(a, a†, n)` on Fock states `0..=p`.
pub fn ladder_matrices(p: usize) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>)> {
    if p < 1 {
        return Err(Error::InvalidParameter("Fock truncation must be at least 1".into()));
    }
    let d = p + 1;
    let a = DMatrix::from_fn(d, d, |r, c| {
        if c == r + 1 {
            Complex64::new((c as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let ad = a.adjoint();
    let n = &ad * &a;
    Ok((a, ad, n))
}

/// Amplitudes `c_0..c_p` of one photonic mode.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleModeFockState {
    pub amps: Vec<Complex64>,
}

impl SingleModeFockState {
    pub fn vacuum(p: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); p + 1];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn zero(p: usize) -> Self {
        Self { amps: vec![Complex64::new(0.0, 0.0); p + 1] }
    }

    pub fn number(p: usize, n: usize) -> Self {
        let mut s = Self::zero(p);
        s.amps[n] = Complex64::new(1.0, 0.0);
        s
    }

    /// Truncated coherent state `e^{-|α|²/2} Σ α^n/√n! |n⟩`, not renormalized.
    pub fn coherent(p: usize, alpha: Complex64) -> Self {
        let mut amps = Vec::with_capacity(p + 1);
        let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 0..=p {
            if n > 0 {
                c *= alpha / (n as f64).sqrt();
            }
            amps.push(c);
        }
        Self { amps }
    }

    pub fn truncation(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return self.clone();
        }
        Self { amps: self.amps.iter().map(|c| c / n).collect() }
    }

    /// `Σ_{n > level} |c_n|²`.
    pub fn population_above(&self, level: usize) -> f64 {
        self.amps.iter().skip(level + 1).map(|c| c.norm_sqr()).sum()
    }

    /// Population in the highest retained Fock state, relative to the norm.
    pub fn edge_population(&self) -> f64 {
        let norm = self.norm_sqr();
        if norm == 0.0 {
            return 0.0;
        }
        self.amps[self.amps.len() - 1].norm_sqr() / norm
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_basics() {
        let (a, ad, n) = ladder_matrices(5).unwrap();
        for k in 0..=5 {
            assert!((n[(k, k)].re - k as f64).abs() < 1e-12);
        }
        let comm = &a * &ad - &ad * &a;
        for r in 0..6 {
            for c in 0..6 {
                let expect = if r == c { if r == 5 { -5.0 } else { 1.0 } } else { 0.0 };
                assert!((comm[(r, c)].re - expect).abs() < 1e-12, "({r},{c})");
            }
        }
        let vac = nalgebra::DVector::from_column_slice(&SingleModeFockState::vacuum(5).amps);
        assert!((&a * vac).norm() == 0.0);
        assert!(ladder_matrices(0).is_err());
    }

    #[test]
    fn coherent_state_norm() {
        let s = SingleModeFockState::coherent(40, Complex64::new(0.6, -0.8));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-14);
        assert!(s.edge_population() < 1e-30);
    }
}
