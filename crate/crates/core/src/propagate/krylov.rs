use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

const BREAKDOWN_TOL: f64 = 1e-13;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Reusable Arnoldi workspace for one state dimension and subspace size.
#[derive(Clone, Debug)]
pub struct KrylovWorkspace {
    dim: usize,
    krylov_dim: usize,
    basis: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
}

impl KrylovWorkspace {
    pub fn new(dim: usize, krylov_dim: usize) -> Self {
        assert!(krylov_dim >= 1);
        Self {
            dim,
            krylov_dim,
            basis: vec![vec![Complex64::default(); dim]; krylov_dim],
            w: vec![Complex64::default(); dim],
        }
    }

    /// Replaces `psi` by `exp(-i H dt) psi` from the Arnoldi projection on the
    /// `krylov_dim`-dimensional Krylov space of `psi`, plus the standard
    /// one-term residual correction (no extra matrix-vector product).
    ///
    /// `apply(x, y)` must write `y = H x`. A negative `dt` runs the step backwards.
    /// Breakdown (an invariant subspace smaller than `krylov_dim`) is accepted
    /// and gives the exact exponential on that subspace.
    pub fn step<F>(&mut self, psi: &mut [Complex64], mut apply: F, dt: f64)
    where
        F: FnMut(&[Complex64], &mut [Complex64]),
    {
        debug_assert_eq!(psi.len(), self.dim);
        let beta = norm(psi);
        if beta == 0.0 {
            return;
        }
        for (b, p) in self.basis[0].iter_mut().zip(psi.iter()) {
            *b = p / beta;
        }

        let m = self.krylov_dim;
        let mut h = DMatrix::<Complex64>::zeros(m, m);
        let mut k = m;
        let mut residual = 0.0;
        let mut scale = 0.0;
        for j in 0..m {
            apply(&self.basis[j], &mut self.w);
            if j == 0 {
                scale = norm(&self.w);
            }
            // two passes of classical Gram-Schmidt
            for _ in 0..2 {
                for i in 0..=j {
                    let c = dot(&self.basis[i], &self.w);
                    h[(i, j)] += c;
                    for (wv, bv) in self.w.iter_mut().zip(&self.basis[i]) {
                        *wv -= c * bv;
                    }
                }
            }
            let next = norm(&self.w);
            if next <= BREAKDOWN_TOL * scale.max(f64::MIN_POSITIVE) {
                k = j + 1;
                break;
            }
            if j + 1 == m {
                residual = next;
                break;
            }
            h[(j + 1, j)] = Complex64::new(next, 0.0);
            for (b, wv) in self.basis[j + 1].iter_mut().zip(&self.w) {
                *b = wv / next;
            }
        }

        let hk = h.view((0, 0), (k, k)).into_owned();
        let herm = (&hk + hk.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        let mut coeffs = vec![Complex64::default(); k];
        let mut phi1_last = Complex64::default();
        for l in 0..k {
            let z = Complex64::new(0.0, -eig.eigenvalues[l] * dt);
            let weight = eig.eigenvectors[(0, l)].conj() * beta;
            for (r, c) in coeffs.iter_mut().enumerate() {
                *c += eig.eigenvectors[(r, l)] * z.exp() * weight;
            }
            phi1_last += eig.eigenvectors[(k - 1, l)] * phi1(z) * weight;
        }

        for (idx, p) in psi.iter_mut().enumerate() {
            *p = (0..k).map(|r| coeffs[r] * self.basis[r][idx]).sum();
        }
        // Corrected approximant: the residual direction left over from the
        // last Arnoldi step enters with weight -i dt h_{m+1,m} [phi1(-i dt H_m) e1]_m.
        if residual > 0.0 {
            let corr = Complex64::new(0.0, -dt) * phi1_last;
            for (p, wv) in psi.iter_mut().zip(&self.w) {
                *p += corr * wv;
            }
        }
    }
}

/// `(e^z − 1)/z`, accurate near zero.
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        Complex64::new(1.0, 0.0) + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    } else {
        (z.exp() - 1.0) / z
    }
}

/// One-shot convenience wrapper around [`KrylovWorkspace::step`].
pub fn krylov_step<F>(psi: &[Complex64], apply: F, dt: f64, krylov_dim: usize) -> Vec<Complex64>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let mut out = psi.to_vec();
    KrylovWorkspace::new(psi.len(), krylov_dim).step(&mut out, apply, dt);
    out
}
