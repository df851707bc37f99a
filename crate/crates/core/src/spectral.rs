//! Full dense diagonalization of the field-free Hamiltonian.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{build_basis, DrivenHubbard, ModelParams, SparseOperator, SymmetrySector};

/// All eigenpairs of a Hermitian operator, energies ascending.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub energies: Vec<f64>,
    /// Column `m` is the eigenvector of `energies[m]`.
    pub vectors: DMatrix<Complex64>,
}

const HERMITIAN_TOL: f64 = 1e-12;
const CHECK_TOL: f64 = 1e-10;

impl EigenSystem {
    /// Number of eigenstates.
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn state(&self, m: usize) -> Vec<Complex64> {
        self.vectors.column(m).iter().cloned().collect()
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// Largest `‖H φ_m − E_m φ_m‖` over all states.
    pub fn max_residual(&self, h: &SparseOperator) -> f64 {
        let mut y = vec![Complex64::default(); self.dim()];
        (0..self.len())
            .map(|m| {
                let phi = self.state(m);
                h.apply(&phi, &mut y);
                y.iter().zip(&phi).map(|(a, b)| (a - b * self.energies[m]).norm_sqr()).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max |⟨φ_m|φ_n⟩ − δ_{mn}|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.vectors.adjoint() * &self.vectors;
        let mut worst: f64 = 0.0;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// Groups of indices whose energies agree within `tol`.
    pub fn degenerate_blocks(&self, tol: f64) -> Vec<std::ops::Range<usize>> {
        let mut blocks = Vec::new();
        let mut start = 0;
        for m in 1..=self.len() {
            if m == self.len() || self.energies[m] - self.energies[m - 1] > tol {
                blocks.push(start..m);
                start = m;
            }
        }
        blocks
    }
}

/// Dense spectral decomposition of a field-free Hamiltonian.
///
/// Purely real input is diagonalized in real arithmetic so eigenvectors come out real.
pub fn diagonalize(h0: &SparseOperator) -> Result<EigenSystem> {
    let scale = h0.norm_inf().max(f64::MIN_POSITIVE);
    let herm = h0.hermiticity_residual();
    if herm > HERMITIAN_TOL * scale {
        return Err(Error::Validation(format!(
            "operator is not Hermitian (residual {herm:.3e})"
        )));
    }
    let dim = h0.dim();
    if dim == 0 {
        return Ok(EigenSystem { energies: Vec::new(), vectors: DMatrix::zeros(0, 0) });
    }

    let real = h0.triplets().all(|(_, _, v)| v.im == 0.0);
    let (values, vectors): (Vec<f64>, DMatrix<Complex64>) = if real {
        let dense = h0.to_dense().map(|v| v.re);
        let sym = 0.5 * (&dense + dense.transpose());
        let eig = SymmetricEigen::new(sym);
        (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors.map(|v| Complex64::new(v, 0.0)))
    } else {
        let dense = h0.to_dense();
        let sym = (&dense + dense.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(sym);
        (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
    };

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let energies: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let vectors = DMatrix::from_fn(dim, dim, |r, c| vectors[(r, order[c])]);
    let eig = EigenSystem { energies, vectors };

    let residual = eig.max_residual(h0);
    if residual > CHECK_TOL * scale {
        return Err(Error::Validation(format!("eigenpair residual {residual:.3e} too large")));
    }
    let ortho = eig.orthonormality_error();
    if ortho > CHECK_TOL {
        return Err(Error::Validation(format!("eigenvectors not orthonormal ({ortho:.3e})")));
    }
    Ok(eig)
}

/// The spin-even momentum sector holding the field-free ground state.
///
/// With periodic boundaries the ground state carries momentum 0 when each
/// spin species has an odd electron count and momentum π when it is even,
/// so the sector is found by comparing the lowest level of every momentum.
pub fn ground_sector(params: &ModelParams) -> Result<SymmetrySector> {
    let mut best: Option<(f64, SymmetrySector)> = None;
    for k in 0..params.sites {
        let sector = SymmetrySector { total_momentum: k, spin_parity: 1 };
        let basis = build_basis(params, Some(sector))?;
        if basis.dim() == 0 {
            continue;
        }
        let e0 = diagonalize(&DrivenHubbard::new(&basis)?.hamiltonian(0.0))?.ground_energy();
        let scale = params.hopping.max(params.onsite_u);
        if best.is_none_or(|(e, _)| e0 < e - 1e-10 * scale) {
            best = Some((e0, sector));
        }
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| Error::InvalidParameter("no spin-even sector is populated".into()))
}
