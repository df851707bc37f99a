//! Many-body basis and operators of the periodic Fermi-Hubbard chain driven
//! through a Peierls phase.
//!
//! The field-dependent pieces are assembled from a cached forward-hopping
//! template `T = Σ_{j,μ} c†_{j,μ} c_{j+1,μ}`:
//!
//! ```text
//! H(A) = -t0 (e^{iaA} T + e^{-iaA} T†) + H_U
//! j(A) = -i a t0 (e^{iaA} T - e^{-iaA} T†)
//! ```

mod basis;
mod sparse;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use basis::{build_basis, FockConfig, ManyBodyBasis, SectorProjection, Spin, SymmetrySector};
pub use sparse::SparseOperator;

use crate::error::{Error, Result};

/// Physical parameters of the chain, all in atomic units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub sites: usize,
    pub n_up: usize,
    pub n_dn: usize,
    #[serde(rename = "t0_au")]
    pub hopping: f64,
    #[serde(rename = "u_au")]
    pub onsite_u: f64,
    #[serde(rename = "a_lat_au")]
    pub lattice_constant: f64,
    #[serde(default = "default_periodic")]
    pub periodic: bool,
}

fn default_periodic() -> bool {
    true
}

pub const DEFAULT_T0_AU: f64 = 0.0191;
pub const DEFAULT_A_LAT_AU: f64 = 7.5589;
pub const DEFAULT_U_OVER_T0: f64 = 10.0;

impl ModelParams {
    /// Half-filled chain with the Sr2CuO3-like hopping, lattice constant and `U = 10 t0`.
    pub fn standard(sites: usize) -> Self {
        Self {
            sites,
            n_up: sites / 2,
            n_dn: sites / 2,
            hopping: DEFAULT_T0_AU,
            onsite_u: DEFAULT_U_OVER_T0 * DEFAULT_T0_AU,
            lattice_constant: DEFAULT_A_LAT_AU,
            periodic: true,
        }
    }

    pub fn with_filling(mut self, n_up: usize, n_dn: usize) -> Self {
        self.n_up = n_up;
        self.n_dn = n_dn;
        self
    }

    pub fn with_u(mut self, u: f64) -> Self {
        self.onsite_u = u;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.sites < 2 {
            return bad(format!("chain needs at least 2 sites, got {}", self.sites));
        }
        if self.sites > 16 {
            return bad(format!("chains longer than 16 sites are not supported, got {}", self.sites));
        }
        if self.n_up > self.sites || self.n_dn > self.sites {
            return bad(format!(
                "particle numbers ({}, {}) exceed {} sites",
                self.n_up, self.n_dn, self.sites
            ));
        }
        if !(self.hopping > 0.0) {
            return bad(format!("t0 must be positive, got {}", self.hopping));
        }
        if !(self.onsite_u >= 0.0) {
            return bad(format!("U must be non-negative, got {}", self.onsite_u));
        }
        if !(self.lattice_constant > 0.0) {
            return bad(format!("lattice constant must be positive, got {}", self.lattice_constant));
        }
        if !self.periodic {
            return bad("only periodic boundary conditions are supported".into());
        }
        Ok(())
    }
}

/// Forward-hopping template `T = Σ_{j,μ} c†_{j,μ} c_{j+1,μ}` including the wrap bond.
pub fn build_hopping_template(basis: &ManyBodyBasis) -> Result<SparseOperator> {
    let l = basis.params().sites;
    basis.matrix_from_action(|c| {
        let mut out = Vec::with_capacity(2 * l);
        for spin in [Spin::Up, Spin::Down] {
            for j in 0..l {
                if let Some((target, sign)) = c.hop(spin, j, (j + 1) % l) {
                    out.push((target, Complex64::new(sign, 0.0)));
                }
            }
        }
        out
    })
}

/// Diagonal onsite repulsion `U · (number of doubly occupied sites)`.
pub fn build_interaction(basis: &ManyBodyBasis) -> Result<SparseOperator> {
    let u = basis.params().onsite_u;
    basis.matrix_from_action(|c| vec![(*c, Complex64::new(u * c.doublons() as f64, 0.0))])
}

fn check_dims(a: &SparseOperator, b: &SparseOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

/// `-t0 (e^{iaA} T + e^{-iaA} T†) + H_U`.
pub fn assemble_hamiltonian(
    template: &SparseOperator,
    interaction: &SparseOperator,
    params: &ModelParams,
    vector_potential: f64,
) -> Result<SparseOperator> {
    check_dims(template, interaction)?;
    let phase = Complex64::from_polar(1.0, params.lattice_constant * vector_potential);
    let t0 = params.hopping;
    let adj = template.adjoint();
    SparseOperator::linear_combination(&[
        (-t0 * phase, template),
        (-t0 * phase.conj(), &adj),
        (Complex64::new(1.0, 0.0), interaction),
    ])
}

/// `-i a t0 (e^{iaA} T - e^{-iaA} T†)`, the current along the chain.
pub fn build_current_operator(
    template: &SparseOperator,
    params: &ModelParams,
    vector_potential: f64,
) -> Result<SparseOperator> {
    let phase = Complex64::from_polar(1.0, params.lattice_constant * vector_potential);
    let pref = Complex64::new(0.0, -params.lattice_constant * params.hopping);
    let adj = template.adjoint();
    SparseOperator::linear_combination(&[(pref * phase, template), (-pref * phase.conj(), &adj)])
}

/// All operators of the driven chain in one basis, with the field entering
/// only through two scalar phases at application time.
#[derive(Clone, Debug)]
pub struct DrivenHubbard {
    params: ModelParams,
    template: SparseOperator,
    template_adj: SparseOperator,
    interaction: Vec<f64>,
}

impl DrivenHubbard {
    pub fn new(basis: &ManyBodyBasis) -> Result<Self> {
        let template = build_hopping_template(basis)?;
        let interaction = build_interaction(basis)?.diagonal().iter().map(|v| v.re).collect();
        Ok(Self {
            params: basis.params().clone(),
            template_adj: template.adjoint(),
            template,
            interaction,
        })
    }

    pub fn dim(&self) -> usize {
        self.template.dim()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn template(&self) -> &SparseOperator {
        &self.template
    }

    fn phase(&self, vector_potential: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.params.lattice_constant * vector_potential)
    }

    /// `y = H(A) x`.
    pub fn apply_hamiltonian(&self, vector_potential: f64, x: &[Complex64], y: &mut [Complex64]) {
        let phase = self.phase(vector_potential);
        let t0 = self.params.hopping;
        for ((yi, xi), u) in y.iter_mut().zip(x).zip(&self.interaction) {
            *yi = xi * *u;
        }
        self.template.apply_add(-t0 * phase, x, y);
        self.template_adj.apply_add(-t0 * phase.conj(), x, y);
    }

    /// `y = Σ_k w_k H(A_k) x` for real weights, in a single pass.
    pub fn apply_hamiltonian_mix(&self, terms: &[(f64, f64)], x: &[Complex64], y: &mut [Complex64]) {
        let t0 = self.params.hopping;
        let total: f64 = terms.iter().map(|(w, _)| w).sum();
        let fwd: Complex64 = terms.iter().map(|&(w, a)| w * self.phase(a)).sum();
        for ((yi, xi), u) in y.iter_mut().zip(x).zip(&self.interaction) {
            *yi = xi * (*u * total);
        }
        self.template.apply_add(-t0 * fwd, x, y);
        self.template_adj.apply_add(-t0 * fwd.conj(), x, y);
    }

    /// `y = j(A) x`.
    pub fn apply_current(&self, vector_potential: f64, x: &[Complex64], y: &mut [Complex64]) {
        let phase = self.phase(vector_potential);
        let pref = Complex64::new(0.0, -self.params.lattice_constant * self.params.hopping);
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        self.template.apply_add(pref * phase, x, y);
        self.template_adj.apply_add(-pref * phase.conj(), x, y);
    }

    pub fn hamiltonian(&self, vector_potential: f64) -> SparseOperator {
        let diag: Vec<Complex64> = self.interaction.iter().map(|&u| u.into()).collect();
        assemble_hamiltonian(
            &self.template,
            &SparseOperator::from_diagonal(&diag),
            &self.params,
            vector_potential,
        )
        .expect("cached operators share one dimension")
    }

    pub fn current(&self, vector_potential: f64) -> SparseOperator {
        build_current_operator(&self.template, &self.params, vector_potential)
            .expect("cached operators share one dimension")
    }

    /// Spectral-radius bound `2 t0 ‖T‖_∞ + max U n_d`.
    pub fn norm_bound(&self) -> f64 {
        2.0 * self.params.hopping * self.template.norm_inf()
            + self.interaction.iter().cloned().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn free_fermion_ground(l: usize, n_up: usize, n_dn: usize, t0: f64) -> f64 {
        let mut eps: Vec<f64> = (0..l).map(|k| -2.0 * t0 * (2.0 * PI * k as f64 / l as f64).cos()).collect();
        eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eps[..n_up].iter().sum::<f64>() + eps[..n_dn].iter().sum::<f64>()
    }

    fn lowest_eigenvalue(op: &SparseOperator) -> f64 {
        let dense = op.to_dense();
        let eig = SymmetricEigen::new(dense);
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn all_eigenvalues(op: &SparseOperator) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(op.to_dense()).eigenvalues.iter().cloned().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn two_site_double_bond() {
        let p = ModelParams::standard(2).with_filling(1, 1);
        let b = build_basis(&p, None).unwrap();
        let t = build_hopping_template(&b).unwrap();
        let sym = SparseOperator::linear_combination(&[(c(1.0), &t), (c(1.0), &t.adjoint())]).unwrap();
        for (r, col, v) in sym.triplets() {
            assert_ne!(r, col);
            assert!((v.norm() - 2.0).abs() < 1e-14, "element {v} at ({r},{col})");
        }
        assert!(sym.nnz() > 0);
    }

    #[test]
    fn template_has_zero_diagonal() {
        for l in [2usize, 3, 4, 5] {
            let p = ModelParams::standard(l).with_filling(l / 2, l.div_ceil(2));
            let t = build_hopping_template(&build_basis(&p, None).unwrap()).unwrap();
            assert!(t.diagonal().iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn free_fermion_ground_energies() {
        for (l, n) in [(4usize, 2usize), (6, 3), (5, 2), (3, 1)] {
            let p = ModelParams::standard(l).with_filling(n, n).with_u(0.0);
            let b = build_basis(&p, None).unwrap();
            let h = assemble_hamiltonian(
                &build_hopping_template(&b).unwrap(),
                &build_interaction(&b).unwrap(),
                &p,
                0.0,
            )
            .unwrap();
            let e0 = lowest_eigenvalue(&h);
            let oracle = free_fermion_ground(l, n, n, p.hopping);
            assert!((e0 - oracle).abs() < 1e-12, "L={l}: {e0} vs {oracle}");
        }
        let p = ModelParams::standard(4).with_u(0.0);
        assert!((free_fermion_ground(4, 2, 2, p.hopping) + 4.0 * p.hopping).abs() < 1e-15);
    }

    #[test]
    fn interaction_counts_doublons() {
        let p = ModelParams::standard(2).with_filling(1, 1);
        let b = build_basis(&p, None).unwrap();
        let hu = build_interaction(&b).unwrap();
        let u = p.onsite_u;
        let both_on_0 = b.index_of(&FockConfig::new(0b01, 0b01)).unwrap();
        let split = b.index_of(&FockConfig::new(0b01, 0b10)).unwrap();
        assert_eq!(hu.get(both_on_0, both_on_0).re, u);
        assert_eq!(hu.get(split, split).re, 0.0);

        let p4 = ModelParams::standard(4);
        let b4 = build_basis(&p4, None).unwrap();
        let hu4 = build_interaction(&b4).unwrap();
        let i = b4.index_of(&FockConfig::new(0b0011, 0b0011)).unwrap();
        assert_eq!(hu4.get(i, i).re, 2.0 * p4.onsite_u);
        for (k, cfg) in b4.configs().iter().enumerate() {
            assert_eq!(hu4.get(k, k).re, p4.onsite_u * (cfg.up & cfg.dn).count_ones() as f64);
        }
    }

    #[test]
    fn hamiltonian_hermitian_and_periodic_in_a() {
        let p = ModelParams::standard(4);
        let b = build_basis(&p, None).unwrap();
        let t = build_hopping_template(&b).unwrap();
        let hu = build_interaction(&b).unwrap();
        let h0 = assemble_hamiltonian(&t, &hu, &p, 0.0).unwrap();
        assert!(h0.triplets().all(|(_, _, v)| v.im == 0.0));
        for a in [0.013, -0.194, 0.37] {
            let h = assemble_hamiltonian(&t, &hu, &p, a).unwrap();
            assert_eq!(h.hermiticity_residual(), 0.0);
            let shifted = assemble_hamiltonian(&t, &hu, &p, a + 2.0 * PI / p.lattice_constant).unwrap();
            let diff = (h.to_dense() - shifted.to_dense()).iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-15, "{diff}");
        }
    }

    #[test]
    fn current_operator_structure() {
        let p = ModelParams::standard(4);
        let b = build_basis(&p, None).unwrap();
        let t = build_hopping_template(&b).unwrap();
        let j0 = build_current_operator(&t, &p, 0.0).unwrap();
        assert_eq!(j0.hermiticity_residual(), 0.0);
        assert!(j0.triplets().all(|(_, _, v)| v.re == 0.0));
        let trace: Complex64 = j0.diagonal().iter().sum();
        assert_eq!(trace.norm(), 0.0);

        let h0 = assemble_hamiltonian(&t, &build_interaction(&b).unwrap(), &p, 0.0).unwrap();
        let real = h0.to_dense().map(|v| v.re);
        let real_dim = real.nrows();
        let eig = SymmetricEigen::new(real);
        let k = eig.eigenvalues.imin();
        let phi: DMatrix<Complex64> = DMatrix::from_iterator(real_dim, 1, eig.eigenvectors.column(k).iter().map(|&v| c(v)));
        let expect = (phi.adjoint() * j0.to_dense() * &phi)[(0, 0)];
        assert!(expect.norm() < 1e-14);
    }

    #[test]
    fn driven_hubbard_matches_assembled_operators() {
        let p = ModelParams::standard(4);
        let b = build_basis(&p, Some(SymmetrySector::ZERO)).unwrap();
        let sys = DrivenHubbard::new(&b).unwrap();
        let x: Vec<Complex64> =
            (0..sys.dim()).map(|i| Complex64::new((i as f64).sin(), (2.0 * i as f64).cos())).collect();
        let a = 0.11;
        let mut y1 = vec![Complex64::default(); sys.dim()];
        let mut y2 = y1.clone();
        sys.apply_hamiltonian(a, &x, &mut y1);
        sys.hamiltonian(a).apply(&x, &mut y2);
        assert!(y1.iter().zip(&y2).all(|(u, v)| (u - v).norm() < 1e-15));
        sys.apply_current(a, &x, &mut y1);
        sys.current(a).apply(&x, &mut y2);
        assert!(y1.iter().zip(&y2).all(|(u, v)| (u - v).norm() < 1e-15));
    }

    #[test]
    fn sector_spectrum_is_subset_of_full() {
        for l in [2usize, 3, 4] {
            let n = (l / 2).max(1);
            let p = ModelParams::standard(l).with_filling(n, n);
            let full = DrivenHubbard::new(&build_basis(&p, None).unwrap()).unwrap();
            let full_spec = all_eigenvalues(&full.hamiltonian(0.0));
            let mut pooled = Vec::new();
            for k in 0..l {
                for parity in [1i8, -1] {
                    let s = SymmetrySector { total_momentum: k, spin_parity: parity };
                    let sec = DrivenHubbard::new(&build_basis(&p, Some(s)).unwrap()).unwrap();
                    if sec.dim() == 0 {
                        continue;
                    }
                    // A ≠ 0 keeps the test sensitive to the complex hopping phases
                    let a = 0.05;
                    let h = sec.hamiltonian(a);
                    assert!(h.hermiticity_residual() < 1e-14);
                    let full_a = all_eigenvalues(&full.hamiltonian(a));
                    for e in all_eigenvalues(&h) {
                        assert!(
                            full_a.iter().any(|f| (f - e).abs() < 1e-10),
                            "L={l} sector {s:?}: eigenvalue {e} not in full spectrum"
                        );
                    }
                    pooled.extend(all_eigenvalues(&sec.hamiltonian(0.0)));
                }
            }
            pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(pooled.len(), full_spec.len());
            for (a, b) in pooled.iter().zip(&full_spec) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = ModelParams::standard(1);
        assert!(p.validate().is_err());
        p = ModelParams::standard(4);
        p.hopping = 0.0;
        assert!(p.validate().is_err());
        p = ModelParams::standard(4);
        p.onsite_u = -1.0;
        assert!(p.validate().is_err());
        p = ModelParams::standard(4);
        p.periodic = false;
        assert!(p.validate().is_err());
    }
}
