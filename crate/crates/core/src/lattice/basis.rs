use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{Error, Result};

/// Spin species of a lattice fermion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

/// Occupation configuration of an `L`-site chain, one bit per site and spin.
///
/// The state it encodes is `Π_{j∈up} c†_{j↑} Π_{j∈dn} c†_{j↓} |0⟩` with both
/// products in ascending site order and all up-spin operators to the left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockConfig {
    pub up: u32,
    pub dn: u32,
}

impl FockConfig {
    pub fn new(up: u32, dn: u32) -> Self {
        Self { up, dn }
    }

    /// Sort key defining the basis order: up mask is the major key.
    pub fn key(&self) -> u64 {
        ((self.up as u64) << 32) | self.dn as u64
    }

    pub fn mask(&self, spin: Spin) -> u32 {
        match spin {
            Spin::Up => self.up,
            Spin::Down => self.dn,
        }
    }

    fn with_mask(self, spin: Spin, mask: u32) -> Self {
        match spin {
            Spin::Up => Self { up: mask, ..self },
            Spin::Down => Self { dn: mask, ..self },
        }
    }

    pub fn doublons(&self) -> u32 {
        (self.up & self.dn).count_ones()
    }

    /// Applies `c†_{to,spin} c_{from,spin}`; `None` when the result vanishes.
    ///
    /// Operators of the other species sit in a contiguous block and the pair
    /// is even, so only same-species occupations contribute to the sign.
    pub fn hop(&self, spin: Spin, to: usize, from: usize) -> Option<(FockConfig, f64)> {
        let m = self.mask(spin);
        let from_bit = 1u32 << from;
        let to_bit = 1u32 << to;
        if m & from_bit == 0 {
            return None;
        }
        if to == from {
            return Some((*self, 1.0));
        }
        if m & to_bit != 0 {
            return None;
        }
        let s1 = (m & (from_bit - 1)).count_ones();
        let m1 = m ^ from_bit;
        let s2 = (m1 & (to_bit - 1)).count_ones();
        let sign = if (s1 + s2).is_multiple_of(2) { 1.0 } else { -1.0 };
        Some((self.with_mask(spin, m1 | to_bit), sign))
    }

    /// Translation by one site, `c†_j → c†_{j+1}` with periodic wrap.
    pub fn translate(&self, sites: usize) -> (FockConfig, f64) {
        let top = 1u32 << (sites - 1);
        let full = if sites == 32 { u32::MAX } else { (1u32 << sites) - 1 };
        let mut sign = 1.0;
        let mut shift = |m: u32| {
            if m & top != 0 {
                // the wrapped operator moves to the front past the other n-1
                if (m.count_ones() - 1) % 2 == 1 {
                    sign = -sign;
                }
                ((m << 1) & full) | 1
            } else {
                (m << 1) & full
            }
        };
        let up = shift(self.up);
        let dn = shift(self.dn);
        (FockConfig { up, dn }, sign)
    }

    /// Global spin rotation by π about x, `c†_{j↑} → i c†_{j↓}`, `c†_{j↓} → i c†_{j↑}`.
    ///
    /// Reordering the swapped blocks costs `(−1)^{n↑ n↓}` and the rotation
    /// contributes `i^{n↑+n↓}`; only even electron numbers give a real sign.
    /// Spin singlets are even under this operation.
    pub fn spin_flip(&self) -> (FockConfig, f64) {
        let (nu, nd) = (self.up.count_ones(), self.dn.count_ones());
        debug_assert!((nu + nd) % 2 == 0, "spin flip sign is complex for odd electron number");
        let sign = if (nu * nd + (nu + nd) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        (FockConfig { up: self.dn, dn: self.up }, sign)
    }
}

/// Quantum numbers of a translation/spin-flip symmetry sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymmetrySector {
    /// Total crystal momentum in units of `2π/(aL)`.
    pub total_momentum: usize,
    /// Eigenvalue (±1) of the global spin flip.
    pub spin_parity: i8,
}

impl SymmetrySector {
    /// The sector used for production runs: zero momentum, even under spin flip.
    pub const ZERO: SymmetrySector = SymmetrySector { total_momentum: 0, spin_parity: 1 };
}

/// Isometry between a symmetry sector and the full configuration basis.
#[derive(Clone, Debug)]
pub struct SectorProjection {
    pub sector: SymmetrySector,
    full_configs: Vec<FockConfig>,
    full_index: HashMap<FockConfig, usize>,
    /// For every full configuration: owning sector state and its amplitude.
    member_of: Vec<Option<(usize, Complex64)>>,
    /// For every sector state: its normalized expansion over full configurations.
    members: Vec<Vec<(usize, Complex64)>>,
}

impl SectorProjection {
    pub fn full_dim(&self) -> usize {
        self.full_configs.len()
    }

    pub fn full_configs(&self) -> &[FockConfig] {
        &self.full_configs
    }

    /// Expansion of sector state `s` over full-basis configurations.
    pub fn members(&self, s: usize) -> &[(usize, Complex64)] {
        &self.members[s]
    }

    /// Owning sector state and amplitude of the full configuration `c`, if any.
    pub fn owner(&self, c: &FockConfig) -> Option<(usize, Complex64)> {
        self.full_index.get(c).and_then(|&i| self.member_of[i])
    }

    /// Maps a sector-basis vector into the full configuration basis.
    pub fn embed(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.full_dim()];
        for (s, members) in self.members.iter().enumerate() {
            for &(c, w) in members {
                out[c] += w * v[s];
            }
        }
        out
    }
}

/// Enumerated occupation basis of the chain, optionally reduced to one symmetry sector.
#[derive(Clone, Debug)]
pub struct ManyBodyBasis {
    params: ModelParams,
    configs: Vec<FockConfig>,
    index: HashMap<FockConfig, usize>,
    projection: Option<SectorProjection>,
}

fn masks_with_popcount(sites: usize, count: usize) -> Vec<u32> {
    (0u32..(1u32 << sites)).filter(|m| m.count_ones() as usize == count).collect()
}

fn full_configs(params: &ModelParams) -> Vec<FockConfig> {
    let ups = masks_with_popcount(params.sites, params.n_up);
    let dns = masks_with_popcount(params.sites, params.n_dn);
    let mut configs: Vec<FockConfig> =
        ups.iter().flat_map(|&u| dns.iter().map(move |&d| FockConfig::new(u, d))).collect();
    configs.sort_by_key(FockConfig::key);
    configs
}

pub fn build_basis(params: &ModelParams, sector: Option<SymmetrySector>) -> Result<ManyBodyBasis> {
    params.validate()?;
    let configs = full_configs(params);
    let index: HashMap<FockConfig, usize> =
        configs.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    let Some(sector) = sector else {
        return Ok(ManyBodyBasis { params: params.clone(), configs, index, projection: None });
    };

    if sector.total_momentum >= params.sites {
        return Err(Error::InvalidParameter(format!(
            "momentum {} outside [0, {})",
            sector.total_momentum, params.sites
        )));
    }
    if sector.spin_parity != 1 && sector.spin_parity != -1 {
        return Err(Error::InvalidParameter("spin parity must be +1 or -1".into()));
    }
    if params.n_up != params.n_dn {
        return Err(Error::InvalidParameter(
            "spin-flip sectors require equal up and down electron counts".into(),
        ));
    }

    let l = params.sites;
    let parity = sector.spin_parity as f64;
    let mut assigned = vec![false; configs.len()];
    let mut reps = Vec::new();
    let mut members = Vec::new();
    let mut member_of = vec![None; configs.len()];

    for (ci, &c) in configs.iter().enumerate() {
        if assigned[ci] {
            continue;
        }
        // Σ_g χ(g) g|c⟩ over translations T^r and the spin flip F^f
        let mut weights: HashMap<usize, Complex64> = HashMap::new();
        for flip in [false, true] {
            let (mut cur, mut sign) = if flip {
                let (f, s) = c.spin_flip();
                (f, s * parity)
            } else {
                (c, 1.0)
            };
            for r in 0..l {
                let phase = Complex64::from_polar(
                    1.0,
                    -2.0 * PI * (sector.total_momentum * r) as f64 / l as f64,
                );
                *weights.entry(index[&cur]).or_default() += phase * sign;
                let (next, s) = cur.translate(l);
                cur = next;
                sign *= s;
            }
        }
        for &k in weights.keys() {
            assigned[k] = true;
        }
        let norm2: f64 = weights.values().map(|w| w.norm_sqr()).sum();
        if norm2 < 1e-12 {
            continue;
        }
        let norm = norm2.sqrt();
        let s = reps.len();
        let mut state: Vec<(usize, Complex64)> =
            weights.into_iter().filter(|(_, w)| w.norm() > 1e-12).map(|(k, w)| (k, w / norm)).collect();
        state.sort_by_key(|&(k, _)| k);
        for &(k, w) in &state {
            member_of[k] = Some((s, w));
        }
        reps.push(c);
        members.push(state);
    }

    let rep_index = reps.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    Ok(ManyBodyBasis {
        params: params.clone(),
        configs: reps,
        index: rep_index,
        projection: Some(SectorProjection {
            sector,
            full_configs: configs,
            full_index: index,
            member_of,
            members,
        }),
    })
}

impl ManyBodyBasis {
    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Basis configurations; for a sector basis these are the orbit representatives.
    pub fn configs(&self) -> &[FockConfig] {
        &self.configs
    }

    pub fn index_of(&self, c: &FockConfig) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn sector(&self) -> Option<SymmetrySector> {
        self.projection.as_ref().map(|p| p.sector)
    }

    pub fn projection(&self) -> Option<&SectorProjection> {
        self.projection.as_ref()
    }

    /// Matrix of an operator given by its action on single configurations,
    /// `O|c⟩ = Σ amp |c'⟩`, expressed in this basis.
    pub(crate) fn matrix_from_action<F>(&self, action: F) -> Result<super::SparseOperator>
    where
        F: Fn(&FockConfig) -> Vec<(FockConfig, Complex64)>,
    {
        let mut triplets = Vec::new();
        match &self.projection {
            None => {
                for (col, c) in self.configs.iter().enumerate() {
                    for (target, amp) in action(c) {
                        let row = self.index.get(&target).copied().ok_or_else(|| {
                            Error::Validation(format!("operator leaves the basis at {target:?}"))
                        })?;
                        triplets.push((row, col, amp));
                    }
                }
            }
            Some(proj) => {
                // ⟨s'|O|s⟩ = Σ conj(v_{c'}) amp w_c over orbit members
                for (col, state) in proj.members.iter().enumerate() {
                    for &(ci, w) in state {
                        for (target, amp) in action(&proj.full_configs[ci]) {
                            if let Some((row, v)) = proj.owner(&target) {
                                triplets.push((row, col, v.conj() * amp * w));
                            }
                        }
                    }
                }
            }
        }
        super::SparseOperator::from_triplets(self.dim(), triplets)
    }
}
