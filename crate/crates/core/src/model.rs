//! Physical parameter containers and Hamiltonian/initial-state builders for
//! the optomechanical array.
//!
//! Mode layout is fixed globally: the optical mode of cell k is Fock mode 2k
//! and its mechanical mode is 2k+1, so a space for N cells has 2N modes.

use nalgebra::DVector;

use crate::error::{Error, Result, Warning};
use crate::fock::{HilbertSpace, Ladder, LadderTerm, QuantumState, SparseOperator};
use crate::C64;

/// Per-cell physical parameters. All frequencies/rates angular (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    /// Mechanical angular frequency ω_m > 0.
    pub omega_m: f64,
    /// Pump detuning Δ_p = ω_p − ω_r (negative in the regimes treated here).
    pub delta_p: f64,
    /// Effective optomechanical coupling G.
    pub g_eff: f64,
    /// Optional single-photon coupling rate g.
    pub single_photon_g: Option<f64>,
    /// Optional laser amplitude α (dimensionless), with G = α·g.
    pub laser_amplitude: Option<f64>,
    /// Photon decay rate κ ≥ 0.
    pub kappa: f64,
    /// Phonon decay rate γ ≥ 0.
    pub gamma: f64,
    /// Cavity bath occupation n̄_c ≥ 0.
    pub n_c: f64,
    /// Mechanical bath occupation n̄_m ≥ 0.
    pub n_m: f64,
}

impl CellParams {
    pub fn new(omega_m: f64, delta_p: f64, g_eff: f64) -> Result<Self> {
        let p = CellParams {
            omega_m,
            delta_p,
            g_eff,
            single_photon_g: None,
            laser_amplitude: None,
            kappa: 0.0,
            gamma: 0.0,
            n_c: 0.0,
            n_m: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_decay(mut self, kappa: f64, gamma: f64, n_c: f64, n_m: f64) -> Result<Self> {
        self.kappa = kappa;
        self.gamma = gamma;
        self.n_c = n_c;
        self.n_m = n_m;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m > 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega_m must be positive, got {}",
                self.omega_m
            )));
        }
        if self.kappa < 0.0 || self.gamma < 0.0 {
            return Err(Error::InvalidParams(
                "decay rates kappa, gamma must be non-negative".into(),
            ));
        }
        if self.n_c < 0.0 || self.n_m < 0.0 {
            return Err(Error::InvalidParams(
                "bath occupations must be non-negative".into(),
            ));
        }
        if let (Some(g), Some(alpha)) = (self.single_photon_g, self.laser_amplitude) {
            let expect = alpha * g;
            let scale = self.g_eff.abs().max(expect.abs()).max(f64::MIN_POSITIVE);
            if (self.g_eff - expect).abs() > 1e-9 * scale {
                return Err(Error::InvalidParams(format!(
                    "G = {} inconsistent with alpha*g = {} beyond 1e-9 relative",
                    self.g_eff, expect
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linearized,
    RedSideband,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Linearized => "linearized",
            ModelKind::RedSideband => "red_sideband",
        }
    }
}

/// Guard limits for Hamiltonian/evolution dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimGuard {
    /// Maximum space dimension for state-vector work.
    pub max_pure: usize,
    /// Maximum space dimension for density-matrix work.
    pub max_density: usize,
    /// Bypass both limits.
    pub force: bool,
}

impl Default for DimGuard {
    fn default() -> Self {
        DimGuard {
            max_pure: 20_000,
            max_density: 5_000,
            force: false,
        }
    }
}

/// An array of N cells with N−1 hopping strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    pub cells: Vec<CellParams>,
    /// Nearest-neighbor optical hopping strengths J_1..J_{N−1} (rad/s, ≥ 0).
    pub hops: Vec<f64>,
    pub model_kind: ModelKind,
    pub dim_guard: DimGuard,
}

impl ArrayConfig {
    pub fn new(cells: Vec<CellParams>, hops: Vec<f64>, model_kind: ModelKind) -> Result<Self> {
        let cfg = ArrayConfig {
            cells,
            hops,
            model_kind,
            dim_guard: DimGuard::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// N identical cells with the given hop profile.
    pub fn uniform(cell: CellParams, hops: Vec<f64>, model_kind: ModelKind) -> Result<Self> {
        let n = hops.len() + 1;
        Self::new(vec![cell; n], hops, model_kind)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cells.len();
        if n < 2 {
            return Err(Error::InvalidParams(format!(
                "array needs at least 2 cells, got {n}"
            )));
        }
        if self.hops.len() != n - 1 {
            return Err(Error::InvalidParams(format!(
                "expected {} hopping strengths for {} cells, got {}",
                n - 1,
                n,
                self.hops.len()
            )));
        }
        if self.hops.iter().any(|&j| j < 0.0 || !j.is_finite()) {
            return Err(Error::InvalidParams(
                "hopping strengths must be finite and non-negative".into(),
            ));
        }
        for (i, cell) in self.cells.iter().enumerate() {
            cell.validate()
                .map_err(|e| Error::InvalidParams(format!("cell {i}: {e}")))?;
            if self.model_kind == ModelKind::RedSideband
                && (cell.delta_p + cell.omega_m).abs() > 1e-6 * cell.omega_m
            {
                return Err(Error::InvalidParams(format!(
                    "cell {i}: red-sideband model requires delta_p ~= -omega_m, got delta_p = {}, omega_m = {}",
                    cell.delta_p, cell.omega_m
                )));
            }
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Fock space for this array with uniform per-mode truncation.
    pub fn space(&self, per_mode_dim: usize, cap: Option<usize>) -> Result<HilbertSpace> {
        HilbertSpace::new(&vec![per_mode_dim; 2 * self.n_cells()], cap)
    }
}

/// Fock mode index of cell `cell`'s optical mode.
pub fn optical_mode(cell: usize) -> usize {
    2 * cell
}

/// Fock mode index of cell `cell`'s mechanical mode.
pub fn mechanical_mode(cell: usize) -> usize {
    2 * cell + 1
}

fn check_cell(cfg: &ArrayConfig, cell: usize) -> Result<()> {
    if cell >= cfg.n_cells() {
        return Err(Error::CellOutOfRange {
            cell,
            n_cells: cfg.n_cells(),
        });
    }
    Ok(())
}

fn check_layout(cfg: &ArrayConfig, space: &HilbertSpace) -> Result<()> {
    if space.n_modes() != 2 * cfg.n_cells() {
        return Err(Error::DimensionMismatch {
            left: space.n_modes(),
            right: 2 * cfg.n_cells(),
        });
    }
    Ok(())
}

/// Warnings for invoking a builder of one model kind on a config declaring
/// another. The builders themselves are explicit and always construct.
pub fn model_kind_warnings(cfg: &ArrayConfig, requested: ModelKind) -> Vec<Warning> {
    if cfg.model_kind != requested {
        vec![Warning::ModelKindMismatch {
            configured: cfg.model_kind.as_str().into(),
            requested: requested.as_str().into(),
        }]
    } else {
        Vec::new()
    }
}

/// Linearized cell Hamiltonian −Δ_p a†a + ω_m b†b − G(b+b†)(a+a†) embedded
/// on the cell's two modes. Matrix elements are the exact projected ones
/// (P·H·P), so the result is Hermitian on capped spaces too.
pub fn build_cell_hamiltonian_linearized(
    cfg: &ArrayConfig,
    space: &HilbertSpace,
    cell: usize,
) -> Result<SparseOperator> {
    check_cell(cfg, cell)?;
    check_layout(cfg, space)?;
    let p = &cfg.cells[cell];
    let a = optical_mode(cell);
    let b = mechanical_mode(cell);
    let mg = C64::new(-p.g_eff, 0.0);
    let mut terms = vec![
        LadderTerm::new(C64::new(-p.delta_p, 0.0), vec![(a, Ladder::Raise), (a, Ladder::Lower)]),
        LadderTerm::new(C64::new(p.omega_m, 0.0), vec![(b, Ladder::Raise), (b, Ladder::Lower)]),
    ];
    for b_dir in [Ladder::Lower, Ladder::Raise] {
        for a_dir in [Ladder::Lower, Ladder::Raise] {
            terms.push(LadderTerm::new(mg, vec![(b, b_dir), (a, a_dir)]));
        }
    }
    space.ladder_operator(&terms)
}

/// Red-sideband cell Hamiltonian ω_m(a†a + b†b) − G(b a† + b†a); conserves
/// total excitation number.
pub fn build_cell_hamiltonian_red(
    cfg: &ArrayConfig,
    space: &HilbertSpace,
    cell: usize,
) -> Result<SparseOperator> {
    check_cell(cfg, cell)?;
    check_layout(cfg, space)?;
    let p = &cfg.cells[cell];
    let a = optical_mode(cell);
    let b = mechanical_mode(cell);
    let w = C64::new(p.omega_m, 0.0);
    let mg = C64::new(-p.g_eff, 0.0);
    space.ladder_operator(&[
        LadderTerm::new(w, vec![(a, Ladder::Raise), (a, Ladder::Lower)]),
        LadderTerm::new(w, vec![(b, Ladder::Raise), (b, Ladder::Lower)]),
        LadderTerm::new(mg, vec![(b, Ladder::Lower), (a, Ladder::Raise)]),
        LadderTerm::new(mg, vec![(b, Ladder::Raise), (a, Ladder::Lower)]),
    ])
}

/// Optical nearest-neighbor hopping Σ J_n (a_n† a_{n+1} + h.c.).
pub fn build_hopping(cfg: &ArrayConfig, space: &HilbertSpace) -> Result<SparseOperator> {
    check_layout(cfg, space)?;
    let mut terms = Vec::new();
    for (n, &j) in cfg.hops.iter().enumerate() {
        if j == 0.0 {
            continue;
        }
        let jc = C64::new(j, 0.0);
        terms.push(LadderTerm::new(
            jc,
            vec![(optical_mode(n), Ladder::Raise), (optical_mode(n + 1), Ladder::Lower)],
        ));
        terms.push(LadderTerm::new(
            jc,
            vec![(optical_mode(n + 1), Ladder::Raise), (optical_mode(n), Ladder::Lower)],
        ));
    }
    space.ladder_operator(&terms)
}

/// Full array Hamiltonian: sum of per-cell terms (per `cfg.model_kind`)
/// plus the optical hopping.
pub fn build_array_hamiltonian(cfg: &ArrayConfig, space: &HilbertSpace) -> Result<SparseOperator> {
    check_layout(cfg, space)?;
    if space.dim() > cfg.dim_guard.max_pure && !cfg.dim_guard.force {
        return Err(Error::DimensionGuard {
            what: "array Hamiltonian",
            dim: space.dim(),
            limit: cfg.dim_guard.max_pure,
        });
    }
    let mut h = build_hopping(cfg, space)?;
    for cell in 0..cfg.n_cells() {
        let hc = match cfg.model_kind {
            ModelKind::Linearized => build_cell_hamiltonian_linearized(cfg, space, cell)?,
            ModelKind::RedSideband => build_cell_hamiltonian_red(cfg, space, cell)?,
        };
        h = h.add(&hc)?;
    }
    Ok(h)
}

/// Initial states of the sender cell. Occupations are (optical, mechanical).
#[derive(Debug, Clone, PartialEq)]
pub enum SenderState {
    /// (|1,0⟩ + |0,1⟩)/√2
    PhiPlus,
    /// (|2,0⟩ + |0,2⟩)/√2; needs per-mode dim ≥ 3 and cap ≥ 2.
    BigPhiPlus,
    /// Arbitrary two-mode amplitudes; normalized at construction.
    Custom(Vec<((u32, u32), C64)>),
}

impl SenderState {
    fn amplitudes(&self) -> Vec<((u32, u32), C64)> {
        let r = C64::new(0.5f64.sqrt(), 0.0);
        match self {
            SenderState::PhiPlus => vec![((1, 0), r), ((0, 1), r)],
            SenderState::BigPhiPlus => vec![((2, 0), r), ((0, 2), r)],
            SenderState::Custom(amps) => amps.clone(),
        }
    }
}

/// State with the given two-mode state on `sender` and vacuum elsewhere.
pub fn initial_sender_state(
    space: &HilbertSpace,
    sender: usize,
    state: &SenderState,
) -> Result<QuantumState> {
    place_states(space, &[(sender, state.clone())])
}

/// Product state with given two-mode states on distinct cells and vacuum
/// elsewhere (used by the bidirectional protocol).
pub fn place_states(space: &HilbertSpace, placements: &[(usize, SenderState)]) -> Result<QuantumState> {
    if space.n_modes() % 2 != 0 {
        return Err(Error::InvalidState(
            "array space needs an even number of modes (a, b per cell)".into(),
        ));
    }
    let n_cells = space.n_modes() / 2;
    for (pos, (cell, _)) in placements.iter().enumerate() {
        if *cell >= n_cells {
            return Err(Error::CellOutOfRange {
                cell: *cell,
                n_cells,
            });
        }
        if placements[..pos].iter().any(|(c, _)| c == cell) {
            return Err(Error::InvalidState(format!(
                "duplicate placement on cell {cell}"
            )));
        }
    }
    // tensor the per-cell amplitude lists over the involved cells
    let mut terms: Vec<(Vec<u32>, C64)> = vec![(vec![0; space.n_modes()], C64::new(1.0, 0.0))];
    for (cell, state) in placements {
        let amps = state.amplitudes();
        let norm2: f64 = amps.iter().map(|(_, a)| a.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidState(
                "custom sender amplitudes are all zero".into(),
            ));
        }
        let scale = C64::new(1.0 / norm2.sqrt(), 0.0);
        let mut next = Vec::with_capacity(terms.len() * amps.len());
        for (occ, coeff) in &terms {
            for ((na, nb), amp) in &amps {
                let mut occ = occ.clone();
                occ[optical_mode(*cell)] = *na;
                occ[mechanical_mode(*cell)] = *nb;
                next.push((occ, coeff * amp * scale));
            }
        }
        terms = next;
    }
    let mut amps = DVector::from_element(space.dim(), C64::new(0.0, 0.0));
    for (occ, coeff) in terms {
        if coeff.norm_sqr() == 0.0 {
            continue;
        }
        let idx = space.index_of(&occ).ok_or_else(|| {
            Error::InvalidState(format!(
                "occupation {occ:?} exceeds the per-mode truncation or excitation cap"
            ))
        })?;
        amps[idx] += coeff;
    }
    QuantumState::pure(space, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_cell_cfg(model: ModelKind) -> ArrayConfig {
        let cell = CellParams::new(1.0, -1.0, 0.1).unwrap();
        ArrayConfig::uniform(cell, vec![0.5], model).unwrap()
    }

    #[test]
    fn cell_params_consistency_check() {
        let mut p = CellParams::new(1.0, -1.0, 0.2).unwrap();
        p.single_photon_g = Some(0.01);
        p.laser_amplitude = Some(20.0);
        assert!(p.validate().is_ok());
        p.laser_amplitude = Some(21.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn red_sideband_requires_matching_detuning() {
        let cell = CellParams::new(1.0, -0.9, 0.1).unwrap();
        assert!(ArrayConfig::uniform(cell, vec![0.5], ModelKind::RedSideband).is_err());
        let cell = CellParams::new(1.0, -1.0, 0.1).unwrap();
        assert!(ArrayConfig::uniform(cell, vec![0.5], ModelKind::RedSideband).is_ok());
    }

    #[test]
    fn decoupled_linearized_cell_spectrum() {
        // G = 0: eigenvalues are -delta_p * n_a + omega_m * n_b
        let cell = CellParams::new(1.0, -0.7, 0.0).unwrap();
        let cfg = ArrayConfig::uniform(cell, vec![0.0], ModelKind::Linearized).unwrap();
        let space = HilbertSpace::new(&[3, 3, 2, 2], None).unwrap();
        let h = build_cell_hamiltonian_linearized(&cfg, &space, 0).unwrap();
        let d = h.to_dense();
        for i in 0..space.dim() {
            let occ = space.occupation(i);
            let expect = 0.7 * occ[0] as f64 + 1.0 * occ[1] as f64;
            assert_relative_eq!(d[(i, i)].re, expect, epsilon = 1e-14);
        }
        // diagonal when G = 0
        assert_eq!(
            h.to_dense().map(|v| v.norm()).sum(),
            h.to_dense().diagonal().map(|v| v.norm()).sum()
        );
    }

    #[test]
    fn linearized_single_excitation_energies_match_polariton_frequencies() {
        // omega_m = 1, delta_p = -1, G = 0.1, per-mode dim 8: the two lowest
        // excitation energies above the ground state approach sqrt(0.8), sqrt(1.2).
        // The spectator cell's modes fourfold-degenerate every level, so
        // deduplicate before differencing.
        let cell = CellParams::new(1.0, -1.0, 0.1).unwrap();
        let cfg = ArrayConfig::uniform(cell.clone(), vec![0.0], ModelKind::Linearized).unwrap();
        let space = HilbertSpace::new(&[8, 8, 2, 2], None).unwrap();
        let h = build_cell_hamiltonian_linearized(&cfg, &space, 0).unwrap();
        let mut evals: Vec<f64> = h
            .to_dense()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut distinct: Vec<f64> = Vec::new();
        for e in evals {
            if distinct.last().map(|&l| (e - l).abs() > 1e-6).unwrap_or(true) {
                distinct.push(e);
            }
        }
        assert_relative_eq!(distinct[1] - distinct[0], 0.8f64.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(distinct[2] - distinct[0], 1.2f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn builders_hermitian() {
        for model in [ModelKind::Linearized, ModelKind::RedSideband] {
            let cfg = two_cell_cfg(model);
            let space = cfg.space(3, Some(3)).unwrap();
            let h = build_array_hamiltonian(&cfg, &space).unwrap();
            assert!(h.is_hermitian(1e-12));
        }
    }

    #[test]
    fn red_cell_conserves_excitation_exactly() {
        let cfg = two_cell_cfg(ModelKind::RedSideband);
        let space = cfg.space(3, Some(4)).unwrap();
        let h = build_array_hamiltonian(&cfg, &space).unwrap();
        let n = space.total_number_op();
        let comm = h.commutator(&n).unwrap();
        assert_eq!(comm.frobenius_norm(), 0.0);
    }

    #[test]
    fn linearized_array_does_not_conserve_excitation() {
        let cfg = two_cell_cfg(ModelKind::Linearized);
        let space = cfg.space(3, Some(4)).unwrap();
        let h = build_array_hamiltonian(&cfg, &space).unwrap();
        let n = space.total_number_op();
        assert!(h.commutator(&n).unwrap().frobenius_norm() > 1e-6);
    }

    #[test]
    fn red_cell_single_excitation_eigenvalues() {
        // single-excitation sector eigenvalues are omega_m -/+ G
        let cell = CellParams::new(2.0, -2.0, 0.3).unwrap();
        let cfg = ArrayConfig::uniform(cell, vec![0.0], ModelKind::RedSideband).unwrap();
        let space = cfg.space(2, Some(1)).unwrap();
        let h = build_cell_hamiltonian_red(&cfg, &space, 0).unwrap();
        let mut evals: Vec<f64> = h
            .to_dense()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // spectrum: 0 (vacuum and other cell's states), then 1-exc energies
        assert!(evals.iter().any(|&e| (e - 1.7).abs() < 1e-12));
        assert!(evals.iter().any(|&e| (e - 2.3).abs() < 1e-12));
    }

    #[test]
    fn hopping_matrix_element_and_mechanical_isolation() {
        let cfg = two_cell_cfg(ModelKind::RedSideband);
        let space = cfg.space(2, Some(2)).unwrap();
        let h = build_hopping(&cfg, &space).unwrap();
        let from = space.index_of(&[0, 0, 1, 0]).unwrap();
        let to = space.index_of(&[1, 0, 0, 0]).unwrap();
        assert_relative_eq!(h.to_dense()[(to, from)].re, 0.5, epsilon = 1e-14);
        // no matrix elements connect mechanical occupations
        for (r, c, _) in h.mat().iter() {
            let ro = space.occupation(r);
            let co = space.occupation(c);
            assert_eq!(ro[1], co[1]);
            assert_eq!(ro[3], co[3]);
        }
    }

    #[test]
    fn pst_profile_hopping_values_enter_hamiltonian() {
        let cell = CellParams::new(1.0, -1.0, 0.1).unwrap();
        let j = 1.0f64;
        let hops: Vec<f64> = (1..4).map(|n| (j / 2f64.sqrt()) * ((n * (4 - n)) as f64).sqrt()).collect();
        assert_relative_eq!(hops[0], 1.224744871391589, epsilon = 1e-12);
        assert_relative_eq!(hops[1], 1.414213562373095, epsilon = 1e-12);
        assert_relative_eq!(hops[2], 1.224744871391589, epsilon = 1e-12);
        let cfg = ArrayConfig::uniform(cell, hops.clone(), ModelKind::RedSideband).unwrap();
        let space = cfg.space(2, Some(1)).unwrap();
        let h = build_hopping(&cfg, &space).unwrap();
        for n in 0..3 {
            let mut from_occ = vec![0u32; 8];
            from_occ[optical_mode(n + 1)] = 1;
            let mut to_occ = vec![0u32; 8];
            to_occ[optical_mode(n)] = 1;
            let from = space.index_of(&from_occ).unwrap();
            let to = space.index_of(&to_occ).unwrap();
            assert_relative_eq!(h.to_dense()[(to, from)].re, hops[n], epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_hopping_array_is_direct_sum_of_cells() {
        let cell = CellParams::new(1.3, -1.3, 0.2).unwrap();
        let cfg = ArrayConfig::uniform(cell, vec![0.0], ModelKind::RedSideband).unwrap();
        let space = cfg.space(3, Some(2)).unwrap();
        let h = build_array_hamiltonian(&cfg, &space).unwrap();
        let sum = build_cell_hamiltonian_red(&cfg, &space, 0)
            .unwrap()
            .add(&build_cell_hamiltonian_red(&cfg, &space, 1).unwrap())
            .unwrap();
        assert_eq!(h.sub(&sum).unwrap().frobenius_norm(), 0.0);
    }

    #[test]
    fn dimension_guard_refuses_large_spaces() {
        let cell = CellParams::new(1.0, -1.0, 0.1).unwrap();
        let mut cfg = ArrayConfig::uniform(cell, vec![0.1], ModelKind::RedSideband).unwrap();
        cfg.dim_guard.max_pure = 10;
        let space = cfg.space(3, Some(3)).unwrap();
        assert!(matches!(
            build_array_hamiltonian(&cfg, &space),
            Err(Error::DimensionGuard { .. })
        ));
        cfg.dim_guard.force = true;
        assert!(build_array_hamiltonian(&cfg, &space).is_ok());
    }

    #[test]
    fn phi_plus_amplitudes() {
        let space = HilbertSpace::new(&[2; 4], None).unwrap();
        let st = initial_sender_state(&space, 0, &SenderState::PhiPlus).unwrap();
        let amps = st.amplitudes().unwrap();
        let r = 0.5f64.sqrt();
        assert_relative_eq!(amps[space.index_of(&[1, 0, 0, 0]).unwrap()].re, r, epsilon = 1e-15);
        assert_relative_eq!(amps[space.index_of(&[0, 1, 0, 0]).unwrap()].re, r, epsilon = 1e-15);
        assert_relative_eq!(st.trace(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn big_phi_plus_requires_dim_three() {
        let space = HilbertSpace::new(&[2; 4], None).unwrap();
        assert!(initial_sender_state(&space, 0, &SenderState::BigPhiPlus).is_err());
        let space = HilbertSpace::new(&[3; 4], Some(2)).unwrap();
        assert!(initial_sender_state(&space, 0, &SenderState::BigPhiPlus).is_ok());
        let space = HilbertSpace::new(&[3; 4], Some(1)).unwrap();
        assert!(initial_sender_state(&space, 0, &SenderState::BigPhiPlus).is_err());
    }

    #[test]
    fn custom_state_exact_placement() {
        let space = HilbertSpace::new(&[2; 4], None).unwrap();
        let st = initial_sender_state(
            &space,
            1,
            &SenderState::Custom(vec![((1, 0), C64::new(1.0, 0.0))]),
        )
        .unwrap();
        let amps = st.amplitudes().unwrap();
        assert_relative_eq!(
            amps[space.index_of(&[0, 0, 1, 0]).unwrap()].re,
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn bidirectional_placement_product_state() {
        let space = HilbertSpace::new(&[2; 4], Some(2)).unwrap();
        let st = place_states(
            &space,
            &[(0, SenderState::PhiPlus), (1, SenderState::PhiPlus)],
        )
        .unwrap();
        let amps = st.amplitudes().unwrap();
        assert_relative_eq!(
            amps[space.index_of(&[1, 0, 1, 0]).unwrap()].re,
            0.5,
            epsilon = 1e-15
        );
        assert_relative_eq!(st.trace(), 1.0, epsilon = 1e-14);
    }
}
