//! Truncated multimode bosonic Fock spaces, ladder-operator construction,
//! tensor embedding, and partial trace.
//!
//! Basis states are occupation vectors (n₀, n₁, …) with 0 ≤ n_k < mode_dim_k
//! and, when an excitation cap is set, Σ n_k ≤ cap. The basis is enumerated
//! in lexicographic order with the leftmost mode most significant, so
//! indexing is deterministic across runs.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Warning};
use crate::sparse::CsMat;
use crate::C64;

#[derive(Debug)]
struct SpaceInner {
    mode_dims: Vec<usize>,
    excitation_cap: Option<usize>,
    basis: Vec<Vec<u32>>,
    index_of: HashMap<Vec<u32>, usize>,
    warnings: Vec<Warning>,
}

/// Truncated multimode Fock space. Cheap to clone (shared immutable data).
#[derive(Debug, Clone)]
pub struct HilbertSpace {
    inner: Arc<SpaceInner>,
}

impl PartialEq for HilbertSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.mode_dims == other.inner.mode_dims
                && self.inner.excitation_cap == other.inner.excitation_cap)
    }
}

impl HilbertSpace {
    /// Enumerate the admissible occupation vectors for the given per-mode
    /// truncations and optional global excitation cap.
    pub fn new(mode_dims: &[usize], excitation_cap: Option<usize>) -> Result<Self> {
        if mode_dims.is_empty() {
            return Err(Error::EmptyModeList);
        }
        for (mode, &dim) in mode_dims.iter().enumerate() {
            if dim < 2 {
                return Err(Error::ModeDimTooSmall { mode, dim });
            }
        }
        let mut warnings = Vec::new();
        if excitation_cap == Some(0) {
            warnings.push(Warning::CapZeroVacuumOnly);
        }
        let mut basis = Vec::new();
        let mut current = vec![0u32; mode_dims.len()];
        enumerate(mode_dims, excitation_cap, 0, 0, &mut current, &mut basis);
        let index_of = basis
            .iter()
            .enumerate()
            .map(|(i, occ)| (occ.clone(), i))
            .collect();
        Ok(HilbertSpace {
            inner: Arc::new(SpaceInner {
                mode_dims: mode_dims.to_vec(),
                excitation_cap,
                basis,
                index_of,
                warnings,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.basis.len()
    }

    pub fn n_modes(&self) -> usize {
        self.inner.mode_dims.len()
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.inner.mode_dims
    }

    pub fn excitation_cap(&self) -> Option<usize> {
        self.inner.excitation_cap
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.inner.warnings
    }

    /// Occupation vector of basis state `i`.
    pub fn occupation(&self, i: usize) -> &[u32] {
        &self.inner.basis[i]
    }

    pub fn basis(&self) -> &[Vec<u32>] {
        &self.inner.basis
    }

    /// Basis index of an occupation vector, if admissible.
    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.inner.index_of.get(occ).copied()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            return Err(Error::ModeOutOfRange {
                mode,
                n_modes: self.n_modes(),
            });
        }
        Ok(())
    }

    /// Annihilation operator on `mode`: ⟨n − e_mode| a |n⟩ = √n_mode.
    /// Transitions leaving the truncated basis are dropped (hard projection);
    /// for lowering this never happens, so truncation shows up only in the
    /// adjoint (creation) operator.
    pub fn annihilation(&self, mode: usize) -> Result<SparseOperator> {
        self.check_mode(mode)?;
        let mut triplets = Vec::new();
        for (i, occ) in self.inner.basis.iter().enumerate() {
            let n = occ[mode];
            if n == 0 {
                continue;
            }
            let mut target = occ.clone();
            target[mode] = n - 1;
            if let Some(j) = self.index_of(&target) {
                triplets.push((j, i, C64::new((n as f64).sqrt(), 0.0)));
            }
        }
        Ok(SparseOperator {
            space: self.clone(),
            mat: CsMat::from_triplets(self.dim(), triplets),
        })
    }

    /// Creation operator, the exact conjugate transpose of [`annihilation`].
    ///
    /// [`annihilation`]: HilbertSpace::annihilation
    pub fn creation(&self, mode: usize) -> Result<SparseOperator> {
        Ok(self.annihilation(mode)?.adjoint())
    }

    /// Number operator a†a on `mode` (diagonal).
    pub fn number_op(&self, mode: usize) -> Result<SparseOperator> {
        self.check_mode(mode)?;
        let diag: Vec<C64> = self
            .inner
            .basis
            .iter()
            .map(|occ| C64::new(occ[mode] as f64, 0.0))
            .collect();
        Ok(SparseOperator {
            space: self.clone(),
            mat: CsMat::diagonal(&diag),
        })
    }

    /// Total number operator Σ_k a_k†a_k (diagonal).
    pub fn total_number_op(&self) -> SparseOperator {
        let diag: Vec<C64> = self
            .inner
            .basis
            .iter()
            .map(|occ| C64::new(occ.iter().map(|&n| n as f64).sum(), 0.0))
            .collect();
        SparseOperator {
            space: self.clone(),
            mat: CsMat::diagonal(&diag),
        }
    }

    pub fn identity_op(&self) -> SparseOperator {
        SparseOperator {
            space: self.clone(),
            mat: CsMat::identity(self.dim()),
        }
    }

    /// Operator from a sum of scaled ladder-operator monomials, with matrix
    /// elements computed exactly between admissible basis states (the
    /// projected-truncation convention P·O·P). Factors in a monomial are
    /// listed left-to-right as written, i.e. the last factor acts first.
    ///
    /// Products of separately truncated matrices would instead drop matrix
    /// elements whose *intermediate* state leaves a capped basis; this
    /// builder keeps every element whose initial and final states are both
    /// admissible, which also makes Hermitian-by-symmetry sums exactly
    /// Hermitian on capped spaces.
    pub fn ladder_operator(&self, terms: &[LadderTerm]) -> Result<SparseOperator> {
        for term in terms {
            for &(mode, _) in &term.factors {
                self.check_mode(mode)?;
            }
        }
        let mut triplets = Vec::new();
        let mut occ: Vec<i64> = Vec::with_capacity(self.n_modes());
        for (col, basis_occ) in self.inner.basis.iter().enumerate() {
            'term: for term in terms {
                occ.clear();
                occ.extend(basis_occ.iter().map(|&n| n as i64));
                let mut amp = 1.0f64;
                for &(mode, ladder) in term.factors.iter().rev() {
                    match ladder {
                        Ladder::Lower => {
                            if occ[mode] == 0 {
                                continue 'term;
                            }
                            amp *= (occ[mode] as f64).sqrt();
                            occ[mode] -= 1;
                        }
                        Ladder::Raise => {
                            occ[mode] += 1;
                            amp *= (occ[mode] as f64).sqrt();
                        }
                    }
                }
                let target: Vec<u32> = occ.iter().map(|&n| n as u32).collect();
                if let Some(row) = self.index_of(&target) {
                    triplets.push((row, col, term.coeff * amp));
                }
            }
        }
        Ok(SparseOperator {
            space: self.clone(),
            mat: CsMat::from_triplets(self.dim(), triplets),
        })
    }

    /// Total occupation of basis state `i`.
    pub fn total_occupation(&self, i: usize) -> u32 {
        self.inner.basis[i].iter().sum()
    }
}

/// One ladder-operator direction on a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Lower,
    Raise,
}

/// A scaled product of ladder operators, written left-to-right.
#[derive(Debug, Clone)]
pub struct LadderTerm {
    pub coeff: C64,
    pub factors: Vec<(usize, Ladder)>,
}

impl LadderTerm {
    pub fn new(coeff: C64, factors: Vec<(usize, Ladder)>) -> Self {
        LadderTerm { coeff, factors }
    }
}

fn enumerate(
    dims: &[usize],
    cap: Option<usize>,
    mode: usize,
    used: usize,
    current: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if mode == dims.len() {
        out.push(current.clone());
        return;
    }
    let budget = cap.map(|c| c - used).unwrap_or(usize::MAX);
    let max_n = (dims[mode] - 1).min(budget);
    for n in 0..=max_n {
        current[mode] = n as u32;
        enumerate(dims, cap, mode + 1, used + n, current, out);
    }
    current[mode] = 0;
}

/// A sparse operator bound to the Hilbert space it acts on.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    space: HilbertSpace,
    mat: CsMat,
}

impl SparseOperator {
    pub fn from_triplets(space: &HilbertSpace, triplets: Vec<(usize, usize, C64)>) -> Self {
        SparseOperator {
            space: space.clone(),
            mat: CsMat::from_triplets(space.dim(), triplets),
        }
    }

    pub fn zero(space: &HilbertSpace) -> Self {
        SparseOperator {
            space: space.clone(),
            mat: CsMat::zeros(space.dim()),
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn mat(&self) -> &CsMat {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn nnz(&self) -> usize {
        self.mat.nnz()
    }

    fn check_same_space(&self, other: &SparseOperator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        SparseOperator {
            space: self.space.clone(),
            mat: self.mat.adjoint(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        SparseOperator {
            space: self.space.clone(),
            mat: self.mat.scale(s),
        }
    }

    pub fn add(&self, other: &SparseOperator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(SparseOperator {
            space: self.space.clone(),
            mat: self.mat.add(&other.mat),
        })
    }

    pub fn sub(&self, other: &SparseOperator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(SparseOperator {
            space: self.space.clone(),
            mat: self.mat.sub(&other.mat),
        })
    }

    pub fn matmul(&self, other: &SparseOperator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(SparseOperator {
            space: self.space.clone(),
            mat: self.mat.matmul(&other.mat),
        })
    }

    pub fn commutator(&self, other: &SparseOperator) -> Result<Self> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        ab.sub(&ba)
    }

    pub fn apply(&self, psi: &DVector<C64>) -> DVector<C64> {
        self.mat.matvec(psi)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.mat.is_hermitian(tol)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.mat.hermiticity_deviation()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.frobenius_norm()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.mat.to_dense()
    }

    /// ⟨ψ|A|ψ⟩ or tr(Aρ).
    pub fn expectation(&self, state: &QuantumState) -> C64 {
        match &state.kind {
            StateKind::Pure(psi) => {
                let ap = self.mat.matvec(psi);
                psi.dotc(&ap)
            }
            StateKind::Mixed(rho) => {
                // tr(A rho) = sum_{r,c} A[r,c] rho[c,r]
                self.mat.iter().map(|(r, c, v)| v * rho[(c, r)]).sum()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum StateKind {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

/// A pure state vector or density matrix over a [`HilbertSpace`].
#[derive(Debug, Clone)]
pub struct QuantumState {
    space: HilbertSpace,
    kind: StateKind,
}

impl QuantumState {
    /// Validating constructor for pure states: ‖ψ‖² must be 1 within 1e−10.
    pub fn pure(space: &HilbertSpace, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                left: amplitudes.len(),
                right: space.dim(),
            });
        }
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!(
                "pure state norm^2 = {norm2} differs from 1 by more than 1e-10"
            )));
        }
        Ok(QuantumState {
            space: space.clone(),
            kind: StateKind::Pure(amplitudes),
        })
    }

    /// Validating constructor for density matrices: trace 1 within 1e−10,
    /// Hermitian within 1e−12 elementwise.
    pub fn mixed(space: &HilbertSpace, rho: DMatrix<C64>) -> Result<Self> {
        if rho.nrows() != space.dim() || rho.ncols() != space.dim() {
            return Err(Error::DimensionMismatch {
                left: rho.nrows(),
                right: space.dim(),
            });
        }
        let tr: C64 = rho.diagonal().iter().sum();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidState(format!(
                "density matrix trace {tr} differs from 1 by more than 1e-10"
            )));
        }
        let mut herm_dev: f64 = 0.0;
        for i in 0..rho.nrows() {
            for j in i..rho.ncols() {
                herm_dev = herm_dev.max((rho[(i, j)] - rho[(j, i)].conj()).norm());
            }
        }
        if herm_dev > 1e-12 {
            return Err(Error::InvalidState(format!(
                "density matrix Hermiticity deviation {herm_dev:e} exceeds 1e-12"
            )));
        }
        Ok(QuantumState {
            space: space.clone(),
            kind: StateKind::Mixed(rho),
        })
    }

    /// Basis (Fock) state for a given occupation vector.
    pub fn basis_state(space: &HilbertSpace, occ: &[u32]) -> Result<Self> {
        let idx = space.index_of(occ).ok_or_else(|| {
            Error::InvalidState(format!("occupation {occ:?} not in the truncated basis"))
        })?;
        let mut amps = DVector::from_element(space.dim(), C64::new(0.0, 0.0));
        amps[idx] = C64::new(1.0, 0.0);
        Ok(QuantumState {
            space: space.clone(),
            kind: StateKind::Pure(amps),
        })
    }

    pub fn vacuum(space: &HilbertSpace) -> Result<Self> {
        Self::basis_state(space, &vec![0; space.n_modes()])
    }

    /// Construction for evolution outputs, which may carry small norm/trace
    /// drift that the run reports separately.
    pub(crate) fn pure_unchecked(space: &HilbertSpace, amplitudes: DVector<C64>) -> Self {
        QuantumState {
            space: space.clone(),
            kind: StateKind::Pure(amplitudes),
        }
    }

    pub(crate) fn mixed_unchecked(space: &HilbertSpace, rho: DMatrix<C64>) -> Self {
        QuantumState {
            space: space.clone(),
            kind: StateKind::Mixed(rho),
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.kind, StateKind::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match &self.kind {
            StateKind::Pure(psi) => Some(psi),
            StateKind::Mixed(_) => None,
        }
    }

    /// Density matrix representation (outer product for pure states).
    pub fn density_matrix(&self) -> DMatrix<C64> {
        match &self.kind {
            StateKind::Pure(psi) => psi * psi.adjoint(),
            StateKind::Mixed(rho) => rho.clone(),
        }
    }

    pub fn to_mixed(&self) -> QuantumState {
        QuantumState {
            space: self.space.clone(),
            kind: StateKind::Mixed(self.density_matrix()),
        }
    }

    /// ‖ψ‖² for pure states, tr ρ for mixed.
    pub fn trace(&self) -> f64 {
        match &self.kind {
            StateKind::Pure(psi) => psi.iter().map(|a| a.norm_sqr()).sum(),
            StateKind::Mixed(rho) => rho.diagonal().iter().map(|d| d.re).sum(),
        }
    }

    /// Population of basis state `i`.
    pub fn population(&self, i: usize) -> f64 {
        match &self.kind {
            StateKind::Pure(psi) => psi[i].norm_sqr(),
            StateKind::Mixed(rho) => rho[(i, i)].re,
        }
    }

    /// ⟨a†a⟩ on one mode (diagonal sum).
    pub fn occupation_expectation(&self, mode: usize) -> Result<f64> {
        self.space.check_mode(mode)?;
        Ok((0..self.space.dim())
            .map(|i| self.population(i) * self.space.occupation(i)[mode] as f64)
            .sum())
    }

    /// Σ_k ⟨a_k†a_k⟩ over all modes.
    pub fn total_excitation(&self) -> f64 {
        (0..self.space.dim())
            .map(|i| self.population(i) * self.space.total_occupation(i) as f64)
            .sum()
    }

    pub fn purity(&self) -> f64 {
        match &self.kind {
            StateKind::Pure(_) => 1.0,
            StateKind::Mixed(rho) => {
                let mut s = 0.0;
                for i in 0..rho.nrows() {
                    for j in 0..rho.ncols() {
                        s += (rho[(i, j)] * rho[(j, i)]).re;
                    }
                }
                s
            }
        }
    }

    /// Smallest eigenvalue of the density matrix (Hermitian part).
    pub fn min_eigenvalue(&self) -> f64 {
        let rho = self.density_matrix();
        let herm = (&rho + rho.adjoint()).scale(0.5);
        let eig = herm.symmetric_eigen();
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Fidelity-free overlap ⟨ψ|ρ|ψ⟩ against a pure reference on the same space.
    pub fn overlap_with_pure(&self, reference: &DVector<C64>) -> f64 {
        match &self.kind {
            StateKind::Pure(psi) => reference.dotc(psi).norm_sqr(),
            StateKind::Mixed(rho) => {
                let rp = rho * reference;
                reference.dotc(&rp).re
            }
        }
    }

    /// Reduced state over `keep_modes` (mixed), tracing out the rest.
    /// The reduced space keeps the per-mode truncations of the kept modes and
    /// the global excitation cap.
    pub fn partial_trace(&self, keep_modes: &[usize]) -> Result<QuantumState> {
        if keep_modes.is_empty() {
            return Err(Error::EmptyModeList);
        }
        for (pos, &m) in keep_modes.iter().enumerate() {
            self.space.check_mode(m)?;
            if keep_modes[..pos].contains(&m) {
                return Err(Error::DuplicateMode { mode: m });
            }
        }
        let kept_dims: Vec<usize> = keep_modes.iter().map(|&m| self.space.mode_dims()[m]).collect();
        let reduced = HilbertSpace::new(&kept_dims, self.space.excitation_cap())?;

        let discarded: Vec<usize> = (0..self.space.n_modes())
            .filter(|m| !keep_modes.contains(m))
            .collect();

        // Group full-basis indices by the occupation of the discarded modes;
        // only pairs within a group contribute to the reduced matrix.
        let mut groups: HashMap<Vec<u32>, Vec<(usize, usize)>> = HashMap::new();
        for i in 0..self.space.dim() {
            let occ = self.space.occupation(i);
            let key: Vec<u32> = discarded.iter().map(|&m| occ[m]).collect();
            let kept: Vec<u32> = keep_modes.iter().map(|&m| occ[m]).collect();
            let r = reduced
                .index_of(&kept)
                .expect("kept occupation admissible in reduced space");
            groups.entry(key).or_default().push((i, r));
        }

        let mut out = DMatrix::from_element(reduced.dim(), reduced.dim(), C64::new(0.0, 0.0));
        match &self.kind {
            StateKind::Pure(psi) => {
                for members in groups.values() {
                    for &(i, ri) in members {
                        let ai = psi[i];
                        if ai.norm_sqr() == 0.0 {
                            continue;
                        }
                        for &(j, rj) in members {
                            out[(ri, rj)] += ai * psi[j].conj();
                        }
                    }
                }
            }
            StateKind::Mixed(rho) => {
                for members in groups.values() {
                    for &(i, ri) in members {
                        for &(j, rj) in members {
                            out[(ri, rj)] += rho[(i, j)];
                        }
                    }
                }
            }
        }
        Ok(QuantumState {
            space: reduced,
            kind: StateKind::Mixed(out),
        })
    }
}
