//! Dense complex linear algebra on the truncated cavity ⊗ ancilla space.
//!
//! Basis ordering is cavity-major: the state |n, l⟩ (n photons, ancilla level
//! l) sits at index `n * ancilla_dim + l`.

mod expm;

pub use expm::{expm, one_norm};

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Checked, Diagnostic, Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Ancilla transmon levels with the fixed index convention g=0, e=1, f=2, h=3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    G,
    E,
    F,
    H,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::G, Level::E, Level::F, Level::H];

    pub fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::E => 1,
            Level::F => 2,
            Level::H => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            Level::G => 'g',
            Level::E => 'e',
            Level::F => 'f',
            Level::H => 'h',
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorSpace {
    cavity_dim: usize,
    ancilla_dim: usize,
}

impl TensorSpace {
    pub fn new(cavity_dim: usize, ancilla_dim: usize) -> Result<Self> {
        if cavity_dim < 5 {
            return Err(Error::InvalidSpace(format!(
                "cavity_dim = {cavity_dim}; the logical code needs Fock states 0..4"
            )));
        }
        if !(2..=4).contains(&ancilla_dim) {
            return Err(Error::InvalidSpace(format!("ancilla_dim = {ancilla_dim} not in 2..=4")));
        }
        Ok(Self { cavity_dim, ancilla_dim })
    }

    pub fn cavity_dim(&self) -> usize {
        self.cavity_dim
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn dim(&self) -> usize {
        self.cavity_dim * self.ancilla_dim
    }

    pub fn index(&self, photons: usize, level: Level) -> usize {
        photons * self.ancilla_dim + level.index()
    }

    pub fn levels(&self) -> impl Iterator<Item = Level> + '_ {
        Level::ALL.into_iter().take(self.ancilla_dim)
    }

    pub fn check_level(&self, level: Level) -> Result<()> {
        if level.index() >= self.ancilla_dim {
            return Err(Error::LevelOutOfRange { level: level.index(), dim: self.ancilla_dim });
        }
        Ok(())
    }

    pub fn ensure_same(&self, other: &TensorSpace) -> Result<()> {
        if self != other {
            return Err(Error::SpaceMismatch { left: self.to_string(), right: other.to_string() });
        }
        Ok(())
    }
}

impl fmt::Display for TensorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cavity[{}]⊗ancilla[{}]", self.cavity_dim, self.ancilla_dim)
    }
}

/// Kronecker product with cavity-major ordering.
pub fn kron(cavity: &CMat, ancilla: &CMat) -> CMat {
    cavity.kronecker(ancilla)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.nrows() == m.ncols()
        && (0..m.nrows()).all(|i| (i..m.ncols()).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol))
}

/// Largest entry modulus, used as a cheap operator-size measure in tolerances.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &CMat) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let sym = (m + m.adjoint()) * c64(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

// ---------------------------------------------------------------------------
// Cavity-factor matrices
// ---------------------------------------------------------------------------

pub mod cavity {
    //! Matrices on the cavity factor alone.

    use super::*;

    pub fn annihilation(dim: usize) -> CMat {
        let mut a = CMat::zeros(dim, dim);
        for k in 1..dim {
            a[(k - 1, k)] = c64((k as f64).sqrt(), 0.0);
        }
        a
    }

    pub fn number(dim: usize) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(dim, (0..dim).map(|k| c64(k as f64, 0.0))))
    }

    pub fn parity(dim: usize) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(
            dim,
            (0..dim).map(|k| if k % 2 == 0 { ONE } else { -ONE }),
        ))
    }

    pub fn fock(dim: usize, n: usize) -> CVec {
        let mut v = CVec::zeros(dim);
        v[n] = ONE;
        v
    }

    /// exp(-i φ a†a): a phase-space rotation by φ.
    pub fn rotation(dim: usize, phi: f64) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(
            dim,
            (0..dim).map(|k| C64::from_polar(1.0, -phi * k as f64)),
        ))
    }

    /// D(α) = exp(α a† − α* a) on a `dim`-level cavity.
    pub fn displacement(dim: usize, alpha: C64) -> CMat {
        let a = annihilation(dim);
        let gen = a.adjoint() * alpha - &a * alpha.conj();
        expm(&gen)
    }

    pub fn truncation_diagnostic(dim: usize, alpha: C64) -> Option<Diagnostic> {
        let n = alpha.norm_sqr();
        (n > dim as f64 / 4.0).then(|| {
            Diagnostic::new(
                "truncation",
                format!("|α|² = {n:.3} exceeds cavity_dim/4 = {:.2}; displacement may be truncated", dim as f64 / 4.0),
            )
        })
    }
}

pub mod ancilla {
    use super::*;

    /// |to⟩⟨from| on a `dim`-level ancilla.
    pub fn transition(dim: usize, from: Level, to: Level) -> CMat {
        let mut m = CMat::zeros(dim, dim);
        m[(to.index(), from.index())] = ONE;
        m
    }

    /// b†b = Σ_n n|n⟩⟨n|.
    pub fn number(dim: usize) -> CMat {
        super::cavity::number(dim)
    }
}

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: TensorSpace,
    amplitudes: CVec,
}

impl StateVector {
    pub fn new(space: TensorSpace, amplitudes: CVec) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::InvalidSpace(format!(
                "state length {} does not match {space}",
                amplitudes.len()
            )));
        }
        Ok(Self { space, amplitudes })
    }

    pub fn basis(space: TensorSpace, photons: usize, level: Level) -> Result<Self> {
        space.check_level(level)?;
        if photons >= space.cavity_dim() {
            return Err(Error::param("photons", format!("{photons} ≥ cavity_dim")));
        }
        let mut v = CVec::zeros(space.dim());
        v[space.index(photons, level)] = ONE;
        Ok(Self { space, amplitudes: v })
    }

    /// |ψ_cav⟩ ⊗ |level⟩.
    pub fn product(space: TensorSpace, cavity_state: &CVec, level: Level) -> Result<Self> {
        space.check_level(level)?;
        if cavity_state.len() != space.cavity_dim() {
            return Err(Error::InvalidSpace(format!(
                "cavity state length {} vs cavity_dim {}",
                cavity_state.len(),
                space.cavity_dim()
            )));
        }
        let mut anc = CVec::zeros(space.ancilla_dim());
        anc[level.index()] = ONE;
        Ok(Self { space, amplitudes: cavity_state.kronecker(&anc) })
    }

    pub fn space(&self) -> TensorSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVec {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm("normalize".into()));
        }
        self.amplitudes /= c64(n, 0.0);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.space.ensure_same(&other.space)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Cavity amplitudes for a fixed ancilla level (unnormalized).
    pub fn cavity_component(&self, level: Level) -> CVec {
        let s = self.space;
        CVec::from_iterator(
            s.cavity_dim(),
            (0..s.cavity_dim()).map(|n| {
                if level.index() < s.ancilla_dim() {
                    self.amplitudes[s.index(n, level)]
                } else {
                    ZERO
                }
            }),
        )
    }

    pub fn level_population(&self, level: Level) -> f64 {
        self.cavity_component(level).norm_squared()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            space: self.space,
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: TensorSpace,
    matrix: CMat,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(space: TensorSpace, matrix: CMat) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(space, matrix)?;
        rho.validate(1e-10, 1e-9, -1e-9)?;
        Ok(rho)
    }

    /// Accepts any square matrix of the right size. Used for propagating
    /// operator-basis elements through linear maps.
    pub fn from_matrix_unchecked(space: TensorSpace, matrix: CMat) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::InvalidSpace(format!(
                "matrix {}x{} does not match {space}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn product(space: TensorSpace, cavity_rho: &CMat, level: Level) -> Result<Self> {
        space.check_level(level)?;
        let anc = ancilla::transition(space.ancilla_dim(), level, level);
        Self::from_matrix_unchecked(space, kron(cavity_rho, &anc))
    }

    pub fn validate(&self, herm_tol: f64, trace_tol: f64, eig_floor: f64) -> Result<()> {
        if !is_hermitian(&self.matrix, herm_tol) {
            return Err(Error::NonPhysical("density matrix is not Hermitian".into()));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::NonPhysical(format!("trace {tr} ≠ 1")));
        }
        let min = hermitian_eigenvalues(&self.matrix)[0];
        if min < eig_floor {
            return Err(Error::NonPhysical(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn space(&self) -> TensorSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix)[0]
    }

    pub fn level_population(&self, level: Level) -> f64 {
        if level.index() >= self.space.ancilla_dim() {
            return 0.0;
        }
        (0..self.space.cavity_dim())
            .map(|n| {
                let i = self.space.index(n, level);
                self.matrix[(i, i)].re
            })
            .sum()
    }

    pub fn expectation(&self, op: &Op) -> Result<C64> {
        self.space.ensure_same(&op.space)?;
        Ok((&op.matrix * &self.matrix).trace())
    }

    /// Tr_ancilla ρ.
    pub fn cavity_reduced(&self) -> CMat {
        let s = self.space;
        let mut out = CMat::zeros(s.cavity_dim(), s.cavity_dim());
        for l in s.levels() {
            out += self.cavity_block(l);
        }
        out
    }

    /// ⟨l|ρ|l⟩ as a cavity operator (unnormalized).
    pub fn cavity_block(&self, level: Level) -> CMat {
        let s = self.space;
        let d = s.cavity_dim();
        CMat::from_fn(d, d, |m, n| self.matrix[(s.index(m, level), s.index(n, level))])
    }

    /// P_l ρ P_l with P_l the projector onto ancilla level `level`.
    pub fn project_level(&self, level: Level) -> DensityMatrix {
        let s = self.space;
        let mut m = CMat::zeros(s.dim(), s.dim());
        for a in 0..s.cavity_dim() {
            for b in 0..s.cavity_dim() {
                let (i, j) = (s.index(a, level), s.index(b, level));
                m[(i, j)] = self.matrix[(i, j)];
            }
        }
        DensityMatrix { space: s, matrix: m }
    }

    pub fn scaled(&self, c: f64) -> DensityMatrix {
        DensityMatrix { space: self.space, matrix: &self.matrix * c64(c, 0.0) }
    }

    pub fn add(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        self.space.ensure_same(&other.space)?;
        Ok(DensityMatrix { space: self.space, matrix: &self.matrix + &other.matrix })
    }

    /// U ρ U†.
    pub fn conjugate(&self, u: &Op) -> Result<DensityMatrix> {
        self.space.ensure_same(&u.space)?;
        Ok(DensityMatrix { space: self.space, matrix: &u.matrix * &self.matrix * u.matrix.adjoint() })
    }

    /// Apply a cavity-only unitary on every ancilla block.
    pub fn conjugate_cavity(&self, u_cav: &CMat) -> DensityMatrix {
        let full = kron(u_cav, &CMat::identity(self.space.ancilla_dim(), self.space.ancilla_dim()));
        DensityMatrix { space: self.space, matrix: &full * &self.matrix * full.adjoint() }
    }
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct Op {
    space: TensorSpace,
    matrix: CMat,
    label: String,
}

impl Op {
    pub fn new(space: TensorSpace, matrix: CMat, label: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::InvalidSpace(format!(
                "operator {}x{} does not match {space}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix, label: label.into() })
    }

    fn raw(space: TensorSpace, matrix: CMat, label: impl Into<String>) -> Self {
        debug_assert_eq!(matrix.nrows(), space.dim());
        Self { space, matrix, label: label.into() }
    }

    pub fn zero(space: TensorSpace) -> Self {
        Self::raw(space, CMat::zeros(space.dim(), space.dim()), "0")
    }

    pub fn identity(space: TensorSpace) -> Self {
        Self::raw(space, CMat::identity(space.dim(), space.dim()), "I")
    }

    pub fn space(&self) -> TensorSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dagger(&self) -> Op {
        let label = match self.label.strip_suffix('†') {
            Some(base) => base.to_string(),
            None => format!("{}†", self.label),
        };
        Self::raw(self.space, self.matrix.adjoint(), label)
    }

    pub fn mul(&self, rhs: &Op) -> Result<Op> {
        self.space.ensure_same(&rhs.space)?;
        Ok(Self::raw(self.space, &self.matrix * &rhs.matrix, format!("{}·{}", self.label, rhs.label)))
    }

    pub fn add(&self, rhs: &Op) -> Result<Op> {
        self.space.ensure_same(&rhs.space)?;
        Ok(Self::raw(self.space, &self.matrix + &rhs.matrix, format!("{}+{}", self.label, rhs.label)))
    }

    pub fn sub(&self, rhs: &Op) -> Result<Op> {
        self.space.ensure_same(&rhs.space)?;
        Ok(Self::raw(self.space, &self.matrix - &rhs.matrix, format!("{}-{}", self.label, rhs.label)))
    }

    pub fn scale(&self, c: C64) -> Op {
        Self::raw(self.space, &self.matrix * c, format!("({c})·{}", self.label))
    }

    pub fn scale_real(&self, c: f64) -> Op {
        self.scale(c64(c, 0.0))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        is_hermitian(&self.matrix, tol)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// exp(-i H t) for a Hermitian generator.
    pub fn propagator(&self, t: f64) -> Op {
        Self::raw(self.space, expm(&(&self.matrix * c64(0.0, -t))), format!("exp(-i{}t)", self.label))
    }
}

pub fn annihilation(space: TensorSpace) -> Op {
    tensor_embed_raw(space, &cavity::annihilation(space.cavity_dim()), None, "a")
}

pub fn creation(space: TensorSpace) -> Op {
    annihilation(space).dagger()
}

pub fn number(space: TensorSpace) -> Op {
    tensor_embed_raw(space, &cavity::number(space.cavity_dim()), None, "a†a")
}

/// I_cavity ⊗ |to⟩⟨from|.
pub fn ancilla_transition(space: TensorSpace, from: Level, to: Level) -> Result<Op> {
    space.check_level(from)?;
    space.check_level(to)?;
    let anc = ancilla::transition(space.ancilla_dim(), from, to);
    Ok(tensor_embed_raw(space, &CMat::identity(space.cavity_dim(), space.cavity_dim()), Some(&anc), format!("|{to}⟩⟨{from}|")))
}

pub fn ancilla_projector(space: TensorSpace, level: Level) -> Result<Op> {
    ancilla_transition(space, level, level)
}

/// I_cavity ⊗ b†b.
pub fn ancilla_number(space: TensorSpace) -> Op {
    tensor_embed_raw(
        space,
        &CMat::identity(space.cavity_dim(), space.cavity_dim()),
        Some(&ancilla::number(space.ancilla_dim())),
        "b†b",
    )
}

fn tensor_embed_raw(space: TensorSpace, cav: &CMat, anc: Option<&CMat>, label: impl Into<String>) -> Op {
    let anc = anc.cloned().unwrap_or_else(|| CMat::identity(space.ancilla_dim(), space.ancilla_dim()));
    Op::raw(space, kron(cav, &anc), label)
}

/// cavity_op ⊗ ancilla_op.
pub fn tensor_embed(space: TensorSpace, cavity_op: &CMat, ancilla_op: &CMat) -> Result<Op> {
    if cavity_op.shape() != (space.cavity_dim(), space.cavity_dim()) {
        return Err(Error::SpaceMismatch {
            left: format!("cavity operator {:?}", cavity_op.shape()),
            right: space.to_string(),
        });
    }
    if ancilla_op.shape() != (space.ancilla_dim(), space.ancilla_dim()) {
        return Err(Error::SpaceMismatch {
            left: format!("ancilla operator {:?}", ancilla_op.shape()),
            right: space.to_string(),
        });
    }
    Ok(Op::raw(space, kron(cavity_op, ancilla_op), "embed"))
}

/// AB − BA.
pub fn commutator(a: &Op, b: &Op) -> Result<Op> {
    a.space.ensure_same(&b.space)?;
    Ok(Op::raw(
        a.space,
        &a.matrix * &b.matrix - &b.matrix * &a.matrix,
        format!("[{},{}]", a.label, b.label),
    ))
}

pub fn dagger(a: &Op) -> Op {
    a.dagger()
}

/// ⟨ψ|A|ψ⟩.
pub fn expectation(state: &StateVector, a: &Op) -> Result<C64> {
    state.space.ensure_same(&a.space)?;
    Ok(state.amplitudes.dotc(&(&a.matrix * &state.amplitudes)))
}

/// A|ψ⟩ without renormalization.
pub fn apply(a: &Op, state: &StateVector) -> Result<StateVector> {
    a.space.ensure_same(&state.space)?;
    Ok(StateVector { space: state.space, amplitudes: &a.matrix * &state.amplitudes })
}

/// D(α) ⊗ I.
pub fn displacement(space: TensorSpace, alpha: C64) -> Checked<Op> {
    let d = cavity::displacement(space.cavity_dim(), alpha);
    Checked {
        value: tensor_embed_raw(space, &d, None, format!("D({alpha})")),
        diagnostics: cavity::truncation_diagnostic(space.cavity_dim(), alpha).into_iter().collect(),
    }
}

/// exp(iπ a†a) ⊗ I.
pub fn parity(space: TensorSpace) -> Op {
    tensor_embed_raw(space, &cavity::parity(space.cavity_dim()), None, "Π")
}

/// exp(iπ a†a) evaluated literally through the matrix exponential; equals
/// [`parity`] up to rounding.
pub fn parity_via_expm(space: TensorSpace) -> Op {
    let gen = cavity::number(space.cavity_dim()) * c64(0.0, PI);
    tensor_embed_raw(space, &expm(&gen), None, "Π")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> TensorSpace {
        TensorSpace::new(8, 3).unwrap()
    }

    #[test]
    fn space_validation() {
        assert!(TensorSpace::new(4, 3).is_err());
        assert!(TensorSpace::new(5, 1).is_err());
        assert!(TensorSpace::new(5, 5).is_err());
        let s = TensorSpace::new(5, 4).unwrap();
        assert_eq!(s.dim(), 20);
    }

    #[test]
    fn annihilation_examples() {
        let s = space();
        let a = annihilation(s);
        let one_g = StateVector::basis(s, 1, Level::G).unwrap();
        let out = apply(&a, &one_g).unwrap();
        assert_eq!(out, StateVector::basis(s, 0, Level::G).unwrap());

        let vac = StateVector::basis(s, 0, Level::G).unwrap();
        assert_eq!(apply(&a, &vac).unwrap().norm(), 0.0);

        let two = StateVector::basis(s, 2, Level::G).unwrap();
        let n = a.dagger().mul(&a).unwrap();
        assert!((expectation(&two, &n).unwrap() - c64(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn transition_examples() {
        let s = space();
        let ef = ancilla_transition(s, Level::F, Level::E).unwrap();
        let f0 = StateVector::basis(s, 0, Level::F).unwrap();
        assert_eq!(apply(&ef, &f0).unwrap(), StateVector::basis(s, 0, Level::E).unwrap());
        let g0 = StateVector::basis(s, 0, Level::G).unwrap();
        assert_eq!(apply(&ef, &g0).unwrap().norm(), 0.0);
        let pf = ancilla_projector(s, Level::F).unwrap();
        assert_eq!(pf.mul(&pf).unwrap().matrix(), pf.matrix());
        assert!(matches!(
            ancilla_transition(TensorSpace::new(5, 2).unwrap(), Level::F, Level::G),
            Err(Error::LevelOutOfRange { level: 2, dim: 2 })
        ));
    }

    #[test]
    fn plumbing_examples() {
        let s = space();
        let n = number(s);
        assert_eq!(commutator(&n, &n).unwrap().max_abs(), 0.0);
        let two = StateVector::basis(s, 2, Level::G).unwrap();
        assert_eq!(expectation(&two, &n).unwrap(), c64(2.0, 0.0));
        let vac = StateVector::basis(s, 0, Level::G).unwrap();
        let out = apply(&dagger(&annihilation(s)), &vac).unwrap();
        assert_eq!(out, StateVector::basis(s, 1, Level::G).unwrap());
        let other = TensorSpace::new(6, 3).unwrap();
        assert!(commutator(&n, &number(other)).is_err());
    }

    #[test]
    fn dagger_is_involution() {
        let s = space();
        let a = annihilation(s).add(&ancilla_transition(s, Level::G, Level::F).unwrap().scale(c64(0.3, -1.1))).unwrap();
        assert_eq!(a.dagger().dagger().matrix(), a.matrix());
    }

    #[test]
    fn canonical_commutator_below_edge() {
        let s = space();
        let a = annihilation(s);
        let c = commutator(&a, &a.dagger()).unwrap();
        for k in 0..s.cavity_dim() - 1 {
            for l in s.levels() {
                let ket = StateVector::basis(s, k, l).unwrap();
                let out = apply(&c, &ket).unwrap();
                assert!((out.amplitudes() - ket.amplitudes()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn displacement_and_parity() {
        let s = TensorSpace::new(20, 2).unwrap();
        let d0 = displacement(s, ZERO).value;
        assert_eq!(d0.matrix(), Op::identity(s).matrix());

        let p = parity(s);
        let two = StateVector::basis(s, 2, Level::G).unwrap();
        let one = StateVector::basis(s, 1, Level::G).unwrap();
        assert_eq!(apply(&p, &two).unwrap(), two);
        assert_eq!(apply(&p, &one).unwrap().amplitudes(), &(-one.amplitudes().clone()));
        let pe = parity_via_expm(s);
        assert!((pe.matrix() - p.matrix()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn vacuum_overlap_matches_power_series() {
        // ⟨0|α⟩ = e^{-|α|²/2}; the oracle sums the series Σ (-|α|²/2)^k / k!.
        let s = TensorSpace::new(20, 2).unwrap();
        let alpha = c64(0.5, 0.0);
        let d = displacement(s, alpha).value;
        let vac = StateVector::basis(s, 0, Level::G).unwrap();
        let overlap = expectation(&vac, &d).unwrap();
        let x = -alpha.norm_sqr() / 2.0;
        let mut term = 1.0;
        let mut series = 1.0;
        for k in 1..40 {
            term *= x / k as f64;
            series += term;
        }
        assert!((overlap.re - series).abs() < 1e-12);
        assert!(overlap.im.abs() < 1e-12);
    }

    #[test]
    fn displacement_inverse_pairs() {
        let dim = 30;
        for alpha in [c64(0.3, -0.2), c64(1.5, 0.9), c64(-1.2, 1.6)] {
            let d = cavity::displacement(dim, alpha);
            let dm = cavity::displacement(dim, -alpha);
            let prod = &d * &dm;
            assert!((prod - CMat::identity(dim, dim)).iter().all(|z| z.norm() < 1e-9));
        }
    }

    #[test]
    fn truncation_warning_is_diagnostic() {
        let s = TensorSpace::new(8, 2).unwrap();
        let out = displacement(s, c64(2.0, 0.0));
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].code, "truncation");
        assert!(displacement(s, c64(0.5, 0.0)).diagnostics.is_empty());
    }

    #[test]
    fn constructions_are_bit_identical() {
        let s = space();
        assert_eq!(displacement(s, c64(0.7, 0.1)).value, displacement(s, c64(0.7, 0.1)).value);
        assert_eq!(annihilation(s), annihilation(s));
    }

    #[test]
    fn density_matrix_checks() {
        let s = space();
        let psi = StateVector::basis(s, 2, Level::F).unwrap();
        let rho = psi.to_density();
        rho.validate(1e-10, 1e-9, -1e-9).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-14);
        assert_eq!(rho.level_population(Level::F), 1.0);
        assert!(DensityMatrix::new(s, CMat::zeros(s.dim(), s.dim())).is_err());
        let red = rho.cavity_reduced();
        assert_eq!(red[(2, 2)], ONE);
    }
}
