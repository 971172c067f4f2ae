//! Dense complex linear algebra and operators on the atom ⊗ cavity space.
//!
//! The composite space is three atomic levels (`g`, `e`, `s`) times a
//! photon Fock space truncated at `N_max`. Basis ordering is atomic-major,
//! photon-minor:
//!
//! ```text
//! index = atomic_index * (N_max + 1) + photon_number
//! ```
//!
//! with atomic indices `g = 0`, `e = 1`, `s = 2`.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

/// Tolerances enforced by [`DensityMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const EIGENVALUE_FLOOR: f64 = -1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QopsError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("unknown atomic level label {0:?} (expected g, e or s)")]
    UnknownLevel(String),
    #[error("photon cutoff must be at least 1, got {0}")]
    InvalidCutoff(usize),
    #[error("state vector has zero norm")]
    ZeroNorm,
    #[error("state vector not normalized: norm = {0}")]
    NotNormalized(f64),
    #[error("matrix is not Hermitian: max |A - A^H| = {0:e}")]
    NotHermitian(f64),
    #[error("density matrix trace deviates from 1 by {0:e}")]
    TraceNotUnity(f64),
    #[error("density matrix has negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),
    #[error("index ({0}, {1}) outside the Hilbert space")]
    OutOfRange(usize, usize),
}

/// Rectangular dense complex matrix. Every binary operation checks shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[C64]) -> Self {
        Self(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Column-major view of the entries.
    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub(crate) fn from_column_slice(rows: usize, cols: usize, data: &[C64]) -> Self {
        Self(DMatrix::from_column_slice(rows, cols, data))
    }

    pub(crate) fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub(crate) fn inner_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    fn check_same(&self, other: &Self, op: &'static str) -> Result<(), QopsError> {
        if self.shape() != other.shape() {
            return Err(QopsError::DimensionMismatch { op, left: self.shape(), right: other.shape() });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, QopsError> {
        self.check_same(other, "add")?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, QopsError> {
        self.check_same(other, "sub")?;
        Ok(Self(&self.0 - &other.0))
    }

    pub fn mul(&self, other: &Self) -> Result<Self, QopsError> {
        if self.cols() != other.rows() {
            return Err(QopsError::DimensionMismatch { op: "mul", left: self.shape(), right: other.shape() });
        }
        Ok(Self(&self.0 * &other.0))
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>, QopsError> {
        if self.cols() != v.len() {
            return Err(QopsError::DimensionMismatch { op: "mul_vec", left: self.shape(), right: (v.len(), 1) });
        }
        let out = (0..self.rows()).map(|i| (0..self.cols()).map(|j| self.0[(i, j)] * v[j]).sum()).collect();
        Ok(out)
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    /// `[A, B] = AB - BA`
    pub fn commutator(&self, other: &Self) -> Result<Self, QopsError> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// `{A, B} = AB + BA`
    pub fn anticommutator(&self, other: &Self) -> Result<Self, QopsError> {
        self.mul(other)?.add(&other.mul(self)?)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry of `|A - A^H|`.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Eigen-decomposition of a Hermitian matrix.
    ///
    /// Returns eigenvalues in ascending order and the matching unit
    /// eigenvectors. Only the Hermitian part `(A + A^H)/2` is used.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, Vec<Vec<C64>>), QopsError> {
        if !self.is_square() {
            return Err(QopsError::DimensionMismatch {
                op: "hermitian_eigen",
                left: self.shape(),
                right: (self.cols(), self.rows()),
            });
        }
        let sym = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(sym);
        let mut pairs: Vec<(f64, Vec<C64>)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &val)| (val, eig.eigenvectors.column(k).iter().copied().collect()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(pairs.into_iter().unzip())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

/// One of the three levels of the Λ configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[serde(rename = "g")]
    Ground,
    #[serde(rename = "e")]
    Excited,
    #[serde(rename = "s")]
    Metastable,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Ground, Level::Excited, Level::Metastable];

    pub fn index(self) -> usize {
        match self {
            Level::Ground => 0,
            Level::Excited => 1,
            Level::Metastable => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::Ground => "g",
            Level::Excited => "e",
            Level::Metastable => "s",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Level {
    type Err = QopsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "g" => Ok(Level::Ground),
            "e" => Ok(Level::Excited),
            "s" => Ok(Level::Metastable),
            other => Err(QopsError::UnknownLevel(other.to_string())),
        }
    }
}

/// Three-level atom ⊗ Fock space truncated at `photon_cutoff`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpace {
    photon_cutoff: usize,
}

impl Default for HilbertSpace {
    fn default() -> Self {
        Self { photon_cutoff: 1 }
    }
}

impl HilbertSpace {
    pub fn new(photon_cutoff: usize) -> Result<Self, QopsError> {
        if photon_cutoff < 1 {
            return Err(QopsError::InvalidCutoff(photon_cutoff));
        }
        Ok(Self { photon_cutoff })
    }

    pub fn photon_cutoff(&self) -> usize {
        self.photon_cutoff
    }

    pub fn photon_levels(&self) -> usize {
        self.photon_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        3 * self.photon_levels()
    }

    pub fn index(&self, level: Level, photons: usize) -> Result<usize, QopsError> {
        if photons > self.photon_cutoff {
            return Err(QopsError::OutOfRange(level.index(), photons));
        }
        Ok(level.index() * self.photon_levels() + photons)
    }

    /// Inverse of [`HilbertSpace::index`].
    pub fn basis_state(&self, index: usize) -> (Level, usize) {
        let n = self.photon_levels();
        (Level::ALL[index / n], index % n)
    }

    /// Label such as `g,1` for basis vector `index`.
    pub fn basis_label(&self, index: usize) -> String {
        let (level, n) = self.basis_state(index);
        format!("{level},{n}")
    }

    fn photon_identity(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.photon_levels())
    }
}

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: HilbertSpace,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Normalizes `amplitudes`; fails on length mismatch or zero norm.
    pub fn new(space: HilbertSpace, amplitudes: Vec<C64>) -> Result<Self, QopsError> {
        if amplitudes.len() != space.dim() {
            return Err(QopsError::DimensionMismatch {
                op: "state_vector",
                left: (space.dim(), 1),
                right: (amplitudes.len(), 1),
            });
        }
        let norm = l2_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(QopsError::ZeroNorm);
        }
        let amplitudes = amplitudes.into_iter().map(|a| a / norm).collect();
        Ok(Self { space, amplitudes })
    }

    pub fn basis(space: HilbertSpace, level: Level, photons: usize) -> Result<Self, QopsError> {
        let mut amps = vec![C64::new(0.0, 0.0); space.dim()];
        amps[space.index(level, photons)?] = C64::new(1.0, 0.0);
        Ok(Self { space, amplitudes: amps })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    pub fn amplitude(&self, level: Level, photons: usize) -> Result<C64, QopsError> {
        Ok(self.amplitudes[self.space.index(level, photons)?])
    }

    /// `|⟨self|other⟩|²`
    pub fn overlap_probability(&self, other: &StateVector) -> f64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr()
    }
}

pub(crate) fn l2_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Density operator on a [`HilbertSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(space: HilbertSpace, matrix: ComplexMatrix) -> Result<Self, QopsError> {
        if matrix.shape() != (space.dim(), space.dim()) {
            return Err(QopsError::DimensionMismatch {
                op: "density_matrix",
                left: (space.dim(), space.dim()),
                right: matrix.shape(),
            });
        }
        let herm = matrix.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(QopsError::NotHermitian(herm));
        }
        let drift = (matrix.trace() - C64::new(1.0, 0.0)).norm();
        if drift > TRACE_TOL {
            return Err(QopsError::TraceNotUnity(drift));
        }
        let (eigs, _) = matrix.hermitian_eigen()?;
        if let Some(&min) = eigs.first() {
            if min < EIGENVALUE_FLOOR {
                return Err(QopsError::NegativeEigenvalue(min));
            }
        }
        Ok(Self { space, matrix })
    }

    /// Skips the eigenvalue check; used on integrator output that has
    /// already been Hermitized and trace-corrected.
    pub(crate) fn new_unchecked(space: HilbertSpace, matrix: ComplexMatrix) -> Self {
        Self { space, matrix }
    }

    pub fn pure(state: &StateVector) -> Self {
        let a = state.amplitudes();
        let m = ComplexMatrix::from_fn(a.len(), a.len(), |i, j| a[i] * a[j].conj());
        Self::new_unchecked(state.space(), m)
    }

    pub fn basis(space: HilbertSpace, level: Level, photons: usize) -> Result<Self, QopsError> {
        Ok(Self::pure(&StateVector::basis(space, level, photons)?))
    }

    pub fn maximally_mixed(space: HilbertSpace) -> Self {
        let d = space.dim();
        Self::new_unchecked(space, ComplexMatrix::identity(d).scale_real(1.0 / d as f64))
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `Tr(ρ²)`
    pub fn purity(&self) -> f64 {
        let m = self.matrix.inner();
        (m * m).trace().re
    }

    pub fn population(&self, level: Level, photons: usize) -> Result<f64, QopsError> {
        let i = self.space.index(level, photons)?;
        Ok(self.matrix[(i, i)].re)
    }

    /// Diagonal of ρ in basis order.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.space.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn fidelity_with(&self, state: &StateVector) -> Result<f64, QopsError> {
        let rho_psi = self.matrix.mul_vec(state.amplitudes())?;
        Ok(state.amplitudes().iter().zip(&rho_psi).map(|(a, b)| a.conj() * b).sum::<C64>().re)
    }

    pub fn min_eigenvalue(&self) -> Result<f64, QopsError> {
        let (eigs, _) = self.matrix.hermitian_eigen()?;
        Ok(eigs.first().copied().unwrap_or(0.0))
    }
}

/// `σ_ij ⊗ 1` with `σ_ij = |i⟩⟨j|`.
pub fn atomic_operator(i: Level, j: Level, space: HilbertSpace) -> ComplexMatrix {
    let mut atom = ComplexMatrix::zeros(3, 3);
    atom.inner_mut()[(i.index(), j.index())] = C64::new(1.0, 0.0);
    atom.kron(&space.photon_identity())
}

/// Label-based variant of [`atomic_operator`].
pub fn atomic_operator_by_label(i: &str, j: &str, space: HilbertSpace) -> Result<ComplexMatrix, QopsError> {
    Ok(atomic_operator(i.parse()?, j.parse()?, space))
}

/// `1 ⊗ a` with `⟨n-1|a|n⟩ = √n`.
pub fn annihilation_operator(space: HilbertSpace) -> ComplexMatrix {
    let n = space.photon_levels();
    let a =
        ComplexMatrix::from_fn(
            n,
            n,
            |r, c| {
                if c == r + 1 {
                    C64::new((c as f64).sqrt(), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            },
        );
    ComplexMatrix::identity(3).kron(&a)
}

/// `1 ⊗ a†a`
pub fn number_operator(space: HilbertSpace) -> ComplexMatrix {
    let a = annihilation_operator(space);
    a.adjoint().mul(&a).expect("square operators on one space")
}

/// Photon number plus atomic excitation (`e` or `s` count as one quantum).
pub fn excitation_number_operator(space: HilbertSpace) -> ComplexMatrix {
    number_operator(space)
        .add(&atomic_operator(Level::Excited, Level::Excited, space))
        .and_then(|m| m.add(&atomic_operator(Level::Metastable, Level::Metastable, space)))
        .expect("operators share the space")
}

/// `Tr(ρ O)`
pub fn expectation(state: &DensityMatrix, observable: &ComplexMatrix) -> Result<C64, QopsError> {
    Ok(state.matrix().mul(observable)?.trace())
}
