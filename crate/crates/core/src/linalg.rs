//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are small (n ≲ 10) and dense, so everything is backed by
//! `nalgebra`'s dynamically sized storage.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Operators on the system Hilbert space (Hamiltonians, Lindblad operators,
/// rate operators) are plain dense matrices.
pub type OperatorMatrix = CMatrix;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on the unit norm of a [`PureState`].
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance on Hermiticity and unit trace of a [`DensityMatrix`].
pub const DENSITY_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted in a [`DensityMatrix`].
pub const DENSITY_EIG_TOL: f64 = -1e-8;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// σ₁, σ₂, σ₃ in the basis (|0⟩, |1⟩) with |0⟩ the +1 eigenvector of σ₃.
pub fn pauli(k: usize) -> CMatrix {
    match k {
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("Pauli index must be 1, 2 or 3, got {k}"),
    }
}

/// |i⟩⟨j| in dimension n.
pub fn ket_bra(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(i, j)] = ONE;
    m
}

pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entry of |A − A†|.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().sum()
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in descending
/// order. Column `j` of the returned matrix is the eigenvector of value `j`,
/// with its phase fixed by [`fix_phase`].
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = fix_phase(eig.eigenvectors.column(k).into_owned());
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Σ |λ| over the eigenvalues of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|l| l.abs()).sum()
}

/// Rotates the global phase so the largest-magnitude component is real and
/// positive. Ties go to the lowest index.
pub fn fix_phase(mut v: CVector) -> CVector {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        // Near-ties are resolved towards the lower index so tiny rounding
        // differences don't flip the reference component.
        if z.norm() > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = z.norm();
        }
    }
    if best_abs > 0.0 {
        let phase = v[best].conj() / best_abs;
        v *= phase;
        v[best] = c(v[best].re);
    }
    v
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState(CVector);

impl PureState {
    /// Wraps an already normalized vector, rejecting it otherwise.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(PureState(amplitudes))
    }

    /// Normalizes `amplitudes`; fails on a zero or non-finite vector.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(PureState(amplitudes / c(norm)))
    }

    pub(crate) fn from_normalized_unchecked(amplitudes: CVector) -> Self {
        PureState(amplitudes)
    }

    pub fn from_slice(amplitudes: &[Complex64]) -> Result<Self> {
        Self::normalized(CVector::from_column_slice(amplitudes))
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = CVector::zeros(n);
        v[i] = ONE;
        PureState(v)
    }

    /// (|0⟩ + |1⟩)/√2
    pub fn plus() -> Self {
        let a = c(std::f64::consts::FRAC_1_SQRT_2);
        PureState(CVector::from_column_slice(&[a, a]))
    }

    /// (|0⟩ − |1⟩)/√2
    pub fn minus() -> Self {
        let a = c(std::f64::consts::FRAC_1_SQRT_2);
        PureState(CVector::from_column_slice(&[a, -a]))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn into_amplitudes(self) -> CVector {
        self.0
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.0.dotc(&other.0)
    }

    /// |⟨self|other⟩|, insensitive to global phase.
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.inner(other).norm()
    }

    pub fn projector(&self) -> CMatrix {
        outer(&self.0, &self.0)
    }

    /// ⟨ψ|A|ψ⟩
    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        self.0.dotc(&(op * &self.0))
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.dim() });
        }
        Ok(())
    }
}

/// A Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidDensityMatrix("not square".into()));
        }
        let dev = hermiticity_deviation(&m);
        if dev > DENSITY_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let tr = trace(&m);
        if (tr - ONE).norm() > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(&m).last().copied().unwrap_or(0.0);
        if min < DENSITY_EIG_TOL {
            return Err(Error::InvalidDensityMatrix(format!("eigenvalue {min:e} < 0")));
        }
        Ok(DensityMatrix(m))
    }

    /// Hermitizes and renormalizes the trace without checking positivity.
    /// Used for averages and oracle outputs that are physical up to rounding.
    pub fn from_hermitian_unchecked(m: CMatrix) -> Self {
        let h = hermitize(&m);
        let tr = trace(&h).re;
        DensityMatrix(h / c(tr))
    }

    pub fn from_pure(psi: &PureState) -> Self {
        DensityMatrix(psi.projector())
    }

    pub fn maximally_mixed(n: usize) -> Self {
        DensityMatrix(CMatrix::identity(n, n) / c(n as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    /// Eigen-decomposition into pure-state weights, keeping only weights
    /// above `floor`. Weights are renormalized to sum to one.
    pub fn spectral_mixture(&self, floor: f64) -> Vec<(f64, PureState)> {
        let (values, vectors) = hermitian_eigen(&self.0);
        let mut out: Vec<(f64, PureState)> = values
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > floor)
            .map(|(j, &w)| (w, PureState(vectors.column(j).into_owned())))
            .collect();
        let total: f64 = out.iter().map(|(w, _)| w).sum();
        for (w, _) in &mut out {
            *w /= total;
        }
        out
    }
}
