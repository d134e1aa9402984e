//! Time-local master equations in Lindblad-like form with real, possibly
//! negative rates:
//!
//! ```text
//! L_t[ρ] = −i[H(t), ρ] + Σ_α c_α(t) (L_α ρ L_α† − ½{L_α†L_α, ρ})
//! ```
//!
//! plus the builtin models: the eternal non-Markovian Pauli channel family,
//! the dissipative all-to-all network and a couple of textbook baselines.

use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_deviation, ket_bra, pauli, CMatrix, I};

/// Hamiltonians must be Hermitian to this tolerance at every queried time.
const HAMILTONIAN_TOL: f64 = 1e-10;

type OperatorFn = dyn Fn(f64) -> CMatrix + Send + Sync;
type RateFn = dyn Fn(f64) -> f64 + Send + Sync;

/// An operator-valued function of time. Evaluators must be pure in `t`.
#[derive(Clone)]
pub enum TimeOperator {
    Constant(CMatrix),
    Varying(Arc<OperatorFn>),
}

impl TimeOperator {
    pub fn varying(f: impl Fn(f64) -> CMatrix + Send + Sync + 'static) -> Self {
        TimeOperator::Varying(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> Cow<'_, CMatrix> {
        match self {
            TimeOperator::Constant(m) => Cow::Borrowed(m),
            TimeOperator::Varying(f) => Cow::Owned(f(t)),
        }
    }
}

impl fmt::Debug for TimeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeOperator::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            TimeOperator::Varying(_) => f.write_str("Varying(<fn>)"),
        }
    }
}

/// A real rate c(t) in units of 1/time. May be negative.
#[derive(Clone)]
pub enum TimeRate {
    Constant(f64),
    Varying(Arc<RateFn>),
}

impl TimeRate {
    pub fn varying(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeRate::Varying(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            TimeRate::Constant(r) => *r,
            TimeRate::Varying(f) => f(t),
        }
    }
}

impl fmt::Debug for TimeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeRate::Constant(r) => f.debug_tuple("Constant").field(r).finish(),
            TimeRate::Varying(_) => f.write_str("Varying(<fn>)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LindbladTerm {
    pub operator: TimeOperator,
    pub rate: TimeRate,
}

impl LindbladTerm {
    pub fn constant(operator: CMatrix, rate: f64) -> Self {
        LindbladTerm { operator: TimeOperator::Constant(operator), rate: TimeRate::Constant(rate) }
    }
}

/// A finite-dimensional time-local master equation.
///
/// Any number of terms is accepted; redundant (non-canonical) term sets such
/// as the n² operators of the network model are fine.
#[derive(Debug, Clone)]
pub struct MasterEquationModel {
    dim: usize,
    hamiltonian: TimeOperator,
    terms: Vec<LindbladTerm>,
}

/// One Lindblad term evaluated at a fixed time, with L†L cached.
#[derive(Debug, Clone)]
pub struct TermAt {
    pub rate: f64,
    pub op: CMatrix,
    pub op_dag_op: CMatrix,
}

/// A model frozen at time `t`. All per-state quantities at that time are
/// computed from this.
#[derive(Debug, Clone)]
pub struct ModelAt {
    pub t: f64,
    pub hamiltonian: CMatrix,
    pub terms: Vec<TermAt>,
}

impl MasterEquationModel {
    pub fn new(dim: usize, hamiltonian: TimeOperator, terms: Vec<LindbladTerm>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter { name: "dim", reason: "must be positive".into() });
        }
        let model = MasterEquationModel { dim, hamiltonian, terms };
        model.at(0.0)?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[LindbladTerm] {
        &self.terms
    }

    pub fn hamiltonian(&self) -> &TimeOperator {
        &self.hamiltonian
    }

    pub fn rates_at(&self, t: f64) -> Vec<f64> {
        self.terms.iter().map(|term| term.rate.at(t)).collect()
    }

    /// Evaluates every time-dependent piece at `t`.
    pub fn at(&self, t: f64) -> Result<ModelAt> {
        let hamiltonian = self.hamiltonian.at(t).into_owned();
        self.check_square(&hamiltonian)?;
        let dev = hermiticity_deviation(&hamiltonian);
        if dev > HAMILTONIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let op = term.operator.at(t).into_owned();
            self.check_square(&op)?;
            let rate = term.rate.at(t);
            if !rate.is_finite() {
                return Err(Error::InvalidParameter { name: "rate", reason: format!("non-finite at t = {t}") });
            }
            let op_dag_op = op.adjoint() * &op;
            terms.push(TermAt { rate, op, op_dag_op });
        }
        Ok(ModelAt { t, hamiltonian, terms })
    }

    fn check_square(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: m.nrows() });
        }
        Ok(())
    }
}

impl ModelAt {
    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// L_t[ρ] for an arbitrary square matrix ρ of the right dimension.
    pub fn generator(&self, rho: &CMatrix) -> Result<CMatrix> {
        let n = self.dim();
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rho.nrows() });
        }
        let h = &self.hamiltonian;
        let mut out = (h * rho - rho * h) * (-I);
        let mut anti = CMatrix::zeros(n, n);
        for term in &self.terms {
            if term.rate == 0.0 {
                continue;
            }
            let r = c(term.rate);
            out += (&term.op * rho * term.op.adjoint()) * r;
            anti += &term.op_dag_op * r;
        }
        out -= (&anti * rho + rho * &anti) * c(0.5);
        Ok(out)
    }
}

/// L_t[ρ] = −i[H(t),ρ] + Σ_α c_α(t)(L_α ρ L_α† − ½{L_α†L_α, ρ}).
pub fn evaluate_generator(model: &MasterEquationModel, t: f64, rho: &CMatrix) -> Result<CMatrix> {
    model.at(t)?.generator(rho)
}

/// Mixing weights (x₁, x₂, x₃) of the eternal non-Markovian Pauli family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliWeights([f64; 3]);

impl PauliWeights {
    pub fn new(x: [f64; 3]) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter { name: "x", reason: format!("{x:?} has a negative entry") });
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter { name: "x", reason: format!("entries sum to {sum}, not 1") });
        }
        Ok(PauliWeights(x))
    }

    pub fn get(&self) -> [f64; 3] {
        self.0
    }
}

/// μ_i(t) = −(x_j + x_k)/(x_j + x_k + e^{2t} x_i), with i ∈ {1, 2, 3}.
pub fn pauli_mu(x: [f64; 3], i: usize, t: f64) -> Result<f64> {
    let x = PauliWeights::new(x)?;
    if !(1..=3).contains(&i) {
        return Err(Error::InvalidParameter { name: "i", reason: format!("{i} not in 1..=3") });
    }
    Ok(mu(&x, i - 1, t))
}

fn mu(x: &PauliWeights, i: usize, t: f64) -> f64 {
    let x = x.0;
    let others = x[(i + 1) % 3] + x[(i + 2) % 3];
    -others / (others + (2.0 * t).exp() * x[i])
}

/// (γ₁, γ₂, γ₃) with γ_i = μ_i − μ_j − μ_k.
pub fn pauli_rates(x: [f64; 3], t: f64) -> Result<[f64; 3]> {
    let x = PauliWeights::new(x)?;
    Ok(rates(&x, t))
}

fn rates(x: &PauliWeights, t: f64) -> [f64; 3] {
    let m = [mu(x, 0, t), mu(x, 1, t), mu(x, 2, t)];
    [m[0] - m[1] - m[2], m[1] - m[0] - m[2], m[2] - m[0] - m[1]]
}

/// dρ/dt = ½ Σ_k γ_k(t)(σ_k ρ σ_k − ρ) for arbitrary rate functions.
///
/// The ½ is folded into the stored rates: term k is (σ_k, γ_k/2).
pub fn build_pauli_model_with_rates(
    gammas: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static,
) -> MasterEquationModel {
    let gammas: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync> = Arc::new(gammas);
    let terms = (0..3)
        .map(|k| {
            let g = Arc::clone(&gammas);
            LindbladTerm {
                operator: TimeOperator::Constant(pauli(k + 1)),
                rate: TimeRate::varying(move |t| 0.5 * g(t)[k]),
            }
        })
        .collect();
    MasterEquationModel { dim: 2, hamiltonian: TimeOperator::Constant(CMatrix::zeros(2, 2)), terms }
}

/// The Pauli channel master equation with μ-parametrized rates.
pub fn build_pauli_model(x: [f64; 3]) -> Result<MasterEquationModel> {
    let x = PauliWeights::new(x)?;
    Ok(build_pauli_model_with_rates(move |t| rates(&x, t)))
}

/// The time-dependent rate used for the 7-site network:
/// c(t) = 0.5[(1 − e^{−0.5t})·0.3 + e^{−0.3t} sin(4.5t)].
pub fn network_rate(t: f64) -> f64 {
    0.5 * ((1.0 - (-0.5 * t).exp()) * 0.3 + (-0.3 * t).exp() * (4.5 * t).sin())
}

/// Symmetric coupling matrix with zero diagonal and upper-triangle entries
/// drawn uniformly from [0, max].
pub fn sample_couplings(n: usize, max: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut omega = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.random::<f64>() * max;
            omega[(i, j)] = v;
            omega[(j, i)] = v;
        }
    }
    omega
}

/// n sites with H = Σ_{i≠j} Ω_ij |i⟩⟨j| and the n² jump operators |i⟩⟨j|
/// (every ordered pair, diagonal included), all sharing the rate `rate`.
pub fn build_network_model(n: usize, omega: &DMatrix<f64>, rate: TimeRate) -> Result<MasterEquationModel> {
    if omega.nrows() != n || omega.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: omega.nrows() });
    }
    for i in 0..n {
        if omega[(i, i)] != 0.0 {
            return Err(Error::InvalidParameter { name: "omega", reason: format!("diagonal entry ({i},{i}) is nonzero") });
        }
        for j in 0..n {
            let v = omega[(i, j)];
            if !v.is_finite() {
                return Err(Error::InvalidParameter { name: "omega", reason: format!("entry ({i},{j}) is not finite") });
            }
            if (v - omega[(j, i)]).abs() > 1e-12 {
                return Err(Error::InvalidParameter { name: "omega", reason: format!("not symmetric at ({i},{j})") });
            }
        }
    }
    let hamiltonian = omega.map(c);
    let mut terms = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            terms.push(LindbladTerm { operator: TimeOperator::Constant(ket_bra(n, i, j)), rate: rate.clone() });
        }
    }
    MasterEquationModel::new(n, TimeOperator::Constant(hamiltonian), terms)
}

/// Qubit decay |1⟩ → |0⟩: single term L = |0⟩⟨1| with constant rate γ ≥ 0.
pub fn build_amplitude_damping(gamma: f64) -> Result<MasterEquationModel> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidParameter { name: "gamma", reason: format!("{gamma} must be >= 0") });
    }
    MasterEquationModel::new(
        2,
        TimeOperator::Constant(CMatrix::zeros(2, 2)),
        vec![LindbladTerm::constant(ket_bra(2, 0, 1), gamma)],
    )
}

/// Pure dephasing: single term L = σ₃ with rate γ(t), no Hamiltonian.
pub fn build_dephasing(rate: TimeRate) -> MasterEquationModel {
    MasterEquationModel {
        dim: 2,
        hamiltonian: TimeOperator::Constant(CMatrix::zeros(2, 2)),
        terms: vec![LindbladTerm { operator: TimeOperator::Constant(pauli(3)), rate }],
    }
}
