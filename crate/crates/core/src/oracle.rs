//! Exact references for the trajectory engines: fixed-step RK4 on the master
//! equation, the closed-form Pauli-channel solution, and a sampled probe of
//! the P-divisibility criterion (W_ψ ⪰ 0 for every ψ).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitize, max_abs, pauli, trace, CMatrix, CVector, DensityMatrix, PureState};
use crate::model::{MasterEquationModel, PauliWeights};
use crate::rate_operator::{default_zero_threshold, spectral_split};

/// Largest trace drift per RK4 step tolerated before renormalization.
const MAX_TRACE_DRIFT: f64 = 1e-6;

/// Haar-random pure state from a normalized complex Gaussian vector.
pub fn haar_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PureState {
    loop {
        let v = CVector::from_fn(n, |_, _| {
            num_complex::Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        if let Ok(psi) = PureState::normalized(v) {
            return psi;
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl ExactSolution {
    /// State at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> &DensityMatrix {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .expect("solution has at least the initial state");
        &self.states[k]
    }
}

/// Classical RK4 on dρ/dt = L_t[ρ] with step `dt_exact`, reporting the state
/// at every multiple of `output_every` steps (and at the final step).
///
/// Each step is re-Hermitized and trace-renormalized; a trace drift above
/// 1e-6 within one step, or a matrix entry above 1 + 1e-6, is reported as
/// [`Error::Unstable`].
pub fn integrate_master_equation(
    model: &MasterEquationModel,
    rho0: &DensityMatrix,
    t_max: f64,
    dt_exact: f64,
    output_every: usize,
) -> Result<ExactSolution> {
    if !(dt_exact > 0.0) {
        return Err(Error::InvalidParameter { name: "dt_exact", reason: format!("{dt_exact} must be > 0") });
    }
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: rho0.dim() });
    }
    let output_every = output_every.max(1);
    let steps = (t_max / dt_exact).round() as usize;
    let mut rho = rho0.matrix().clone();
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    for k in 0..steps {
        let t = k as f64 * dt_exact;
        let half = dt_exact * 0.5;
        let at0 = model.at(t)?;
        let at_mid = model.at(t + half)?;
        let at1 = model.at(t + dt_exact)?;
        let k1 = at0.generator(&rho)?;
        let k2 = at_mid.generator(&(&rho + &k1 * c(half)))?;
        let k3 = at_mid.generator(&(&rho + &k2 * c(half)))?;
        let k4 = at1.generator(&(&rho + &k3 * c(dt_exact)))?;
        let next = &rho + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt_exact / 6.0);
        let next = hermitize(&next);
        let tr = trace(&next).re;
        let t_next = (k + 1) as f64 * dt_exact;
        if (tr - 1.0).abs() > MAX_TRACE_DRIFT || !tr.is_finite() {
            return Err(Error::Unstable { t: t_next, drift: tr - 1.0 });
        }
        // The generator preserves the trace exactly, so an unstable step
        // shows up as entries leaving the unit disc instead.
        let largest = max_abs(&next);
        if largest > 1.0 + MAX_TRACE_DRIFT || !largest.is_finite() {
            return Err(Error::Unstable { t: t_next, drift: largest - 1.0 });
        }
        rho = next / c(tr);
        if (k + 1) % output_every == 0 || k + 1 == steps {
            times.push(t_next);
            states.push(DensityMatrix::from_hermitian_unchecked(rho.clone()));
        }
    }
    Ok(ExactSolution { times, states })
}

/// Closed-form solution of the μ-parametrized Pauli channel.
///
/// The Bloch components decay as v_i(t) = exp(−∫₀ᵗ(γ_j + γ_k)) v_i(0), and
/// γ_j + γ_k = −2μ_i integrates to v_i(t) = (x_i + (1 − x_i)e^{−2t}) v_i(0).
pub fn pauli_exact(x: [f64; 3], rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let x = PauliWeights::new(x)?.get();
    if rho0.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: rho0.dim() });
    }
    let decay = (-2.0 * t).exp();
    let mut rho = CMatrix::identity(2, 2) * c(0.5);
    for i in 0..3 {
        let s = pauli(i + 1);
        let v0 = trace(&(&s * rho0.matrix())).re;
        let v = (x[i] + (1.0 - x[i]) * decay) * v0;
        rho += s * c(0.5 * v);
    }
    Ok(DensityMatrix::from_hermitian_unchecked(rho))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbePoint {
    pub t: f64,
    /// Smallest eigenvalue of W_ψ(t) over the sampled states.
    pub min_eigenvalue: f64,
    /// The threshold the minimum was compared against (negated).
    pub threshold: f64,
    /// No sampled state certified a violation at this time.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub points: Vec<ProbePoint>,
}

impl ProbeReport {
    pub fn all_consistent(&self) -> bool {
        self.points.iter().all(|p| p.consistent)
    }
}

/// Samples `n_states` Haar-random states at every time of `t_grid` and
/// reports the minimum eigenvalue of W_ψ(t).
///
/// A negative minimum certifies that P-divisibility is broken at t; a
/// non-negative one is only evidence. State samples for time index k use
/// their own stream, so results do not depend on scheduling, and the first m
/// states for a larger `n_states` are the same as for `n_states = m`.
pub fn p_divisibility_probe(
    model: &MasterEquationModel,
    t_grid: &[f64],
    n_states: usize,
    seed: u64,
) -> Result<ProbeReport> {
    let points = t_grid
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let at = model.at(t)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut min_eigenvalue = f64::INFINITY;
            let mut scale: f64 = 0.0;
            for _ in 0..n_states {
                let psi = haar_state(model.dim(), &mut rng);
                let w = at.rate_operator(&psi)?;
                let values = crate::linalg::hermitian_eigenvalues(&w);
                scale = scale.max(default_zero_threshold(&values));
                let split = spectral_split(&w, Some(0.0))?;
                min_eigenvalue = min_eigenvalue.min(split.min_eigenvalue());
            }
            if n_states == 0 {
                min_eigenvalue = 0.0;
            }
            Ok(ProbePoint { t, min_eigenvalue, threshold: scale, consistent: min_eigenvalue >= -scale })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbeReport { points })
}
