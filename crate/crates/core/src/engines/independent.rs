//! Single-trajectory steps for the engines whose trajectories evolve
//! independently: the MCWF baseline and ROQJ for P-divisible dynamics.
//!
//! Both draw one uniform per step, partitioned into one interval per jump
//! channel followed by the no-jump remainder, so at most one jump happens per
//! step.

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, PureState, I};
use crate::model::ModelAt;
use crate::rate_operator::{deterministic_step, spectral_split, RateOperatorSpectrum};

/// Outcome of one step of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: PureState,
    /// Channel index of the jump taken in this step, if any.
    pub jump: Option<usize>,
}

fn step_error(t: f64, err: Error) -> Error {
    match err {
        Error::NormCollapse { norm } => Error::StepSize { t, reason: format!("no-jump norm {norm}") },
        other => other,
    }
}

fn check_total(t: f64, total: f64, max_probability: f64) -> Result<()> {
    if total > max_probability {
        return Err(Error::StepSize {
            t,
            reason: format!("total jump probability {total:.4} exceeds {max_probability}"),
        });
    }
    Ok(())
}

/// Index j of the interval of `u` in the partition [p₀, p₀ + p₁, …).
fn pick(u: f64, probabilities: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut acc = 0.0;
    for (j, p) in probabilities.into_iter().enumerate() {
        acc += p;
        if u < acc {
            return Some(j);
        }
    }
    None
}

/// Spectrum of W_ψ, rejecting negative eigenvalues beyond the zero threshold.
pub fn p_divisible_spectrum(at: &ModelAt, psi: &PureState) -> Result<RateOperatorSpectrum> {
    let w = at.rate_operator(psi)?;
    let spectrum = spectral_split(&w, None)?;
    if let Some(worst) = spectrum.negative.last() {
        return Err(Error::PDivisibilityViolation { t: at.t, eigenvalue: worst.lambda });
    }
    Ok(spectrum)
}

/// One ROQJ step for P-divisible dynamics.
///
/// With probability λ_j dt the state jumps to the eigenvector φ_j of W_ψ;
/// otherwise it follows the normalized Euler step with H_ψ.
pub fn roqj_step_p(psi: &PureState, at: &ModelAt, dt: f64, u: f64, max_probability: f64) -> Result<StepResult> {
    let spectrum = p_divisible_spectrum(at, psi)?;
    check_total(at.t, spectrum.forward_rate() * dt, max_probability)?;
    if let Some(j) = pick(u, spectrum.positive.iter().map(|p| p.lambda * dt)) {
        return Ok(StepResult { state: spectrum.positive[j].vector.clone(), jump: Some(j) });
    }
    let h = at.effective_hamiltonian(psi)?;
    let state = deterministic_step(psi, &h, dt).map_err(|e| step_error(at.t, e))?;
    Ok(StepResult { state, jump: None })
}

/// H − (i/2) Σ_α c_α L_α†L_α
pub fn mcwf_hamiltonian(at: &ModelAt) -> CMatrix {
    let mut decay = CMatrix::zeros(at.dim(), at.dim());
    for term in &at.terms {
        decay += &term.op_dag_op * c(term.rate);
    }
    &at.hamiltonian - decay * (I * 0.5)
}

/// One Monte Carlo wave function step: channel α fires with probability
/// c_α‖L_αψ‖²dt and sends ψ to L_αψ/‖L_αψ‖. Requires every c_α(t) ≥ 0.
pub fn mcwf_step(psi: &PureState, at: &ModelAt, dt: f64, u: f64, max_probability: f64) -> Result<StepResult> {
    psi.check_dim(at.dim())?;
    if let Some((term, t)) = at.terms.iter().enumerate().find(|(_, t)| t.rate < 0.0) {
        return Err(Error::NegativeRate { t: at.t, term, rate: t.rate });
    }
    let jumped: Vec<_> = at.terms.iter().map(|t| &t.op * psi.amplitudes()).collect();
    let probabilities: Vec<f64> = at.terms.iter().zip(&jumped).map(|(t, v)| t.rate * v.norm_squared() * dt).collect();
    check_total(at.t, probabilities.iter().sum(), max_probability)?;
    if let Some(alpha) = pick(u, probabilities.iter().copied()) {
        let state = PureState::normalized(jumped[alpha].clone())?;
        return Ok(StepResult { state, jump: Some(alpha) });
    }
    let h = mcwf_hamiltonian(at);
    let state = deterministic_step(psi, &h, dt).map_err(|e| step_error(at.t, e))?;
    Ok(StepResult { state, jump: None })
}

/// Exact average of one ROQJ step from ψ:
/// (1 − Σ_j λ_j dt)|ψ'⟩⟨ψ'| + Σ_j λ_j dt |φ_j⟩⟨φ_j|, with ψ' the no-jump state.
pub fn expected_one_step(psi: &PureState, at: &ModelAt, dt: f64) -> Result<CMatrix> {
    let spectrum = p_divisible_spectrum(at, psi)?;
    let h = at.effective_hamiltonian(psi)?;
    let next = deterministic_step(psi, &h, dt).map_err(|e| step_error(at.t, e))?;
    let mut out = next.projector() * c(1.0 - spectrum.forward_rate() * dt);
    for pair in &spectrum.positive {
        out += pair.vector.projector() * c(pair.lambda * dt);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, trace_norm};
    use crate::model::{
        build_amplitude_damping, build_dephasing, build_pauli_model, build_pauli_model_with_rates, TimeRate,
    };

    #[test]
    fn eternal_model_single_channel_from_plus() {
        let model = build_pauli_model([0.5, 0.5, 0.0]).unwrap();
        let t = 0.8;
        let at = model.at(t).unwrap();
        let dt = 0.01;
        let p = 0.5 * (1.0 - t.tanh()) * dt;
        let jumped = roqj_step_p(&PureState::plus(), &at, dt, p * 0.999, 0.5).unwrap();
        assert_eq!(jumped.jump, Some(0));
        assert!((jumped.state.overlap(&PureState::minus()) - 1.0).abs() < 1e-14);
        let stayed = roqj_step_p(&PureState::plus(), &at, dt, p * 1.001, 0.5).unwrap();
        assert_eq!(stayed.jump, None);
        assert!((stayed.state.overlap(&PureState::plus()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn no_rates_no_jumps() {
        let model = build_pauli_model_with_rates(|_| [0.0; 3]);
        let at = model.at(0.0).unwrap();
        for u in [0.0, 0.3, 0.999] {
            assert_eq!(roqj_step_p(&PureState::plus(), &at, 0.1, u, 0.5).unwrap().jump, None);
            assert_eq!(mcwf_step(&PureState::plus(), &at, 0.1, u, 0.5).unwrap().jump, None);
        }
    }

    #[test]
    fn p_step_rejects_negative_eigenvalue() {
        let model = build_dephasing(TimeRate::Constant(-0.5));
        let at = model.at(0.25).unwrap();
        let err = roqj_step_p(&PureState::plus(), &at, 0.01, 0.5, 0.5).unwrap_err();
        assert!(matches!(err, Error::PDivisibilityViolation { t, .. } if t == 0.25));
    }

    #[test]
    fn step_size_is_checked() {
        let model = build_amplitude_damping(1.0).unwrap();
        let at = model.at(0.0).unwrap();
        let excited = PureState::basis(2, 1);
        assert!(matches!(roqj_step_p(&excited, &at, 0.6, 0.9, 0.5), Err(Error::StepSize { .. })));
        assert!(matches!(mcwf_step(&excited, &at, 0.6, 0.9, 0.5), Err(Error::StepSize { .. })));
    }

    #[test]
    fn mcwf_amplitude_damping() {
        let model = build_amplitude_damping(1.5).unwrap();
        let at = model.at(0.0).unwrap();
        let dt = 0.01;
        let excited = PureState::basis(2, 1);
        let jump = mcwf_step(&excited, &at, dt, 1.5 * dt * 0.99, 0.5).unwrap();
        assert_eq!(jump.jump, Some(0));
        assert!((jump.state.overlap(&PureState::basis(2, 0)) - 1.0).abs() < 1e-15);
        assert_eq!(mcwf_step(&excited, &at, dt, 1.5 * dt * 1.01, 0.5).unwrap().jump, None);
        let ground = PureState::basis(2, 0);
        let r = mcwf_step(&ground, &at, dt, 0.0, 0.5).unwrap();
        assert_eq!(r.jump, None);
        assert_eq!(r.state, ground);
    }

    #[test]
    fn mcwf_rejects_negative_rate() {
        let model = build_dephasing(TimeRate::Constant(-0.1));
        let at = model.at(1.0).unwrap();
        assert!(matches!(mcwf_step(&PureState::plus(), &at, 0.01, 0.5, 0.5), Err(Error::NegativeRate { term: 0, .. })));
    }

    #[test]
    fn expected_step_examples() {
        let dt = 1e-3;
        let model = build_pauli_model_with_rates(|_| [0.0; 3]);
        let at = model.at(0.0).unwrap();
        let psi = PureState::plus();
        let out = expected_one_step(&psi, &at, dt).unwrap();
        assert!(max_abs(&(out - psi.projector())) < 1e-15);

        // At t = 0 the eternal model has a single channel |+⟩ → |−⟩ with λ = ½.
        let model = build_pauli_model([0.5, 0.5, 0.0]).unwrap();
        let at = model.at(0.0).unwrap();
        let out = expected_one_step(&psi, &at, dt).unwrap();
        let expected = psi.projector() * c(1.0 - 0.5 * dt) + PureState::minus().projector() * c(0.5 * dt);
        assert!(trace_norm(&(out - expected)) < 1e-15);
    }
}
