//! The state-dependent rate operator
//!
//! ```text
//! W_ψ = Σ_α c_α (L_α − ℓ_α)|ψ⟩⟨ψ|(L_α − ℓ_α)†,   ℓ_α = ⟨ψ|L_α|ψ⟩
//! ```
//!
//! its sign-split spectrum, and the nonlinear non-Hermitian Hamiltonian that
//! drives the deterministic part of every trajectory.
//!
//! W_ψ always annihilates ψ. Its positive eigenpairs are the forward jump
//! channels (rate λ, target φ); negative eigenpairs only occur when the
//! dynamics is not P-divisible at that point and are handled by the
//! ensemble-coupled reverse jumps of the general engine.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen, hermiticity_deviation, max_abs, CMatrix, CVector, PureState, I};
use crate::model::{MasterEquationModel, ModelAt};

/// Relative threshold below which an eigenvalue of W is treated as zero.
pub const ZERO_THRESHOLD_REL: f64 = 1e-12;

/// Largest accepted deviation from 1 of the un-normalized Euler step.
const STEP_NORM_BAND: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub lambda: f64,
    pub vector: PureState,
}

/// Nonzero spectrum of a rate operator split by sign. Both lists are sorted
/// by descending eigenvalue; together the vectors are orthonormal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateOperatorSpectrum {
    pub positive: Vec<Eigenpair>,
    pub negative: Vec<Eigenpair>,
}

impl RateOperatorSpectrum {
    /// Σ λ_j |φ_j⟩⟨φ_j| over both lists.
    pub fn reconstruct(&self, n: usize) -> CMatrix {
        let mut w = CMatrix::zeros(n, n);
        for pair in self.positive.iter().chain(&self.negative) {
            w += pair.vector.projector() * c(pair.lambda);
        }
        w
    }

    /// Σ_j λ_j over the positive part: the total forward jump rate.
    pub fn forward_rate(&self) -> f64 {
        self.positive.iter().map(|p| p.lambda).sum()
    }

    /// Σ_j |λ_j| over the negative part.
    pub fn reverse_rate(&self) -> f64 {
        self.negative.iter().map(|p| -p.lambda).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.negative.last().map_or(0.0, |p| p.lambda)
    }

    /// Forward channels V = √λ |φ⟩⟨ψ|, one per positive eigenpair.
    pub fn channels(&self) -> Vec<JumpChannel> {
        self.positive.iter().map(|p| JumpChannel { lambda: p.lambda, target: p.vector.clone() }).collect()
    }
}

/// A forward jump ψ → φ with rate λ, standing for V = √λ |φ⟩⟨ψ|.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub lambda: f64,
    pub target: PureState,
}

/// ⟨ψ|L|ψ⟩
pub fn lindblad_expectation(l: &CMatrix, psi: &PureState) -> Result<Complex64> {
    psi.check_dim(l.nrows())?;
    if !l.is_square() {
        return Err(Error::DimensionMismatch { expected: l.nrows(), got: l.ncols() });
    }
    Ok(psi.expectation(l))
}

fn check_state(at: &ModelAt, psi: &PureState) -> Result<()> {
    psi.check_dim(at.dim())?;
    let norm = psi.amplitudes().norm();
    if (norm - 1.0).abs() > crate::linalg::NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

impl ModelAt {
    /// W_ψ at this time. Exactly Hermitian by construction.
    pub fn rate_operator(&self, psi: &PureState) -> Result<CMatrix> {
        check_state(self, psi)?;
        let n = self.dim();
        let v = psi.amplitudes();
        let mut w = CMatrix::zeros(n, n);
        for term in &self.terms {
            if term.rate == 0.0 {
                continue;
            }
            let lv = &term.op * v;
            let ell = v.dotc(&lv);
            let d: CVector = lv - v * ell;
            w.gerc(c(term.rate), &d, &d, Complex64::new(1.0, 0.0));
        }
        Ok(w)
    }

    /// H_ψ = H − (i/2) Σ_α c_α (L_α†L_α − 2ℓ_α* L_α + |ℓ_α|²).
    pub fn effective_hamiltonian(&self, psi: &PureState) -> Result<CMatrix> {
        check_state(self, psi)?;
        let n = self.dim();
        let v = psi.amplitudes();
        let mut dissipative = CMatrix::zeros(n, n);
        for term in &self.terms {
            if term.rate == 0.0 {
                continue;
            }
            let ell = v.dotc(&(&term.op * v));
            let r = c(term.rate);
            dissipative += &term.op_dag_op * r;
            dissipative -= &term.op * (ell.conj() * c(2.0) * r);
            for k in 0..n {
                dissipative[(k, k)] += r * ell.norm_sqr();
            }
        }
        Ok(&self.hamiltonian - dissipative * (I * 0.5))
    }
}

/// W_ψ(t) for `model`.
pub fn build_rate_operator(model: &MasterEquationModel, t: f64, psi: &PureState) -> Result<CMatrix> {
    model.at(t)?.rate_operator(psi)
}

/// H_ψ(t) for `model`.
pub fn effective_hamiltonian(model: &MasterEquationModel, t: f64, psi: &PureState) -> Result<CMatrix> {
    model.at(t)?.effective_hamiltonian(psi)
}

/// The default zero threshold, 1e-12·(1 + max |λ|).
pub fn default_zero_threshold(eigenvalues: &[f64]) -> f64 {
    let largest = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    ZERO_THRESHOLD_REL * (1.0 + largest)
}

/// Hermitian eigendecomposition of `w` split by sign. Eigenvalues with
/// |λ| ≤ threshold are dropped; `None` selects [`default_zero_threshold`].
pub fn spectral_split(w: &CMatrix, zero_threshold: Option<f64>) -> Result<RateOperatorSpectrum> {
    if !w.is_square() {
        return Err(Error::DimensionMismatch { expected: w.nrows(), got: w.ncols() });
    }
    let dev = hermiticity_deviation(w);
    if dev > 1e-9 * max_abs(w).max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let (values, vectors) = hermitian_eigen(w);
    let threshold = zero_threshold.unwrap_or_else(|| default_zero_threshold(&values));
    let mut spectrum = RateOperatorSpectrum::default();
    for (j, &lambda) in values.iter().enumerate() {
        if lambda.abs() <= threshold {
            continue;
        }
        let pair = Eigenpair { lambda, vector: PureState::from_normalized_unchecked(vectors.column(j).into_owned()) };
        if lambda > 0.0 {
            spectrum.positive.push(pair);
        } else {
            spectrum.negative.push(pair);
        }
    }
    Ok(spectrum)
}

/// (1 − i H_ψ dt)|ψ⟩ before normalization.
pub fn unnormalized_step(psi: &PureState, h_psi: &CMatrix, dt: f64) -> CVector {
    let v = psi.amplitudes();
    v - (h_psi * v) * (I * dt)
}

/// One normalized first-order Euler step of the no-jump evolution.
pub fn deterministic_step(psi: &PureState, h_psi: &CMatrix, dt: f64) -> Result<PureState> {
    psi.check_dim(h_psi.nrows())?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter { name: "dt", reason: format!("{dt} must be > 0") });
    }
    let phi = unnormalized_step(psi, h_psi, dt);
    let norm = phi.norm();
    if !(norm > STEP_NORM_BAND.0 && norm < STEP_NORM_BAND.1) {
        return Err(Error::NormCollapse { norm });
    }
    Ok(PureState::from_normalized_unchecked(phi / c(norm)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli, ONE};
    use crate::model::{
        build_amplitude_damping, build_dephasing, build_network_model, build_pauli_model,
        build_pauli_model_with_rates, network_rate, pauli_rates, sample_couplings, TimeRate,
    };
    use crate::oracle::haar_state;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn builtin_models() -> Vec<MasterEquationModel> {
        vec![
            build_pauli_model([0.5, 0.5, 0.0]).unwrap(),
            build_pauli_model([0.1, 0.3, 0.6]).unwrap(),
            build_network_model(7, &sample_couplings(7, 0.6, 1), TimeRate::varying(network_rate)).unwrap(),
            build_amplitude_damping(0.8).unwrap(),
            build_dephasing(TimeRate::varying(|t| (2.0 * t).cos())),
        ]
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(lindblad_expectation(&pauli(3), &PureState::basis(2, 0)).unwrap(), ONE);
        assert!((lindblad_expectation(&pauli(1), &PureState::plus()).unwrap() - ONE).norm() < 1e-15);
        assert!(lindblad_expectation(&pauli(2), &PureState::plus()).unwrap().norm() < 1e-15);
        assert!(lindblad_expectation(&pauli(2), &PureState::basis(3, 0)).is_err());
    }

    #[test]
    fn eternal_model_rate_operator_at_plus() {
        // Stored rates are γ_k/2, so W_+ = ½(γ₂ + γ₃)|−⟩⟨−| = ½(1 − tanh t)|−⟩⟨−|.
        let model = build_pauli_model([0.5, 0.5, 0.0]).unwrap();
        for t in [0.0, 0.5, 1.0, 3.0] {
            let w = build_rate_operator(&model, t, &PureState::plus()).unwrap();
            let expected = PureState::minus().projector() * c(0.5 * (1.0 - t.tanh()));
            assert!(max_abs(&(w - expected)) < 1e-14, "t = {t}");
        }
        let w = build_rate_operator(&model, 0.0, &PureState::basis(2, 0)).unwrap();
        // ½(γ₁ + γ₂)|1⟩⟨1| with γ₁ = γ₂ = 1.
        assert!(max_abs(&(w - PureState::basis(2, 1).projector())) < 1e-14);
    }

    #[test]
    fn zero_rates_zero_operator() {
        let model = build_pauli_model_with_rates(|_| [0.0; 3]);
        let w = build_rate_operator(&model, 1.0, &PureState::plus()).unwrap();
        assert_eq!(max_abs(&w), 0.0);
        let spectrum = spectral_split(&w, None).unwrap();
        assert!(spectrum.positive.is_empty() && spectrum.negative.is_empty());
        let h = effective_hamiltonian(&model, 1.0, &PureState::plus()).unwrap();
        assert_eq!(max_abs(&h), 0.0);
    }

    #[test]
    fn rejects_unnormalized_state() {
        let model = build_amplitude_damping(1.0).unwrap();
        let bad = PureState::from_normalized_unchecked(CVector::from_column_slice(&[ONE, ONE]));
        assert!(matches!(build_rate_operator(&model, 0.0, &bad), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn rank_one_split() {
        let lambda = 0.5 * (1.0 - 1f64.tanh());
        let w = PureState::minus().projector() * c(lambda);
        let s = spectral_split(&w, None).unwrap();
        assert!(s.negative.is_empty());
        assert_eq!(s.positive.len(), 1);
        assert!((s.positive[0].lambda - lambda).abs() < 1e-15);
        assert!((s.positive[0].vector.overlap(&PureState::minus()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn negative_dephasing_eigenpair() {
        let gamma = -0.4;
        let model = build_dephasing(TimeRate::Constant(gamma));
        let (a, b) = (0.8f64, 0.6f64);
        let psi = PureState::from_slice(&[c(a), Complex64::new(0.0, b)]).unwrap();
        let w = build_rate_operator(&model, 0.0, &psi).unwrap();
        let s = spectral_split(&w, None).unwrap();
        assert!(s.positive.is_empty());
        assert_eq!(s.negative.len(), 1);
        assert!((s.negative[0].lambda - gamma * 4.0 * a * a * b * b).abs() < 1e-14);
        let ell = psi.expectation(&pauli(3));
        let expected = PureState::normalized(&pauli(3) * psi.amplitudes() - psi.amplitudes() * ell).unwrap();
        assert!((s.negative[0].vector.overlap(&expected) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_rejects_non_hermitian() {
        let m = crate::linalg::ket_bra(2, 0, 1);
        assert!(matches!(spectral_split(&m, None), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn split_orders_and_drops_zero_modes() {
        let d = CMatrix::from_diagonal(&CVector::from_column_slice(&[c(-0.3), c(2.0), c(1e-15), c(-1.0), c(0.5)]));
        let s = spectral_split(&d, None).unwrap();
        let pos: Vec<f64> = s.positive.iter().map(|p| p.lambda).collect();
        let neg: Vec<f64> = s.negative.iter().map(|p| p.lambda).collect();
        assert_eq!(pos, vec![2.0, 0.5]);
        assert_eq!(neg, vec![-0.3, -1.0]);
        assert_eq!(s.min_eigenvalue(), -1.0);
    }

    #[test]
    fn dephasing_effective_hamiltonian() {
        let gamma = 0.9;
        let model = build_dephasing(TimeRate::Constant(gamma));
        let h = effective_hamiltonian(&model, 0.0, &PureState::plus()).unwrap();
        let expected = CMatrix::identity(2, 2) * (I * (-0.5 * gamma));
        assert!(max_abs(&(&h - expected)) < 1e-15);
        let zero = PureState::basis(2, 0);
        let h0 = effective_hamiltonian(&model, 0.0, &zero).unwrap();
        assert!((&h0 * zero.amplitudes()).norm() < 1e-15);

        for (psi, h) in [(PureState::plus(), h), (zero, h0)] {
            let next = deterministic_step(&psi, &h, 0.01).unwrap();
            assert!((next.overlap(&psi) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rate_hamiltonian_is_system_hamiltonian() {
        let n = 4;
        let omega = sample_couplings(n, 0.6, 2);
        let model = build_network_model(n, &omega, TimeRate::Constant(0.0)).unwrap();
        let psi = PureState::basis(n, 1);
        let h = effective_hamiltonian(&model, 0.0, &psi).unwrap();
        assert!(max_abs(&(&h - omega.map(c))) < 1e-15);
        // Unitary Euler step, renormalized.
        let dt = 1e-3;
        let next = deterministic_step(&psi, &h, dt).unwrap();
        let raw = psi.amplitudes() - (&h * psi.amplitudes()) * (I * dt);
        assert!((next.amplitudes() - &raw / c(raw.norm())).norm() < 1e-15);
    }

    #[test]
    fn step_errors() {
        let h = CMatrix::identity(2, 2) * (I * -300.0);
        assert!(matches!(deterministic_step(&PureState::plus(), &h, 0.01), Err(Error::NormCollapse { .. })));
        assert!(deterministic_step(&PureState::plus(), &h, 0.0).is_err());
    }

    #[test]
    fn zero_mode_and_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in builtin_models() {
            for _ in 0..100 {
                let t = rng.random::<f64>() * 6.0;
                let psi = haar_state(model.dim(), &mut rng);
                let w = build_rate_operator(&model, t, &psi).unwrap();
                assert!(hermiticity_deviation(&w) < 1e-10);
                let wpsi = (&w * psi.amplitudes()).norm();
                assert!(wpsi <= 1e-9 * max_abs(&w), "‖Wψ‖ = {wpsi:e}");
                assert!(psi.expectation(&w).norm() < 1e-10);
                let s = spectral_split(&w, None).unwrap();
                assert!(max_abs(&(s.reconstruct(model.dim()) - &w)) <= 1e-9);
                assert!(s.positive.len() + s.negative.len() < model.dim());
            }
        }
    }

    #[test]
    fn p_divisibility_equivalence_on_pauli_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            // Arbitrary constant rates exercise both sides of the equivalence;
            // the μ-parametrized family is always on the P-divisible side.
            let g: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() * 2.0 - 1.0);
            let model = build_pauli_model_with_rates(move |_| g);
            let min_pair = (g[0] + g[1]).min(g[0] + g[2]).min(g[1] + g[2]);
            // The minimum over states sits on the σ axis of the largest rate.
            let kmax = (0..3).max_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap();
            let (_, vecs) = hermitian_eigen(&pauli(kmax + 1));
            let mut min_eig = f64::INFINITY;
            let mut states: Vec<PureState> = (0..2).map(|j| PureState::new(vecs.column(j).into_owned()).unwrap()).collect();
            states.push(haar_state(2, &mut rng));
            for psi in &states {
                let w = build_rate_operator(&model, 0.0, psi).unwrap();
                let s = spectral_split(&w, None).unwrap();
                min_eig = min_eig.min(s.min_eigenvalue());
            }
            assert_eq!(min_eig >= -1e-9, min_pair >= -1e-9, "γ = {g:?}");
            assert!((min_eig - 0.5 * min_pair.min(0.0)).abs() < 1e-12);

            let x0 = rng.random::<f64>();
            let x1 = rng.random::<f64>() * (1.0 - x0);
            let x = [x0, x1, 1.0 - x0 - x1];
            let t = rng.random::<f64>() * 5.0;
            let model = build_pauli_model(x).unwrap();
            let psi = haar_state(2, &mut rng);
            let s = spectral_split(&build_rate_operator(&model, t, &psi).unwrap(), None).unwrap();
            let g = pauli_rates(x, t).unwrap();
            let min_pair = (g[0] + g[1]).min(g[0] + g[2]).min(g[1] + g[2]);
            assert_eq!(s.min_eigenvalue() >= -1e-9, min_pair >= -1e-9);
        }
    }

    #[test]
    fn no_jump_norm_identity_is_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for model in builtin_models() {
            for _ in 0..20 {
                let t = rng.random::<f64>() * 4.0;
                let psi = haar_state(model.dim(), &mut rng);
                let at = model.at(t).unwrap();
                let w = at.rate_operator(&psi).unwrap();
                let total_rate = crate::linalg::trace(&w).re;
                let h = at.effective_hamiltonian(&psi).unwrap();
                let defect = |dt: f64| ((1.0 - total_rate * dt) - unnormalized_step(&psi, &h, dt).norm_squared()).abs();
                let (d1, d2) = (defect(1e-3), defect(5e-4));
                if d1 < 1e-14 {
                    continue;
                }
                let ratio = d1 / d2;
                assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
            }
        }
    }
}
