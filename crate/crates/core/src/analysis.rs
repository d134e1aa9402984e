//! Ensemble statistics, observables and distances.

use std::fmt;
use std::str::FromStr;

use crate::engines::{Ensemble, MeasurementRecord, RunConfig};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigenvalues, CMatrix, DensityMatrix, PureState};

/// ϱ = Σ_k (N_k/N)|ψ_k⟩⟨ψ_k|
pub fn ensemble_average(ensemble: &Ensemble) -> Result<DensityMatrix> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = ensemble.dim();
    let total = ensemble.total() as f64;
    let mut rho = CMatrix::zeros(n, n);
    for class in ensemble.classes() {
        rho += class.state.projector() * c(class.count as f64 / total);
    }
    Ok(DensityMatrix::from_hermitian_unchecked(rho))
}

/// Sample mean and standard error s/√N, with s the unbiased sample deviation.
pub fn observable_mean_stderr(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

/// Standard error of the mean from running sums Σx and Σx² over `n` samples.
pub(crate) fn stderr_from_sums(sum: f64, sum_sq: f64, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (var / nf).sqrt()
}

/// ½‖a − b‖₁
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let diff = a.matrix() - b.matrix();
    Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>())
}

/// A real function of ρ that is linear in ρ: a population or the real or
/// imaginary part of a coherence ρ_ij.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    Population(usize),
    Re(usize, usize),
    Im(usize, usize),
}

impl Observable {
    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Largest basis index used.
    pub fn max_index(&self) -> usize {
        match *self {
            Observable::Population(i) => i,
            Observable::Re(i, j) | Observable::Im(i, j) => i.max(j),
        }
    }

    pub fn of_state(&self, psi: &PureState) -> f64 {
        let a = psi.amplitudes();
        match *self {
            Observable::Population(i) => a[i].norm_sqr(),
            Observable::Re(i, j) => (a[i] * a[j].conj()).re,
            Observable::Im(i, j) => (a[i] * a[j].conj()).im,
        }
    }

    pub fn of_density(&self, rho: &DensityMatrix) -> f64 {
        match *self {
            Observable::Population(i) => rho.get(i, i).re,
            Observable::Re(i, j) => rho.get(i, j).re,
            Observable::Im(i, j) => rho.get(i, j).im,
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Population(i) => write!(f, "pop_{i}"),
            Observable::Re(i, j) => write!(f, "re_{i}_{j}"),
            Observable::Im(i, j) => write!(f, "im_{i}_{j}"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter {
            name: "observable",
            reason: format!("`{s}` is not pop_<i>, re_<i>_<j> or im_<i>_<j>"),
        };
        let mut parts = s.trim().split('_');
        let kind = parts.next().ok_or_else(bad)?;
        let idx: Vec<usize> = parts.map(|p| p.parse().map_err(|_| bad())).collect::<Result<_>>()?;
        match (kind, idx.as_slice()) {
            ("pop", [i]) => Ok(Observable::Population(*i)),
            ("re", [i, j]) => Ok(Observable::Re(*i, *j)),
            ("im", [i, j]) => Ok(Observable::Im(*i, *j)),
            _ => Err(bad()),
        }
    }
}

/// Maxima over all steps of the general engine's bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub steps: usize,
    /// Largest number of positive eigen-channels of any class at any step.
    pub max_forward_channels: usize,
    /// Largest number of distinct forward jump targets in one step.
    pub max_forward_targets: usize,
    pub max_classes: usize,
    /// Negative eigenvectors that matched more than one class.
    pub ambiguous_matches: usize,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub config: RunConfig,
    pub times: Vec<f64>,
    pub averaged_states: Vec<DensityMatrix>,
    /// `observable_means[t][o]` for `config.observables[o]`.
    pub observable_means: Vec<Vec<f64>>,
    pub observable_stderr: Vec<Vec<f64>>,
    /// Forward jumps per channel index.
    pub jump_histogram: Vec<u64>,
    pub reverse_jumps: u64,
    /// Unmatched reverse weight, Σ_steps Σ_k (N_k/N)|λ⁻|dt, averaged over batches.
    pub leaked_weight: f64,
    /// Same sum over every channel.
    pub total_jump_weight: f64,
    pub diagnostics: Diagnostics,
    /// One record per tracked trajectory.
    pub records: Vec<MeasurementRecord>,
}

impl SimulationResult {
    pub fn forward_jumps(&self) -> u64 {
        self.jump_histogram.iter().sum()
    }

    /// Leaked weight as a fraction of the total jump weight.
    pub fn leak_fraction(&self) -> f64 {
        if self.total_jump_weight > 0.0 {
            self.leaked_weight / self.total_jump_weight
        } else {
            0.0
        }
    }

    pub fn observable_index(&self, obs: Observable) -> Option<usize> {
        self.config.observables.iter().position(|o| *o == obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::TrajectoryClass;
    use crate::linalg::max_abs;
    use crate::oracle::haar_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ens(classes: Vec<(PureState, usize)>) -> Ensemble {
        Ensemble::new(classes.into_iter().map(|(state, count)| TrajectoryClass { state, count }).collect(), 1e-8).unwrap()
    }

    #[test]
    fn averages() {
        let rho = ensemble_average(&ens(vec![(PureState::plus(), 4)])).unwrap();
        assert!(max_abs(&(rho.matrix() - PureState::plus().projector())) < 1e-15);

        let rho = ensemble_average(&ens(vec![(PureState::basis(2, 0), 5), (PureState::basis(2, 1), 5)])).unwrap();
        assert!(max_abs(&(rho.matrix() - DensityMatrix::maximally_mixed(2).matrix())) < 1e-15);

        let rho = ensemble_average(&ens(vec![(PureState::basis(2, 0), 3), (PureState::plus(), 1)])).unwrap();
        let expected = PureState::basis(2, 0).projector() * c(0.75) + PureState::plus().projector() * c(0.25);
        assert!(max_abs(&(rho.matrix() - expected)) < 1e-15);
    }

    #[test]
    fn averaging_commutes_with_merging() {
        let phase = PureState::new(PureState::plus().amplitudes() * num_complex::Complex64::from_polar(1.0, 0.7)).unwrap();
        let split = Ensemble::from_parts_unchecked(vec![
            TrajectoryClass { state: PureState::plus(), count: 2 },
            TrajectoryClass { state: PureState::basis(2, 1), count: 3 },
            TrajectoryClass { state: phase, count: 4 },
        ]);
        let merged = ens(vec![(PureState::plus(), 6), (PureState::basis(2, 1), 3)]);
        let d = ensemble_average(&split).unwrap().matrix() - ensemble_average(&merged).unwrap().matrix();
        assert!(max_abs(&d) < 1e-12);
    }

    #[test]
    fn mean_and_stderr() {
        let (m, s) = observable_mean_stderr(&[0.3; 10]).unwrap();
        assert!((m - 0.3).abs() < 1e-15 && s < 1e-15);

        for n in [100usize, 400] {
            let samples: Vec<f64> = (0..n).map(|k| (k % 2) as f64).collect();
            let (m, s) = observable_mean_stderr(&samples).unwrap();
            assert!((m - 0.5).abs() < 1e-15);
            // Unbiased variance n/(4(n−1)); 0.5/√N up to that factor.
            let expected = 0.5 / (n as f64).sqrt() * (n as f64 / (n - 1) as f64).sqrt();
            assert!((s - expected).abs() < 1e-12);
        }
        let s1 = observable_mean_stderr(&(0..100).map(|k| (k % 2) as f64).collect::<Vec<_>>()).unwrap().1;
        let s4 = observable_mean_stderr(&(0..400).map(|k| (k % 2) as f64).collect::<Vec<_>>()).unwrap().1;
        assert!((s1 / s4 - 2.0).abs() < 0.01);

        assert!(matches!(observable_mean_stderr(&[1.0]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn sums_agree_with_samples() {
        let samples = [0.1, 0.5, -0.2, 0.9, 0.4];
        let (_, s) = observable_mean_stderr(&samples).unwrap();
        let sum: f64 = samples.iter().sum();
        let sq: f64 = samples.iter().map(|x| x * x).sum();
        assert!((stderr_from_sums(sum, sq, 5) - s).abs() < 1e-14);
        assert_eq!(stderr_from_sums(1.0, 1.0, 1), 0.0);
    }

    #[test]
    fn trace_distance_examples() {
        let zero = DensityMatrix::from_pure(&PureState::basis(2, 0));
        let one = DensityMatrix::from_pure(&PureState::basis(2, 1));
        assert!(trace_distance(&zero, &zero).unwrap() < 1e-15);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-14);
        assert!((trace_distance(&zero, &DensityMatrix::maximally_mixed(2)).unwrap() - 0.5).abs() < 1e-14);
        assert!(trace_distance(&zero, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn trace_distance_is_a_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let random = |rng: &mut ChaCha8Rng| {
            let mut m = CMatrix::zeros(3, 3);
            for w in [0.5, 0.3, 0.2] {
                m += haar_state(3, rng).projector() * c(w);
            }
            DensityMatrix::new(m).unwrap()
        };
        for _ in 0..50 {
            let (a, b, d) = (random(&mut rng), random(&mut rng), random(&mut rng));
            let ab = trace_distance(&a, &b).unwrap();
            assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-12);
            assert!(ab <= trace_distance(&a, &d).unwrap() + trace_distance(&d, &b).unwrap() + 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(&ab));
        }
    }

    #[test]
    fn observable_names_round_trip() {
        for obs in [Observable::Population(6), Observable::Re(0, 1), Observable::Im(2, 0)] {
            assert_eq!(obs.name().parse::<Observable>().unwrap(), obs);
        }
        for bad in ["pop", "pop_x", "re_1", "xx_1_2", "im_1_2_3", ""] {
            assert!(bad.parse::<Observable>().is_err(), "{bad}");
        }
    }

    #[test]
    fn observables_on_state_and_density_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = haar_state(3, &mut rng);
        let rho = DensityMatrix::from_pure(&psi);
        for obs in [Observable::Population(1), Observable::Re(0, 2), Observable::Im(2, 1)] {
            assert!((obs.of_state(&psi) - obs.of_density(&rho)).abs() < 1e-15);
        }
        assert!((Observable::Re(0, 1).of_state(&PureState::plus()) - 0.5).abs() < 1e-15);
    }
}
