//! Trajectory engines and the run loop.
//!
//! * [`EngineKind::Mcwf`]: Monte Carlo wave function baseline, needs c_α(t) ≥ 0.
//! * [`EngineKind::RoqjP`]: rate operator jumps, needs W_ψ ⪰ 0.
//! * [`EngineKind::RoqjGeneral`]: rate operator jumps with reverse jumps between
//!   ensemble members, works for any rates.

pub mod ensemble;
pub mod general;
pub mod independent;
pub mod record;
pub mod rng;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use ensemble::{match_class, Ensemble, TrajectoryClass};
pub use general::{class_channels, expected_ensemble_update, roqj_step_general, GeneralParams, GeneralStep};
pub use independent::{expected_one_step, mcwf_step, roqj_step_p, StepResult};
pub use record::{EventKind, JumpEvent, MeasurementRecord};
pub use rng::CounterRng;

use crate::analysis::{stderr_from_sums, Diagnostics, Observable, SimulationResult};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, DensityMatrix, PureState};
use crate::model::MasterEquationModel;

/// Trajectories per work unit of the independent engines.
const CHUNK: usize = 64;

/// Eigenweights of a mixed initial state below this are dropped.
const MIXTURE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Mcwf,
    RoqjP,
    RoqjGeneral,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Mcwf => "mcwf",
            EngineKind::RoqjP => "roqj_p",
            EngineKind::RoqjGeneral => "roqj_general",
        })
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mcwf" => Ok(EngineKind::Mcwf),
            "roqj_p" => Ok(EngineKind::RoqjP),
            "roqj_general" => Ok(EngineKind::RoqjGeneral),
            other => Err(Error::InvalidParameter {
                name: "engine",
                reason: format!("`{other}` is not one of mcwf, roqj_p, roqj_general"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dt: f64,
    pub t_max: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub engine: EngineKind,
    /// Output times; each must be a multiple of `dt` in [0, t_max].
    pub sample_times: Vec<f64>,
    pub observables: Vec<Observable>,
    /// Independent sub-ensembles of the general engine, used for error bars.
    pub batches: usize,
    pub match_tol: f64,
    /// Leak fraction above which a warning is logged.
    pub leak_budget: f64,
    pub max_jump_probability: f64,
    /// Number of trajectories whose measurement record is kept.
    pub record_trajectories: usize,
}

impl RunConfig {
    pub fn new(engine: EngineKind, dt: f64, t_max: f64, n_traj: usize, seed: u64) -> Self {
        RunConfig {
            dt,
            t_max,
            n_traj,
            seed,
            engine,
            sample_times: Vec::new(),
            observables: Vec::new(),
            batches: 10,
            match_tol: 1e-8,
            leak_budget: 0.01,
            max_jump_probability: 0.5,
            record_trajectories: 0,
        }
    }

    /// Sample every `every` steps, plus the final step.
    pub fn sample_every(mut self, every: usize) -> Self {
        let steps = self.n_steps();
        let every = every.max(1);
        self.sample_times = (0..=steps).filter(|s| s % every == 0 || *s == steps).map(|s| s as f64 * self.dt).collect();
        self
    }

    pub fn with_observables(mut self, observables: Vec<Observable>) -> Self {
        self.observables = observables;
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Checks the configuration and returns the step index of every sample time.
    pub fn validate(&self, dim: usize) -> Result<Vec<usize>> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Self::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return Err(Self::invalid("t_max", format!("must be at least dt = {}, got {}", self.dt, self.t_max)));
        }
        if self.n_traj == 0 {
            return Err(Self::invalid("n_traj", "must be at least 1"));
        }
        if self.engine == EngineKind::RoqjGeneral && (self.batches == 0 || self.batches > self.n_traj) {
            return Err(Self::invalid("batches", format!("must be in 1..={}, got {}", self.n_traj, self.batches)));
        }
        if self.n_traj.div_ceil(self.batches.max(1)) >= 1 << rng::MEMBER_BITS {
            return Err(Self::invalid("n_traj", "too many members per batch"));
        }
        if !(0.0..1.0).contains(&self.match_tol) {
            return Err(Self::invalid("match_tol", format!("must be in [0, 1), got {}", self.match_tol)));
        }
        if !(self.max_jump_probability > 0.0 && self.max_jump_probability <= 1.0) {
            return Err(Self::invalid("max_jump_probability", "must be in (0, 1]"));
        }
        if self.leak_budget.is_nan() || self.leak_budget < 0.0 {
            return Err(Self::invalid("leak_budget", "must be non-negative"));
        }
        if let Some(obs) = self.observables.iter().find(|o| o.max_index() >= dim) {
            return Err(Self::invalid("observables", format!("{obs} needs dimension > {}", obs.max_index())));
        }
        let steps = self.n_steps();
        let mut out = Vec::with_capacity(self.sample_times.len());
        for &t in &self.sample_times {
            let s = (t / self.dt).round();
            if !t.is_finite() || t < 0.0 || (s * self.dt - t).abs() > 1e-9 * t.max(1.0) || s as usize > steps {
                return Err(Self::invalid("sample_times", format!("{t} is not a multiple of dt in [0, t_max]")));
            }
            if out.last().is_some_and(|&prev| prev >= s as usize) {
                return Err(Self::invalid("sample_times", "must be strictly increasing"));
            }
            out.push(s as usize);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub enum InitialState {
    Pure(PureState),
    /// Members are assigned to eigenvectors of ρ(0) with probability equal
    /// to the eigenvalues.
    Mixed(DensityMatrix),
}

impl InitialState {
    pub fn dim(&self) -> usize {
        match self {
            InitialState::Pure(p) => p.dim(),
            InitialState::Mixed(r) => r.dim(),
        }
    }

    pub fn density(&self) -> DensityMatrix {
        match self {
            InitialState::Pure(p) => DensityMatrix::from_pure(p),
            InitialState::Mixed(r) => r.clone(),
        }
    }

    fn components(&self) -> Vec<(f64, PureState)> {
        match self {
            InitialState::Pure(p) => vec![(1.0, p.clone())],
            InitialState::Mixed(r) => r.spectral_mixture(MIXTURE_FLOOR),
        }
    }
}

fn pick_component(components: &[(f64, PureState)], u: f64) -> usize {
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    let mut acc = 0.0;
    for (k, (w, _)) in components.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return k;
        }
    }
    components.len() - 1
}

/// Per-sample sums over a set of members.
#[derive(Debug, Clone)]
struct Accumulator {
    rho: Vec<CMatrix>,
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
    count: usize,
    histogram: Vec<u64>,
    reverse: u64,
    leaked: f64,
    weight: f64,
    diagnostics: Diagnostics,
    records: Vec<MeasurementRecord>,
}

impl Accumulator {
    fn new(samples: usize, n: usize, observables: usize) -> Self {
        Accumulator {
            rho: vec![CMatrix::zeros(n, n); samples],
            sum: vec![vec![0.0; observables]; samples],
            sum_sq: vec![vec![0.0; observables]; samples],
            count: 0,
            histogram: Vec::new(),
            reverse: 0,
            leaked: 0.0,
            weight: 0.0,
            diagnostics: Diagnostics::default(),
            records: Vec::new(),
        }
    }

    fn add_state(&mut self, sample: usize, psi: &PureState, weight: usize, observables: &[Observable]) {
        let w = weight as f64;
        self.rho[sample] += psi.projector() * c(w);
        for (o, obs) in observables.iter().enumerate() {
            let x = obs.of_state(psi);
            self.sum[sample][o] += w * x;
            self.sum_sq[sample][o] += w * x * x;
        }
    }

    fn count_jump(&mut self, channel: usize) {
        if self.histogram.len() <= channel {
            self.histogram.resize(channel + 1, 0);
        }
        self.histogram[channel] += 1;
    }

    fn merge(&mut self, other: Accumulator) {
        for (a, b) in self.rho.iter_mut().zip(other.rho) {
            *a += b;
        }
        for (a, b) in self.sum.iter_mut().flatten().zip(other.sum.into_iter().flatten()) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().flatten().zip(other.sum_sq.into_iter().flatten()) {
            *a += b;
        }
        self.count += other.count;
        if self.histogram.len() < other.histogram.len() {
            self.histogram.resize(other.histogram.len(), 0);
        }
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        self.reverse += other.reverse;
        self.leaked += other.leaked;
        self.weight += other.weight;
        let (d, o) = (&mut self.diagnostics, other.diagnostics);
        d.steps = d.steps.max(o.steps);
        d.max_forward_channels = d.max_forward_channels.max(o.max_forward_channels);
        d.max_forward_targets = d.max_forward_targets.max(o.max_forward_targets);
        d.max_classes = d.max_classes.max(o.max_classes);
        d.ambiguous_matches += o.ambiguous_matches;
        self.records.extend(other.records);
    }
}

/// Simulates `model` from `initial` and returns ensemble averages at
/// `config.sample_times`.
///
/// Results depend only on (model, initial, config), not on the number of
/// rayon workers.
pub fn run(model: &MasterEquationModel, initial: &InitialState, config: &RunConfig) -> Result<SimulationResult> {
    if initial.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: initial.dim() });
    }
    let sample_steps = config.validate(model.dim())?;
    let rng = CounterRng::new(config.seed);
    let components = initial.components();
    let n = model.dim();
    let n_obs = config.observables.len();

    let (acc, batch_means) = match config.engine {
        EngineKind::Mcwf | EngineKind::RoqjP => {
            let chunks: Vec<Accumulator> = (0..config.n_traj.div_ceil(CHUNK))
                .into_par_iter()
                .map(|chunk| run_chunk(model, &components, config, &sample_steps, &rng, chunk))
                .collect::<Result<_>>()?;
            let mut total = Accumulator::new(sample_steps.len(), n, n_obs);
            for part in chunks {
                total.merge(part);
            }
            (total, None)
        }
        EngineKind::RoqjGeneral => {
            let sizes: Vec<usize> = (0..config.batches)
                .map(|b| config.n_traj / config.batches + usize::from(b < config.n_traj % config.batches))
                .collect();
            let parts: Vec<Accumulator> = sizes
                .par_iter()
                .enumerate()
                .map(|(b, &size)| run_batch(model, &components, config, &sample_steps, &rng, b, size))
                .collect::<Result<_>>()?;
            let means: Vec<Vec<Vec<f64>>> = parts
                .iter()
                .map(|p| p.sum.iter().map(|row| row.iter().map(|s| s / p.count as f64).collect()).collect())
                .collect();
            let mut total = Accumulator::new(sample_steps.len(), n, n_obs);
            let batches = parts.len() as f64;
            for part in parts {
                total.merge(part);
            }
            // Leak and jump weights are per-batch ensemble fractions.
            total.leaked /= batches;
            total.weight /= batches;
            (total, Some(means))
        }
    };

    let nf = acc.count as f64;
    let averaged_states = acc.rho.iter().map(|r| DensityMatrix::from_hermitian_unchecked(r / c(nf))).collect();
    let observable_means: Vec<Vec<f64>> = acc.sum.iter().map(|row| row.iter().map(|s| s / nf).collect()).collect();
    let observable_stderr = match &batch_means {
        Some(means) if means.len() >= 2 => (0..sample_steps.len())
            .map(|s| {
                (0..n_obs)
                    .map(|o| {
                        let (sum, sq) = means.iter().fold((0.0, 0.0), |(a, b), m| (a + m[s][o], b + m[s][o] * m[s][o]));
                        stderr_from_sums(sum, sq, means.len())
                    })
                    .collect()
            })
            .collect(),
        _ => acc
            .sum
            .iter()
            .zip(&acc.sum_sq)
            .map(|(sum, sq)| sum.iter().zip(sq).map(|(s, q)| stderr_from_sums(*s, *q, acc.count)).collect())
            .collect(),
    };

    let result = SimulationResult {
        config: config.clone(),
        times: sample_steps.iter().map(|&s| s as f64 * config.dt).collect(),
        averaged_states,
        observable_means,
        observable_stderr,
        jump_histogram: acc.histogram,
        reverse_jumps: acc.reverse,
        leaked_weight: acc.leaked,
        total_jump_weight: acc.weight,
        diagnostics: acc.diagnostics,
        records: acc.records,
    };
    if result.leak_fraction() > config.leak_budget {
        log::warn!(
            "unmatched reverse channels leaked {:.3}% of the jump weight (budget {:.3}%)",
            100.0 * result.leak_fraction(),
            100.0 * config.leak_budget
        );
    }
    Ok(result)
}

fn run_chunk(
    model: &MasterEquationModel,
    components: &[(f64, PureState)],
    config: &RunConfig,
    sample_steps: &[usize],
    rng: &CounterRng,
    chunk: usize,
) -> Result<Accumulator> {
    let ids: Vec<usize> = (chunk * CHUNK..((chunk + 1) * CHUNK).min(config.n_traj)).collect();
    let mut acc = Accumulator::new(sample_steps.len(), model.dim(), config.observables.len());
    acc.count = ids.len();
    let mut states: Vec<PureState> = ids
        .iter()
        .map(|&id| components[pick_component(components, rng.uniform(CounterRng::trajectory_stream(id), 0))].1.clone())
        .collect();
    let tracked = ids.iter().filter(|&&id| id < config.record_trajectories).count();
    let mut records = vec![MeasurementRecord::default(); tracked];

    let mut next_sample = 0;
    let steps = config.n_steps();
    for step in 0..=steps {
        if sample_steps.get(next_sample) == Some(&step) {
            for psi in &states {
                acc.add_state(next_sample, psi, 1, &config.observables);
            }
            for (record, psi) in records.iter_mut().zip(&states) {
                record.samples.push(psi.clone());
            }
            next_sample += 1;
        }
        if step == steps {
            break;
        }
        let t = step as f64 * config.dt;
        let at = model.at(t)?;
        for (k, (&id, psi)) in ids.iter().zip(states.iter_mut()).enumerate() {
            let u = rng.uniform(CounterRng::trajectory_stream(id), step as u64 + 1);
            let out = match config.engine {
                EngineKind::Mcwf => mcwf_step(psi, &at, config.dt, u, config.max_jump_probability)?,
                _ => roqj_step_p(psi, &at, config.dt, u, config.max_jump_probability)?,
            };
            if let Some(channel) = out.jump {
                acc.count_jump(channel);
                if k < tracked {
                    records[k].push(JumpEvent {
                        t,
                        channel,
                        source_class: None,
                        target_class: None,
                        kind: EventKind::Forward,
                    });
                }
            }
            *psi = out.state;
        }
        acc.diagnostics.steps = step + 1;
    }
    acc.records = records;
    Ok(acc)
}

/// Class holding member `pos` when members are laid out class by class.
fn class_of(ensemble: &Ensemble, mut pos: usize) -> usize {
    for (k, class) in ensemble.classes().iter().enumerate() {
        if pos < class.count {
            return k;
        }
        pos -= class.count;
    }
    unreachable!("member index beyond ensemble size")
}

fn run_batch(
    model: &MasterEquationModel,
    components: &[(f64, PureState)],
    config: &RunConfig,
    sample_steps: &[usize],
    rng: &CounterRng,
    batch: usize,
    size: usize,
) -> Result<Accumulator> {
    let mut acc = Accumulator::new(sample_steps.len(), model.dim(), config.observables.len());
    acc.count = size;
    // Initial draws use the stream just past the last class stream.
    let init_stream = CounterRng::class_stream(batch, u32::MAX as usize);
    let mut counts = vec![0usize; components.len()];
    for member in 0..size {
        counts[pick_component(components, rng.uniform(init_stream, member as u64))] += 1;
    }
    let classes = components.iter().zip(counts).map(|((_, state), count)| TrajectoryClass { state: state.clone(), count });
    let mut ensemble = Ensemble::new(classes.collect(), config.match_tol)?;
    let params = GeneralParams { match_tol: config.match_tol, max_jump_probability: config.max_jump_probability };

    // Tracked members of batch 0 as (class, position within class).
    let tracked = if batch == 0 { config.record_trajectories.min(size) } else { 0 };
    let mut positions: Vec<usize> = (0..tracked).collect();
    let mut records = vec![MeasurementRecord::default(); tracked];

    let mut next_sample = 0;
    let steps = config.n_steps();
    for step in 0..=steps {
        if sample_steps.get(next_sample) == Some(&step) {
            for class in ensemble.classes() {
                acc.add_state(next_sample, &class.state, class.count, &config.observables);
            }
            for (record, &pos) in records.iter_mut().zip(&positions) {
                record.samples.push(ensemble.classes()[class_of(&ensemble, pos)].state.clone());
            }
            next_sample += 1;
        }
        if step == steps {
            break;
        }
        let t = step as f64 * config.dt;
        let at = model.at(t)?;
        let out = roqj_step_general(&ensemble, &at, config.dt, rng, batch, step, &params)?;

        let d = &mut acc.diagnostics;
        d.steps = step + 1;
        d.max_forward_channels = d.max_forward_channels.max(out.max_forward_channels);
        d.max_forward_targets = d.max_forward_targets.max(out.forward_targets);
        d.max_classes = d.max_classes.max(ensemble.len()).max(out.ensemble.len());
        d.ambiguous_matches += out.ambiguous_matches;
        acc.leaked += out.leaked_weight;
        acc.weight += out.jump_weight;
        for mv in &out.moves {
            match mv.kind {
                EventKind::Forward => {
                    if acc.histogram.len() <= mv.channel {
                        acc.histogram.resize(mv.channel + 1, 0);
                    }
                    acc.histogram[mv.channel] += mv.count as u64;
                }
                EventKind::Reverse => acc.reverse += mv.count as u64,
            }
        }

        if tracked > 0 {
            // Members keep their relative order inside each destination class.
            let mut seen = vec![0usize; out.ensemble.len()];
            let mut new_position = vec![0usize; out.member_destinations.len()];
            for (member, &dest) in out.member_destinations.iter().enumerate() {
                new_position[member] = seen[dest];
                seen[dest] += 1;
            }
            let offsets: Vec<usize> = out
                .ensemble
                .classes()
                .iter()
                .scan(0, |acc, class| {
                    let start = *acc;
                    *acc += class.count;
                    Some(start)
                })
                .collect();
            for (pos, record) in positions.iter_mut().zip(records.iter_mut()) {
                let dest = out.member_destinations[*pos];
                if let Some(m) = out.member_moves[*pos] {
                    let mv = &out.moves[m];
                    record.push(JumpEvent {
                        t,
                        channel: mv.channel,
                        source_class: Some(mv.source),
                        target_class: Some(mv.target),
                        kind: mv.kind,
                    });
                }
                *pos = offsets[dest] + new_position[*pos];
            }
        }
        ensemble = out.ensemble;
    }
    acc.records = records;
    Ok(acc)
}
