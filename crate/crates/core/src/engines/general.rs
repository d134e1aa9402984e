//! ROQJ for general (not necessarily P-divisible) dynamics.
//!
//! Negative eigenvalues of W_ψ cannot be turned into jump probabilities for a
//! single trajectory. Instead, for a negative eigenpair (λ, φ) of class k',
//! members of a class k whose state *is* φ jump to ψ_k' with probability
//! (N_k'/N_k)|λ|dt. The ensemble is therefore stepped synchronously:
//!
//! 1. every class plans its channels against a frozen snapshot of the
//!    ensemble (states and counts at the start of the step);
//! 2. every member draws one uniform, partitioned over its forward channels,
//!    the reverse channels it is a source of, and no-jump;
//! 3. all moves are committed at once, matching classes are merged and empty
//!    ones dropped.
//!
//! Rate operators often have degenerate eigenspaces (the network model has
//! W_ψ = c(I − |ψ⟩⟨ψ|)), where the eigensolver's basis is arbitrary and would
//! almost never coincide with an existing class. Within each eigenspace the
//! channel basis is therefore built from the classes that already lie in it
//! (projected and orthonormalized), completed with eigensolver vectors. A
//! channel built from class m is "anchored" to m: forward jumps through it
//! land in class m, and a negative anchored channel has m as its source.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::engines::ensemble::{match_class, Ensemble, TrajectoryClass};
use crate::engines::record::EventKind;
use crate::engines::rng::CounterRng;
use crate::error::{Error, Result};
use crate::linalg::{c, fix_phase, hermitian_eigen, CMatrix, CVector, PureState};
use crate::model::ModelAt;
use crate::rate_operator::{default_zero_threshold, deterministic_step, spectral_split};

/// Eigenvalues closer than this (relative to 1 + max|λ|) share an eigenspace.
const CLUSTER_TOL_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralParams {
    /// Overlap deficit under which two states count as the same class.
    pub match_tol: f64,
    /// Largest total jump probability allowed for one member in one step.
    pub max_jump_probability: f64,
}

impl Default for GeneralParams {
    fn default() -> Self {
        GeneralParams { match_tol: 1e-8, max_jump_probability: 0.5 }
    }
}

/// One nonzero eigen-direction of W_ψ for a class.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub lambda: f64,
    pub vector: CVector,
    /// The class this direction was built from, if any.
    pub anchor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassChannels {
    /// Positive eigenvalues, descending.
    pub forward: Vec<Channel>,
    /// Negative eigenvalues, descending.
    pub reverse: Vec<Channel>,
    /// Nondegenerate negative directions that more than one class matched.
    pub ambiguous: usize,
}

/// Channel basis for class `k` of `ensemble` at the frozen model `at`.
pub fn class_channels(ensemble: &Ensemble, k: usize, at: &ModelAt, match_tol: f64) -> Result<ClassChannels> {
    let classes = ensemble.classes();
    let psi = &classes[k].state;
    let w = at.rate_operator(psi)?;
    let (values, vectors) = hermitian_eigen(&w);
    let threshold = default_zero_threshold(&values);
    let cluster_tol = CLUSTER_TOL_REL * (1.0 + values.iter().fold(0.0f64, |m, l| m.max(l.abs())));

    let mut out = ClassChannels::default();
    let mut j = 0;
    while j < values.len() {
        if values[j].abs() <= threshold {
            j += 1;
            continue;
        }
        let mut end = j + 1;
        while end < values.len() && (values[end] - values[j]).abs() <= cluster_tol && values[end].abs() > threshold {
            end += 1;
        }
        let space = vectors.columns(j, end - j).into_owned();
        let (basis, ambiguous) = anchored_basis(&space, classes, k, match_tol);
        for (offset, (vector, anchor)) in basis.into_iter().enumerate() {
            let lambda = values[j + offset];
            let channel = Channel { lambda, vector, anchor };
            if lambda > 0.0 {
                out.forward.push(channel);
            } else {
                out.reverse.push(channel);
                out.ambiguous += ambiguous;
            }
        }
        j = end;
    }
    Ok(out)
}

/// Orthonormal basis of the column space of `space`, starting from the
/// classes that lie inside it to within `tol`.
fn anchored_basis(
    space: &CMatrix,
    classes: &[TrajectoryClass],
    skip: usize,
    tol: f64,
) -> (Vec<(CVector, Option<usize>)>, usize) {
    let dim = space.ncols();
    let mut candidates: Vec<(f64, usize, CVector)> = classes
        .iter()
        .enumerate()
        .filter(|(m, _)| *m != skip)
        .filter_map(|(m, class)| {
            let coeffs = space.adjoint() * class.state.amplitudes();
            let weight = coeffs.norm();
            (weight >= 1.0 - tol).then(|| (weight, m, space * coeffs))
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let ambiguous = usize::from(dim == 1 && candidates.len() > 1);

    let mut basis: Vec<(CVector, Option<usize>)> = Vec::with_capacity(dim);
    for (_, m, projected) in candidates {
        if basis.len() == dim {
            break;
        }
        let residual = orthogonalize(projected, &basis);
        let norm = residual.norm();
        if norm >= 1.0 - tol {
            basis.push((residual / c(norm), Some(m)));
        }
    }
    while basis.len() < dim {
        let (residual, norm) = space
            .column_iter()
            .map(|col| {
                let r = orthogonalize(col.into_owned(), &basis);
                let n = r.norm();
                (r, n)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("eigenspace has at least one column");
        basis.push((fix_phase(residual / c(norm)), None));
    }
    (basis, ambiguous)
}

fn orthogonalize(mut v: CVector, basis: &[(CVector, Option<usize>)]) -> CVector {
    // Two passes of modified Gram-Schmidt.
    for _ in 0..2 {
        for (b, _) in basis {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
    }
    v
}

/// A batch of identical moves committed in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMove {
    /// Class index before the step.
    pub source: usize,
    /// Class index after the step.
    pub target: usize,
    /// Forward: index into the source's forward channels. Reverse: index into
    /// the reverse channels of the class whose state is the target.
    pub channel: usize,
    pub kind: EventKind,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct GeneralStep {
    pub ensemble: Ensemble,
    pub moves: Vec<ClassMove>,
    /// New class index of every member, members flattened class by class in
    /// the order of the ensemble before the step.
    pub member_destinations: Vec<usize>,
    /// Index into `moves` for every member that jumped, same order.
    pub member_moves: Vec<Option<usize>>,
    /// Σ_k (N_k/N)|λ|dt over negative directions with no source class.
    pub leaked_weight: f64,
    /// Σ_k (N_k/N)(Σ λ⁺ + Σ |λ⁻|)dt.
    pub jump_weight: f64,
    pub max_forward_channels: usize,
    /// Distinct forward targets over all classes (anchored classes plus
    /// fresh states).
    pub forward_targets: usize,
    pub ambiguous_matches: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Stay,
    Forward(usize),
    Reverse { target: usize, channel: usize },
}

struct ClassPlan {
    channels: ClassChannels,
    next_state: PureState,
    /// Post-step state for every unanchored forward channel.
    fresh_next: Vec<Option<PureState>>,
}

fn step_error(t: f64, err: Error) -> Error {
    match err {
        Error::NormCollapse { norm } => Error::StepSize { t, reason: format!("no-jump norm {norm}") },
        other => other,
    }
}

fn evolve(at: &ModelAt, state: &PureState, dt: f64) -> Result<PureState> {
    let h = at.effective_hamiltonian(state)?;
    deterministic_step(state, &h, dt).map_err(|e| step_error(at.t, e))
}

/// One synchronous step of the whole ensemble.
///
/// `batch` and `step` address the member draws in `rng`, so the outcome is
/// independent of the rayon pool size.
pub fn roqj_step_general(
    ensemble: &Ensemble,
    at: &ModelAt,
    dt: f64,
    rng: &CounterRng,
    batch: usize,
    step: usize,
    params: &GeneralParams,
) -> Result<GeneralStep> {
    let classes = ensemble.classes();
    let n_total = ensemble.total() as f64;

    let plans = (0..classes.len())
        .into_par_iter()
        .map(|k| {
            let channels = class_channels(ensemble, k, at, params.match_tol)?;
            let next_state = evolve(at, &classes[k].state, dt)?;
            let fresh_next = channels
                .forward
                .iter()
                .map(|ch| match ch.anchor {
                    Some(_) => Ok(None),
                    None => evolve(at, &PureState::from_normalized_unchecked(ch.vector.clone()), dt).map(Some),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ClassPlan { channels, next_state, fresh_next })
        })
        .collect::<Result<Vec<_>>>()?;

    // Reverse channels, grouped by the class that supplies the members.
    let mut leaked_weight = 0.0;
    let mut jump_weight = 0.0;
    let mut reverse_by_source: Vec<Vec<(f64, Outcome)>> = vec![Vec::new(); classes.len()];
    for (target, plan) in plans.iter().enumerate() {
        let weight = classes[target].count as f64 / n_total;
        for ch in &plan.channels.forward {
            jump_weight += weight * ch.lambda * dt;
        }
        for (channel, ch) in plan.channels.reverse.iter().enumerate() {
            let rate = -ch.lambda;
            jump_weight += weight * rate * dt;
            match ch.anchor {
                Some(source) => {
                    let p = classes[target].count as f64 / classes[source].count as f64 * rate * dt;
                    reverse_by_source[source].push((p, Outcome::Reverse { target, channel }));
                }
                None => leaked_weight += weight * rate * dt,
            }
        }
    }

    let outcome_tables: Vec<Vec<(f64, Outcome)>> = plans
        .iter()
        .zip(reverse_by_source)
        .map(|(plan, reverse)| {
            let mut table: Vec<(f64, Outcome)> =
                plan.channels.forward.iter().enumerate().map(|(j, ch)| (ch.lambda * dt, Outcome::Forward(j))).collect();
            table.extend(reverse);
            table
        })
        .collect();
    for (k, table) in outcome_tables.iter().enumerate() {
        let total: f64 = table.iter().map(|(p, _)| p).sum();
        if total > params.max_jump_probability {
            return Err(Error::StepSize {
                t: at.t,
                reason: format!(
                    "class {k} (N = {}) has total jump probability {total:.4} > {}",
                    classes[k].count, params.max_jump_probability
                ),
            });
        }
    }

    // Per-member draws against the frozen tables.
    let fates: Vec<Vec<Outcome>> = (0..classes.len())
        .into_par_iter()
        .map(|k| {
            let stream = CounterRng::class_stream(batch, k);
            (0..classes[k].count)
                .map(|member| {
                    let u = rng.uniform(stream, CounterRng::member_counter(step, member));
                    let mut acc = 0.0;
                    for &(p, outcome) in &outcome_tables[k] {
                        acc += p;
                        if u < acc {
                            return outcome;
                        }
                    }
                    Outcome::Stay
                })
                .collect()
        })
        .collect();

    // Slots: existing classes first, then one per unanchored forward channel.
    let mut slot_states: Vec<PureState> = plans.iter().map(|p| p.next_state.clone()).collect();
    let mut fresh_slot: Vec<Vec<Option<usize>>> = Vec::with_capacity(plans.len());
    for plan in &plans {
        let slots = plan
            .fresh_next
            .iter()
            .map(|s| {
                s.as_ref().map(|state| {
                    slot_states.push(state.clone());
                    slot_states.len() - 1
                })
            })
            .collect();
        fresh_slot.push(slots);
    }
    let slot_of = |k: usize, outcome: Outcome| -> usize {
        match outcome {
            Outcome::Stay => k,
            Outcome::Forward(j) => plans[k].channels.forward[j].anchor.unwrap_or_else(|| fresh_slot[k][j].unwrap()),
            Outcome::Reverse { target, .. } => target,
        }
    };
    let mut slot_counts = vec![0usize; slot_states.len()];
    let mut member_slots = Vec::with_capacity(ensemble.total());
    let mut member_keys = Vec::with_capacity(ensemble.total());
    let mut move_counts: BTreeMap<(usize, usize, usize, bool), usize> = BTreeMap::new();
    for (k, fate) in fates.iter().enumerate() {
        for &outcome in fate {
            let slot = slot_of(k, outcome);
            slot_counts[slot] += 1;
            member_slots.push(slot);
            let key = match outcome {
                Outcome::Stay => None,
                Outcome::Forward(j) => Some((k, slot, j, false)),
                Outcome::Reverse { channel, .. } => Some((k, slot, channel, true)),
            };
            if let Some(key) = key {
                *move_counts.entry(key).or_default() += 1;
            }
            member_keys.push(key);
        }
    }

    // Commit: merge matching slots in order, dropping empty ones.
    let mut merged: Vec<TrajectoryClass> = Vec::new();
    let mut slot_to_class = vec![usize::MAX; slot_states.len()];
    for (slot, state) in slot_states.into_iter().enumerate() {
        let count = slot_counts[slot];
        if count == 0 {
            continue;
        }
        match match_class(&merged, &state, params.match_tol) {
            Some(m) => {
                merged[m].count += count;
                slot_to_class[slot] = m;
            }
            None => {
                merged.push(TrajectoryClass { state, count });
                slot_to_class[slot] = merged.len() - 1;
            }
        }
    }

    let move_index: BTreeMap<_, usize> = move_counts.keys().enumerate().map(|(i, key)| (*key, i)).collect();
    let member_moves = member_keys.into_iter().map(|key| key.map(|key| move_index[&key])).collect();
    let moves = move_counts
        .into_iter()
        .map(|((source, slot, channel, reverse), count)| ClassMove {
            source,
            target: slot_to_class[slot],
            channel,
            kind: if reverse { EventKind::Reverse } else { EventKind::Forward },
            count,
        })
        .collect();
    let member_destinations = member_slots.into_iter().map(|s| slot_to_class[s]).collect();

    let mut anchored_targets = BTreeSet::new();
    let mut fresh_targets = 0;
    for plan in &plans {
        for ch in &plan.channels.forward {
            match ch.anchor {
                Some(m) => {
                    anchored_targets.insert(m);
                }
                None => fresh_targets += 1,
            }
        }
    }

    Ok(GeneralStep {
        ensemble: Ensemble::from_parts_unchecked(merged),
        moves,
        member_destinations,
        member_moves,
        leaked_weight,
        jump_weight,
        max_forward_channels: plans.iter().map(|p| p.channels.forward.len()).max().unwrap_or(0),
        forward_targets: anchored_targets.len() + fresh_targets,
        ambiguous_matches: plans.iter().map(|p| p.channels.ambiguous).sum(),
    })
}

/// Exact expectation of one general step, computed directly from the
/// eigensolver's spectrum of each class:
///
/// ```text
/// ϱ' = Σ_k (N_k/N)[(1 − P_k)|ψ_k'⟩⟨ψ_k'| + Σ_{j⁺} λ dt |φ⟩⟨φ|]
///    + Σ_k' Σ_{j⁻} (N_k'/N)|λ| dt |ψ_k'⟩⟨ψ_k'|
/// ```
///
/// where P_k sums the forward probabilities of class k and the reverse
/// probabilities for which k is the source. Every negative eigenvector must
/// match a class.
pub fn expected_ensemble_update(ensemble: &Ensemble, at: &ModelAt, dt: f64, match_tol: f64) -> Result<CMatrix> {
    let classes = ensemble.classes();
    if classes.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = ensemble.dim();
    let total = ensemble.total() as f64;
    let mut out = CMatrix::zeros(n, n);
    let mut leave = vec![0.0; classes.len()];
    let mut spectra = Vec::with_capacity(classes.len());
    for (k, class) in classes.iter().enumerate() {
        let spectrum = spectral_split(&at.rate_operator(&class.state)?, None)?;
        for pair in &spectrum.negative {
            let source = match_class(classes, &pair.vector, match_tol)
                .filter(|&m| m != k)
                .ok_or(Error::UnmatchedChannel { class: k, eigenvalue: pair.lambda })?;
            leave[source] += class.count as f64 / classes[source].count as f64 * -pair.lambda * dt;
            out += class.state.projector() * c(class.count as f64 / total * -pair.lambda * dt);
        }
        spectra.push(spectrum);
    }
    for ((class, spectrum), leave) in classes.iter().zip(&spectra).zip(leave) {
        let weight = class.count as f64 / total;
        let next = evolve(at, &class.state, dt)?;
        out += next.projector() * c(weight * (1.0 - spectrum.forward_rate() * dt - leave));
        for pair in &spectrum.positive {
            out += pair.vector.projector() * c(weight * pair.lambda * dt);
        }
    }
    Ok(out)
}
