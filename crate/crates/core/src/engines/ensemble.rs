use crate::error::{Error, Result};
use crate::linalg::PureState;

/// Ensemble members sharing one pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryClass {
    pub state: PureState,
    pub count: usize,
}

/// An ensemble of N members stored as classes of identical states.
///
/// Counts always sum to `total`, every class is non-empty, and no two class
/// states match under the tolerance the ensemble was built or merged with.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    classes: Vec<TrajectoryClass>,
    total: usize,
}

impl Ensemble {
    /// Builds an ensemble, merging matching states and dropping empty classes.
    pub fn new(classes: Vec<TrajectoryClass>, match_tol: f64) -> Result<Self> {
        let mut merged: Vec<TrajectoryClass> = Vec::with_capacity(classes.len());
        let mut dim = None;
        for class in classes {
            if *dim.get_or_insert(class.state.dim()) != class.state.dim() {
                return Err(Error::DimensionMismatch { expected: dim.unwrap(), got: class.state.dim() });
            }
            if class.count == 0 {
                continue;
            }
            match match_class(&merged, &class.state, match_tol) {
                Some(k) => merged[k].count += class.count,
                None => merged.push(class),
            }
        }
        let total = merged.iter().map(|c| c.count).sum();
        if total == 0 {
            return Err(Error::EmptyEnsemble);
        }
        Ok(Ensemble { classes: merged, total })
    }

    pub fn pure(state: PureState, count: usize) -> Result<Self> {
        Self::new(vec![TrajectoryClass { state, count }], 0.0)
    }

    pub(crate) fn from_parts_unchecked(classes: Vec<TrajectoryClass>) -> Self {
        let total = classes.iter().map(|c| c.count).sum();
        Ensemble { classes, total }
    }

    pub fn classes(&self) -> &[TrajectoryClass] {
        &self.classes
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.classes.first().map_or(0, |c| c.state.dim())
    }
}

/// Index of the class whose state has the largest overlap |⟨ψ_k|target⟩|
/// with `target`, provided that overlap is at least 1 − tol. Ties go to the
/// lowest index.
pub fn match_class(classes: &[TrajectoryClass], target: &PureState, tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, class) in classes.iter().enumerate() {
        let overlap = class.state.overlap(target);
        if overlap >= 1.0 - tol && best.is_none_or(|(_, b)| overlap > b) {
            best = Some((k, overlap));
        }
    }
    best.map(|(k, _)| k)
}
