//! Measurement records: the click sequence ω_t = (t₁, j₁; …; t_m, j_m) seen
//! by one trajectory. Forward clicks are jumps to an eigenvector of W_ψ (or
//! to L_αψ under MCWF); reverse clicks move an ensemble member to the state
//! of another class.

use crate::linalg::PureState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    /// Time at the start of the step in which the jump happened.
    pub t: f64,
    /// Eigen-channel index (ROQJ) or Lindblad term index (MCWF).
    pub channel: usize,
    /// Class indices before and after the step; `None` for independent
    /// trajectories.
    pub source_class: Option<usize>,
    pub target_class: Option<usize>,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementRecord {
    pub events: Vec<JumpEvent>,
    /// State of the trajectory at each sample time.
    pub samples: Vec<PureState>,
}

impl MeasurementRecord {
    pub fn push(&mut self, event: JumpEvent) {
        debug_assert!(self.events.last().is_none_or(|e| e.t <= event.t));
        self.events.push(event);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}
