//! The `run`, `exact`, `compare` and `probe` commands.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use roqj_core::analysis::{trace_distance, Observable, SimulationResult};
use roqj_core::engines::EventKind;
use roqj_core::oracle::{integrate_master_equation, p_divisibility_probe, pauli_exact};
use roqj_core::DensityMatrix;

use crate::config::{CompareConfig, Config, ExactMethod, ModelName};
use crate::csv::{format_number, Table};

/// Failure of a command, mapped to the process exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    ComparisonFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::ComparisonFailed(_) => 3,
        }
    }
}

/// Differences below this are rounding, whatever the error bars.
const ROUNDING_FLOOR: f64 = 1e-12;

fn validation(e: impl fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn write_table(table: &Table, path: &Path) -> Result<(), CliError> {
    table.write(path).map_err(|e| validation(format!("cannot write {}: {e}", path.display())))
}

fn header(command: &str, config: &Config) -> Result<Vec<String>, CliError> {
    let resolved = config.resolved().map_err(validation)?;
    let mut lines = vec![format!("# roqj {command}"), format!("# seed: {}", config.run.seed)];
    lines.extend(resolved.echo_lines());
    Ok(lines)
}

#[derive(Debug)]
pub struct RunReport {
    pub csv: PathBuf,
    pub events: Option<PathBuf>,
    /// One `<prefix>_traj_<k>.csv` per recorded trajectory.
    pub trajectories: Vec<PathBuf>,
    pub result: SimulationResult,
    pub elapsed: Duration,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.result;
        writeln!(f, "wrote {}", self.csv.display())?;
        if let Some(events) = &self.events {
            writeln!(f, "wrote {}", events.display())?;
        }
        if let Some(first) = self.trajectories.first() {
            writeln!(f, "wrote {} and {} more realization files", first.display(), self.trajectories.len() - 1)?;
        }
        writeln!(f, "engine {}, N = {}, {} steps", r.config.engine, r.config.n_traj, r.diagnostics.steps)?;
        writeln!(f, "forward jumps {} per channel {:?}", r.forward_jumps(), r.jump_histogram)?;
        if r.config.engine == roqj_core::EngineKind::RoqjGeneral {
            writeln!(f, "reverse jumps {}", r.reverse_jumps)?;
            writeln!(
                f,
                "leaked weight {:.6e} of {:.6e} ({:.4}%)",
                r.leaked_weight,
                r.total_jump_weight,
                100.0 * r.leak_fraction()
            )?;
            let d = &r.diagnostics;
            writeln!(
                f,
                "max classes {}, max forward channels per class {}, ambiguous matches {}",
                d.max_classes, d.max_forward_channels, d.ambiguous_matches
            )?;
        }
        write!(f, "wall time {:.2?}", self.elapsed)
    }
}

/// Runs the trajectory engine and writes `<prefix>_sim.csv`. When records
/// were requested it also writes `<prefix>_events.csv` and one
/// `<prefix>_traj_<k>.csv` per recorded trajectory.
pub fn run(config: &Config, out_dir: &Path) -> Result<RunReport, CliError> {
    let model = config.model().map_err(validation)?;
    let initial = config.initial_state().map_err(validation)?;
    let run_config = config.run_config().map_err(validation)?;
    let start = Instant::now();
    let result = roqj_core::run(&model, &initial, &run_config).map_err(validation)?;
    let elapsed = start.elapsed();

    let mut comments = header("run", config)?;
    comments.push(format!("# forward_jumps: {}", result.forward_jumps()));
    comments.push(format!("# reverse_jumps: {}", result.reverse_jumps));
    comments.push(format!("# leaked_weight: {}", format_number(result.leaked_weight)));
    comments.push(format!("# total_jump_weight: {}", format_number(result.total_jump_weight)));
    comments.push(format!("# max_forward_channels: {}", result.diagnostics.max_forward_channels));
    comments.push(format!("# max_classes: {}", result.diagnostics.max_classes));
    let table = Table::time_series(
        comments,
        &result.times,
        &result.averaged_states,
        &run_config.observables,
        &result.observable_means,
        &result.observable_stderr,
    );
    let csv = out_dir.join(format!("{}_sim.csv", config.prefix()));
    write_table(&table, &csv)?;

    let events = if result.records.is_empty() {
        None
    } else {
        let path = out_dir.join(format!("{}_events.csv", config.prefix()));
        let mut text = format!("# roqj events\n# seed: {}\ntrajectory,t,channel,kind,source_class,target_class\n", config.run.seed);
        for (k, record) in result.records.iter().enumerate() {
            for e in &record.events {
                let class = |c: Option<usize>| c.map_or(String::new(), |c| c.to_string());
                let kind = match e.kind {
                    EventKind::Forward => "forward",
                    EventKind::Reverse => "reverse",
                };
                text.push_str(&format!(
                    "{k},{},{},{kind},{},{}\n",
                    format_number(e.t),
                    e.channel,
                    class(e.source_class),
                    class(e.target_class)
                ));
            }
        }
        std::fs::write(&path, text).map_err(|e| validation(format!("cannot write {}: {e}", path.display())))?;
        Some(path)
    };

    let mut trajectories = Vec::with_capacity(result.records.len());
    for (k, record) in result.records.iter().enumerate() {
        let states: Vec<DensityMatrix> = record.samples.iter().map(DensityMatrix::from_pure).collect();
        let means: Vec<Vec<f64>> =
            record.samples.iter().map(|psi| run_config.observables.iter().map(|o| o.of_state(psi)).collect()).collect();
        let zeros = vec![vec![0.0; run_config.observables.len()]; states.len()];
        let mut comments = header("run", config)?;
        comments.push(format!("# trajectory: {k}"));
        let table = Table::time_series(comments, &result.times, &states, &run_config.observables, &means, &zeros);
        let path = out_dir.join(format!("{}_traj_{k}.csv", config.prefix()));
        write_table(&table, &path)?;
        trajectories.push(path);
    }
    Ok(RunReport { csv, events, trajectories, result, elapsed })
}

/// Exact reference on the run's output grid.
pub struct ExactSeries {
    pub method: ExactMethod,
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

pub fn exact_series(config: &Config) -> Result<ExactSeries, CliError> {
    let model = config.model().map_err(validation)?;
    let rho0 = config.initial_state().map_err(validation)?.density();
    let times = config.run_config().map_err(validation)?.sample_times;
    let method = match config.exact.method {
        ExactMethod::Auto if config.model.name == ModelName::Pauli => ExactMethod::ClosedForm,
        ExactMethod::Auto => ExactMethod::Rk4,
        m => m,
    };
    let states = match method {
        ExactMethod::ClosedForm => {
            let x = config.model.x.expect("validated pauli model");
            times.iter().map(|&t| pauli_exact(x, &rho0, t)).collect::<Result<Vec<_>, _>>().map_err(validation)?
        }
        _ => {
            let dt = config.exact_dt();
            let every = (config.sample_dt() / dt).round() as usize;
            let t_max = *times.last().expect("at least one sample");
            let sol = integrate_master_equation(&model, &rho0, t_max, dt, every).map_err(validation)?;
            times.iter().map(|&t| sol.at(t).clone()).collect()
        }
    };
    Ok(ExactSeries { method, times, states })
}

/// Writes `<prefix>_exact.csv`.
pub fn exact(config: &Config, out_dir: &Path) -> Result<PathBuf, CliError> {
    let series = exact_series(config)?;
    let observables = config.observables().map_err(validation)?;
    let means: Vec<Vec<f64>> =
        series.states.iter().map(|rho| observables.iter().map(|o| o.of_density(rho)).collect()).collect();
    let stderr = vec![vec![0.0; observables.len()]; series.times.len()];
    let mut comments = header("exact", config)?;
    let method = match series.method {
        ExactMethod::ClosedForm => "closed_form".to_string(),
        _ => format!("rk4 dt = {}", config.exact_dt()),
    };
    comments.push(format!("# method: {method}"));
    let table = Table::time_series(comments, &series.times, &series.states, &observables, &means, &stderr);
    let path = out_dir.join(format!("{}_exact.csv", config.prefix()));
    write_table(&table, &path)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    pub trace_distance: f64,
    /// Δ/σ per observable, 0 when Δ is rounding noise.
    pub z: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub thresholds: CompareConfig,
    pub observables: Vec<String>,
    pub rows: Vec<CompareRow>,
    pub failures: Vec<String>,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn max_trace_distance(&self) -> f64 {
        self.rows.iter().map(|r| r.trace_distance).fold(0.0, f64::max)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.z.iter().map(|z| z.abs())).fold(0.0, f64::max)
    }

    pub fn max_abs_delta(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.delta.iter().map(|d| d.abs())).fold(0.0, f64::max)
    }

    pub fn table(&self) -> String {
        let mut out = format!("t,trace_distance{}\n", self.observables.iter().map(|o| format!(",z_{o}")).collect::<String>());
        for r in &self.rows {
            out.push_str(&format!("{:.6},{:.6e}", r.t, r.trace_distance));
            for z in &r.z {
                out.push_str(&format!(",{z:.4}"));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.table())?;
        writeln!(
            f,
            "max trace distance {:.4e}, max |z| {:.3}, max |Δ| {:.4e} (z_max {}, abs_floor {})",
            self.max_trace_distance(),
            self.max_abs_z(),
            self.max_abs_delta(),
            self.thresholds.z_max,
            self.thresholds.abs_floor
        )?;
        if self.passed() {
            write!(f, "PASS")
        } else {
            for failure in self.failures.iter().take(10) {
                writeln!(f, "{failure}")?;
            }
            if self.failures.len() > 10 {
                writeln!(f, "... {} more", self.failures.len() - 10)?;
            }
            write!(f, "FAIL")
        }
    }
}

/// Compares a simulation CSV against a reference CSV on the same time grid.
///
/// Thresholds come from `thresholds`, else from the config echoed in `sim`.
pub fn compare(sim: &Path, exact: &Path, thresholds: Option<CompareConfig>) -> Result<CompareReport, CliError> {
    let a = Table::read(sim).map_err(validation)?;
    let b = Table::read(exact).map_err(validation)?;
    let thresholds = match thresholds {
        Some(t) => t,
        None => {
            let text = std::fs::read_to_string(sim).map_err(validation)?;
            Config::parse(&text).map(|c| c.compare).unwrap_or_default()
        }
    };
    let (ta, tb) = (a.times(), b.times());
    if ta.len() != tb.len() || ta.iter().zip(&tb).any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(1.0)) {
        return Err(validation(format!(
            "misaligned time grids: {} has {} rows, {} has {}",
            sim.display(),
            ta.len(),
            exact.display(),
            tb.len()
        )));
    }
    if a.dim() != b.dim() || a.dim() == 0 {
        return Err(validation(format!("state dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    let names = a.observables();
    let observables: Vec<Observable> = names.iter().map(|n| n.parse()).collect::<Result<_, _>>().map_err(validation)?;

    let mut rows = Vec::with_capacity(ta.len());
    let mut failures = Vec::new();
    for k in 0..ta.len() {
        let (ra, rb) = (a.density(k).map_err(validation)?, b.density(k).map_err(validation)?);
        let td = trace_distance(&ra, &rb).map_err(validation)?;
        if let Some(max) = thresholds.max_trace_distance {
            if td > max {
                failures.push(format!("t = {}: trace distance {td:.4e} > {max}", ta[k]));
            }
        }
        let mut z = Vec::with_capacity(names.len());
        let mut delta = Vec::with_capacity(names.len());
        for (name, obs) in names.iter().zip(&observables) {
            let value = |t: &Table, rho: &DensityMatrix| -> (f64, f64) {
                let mean = t.column(&format!("obs_{name}")).map_or_else(|| obs.of_density(rho), |c| t.rows[k][c]);
                let err = t.column(&format!("stderr_{name}")).map_or(0.0, |c| t.rows[k][c]);
                (mean, err)
            };
            let (ma, ea) = value(&a, &ra);
            let (mb, eb) = value(&b, &rb);
            let d = ma - mb;
            let sigma = ea.hypot(eb);
            let zk = if d.abs() <= ROUNDING_FLOOR { 0.0 } else { d / sigma };
            let bound = (thresholds.z_max * sigma).max(thresholds.abs_floor).max(ROUNDING_FLOOR);
            if d.abs() > bound {
                failures.push(format!("t = {}: {name} differs by {d:.4e} (stderr {sigma:.3e}, bound {bound:.3e})", ta[k]));
            }
            z.push(zk);
            delta.push(d);
        }
        rows.push(CompareRow { t: ta[k], trace_distance: td, z, delta });
    }
    Ok(CompareReport { thresholds, observables: names, rows, failures })
}

#[derive(Debug)]
pub struct ProbeSummary {
    pub csv: PathBuf,
    pub points: usize,
    /// Times at which a sampled state had a negative eigenvalue.
    pub violations: Vec<f64>,
}

impl fmt::Display for ProbeSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "wrote {}", self.csv.display())?;
        if self.violations.is_empty() {
            return write!(f, "all {} times consistent with P-divisibility", self.points);
        }
        write!(
            f,
            "{} of {} times violate P-divisibility (first t = {}, last t = {})",
            self.violations.len(),
            self.points,
            self.violations[0],
            self.violations[self.violations.len() - 1]
        )
    }
}

/// Samples min eig W_ψ(t) on the probe grid and writes `<prefix>_probe.csv`.
pub fn probe(config: &Config, out_dir: &Path) -> Result<ProbeSummary, CliError> {
    let model = config.model().map_err(validation)?;
    let p = &config.probe;
    let t_max = p.t_max.unwrap_or(config.run.t_max);
    let grid: Vec<f64> = if p.points == 1 {
        vec![0.0]
    } else {
        (0..p.points).map(|k| t_max * k as f64 / (p.points - 1) as f64).collect()
    };
    let report = p_divisibility_probe(&model, &grid, p.n_states, config.run.seed).map_err(validation)?;
    let mut comments = header("probe", config)?;
    comments.push(format!("# n_states: {}", p.n_states));
    let table = Table {
        comments,
        columns: ["t", "min_eigenvalue", "threshold", "consistent"].map(String::from).to_vec(),
        rows: report
            .points
            .iter()
            .map(|pt| vec![pt.t, pt.min_eigenvalue, pt.threshold, f64::from(u8::from(pt.consistent))])
            .collect(),
    };
    let csv = out_dir.join(format!("{}_probe.csv", config.prefix()));
    write_table(&table, &csv)?;
    let violations = report.points.iter().filter(|pt| !pt.consistent).map(|pt| pt.t).collect();
    Ok(ProbeSummary { csv, points: grid.len(), violations })
}
