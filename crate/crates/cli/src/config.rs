//! Experiment configuration.
//!
//! Configs are TOML documents with the sections `[model]`, `[initial]`,
//! `[run]`, `[output]`, `[exact]`, `[compare]` and `[probe]`. A CSV written
//! by `roqj run` or `roqj exact` carries the effective config in its header
//! (`# config: ` lines) and can be passed back as a config to repeat the run.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use roqj_core::analysis::Observable;
use roqj_core::model::{
    build_amplitude_damping, build_dephasing, build_network_model, build_pauli_model, network_rate, sample_couplings,
};
use roqj_core::{DensityMatrix, EngineKind, InitialState, MasterEquationModel, PureState, RunConfig, TimeRate};

/// Header prefix of the config echo in CSV outputs.
pub const ECHO_PREFIX: &str = "# config: ";

/// A config error naming the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Pauli,
    Network,
    AmplitudeDamping,
    Dephasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: ModelName,
    /// Pauli weights (x₁, x₂, x₃).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<[f64; 3]>,
    /// Network size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Couplings drawn uniformly from [0, omega_max] with this seed...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    /// ...or given inline...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<Vec<f64>>>,
    /// ...or read from a whitespace-separated file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_file: Option<PathBuf>,
    /// Multiplies the network rate c(t).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_scale: Option<f64>,
    /// Constant rate of the amplitude damping and dephasing models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// `plus`, `minus`, `basis:<i>` or `maximally_mixed`.
    pub state: String,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig { state: "basis:0".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub engine: String,
    pub dt: f64,
    pub t_max: f64,
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    /// Spacing of output times; a multiple of dt. Defaults to about t_max/100.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batches: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak_budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_jump_probability: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Observable names; all populations when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observables: Vec<String>,
    /// Trajectories whose jumps go to `<prefix>_events.csv` and whose paths
    /// go to `<prefix>_traj_<k>.csv`.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub record_trajectories: usize,
    /// Output file prefix; defaults to the config file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExactMethod {
    /// Closed form for the Pauli model, RK4 otherwise.
    #[default]
    Auto,
    Rk4,
    ClosedForm,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    /// RK4 step; defaults to run.dt / 10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub method: ExactMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// An observable passes when |Δ| ≤ max(z_max·stderr, abs_floor).
    pub z_max: f64,
    pub abs_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_trace_distance: Option<f64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig { z_max: 3.0, abs_floor: 0.0, max_trace_distance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Grid of `points` times on [0, t_max]; t_max defaults to run.t_max.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub points: usize,
    pub n_states: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { t_max: None, points: 101, n_states: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub exact: ExactConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub engine: Option<String>,
    pub dt: Option<f64>,
    pub n_traj: Option<usize>,
}

/// TOML text of a config, or the echo lines of a CSV written by this tool.
fn config_text(text: &str) -> String {
    let echoed: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix(ECHO_PREFIX)).collect();
    if echoed.is_empty() {
        text.to_string()
    } else {
        echoed.join("\n")
    }
}

fn toml_error(err: toml::de::Error) -> ConfigError {
    // serde names unknown and missing fields in the message itself.
    ConfigError::new("", err.message().to_string())
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(&config_text(text)).map_err(toml_error)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file. Relative `omega_file` paths are taken relative
    /// to the file's directory, and the output prefix defaults to its stem.
    pub fn load(path: &Path) -> std::result::Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.to_path_buf(), e))?;
        let mut config = Config::parse(&text).map_err(LoadError::Invalid)?;
        if let Some(file) = &mut config.model.omega_file {
            if file.is_relative() {
                *file = path.parent().unwrap_or(Path::new(".")).join(&*file);
            }
        }
        if config.output.prefix.is_none() {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("roqj");
            // Rerunning from a CSV keeps the original prefix.
            let stem = ["_sim", "_exact"].iter().fold(stem, |s, suffix| s.strip_suffix(suffix).unwrap_or(s));
            config.output.prefix = Some(stem.to_string());
        }
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        if let Some(seed) = overrides.seed {
            self.run.seed = seed;
        }
        if let Some(engine) = &overrides.engine {
            self.run.engine = engine.clone();
        }
        if let Some(dt) = overrides.dt {
            self.run.dt = dt;
        }
        if let Some(n) = overrides.n_traj {
            self.run.n_traj = n;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.engine()?;
        let r = &self.run;
        if !(r.dt.is_finite() && r.dt > 0.0) {
            return Err(ConfigError::new("run.dt", format!("must be positive, got {}", r.dt)));
        }
        if !(r.t_max.is_finite() && r.t_max >= r.dt) {
            return Err(ConfigError::new("run.t_max", format!("must be at least run.dt, got {}", r.t_max)));
        }
        if !is_multiple(r.t_max, r.dt) {
            return Err(ConfigError::new("run.t_max", "must be a multiple of run.dt"));
        }
        if r.n_traj == 0 {
            return Err(ConfigError::new("run.n_traj", "must be at least 1"));
        }
        let sample_dt = self.sample_dt();
        if !(sample_dt > 0.0 && is_multiple(sample_dt, r.dt)) {
            return Err(ConfigError::new("run.sample_dt", format!("{sample_dt} must be a positive multiple of run.dt")));
        }
        if let Some(b) = r.batches {
            if b == 0 || b > r.n_traj {
                return Err(ConfigError::new("run.batches", format!("must be in 1..={}", r.n_traj)));
            }
        }
        if let Some(tol) = r.match_tol {
            if !(0.0..1.0).contains(&tol) {
                return Err(ConfigError::new("run.match_tol", "must be in [0, 1)"));
            }
        }
        if let Some(p) = r.max_jump_probability {
            if !(p > 0.0 && p <= 1.0) {
                return Err(ConfigError::new("run.max_jump_probability", "must be in (0, 1]"));
            }
        }
        if let Some(b) = r.leak_budget {
            if !(b >= 0.0) {
                return Err(ConfigError::new("run.leak_budget", "must be non-negative"));
            }
        }
        let dim = self.dim()?;
        for name in &self.output.observables {
            let obs: Observable = name.parse().map_err(|e| ConfigError::new("output.observables", format!("{e}")))?;
            if obs.max_index() >= dim {
                return Err(ConfigError::new("output.observables", format!("{name} out of range for dimension {dim}")));
            }
        }
        self.initial_state()?;
        let exact_dt = self.exact_dt();
        if !(exact_dt > 0.0 && is_multiple(sample_dt, exact_dt)) {
            return Err(ConfigError::new("exact.dt", format!("{exact_dt} must divide run.sample_dt = {sample_dt}")));
        }
        if self.exact.method == ExactMethod::ClosedForm && self.model.name != ModelName::Pauli {
            return Err(ConfigError::new("exact.method", "closed_form is only available for the pauli model"));
        }
        let c = &self.compare;
        if !(c.z_max >= 0.0) || !(c.abs_floor >= 0.0) || c.max_trace_distance.is_some_and(|d| !(d >= 0.0)) {
            return Err(ConfigError::new("compare", "thresholds must be non-negative"));
        }
        if self.probe.points == 0 || self.probe.n_states == 0 {
            return Err(ConfigError::new("probe", "points and n_states must be at least 1"));
        }
        Ok(())
    }

    pub fn engine(&self) -> Result<EngineKind> {
        self.run.engine.parse().map_err(|e| ConfigError::new("run.engine", format!("{e}")))
    }

    pub fn dim(&self) -> Result<usize> {
        match self.model.name {
            ModelName::Network => {
                let n = self.model.n.ok_or_else(|| ConfigError::new("model.n", "required for the network model"))?;
                if n < 2 {
                    return Err(ConfigError::new("model.n", "must be at least 2"));
                }
                Ok(n)
            }
            _ => Ok(2),
        }
    }

    /// Output times as multiples of dt.
    pub fn sample_dt(&self) -> f64 {
        self.run.sample_dt.unwrap_or_else(|| {
            let steps = (self.run.t_max / self.run.dt).round();
            (steps / 100.0).round().max(1.0) * self.run.dt
        })
    }

    pub fn exact_dt(&self) -> f64 {
        self.exact.dt.unwrap_or(self.run.dt / 10.0)
    }

    pub fn prefix(&self) -> &str {
        self.output.prefix.as_deref().unwrap_or("roqj")
    }

    pub fn observables(&self) -> Result<Vec<Observable>> {
        if self.output.observables.is_empty() {
            return Ok((0..self.dim()?).map(Observable::Population).collect());
        }
        self.output
            .observables
            .iter()
            .map(|s| s.parse().map_err(|e| ConfigError::new("output.observables", format!("{e}"))))
            .collect()
    }

    pub fn initial_state(&self) -> Result<InitialState> {
        let dim = self.dim()?;
        let field = "initial.state";
        let s = self.initial.state.trim();
        let state = match s {
            "plus" | "minus" if dim != 2 => return Err(ConfigError::new(field, format!("`{s}` needs a qubit model"))),
            "plus" => InitialState::Pure(PureState::plus()),
            "minus" => InitialState::Pure(PureState::minus()),
            "maximally_mixed" => InitialState::Mixed(DensityMatrix::maximally_mixed(dim)),
            _ => {
                let i: usize = s
                    .strip_prefix("basis:")
                    .and_then(|i| i.trim().parse().ok())
                    .ok_or_else(|| ConfigError::new(field, format!("`{s}` is not plus, minus, basis:<i> or maximally_mixed")))?;
                if i >= dim {
                    return Err(ConfigError::new(field, format!("basis index {i} out of range for dimension {dim}")));
                }
                InitialState::Pure(PureState::basis(dim, i))
            }
        };
        Ok(state)
    }

    /// Coupling matrix of the network model.
    pub fn omega(&self) -> Result<DMatrix<f64>> {
        let m = &self.model;
        let n = self.dim()?;
        let sources = [m.omega.is_some(), m.omega_file.is_some(), m.omega_seed.is_some()];
        if sources.iter().filter(|s| **s).count() != 1 {
            return Err(ConfigError::new("model.omega", "give exactly one of omega, omega_file, omega_seed"));
        }
        let rows: Vec<Vec<f64>> = if let Some(rows) = &m.omega {
            rows.clone()
        } else if let Some(path) = &m.omega_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new("model.omega_file", format!("{}: {e}", path.display())))?;
            text.lines()
                .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
                .map(|l| {
                    l.split_whitespace()
                        .map(|v| v.parse::<f64>().map_err(|e| ConfigError::new("model.omega_file", format!("`{v}`: {e}"))))
                        .collect()
                })
                .collect::<Result<_>>()?
        } else {
            let max = m.omega_max.unwrap_or(0.6);
            if !(max.is_finite() && max >= 0.0) {
                return Err(ConfigError::new("model.omega_max", "must be non-negative"));
            }
            return Ok(sample_couplings(n, max, m.omega_seed.unwrap_or_default()));
        };
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(ConfigError::new("model.omega", format!("must be {n}×{n}")));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn model(&self) -> Result<MasterEquationModel> {
        let m = &self.model;
        let built = match m.name {
            ModelName::Pauli => {
                let x = m.x.ok_or_else(|| ConfigError::new("model.x", "required for the pauli model"))?;
                build_pauli_model(x).map_err(|e| ConfigError::new("model.x", format!("{e}")))?
            }
            ModelName::Network => {
                let scale = m.rate_scale.unwrap_or(1.0);
                if !scale.is_finite() {
                    return Err(ConfigError::new("model.rate_scale", "must be finite"));
                }
                let rate = TimeRate::varying(move |t| scale * network_rate(t));
                build_network_model(self.dim()?, &self.omega()?, rate)
                    .map_err(|e| ConfigError::new("model.omega", format!("{e}")))?
            }
            ModelName::AmplitudeDamping => {
                let g = m.gamma.ok_or_else(|| ConfigError::new("model.gamma", "required for amplitude_damping"))?;
                build_amplitude_damping(g).map_err(|e| ConfigError::new("model.gamma", format!("{e}")))?
            }
            ModelName::Dephasing => {
                let g = m.gamma.ok_or_else(|| ConfigError::new("model.gamma", "required for dephasing"))?;
                if !g.is_finite() {
                    return Err(ConfigError::new("model.gamma", "must be finite"));
                }
                build_dephasing(TimeRate::Constant(g))
            }
        };
        Ok(built)
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let r = &self.run;
        let mut config = RunConfig::new(self.engine()?, r.dt, r.t_max, r.n_traj, r.seed);
        let every = (self.sample_dt() / r.dt).round() as usize;
        config = config.sample_every(every).with_observables(self.observables()?);
        if let Some(b) = r.batches {
            config.batches = b;
        }
        if let Some(t) = r.match_tol {
            config.match_tol = t;
        }
        if let Some(b) = r.leak_budget {
            config.leak_budget = b;
        }
        if let Some(p) = r.max_jump_probability {
            config.max_jump_probability = p;
        }
        config.record_trajectories = self.output.record_trajectories;
        Ok(config)
    }

    /// The config with the couplings inlined, so the echo does not depend
    /// on external files.
    pub fn resolved(&self) -> Result<Config> {
        let mut out = self.clone();
        if self.model.name == ModelName::Network && self.model.omega_file.is_some() {
            let omega = self.omega()?;
            out.model.omega_file = None;
            out.model.omega = Some((0..omega.nrows()).map(|i| omega.row(i).iter().copied().collect()).collect());
        }
        Ok(out)
    }

    /// TOML text of the config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Header lines echoing the config.
    pub fn echo_lines(&self) -> Vec<String> {
        self.to_toml().lines().map(|l| format!("{ECHO_PREFIX}{l}")).collect()
    }
}

fn is_multiple(a: f64, b: f64) -> bool {
    let k = (a / b).round();
    k >= 1.0 && (k * b - a).abs() <= 1e-9 * a.abs().max(1.0)
}

#[derive(Debug)]
pub enum LoadError {
    Io(PathBuf, std::io::Error),
    Invalid(ConfigError),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io(path, e) => write!(f, "cannot read {}: {e}", path.display()),
            LoadError::Invalid(e) => write!(f, "invalid config: {e}"),
        }
    }
}

impl std::error::Error for LoadError {}

#[cfg(test)]
mod tests {
    use super::*;

    const PAULI: &str = r#"
[model]
name = "pauli"
x = [0.5, 0.5, 0.0]

[initial]
state = "plus"

[run]
engine = "roqj_p"
dt = 0.002
t_max = 3.0
n_traj = 10000
seed = 7
sample_dt = 0.05

[output]
observables = ["re_0_1"]
"#;

    #[test]
    fn parses_and_builds() {
        let c = Config::parse(PAULI).unwrap();
        assert_eq!(c.engine().unwrap(), EngineKind::RoqjP);
        let rc = c.run_config().unwrap();
        assert_eq!(rc.sample_times.len(), 61);
        assert_eq!(rc.observables, vec![Observable::Re(0, 1)]);
        assert_eq!(c.exact_dt(), 0.0002);
        assert_eq!(c.model().unwrap().dim(), 2);
    }

    #[test]
    fn echo_round_trips() {
        let c = Config::parse(PAULI).unwrap();
        let csv = format!("# roqj run\n{}\nt,re_rho_0_0\n0,1\n", c.echo_lines().join("\n"));
        assert_eq!(Config::parse(&csv).unwrap(), c);
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            (PAULI.replace("dt = 0.002", "dt = -1.0"), "run.dt"),
            (PAULI.replace("\"roqj_p\"", "\"roqj\""), "run.engine"),
            (PAULI.replace("\"plus\"", "\"basis:5\""), "initial.state"),
            (PAULI.replace("\"re_0_1\"", "\"re_0_2\""), "output.observables"),
            (PAULI.replace("sample_dt = 0.05", "sample_dt = 0.003"), "run.sample_dt"),
        ];
        for (text, field) in cases {
            let err = Config::parse(&text).unwrap_err();
            assert_eq!(err.field, field, "{err}");
        }
        let err = Config::parse(&PAULI.replace("seed = 7", "seed = 7\nsed = 1")).unwrap_err();
        assert!(err.message.contains("sed"), "{err}");
        let err = Config::parse(&PAULI.replace("x = [0.5, 0.5, 0.0]", "x = [0.5, 0.6, 0.0]")).unwrap().model().unwrap_err();
        assert_eq!(err.field, "model.x");
    }

    #[test]
    fn overrides() {
        let mut c = Config::parse(PAULI).unwrap();
        c.apply(&Overrides { seed: Some(3), engine: Some("mcwf".into()), dt: Some(0.001), n_traj: Some(5) }).unwrap();
        assert_eq!((c.run.seed, c.run.dt, c.run.n_traj), (3, 0.001, 5));
        assert_eq!(c.engine().unwrap(), EngineKind::Mcwf);
        assert!(c.apply(&Overrides { dt: Some(0.03), ..Default::default() }).is_err());
    }

    #[test]
    fn network_couplings() {
        let base = "[model]\nname = \"network\"\nn = 3\n{}\n[run]\nengine = \"roqj_general\"\ndt = 0.01\nt_max = 1.0\nn_traj = 10\n";
        let inline = base.replace("{}", "omega = [[0.0, 0.1, 0.2], [0.1, 0.0, 0.3], [0.2, 0.3, 0.0]]");
        let c = Config::parse(&inline).unwrap();
        assert_eq!(c.omega().unwrap()[(1, 2)], 0.3);
        assert_eq!(c.model().unwrap().terms().len(), 9);
        assert_eq!(c.initial_state().unwrap().dim(), 3);

        let seeded = Config::parse(&base.replace("{}", "omega_seed = 4")).unwrap();
        assert_eq!(seeded.omega().unwrap(), sample_couplings(3, 0.6, 4));

        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("omega.txt"), "0 0.1 0.2\n0.1 0 0.3\n# comment\n0.2 0.3 0\n").unwrap();
        let path = dir.path().join("net.cfg");
        std::fs::write(&path, base.replace("{}", "omega_file = \"omega.txt\"")).unwrap();
        let from_file = Config::load(&path).unwrap();
        assert_eq!(from_file.omega().unwrap(), c.omega().unwrap());
        assert_eq!(from_file.prefix(), "net");
        let resolved = from_file.resolved().unwrap();
        assert!(resolved.model.omega_file.is_none());
        assert_eq!(resolved.omega().unwrap(), c.omega().unwrap());

        let asym = base.replace("{}", "omega = [[0.0, 0.1, 0.2], [0.4, 0.0, 0.3], [0.2, 0.3, 0.0]]");
        assert_eq!(Config::parse(&asym).unwrap().model().unwrap_err().field, "model.omega");
        let both = base.replace("{}", "omega_seed = 1\nomega = [[0.0]]");
        assert_eq!(Config::parse(&both).unwrap().omega().unwrap_err().field, "model.omega");
    }
}
