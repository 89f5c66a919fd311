//! Run configuration: TOML file, `--set` overrides, and model construction.

use std::path::PathBuf;
use std::sync::Arc;

use fcpmp::certificate::CertificateOptions;
use fcpmp::cones::AdmissibleSet;
use fcpmp::models::buck::{buck_problem, BuckParams};
use fcpmp::models::example2::example2_problem;
use fcpmp::models::pendulum::{pendulum_problem, PendulumParams};
use fcpmp::problem::{LinearDynamics, QuadraticCost, QuadraticTerminalCost};
use fcpmp::solver::SolverOptions;
use fcpmp::spectrum::{build_band_constraint, BannedBinSet};
use fcpmp::ProblemSpec;
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Pendulum,
    Example2,
    Buck,
    CustomLinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example2Config {
    pub initial_state: [f64; 2],
    pub horizon: usize,
}

impl Default for Example2Config {
    fn default() -> Self {
        Self {
            initial_state: [1.0, 1.0],
            horizon: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuckConfig {
    pub r: f64,
    pub l: f64,
    pub r_d: f64,
    pub t_clk: f64,
    pub i_ref: f64,
    pub i_init: f64,
    pub i_final: f64,
    pub horizon: usize,
}

impl Default for BuckConfig {
    fn default() -> Self {
        let p = BuckParams::default();
        Self {
            r: p.r,
            l: p.l,
            r_d: p.r_d,
            t_clk: p.t_clk,
            i_ref: p.i_ref,
            i_init: 0.5,
            i_final: 0.9,
            horizon: 6,
        }
    }
}

impl BuckConfig {
    pub fn params(&self) -> BuckParams {
        BuckParams {
            r: self.r,
            l: self.l,
            r_d: self.r_d,
            t_clk: self.t_clk,
            i_ref: self.i_ref,
        }
    }
}

/// Time-invariant LQ problem `x+ = A x + B u` with `1/2 x'Qx + 1/2 u'Ru` stage cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomLinearConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    /// Terminal weight; zero when absent.
    pub qt: Option<Vec<Vec<f64>>>,
    pub horizon: usize,
    pub initial_state: Vec<f64>,
    pub final_state: Option<Vec<f64>>,
    /// Symmetric bounds `|u_i| <= b_i`.
    pub control_bounds: Option<Vec<f64>>,
    /// Symmetric bounds `|x_i| <= b_i`, applied to every non-fixed state.
    pub state_bounds: Option<Vec<f64>>,
    /// Banned DFT bins, applied to every control component.
    pub banned_control_bins: Vec<usize>,
    /// Banned DFT bins, applied to every state component.
    pub banned_state_bins: Vec<usize>,
}

impl Default for CustomLinearConfig {
    fn default() -> Self {
        Self {
            a: vec![vec![1.0, 0.1], vec![0.0, 1.0]],
            b: vec![vec![0.005], vec![0.1]],
            q: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            r: vec![vec![1.0]],
            qt: None,
            horizon: 20,
            initial_state: vec![1.0, 0.0],
            final_state: Some(vec![0.0, 0.0]),
            control_bounds: Some(vec![2.0]),
            state_bounds: None,
            banned_control_bins: Vec::new(),
            banned_state_bins: Vec::new(),
        }
    }
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: Model,
    pub seed: u64,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    pub pendulum: PendulumParams,
    pub example2: Example2Config,
    pub buck: BuckConfig,
    pub custom_linear: CustomLinearConfig,
    pub solver: SolverOptions,
    pub certificate: CertificateOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: Model::Pendulum,
            seed: 0,
            out_dir: None,
            pendulum: PendulumParams::default(),
            example2: Example2Config::default(),
            buck: BuckConfig::default(),
            custom_linear: CustomLinearConfig::default(),
            solver: SolverOptions::default(),
            certificate: CertificateOptions::default(),
        }
    }
}

const SECTIONS: [&str; 6] = ["pendulum", "example2", "buck", "custom_linear", "solver", "certificate"];
const SCALARS: [&str; 3] = ["model", "seed", "out_dir"];

/// Parse a `--set` value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

/// Apply `key=value` with a dotted key to `table`.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), String> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override `{assignment}` is not of the form key=value"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(format!("override key `{}` is malformed", key.trim()));
    }
    let (last, parents) = path.split_last().expect("split yields at least one piece");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("override key `{}`: `{p}` is not a section", key.trim()))?;
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Overlay `user` onto `base`, recursing into tables and replacing everything else.
fn merge(base: &mut Table, user: Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn section<T: Serialize + DeserializeOwned + Default>(name: &str, user: Option<Value>) -> Result<T, String> {
    let Some(user) = user else {
        return Ok(T::default());
    };
    let Value::Table(user) = user else {
        return Err(format!("`{name}` must be a section"));
    };
    let mut base = Table::try_from(T::default()).map_err(|e| format!("[{name}]: {e}"))?;
    merge(&mut base, user);
    Value::Table(base).try_into().map_err(|e| format!("[{name}]: {e}"))
}

impl RunConfig {
    /// Resolve a configuration from optional TOML text and `--set` overrides.
    pub fn resolve(text: Option<&str>, overrides: &[String]) -> Result<Self, String> {
        let mut table = match text {
            Some(t) => t.parse::<Table>().map_err(|e| format!("config: {e}"))?,
            None => Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        for key in table.keys() {
            if !SECTIONS.contains(&key.as_str()) && !SCALARS.contains(&key.as_str()) {
                return Err(format!("unknown config key `{key}`"));
            }
        }
        let mut cfg = RunConfig::default();
        if let Some(v) = table.remove("model") {
            cfg.model = v.try_into().map_err(|e| format!("model: {e}"))?;
        }
        if let Some(v) = table.remove("seed") {
            let seed = v
                .as_integer()
                .filter(|s| *s >= 0)
                .ok_or("seed must be a nonnegative integer")?;
            cfg.seed = seed as u64;
        }
        if let Some(v) = table.remove("out_dir") {
            cfg.out_dir = Some(v.as_str().ok_or("out_dir must be a string")?.into());
        }
        cfg.pendulum = section("pendulum", table.remove("pendulum"))?;
        cfg.example2 = section("example2", table.remove("example2"))?;
        cfg.buck = section("buck", table.remove("buck"))?;
        cfg.custom_linear = section("custom_linear", table.remove("custom_linear"))?;
        cfg.solver = section("solver", table.remove("solver"))?;
        cfg.certificate = section("certificate", table.remove("certificate"))?;
        cfg.solver.check().map_err(|e| format!("[solver]: {e}"))?;
        Ok(cfg)
    }

    /// Propagate the run seed into the solver and certificate options.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.solver.seed = seed;
        self.certificate.seed = seed;
        self
    }

    pub fn build_problem(&self) -> Result<ProblemSpec, String> {
        match self.model {
            Model::Pendulum => pendulum_problem(&self.pendulum).map_err(|e| format!("[pendulum]: {e}")),
            Model::Example2 => {
                if self.example2.horizon == 0 {
                    return Err("[example2]: horizon must be positive".into());
                }
                Ok(example2_problem(
                    DVector::from_column_slice(&self.example2.initial_state),
                    self.example2.horizon,
                ))
            }
            Model::Buck => {
                let b = &self.buck;
                if b.horizon == 0 {
                    return Err("[buck]: horizon must be positive".into());
                }
                buck_problem(b.params(), b.i_init, b.i_final, b.horizon).map_err(|e| format!("[buck]: {e}"))
            }
            Model::CustomLinear => self.custom_linear.build().map_err(|e| format!("[custom_linear]: {e}")),
        }
    }

    /// The pair of series plotted against each other in `phase.csv`, as
    /// (`x` or `u`, zero-based component).
    pub fn phase_pair(&self) -> [(char, usize); 2] {
        match self.model {
            Model::Pendulum => [('x', 1), ('x', 3)],
            Model::Example2 => [('x', 0), ('x', 1)],
            Model::Buck => [('x', 0), ('u', 0)],
            Model::CustomLinear if self.custom_linear.a.len() >= 2 => [('x', 0), ('x', 1)],
            Model::CustomLinear => [('x', 0), ('u', 0)],
        }
    }
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(format!("matrix `{name}` is empty"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!(
            "matrix `{name}` row {i} has {} entries, expected {ncols}",
            r.len()
        ));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn expect_shape(name: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<(), String> {
    if m.shape() != (rows, cols) {
        return Err(format!(
            "matrix `{name}` is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        ));
    }
    Ok(())
}

fn expect_len(name: &str, v: &[f64], len: usize) -> Result<(), String> {
    if v.len() != len {
        return Err(format!("`{name}` has {} entries, expected {len}", v.len()));
    }
    Ok(())
}

impl CustomLinearConfig {
    pub fn build(&self) -> Result<ProblemSpec, String> {
        let a = matrix("a", &self.a)?;
        let n = a.nrows();
        expect_shape("a", &a, n, n)?;
        let b = matrix("b", &self.b)?;
        let m = b.ncols();
        expect_shape("b", &b, n, m)?;
        let q = matrix("q", &self.q)?;
        expect_shape("q", &q, n, n)?;
        let r = matrix("r", &self.r)?;
        expect_shape("r", &r, m, m)?;
        let qt = match &self.qt {
            Some(rows) => {
                let qt = matrix("qt", rows)?;
                expect_shape("qt", &qt, n, n)?;
                qt
            }
            None => DMatrix::zeros(n, n),
        };
        if self.horizon == 0 {
            return Err("horizon must be positive".into());
        }
        expect_len("initial_state", &self.initial_state, n)?;
        let mut spec = ProblemSpec::stationary(
            self.horizon,
            Arc::new(LinearDynamics::new(a, b)),
            Arc::new(QuadraticCost::new(q, r)),
            Arc::new(QuadraticTerminalCost::new(qt)),
        )
        .with_initial_state(DVector::from_column_slice(&self.initial_state));
        if let Some(xf) = &self.final_state {
            expect_len("final_state", xf, n)?;
            spec = spec.with_terminal_state(DVector::from_column_slice(xf));
        }
        if let Some(bounds) = &self.state_bounds {
            expect_len("state_bounds", bounds, n)?;
            spec = spec.with_state_set(AdmissibleSet::symmetric_box(bounds));
        }
        if let Some(bounds) = &self.control_bounds {
            expect_len("control_bounds", bounds, m)?;
            spec = spec.with_control_set(AdmissibleSet::symmetric_box(bounds));
        }
        if !self.banned_control_bins.is_empty() {
            let banned = BannedBinSet::uniform(self.horizon, m, self.banned_control_bins.iter().copied());
            spec = spec.with_control_freq(build_band_constraint(self.horizon, m, &banned).map_err(|e| e.to_string())?);
        }
        if !self.banned_state_bins.is_empty() {
            let len = self.horizon + 1;
            let banned = BannedBinSet::uniform(len, n, self.banned_state_bins.iter().copied());
            spec = spec.with_state_freq(build_band_constraint(len, n, &banned).map_err(|e| e.to_string())?);
        }
        for set in spec.state_sets.iter().chain(&spec.control_sets) {
            set.check().map_err(|e| e.to_string())?;
        }
        Ok(spec)
    }
}
