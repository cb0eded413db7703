//! Run configuration: a flat key-value text format with dotted section
//! keys (`solver.tol = 1e-5`), `#` comments, defaults for every key, and
//! strict validation. Unknown keys are rejected. The fully resolved
//! configuration is echoed into a manifest next to every run's outputs so
//! a run can be reproduced exactly.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::report::format_float;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),
    #[error("key '{key}': cannot parse '{value}' as {expected}")]
    Parse {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("validation failed for '{key}': {reason}")]
    Validation { key: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model_name: String,
    pub theta: f64,
    pub p: f64,
    /// Explicit `C_p`; when absent it is derived from the best available
    /// `S_p` (a prior `sp.json`, else the built-in reference value).
    pub cp: Option<f64>,
    pub v_amplitude: f64,

    pub grid_half_width: f64,
    pub grid_n: usize,

    pub sp_r_max: f64,
    pub sp_m: usize,
    pub sp_restarts: usize,

    pub solver_path_nodes: usize,
    pub solver_tol: f64,
    pub solver_max_sweeps: u64,
    pub seed: u64,
    pub rho_scan: Vec<f64>,

    pub oracle_r_max: f64,
    pub oracle_m: usize,
    pub oracle_step: f64,
    pub oracle_v0_tol: f64,

    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model_name: "power".to_string(),
            theta: 6.0,
            p: 6.0,
            cp: None,
            v_amplitude: 0.5,
            grid_half_width: 6.0,
            grid_n: 128,
            sp_r_max: 12.0,
            sp_m: 1200,
            sp_restarts: 5,
            solver_path_nodes: 21,
            solver_tol: 1e-5,
            solver_max_sweeps: 50_000,
            seed: 42,
            rho_scan: vec![1e-3, 1e-2, 1e-1],
            oracle_r_max: 18.0,
            oracle_m: 7200,
            oracle_step: 1e-3,
            oracle_v0_tol: 1e-12,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Parses the flat key-value text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: lineno + 1,
                text: raw.to_string(),
            })?;
            cfg.apply(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(
            key: &str,
            value: &str,
            expected: &'static str,
        ) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::Parse {
                key: key.to_string(),
                value: value.to_string(),
                expected,
            })
        }
        match key {
            "model.name" => self.model_name = value.to_string(),
            "model.theta" => self.theta = num(key, value, "real")?,
            "model.p" => self.p = num(key, value, "real")?,
            "model.cp" => self.cp = Some(num(key, value, "real")?),
            "model.v_amplitude" => self.v_amplitude = num(key, value, "real")?,
            "grid.half_width" => self.grid_half_width = num(key, value, "real")?,
            "grid.n" => self.grid_n = num(key, value, "integer")?,
            "sp.r_max" => self.sp_r_max = num(key, value, "real")?,
            "sp.m" => self.sp_m = num(key, value, "integer")?,
            "sp.restarts" => self.sp_restarts = num(key, value, "integer")?,
            "solver.path_nodes" => self.solver_path_nodes = num(key, value, "integer")?,
            "solver.tol" => self.solver_tol = num(key, value, "real")?,
            "solver.max_sweeps" => self.solver_max_sweeps = num(key, value, "integer")?,
            "solver.seed" => self.seed = num(key, value, "integer")?,
            "solver.rho_scan" => {
                let mut scan = Vec::new();
                for part in value.split(',') {
                    scan.push(num::<f64>(key, part.trim(), "comma-separated reals")?);
                }
                self.rho_scan = scan;
            }
            "oracle.r_max" => self.oracle_r_max = num(key, value, "real")?,
            "oracle.m" => self.oracle_m = num(key, value, "integer")?,
            "oracle.step" => self.oracle_step = num(key, value, "real")?,
            "oracle.v0_tol" => self.oracle_v0_tol = num(key, value, "real")?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Checks every numeric field against the module preconditions before
    /// any computation starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn fail(key: &str, reason: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::Validation {
                key: key.to_string(),
                reason: reason.into(),
            })
        }
        crate::model::BuiltinName::parse(&self.model_name)
            .map_err(|e| ConfigError::Validation {
                key: "model.name".into(),
                reason: e.to_string(),
            })?;
        if !(self.grid_half_width > 0.0) {
            return fail("grid.half_width", "must be positive");
        }
        if self.grid_n < 3 {
            return fail("grid.n", "need at least 3 interior nodes per axis");
        }
        if !(self.sp_r_max > 0.0) {
            return fail("sp.r_max", "must be positive");
        }
        if self.sp_m < 3 {
            return fail("sp.m", "need at least 3 radial nodes");
        }
        if self.sp_restarts < 1 {
            return fail("sp.restarts", "need at least 1 restart");
        }
        if self.solver_path_nodes < 3 {
            return fail("solver.path_nodes", "need at least 3 path nodes");
        }
        if !(self.solver_tol > 0.0) {
            return fail("solver.tol", "must be positive");
        }
        if self.solver_max_sweeps == 0 {
            return fail("solver.max_sweeps", "must be positive");
        }
        if self.rho_scan.iter().any(|&r| !(r > 0.0)) {
            return fail("solver.rho_scan", "all radii must be positive");
        }
        if !(self.oracle_r_max > 0.0) {
            return fail("oracle.r_max", "must be positive");
        }
        if self.oracle_m < 3 {
            return fail("oracle.m", "need at least 3 radial nodes");
        }
        if !(self.oracle_step > 0.0 && self.oracle_step < self.oracle_r_max) {
            return fail("oracle.step", "must be in (0, oracle.r_max)");
        }
        if !(self.oracle_v0_tol > 0.0) {
            return fail("oracle.v0_tol", "must be positive");
        }
        if let Some(cp) = self.cp {
            if !(cp > 0.0) {
                return fail("model.cp", "must be positive");
            }
        }
        if !(self.v_amplitude >= 0.0) {
            return fail("model.v_amplitude", "must be nonnegative");
        }
        Ok(())
    }

    /// All keys with fully resolved values, in the input format; floats at
    /// 17 significant digits so the manifest round-trips exactly.
    pub fn manifest(&self, resolved_cp: f64) -> String {
        let mut entries: BTreeMap<&str, String> = BTreeMap::new();
        entries.insert("model.name", self.model_name.clone());
        entries.insert("model.theta", format_float(self.theta));
        entries.insert("model.p", format_float(self.p));
        entries.insert("model.cp", format_float(resolved_cp));
        entries.insert("model.v_amplitude", format_float(self.v_amplitude));
        entries.insert("grid.half_width", format_float(self.grid_half_width));
        entries.insert("grid.n", self.grid_n.to_string());
        entries.insert("sp.r_max", format_float(self.sp_r_max));
        entries.insert("sp.m", self.sp_m.to_string());
        entries.insert("sp.restarts", self.sp_restarts.to_string());
        entries.insert("solver.path_nodes", self.solver_path_nodes.to_string());
        entries.insert("solver.tol", format_float(self.solver_tol));
        entries.insert("solver.max_sweeps", self.solver_max_sweeps.to_string());
        entries.insert("solver.seed", self.seed.to_string());
        entries.insert(
            "solver.rho_scan",
            self.rho_scan
                .iter()
                .map(|r| format_float(*r))
                .collect::<Vec<_>>()
                .join(","),
        );
        entries.insert("oracle.r_max", format_float(self.oracle_r_max));
        entries.insert("oracle.m", self.oracle_m.to_string());
        entries.insert("oracle.step", format_float(self.oracle_step));
        entries.insert("oracle.v0_tol", format_float(self.oracle_v0_tol));
        entries.insert("output.dir", self.output_dir.display().to_string());

        let mut out = String::new();
        for (k, v) in entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}
