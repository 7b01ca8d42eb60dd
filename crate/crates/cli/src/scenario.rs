//! Scenario assembly: the config file grammar, flag overrides, and
//! resolution of names against the library catalogs.
//!
//! A scenario is a flat `key = value` file with `[section]` headers; every
//! key can also be set by a command-line flag, flags winning. Section and
//! key names are validated eagerly so a typo is a config error naming the
//! offending key, never a silently ignored line.

use std::path::PathBuf;
use std::sync::Arc;

use kfunc_core::{
    extend, ConstraintSpec, Field, FlowOptions, Functional, Grid, KTarget, ProbeOptions, Profile,
    WeightChoice,
};

/// Failure channel of the binary; decides the exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed invocation (unknown flag, missing value, no subcommand).
    Usage(String),
    /// Bad config file, unresolvable name, or a violated library
    /// precondition. Shares the usage exit code.
    Config(String),
    /// An identity check failed; the run itself was well-formed.
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Check(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Check(m) => m,
        }
    }
}

impl From<kfunc_core::Error> for CliError {
    fn from(e: kfunc_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Fully resolved run description with defaults filled in.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub grid_n: usize,
    pub grid_length: f64,
    pub grid_periodic: bool,
    pub constraint_name: String,
    pub constraint_p: Option<f64>,
    pub constraint_h: Option<Profile>,
    pub k: f64,
    pub k_tol: Option<f64>,
    pub field_profile: Profile,
    pub extend_first: bool,
    pub seed: u64,
    pub functional_label: String,
    pub weight_spec: String,
    pub split: bool,
    pub delta_profile: Profile,
    pub eps_schedule: Vec<f64>,
    pub rel_tol: f64,
    pub flow_eta0: f64,
    pub flow_grad_tol: f64,
    pub flow_max_iters: usize,
    pub flow_eta_min: f64,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub inject_failure: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        let flow = FlowOptions::default();
        Scenario {
            grid_n: 200,
            grid_length: 1.0,
            grid_periodic: true,
            constraint_name: "identity".to_string(),
            constraint_p: None,
            constraint_h: None,
            k: 1.0,
            k_tol: None,
            field_profile: Profile::Affine { a: 1.0, b: 0.5 },
            extend_first: false,
            seed: 0,
            functional_label: "square".to_string(),
            weight_spec: "f_of_rho".to_string(),
            split: false,
            delta_profile: Profile::Sine {
                amp: 1.0,
                freq: 1,
                offset: 0.0,
            },
            eps_schedule: vec![1e-3, 5e-4],
            rel_tol: 1e-6,
            flow_eta0: flow.eta0,
            flow_grad_tol: flow.grad_tol,
            flow_max_iters: flow.max_iters,
            flow_eta_min: flow.eta_min,
            out: None,
            plot: None,
            inject_failure: false,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> CliResult<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| config_err(format!("[{section}] {key} = {value}: not a valid number")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> CliResult<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(config_err(format!(
            "[{section}] {key} = {other}: expected true or false"
        ))),
    }
}

fn parse_profile(section: &str, key: &str, value: &str) -> CliResult<Profile> {
    Profile::parse(value.trim())
        .map_err(|e| config_err(format!("[{section}] {key}: {e}")))
}

impl Scenario {
    /// Parses config text (already loaded from the `--config` path) and
    /// applies it over the defaults.
    pub fn from_config_text(text: &str) -> CliResult<Self> {
        let mut scenario = Scenario::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(format!("line {lineno}: unterminated [section]")))?;
                section = name.trim().to_string();
                if !matches!(
                    section.as_str(),
                    "grid" | "constraint" | "field" | "functional" | "deriv" | "gateaux" | "flow"
                        | "output"
                ) {
                    return Err(config_err(format!(
                        "line {lineno}: unknown section [{section}]"
                    )));
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                config_err(format!("line {lineno}: expected `key = value`, got `{line}`"))
            })?;
            scenario.set(&section, key.trim(), value.trim())?;
        }
        Ok(scenario)
    }

    /// Sets one `section.key` pair, shared by the config parser and the
    /// flag-override path. The empty section holds the global keys.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> CliResult<()> {
        match (section, key) {
            ("", "seed") => self.seed = parse_num(section, key, value)?,
            ("grid", "n") => self.grid_n = parse_num(section, key, value)?,
            ("grid", "length") => self.grid_length = parse_num(section, key, value)?,
            ("grid", "periodic") => self.grid_periodic = parse_bool(section, key, value)?,
            ("constraint", "name") => self.constraint_name = value.to_string(),
            ("constraint", "p") => self.constraint_p = Some(parse_num(section, key, value)?),
            ("constraint", "h") => self.constraint_h = Some(parse_profile(section, key, value)?),
            ("constraint", "k") => self.k = parse_num(section, key, value)?,
            ("constraint", "k-tol") => self.k_tol = Some(parse_num(section, key, value)?),
            ("field", "profile") => self.field_profile = parse_profile(section, key, value)?,
            ("field", "extend") => self.extend_first = parse_bool(section, key, value)?,
            ("functional", "label") => self.functional_label = value.to_string(),
            ("deriv", "weight") => self.weight_spec = value.to_string(),
            ("deriv", "split") => self.split = parse_bool(section, key, value)?,
            ("gateaux", "delta") => self.delta_profile = parse_profile(section, key, value)?,
            ("gateaux", "eps") => {
                self.eps_schedule = value
                    .split(',')
                    .map(|t| parse_num::<f64>(section, key, t))
                    .collect::<CliResult<_>>()?;
            }
            ("gateaux", "rel-tol") => self.rel_tol = parse_num(section, key, value)?,
            ("flow", "eta0") => self.flow_eta0 = parse_num(section, key, value)?,
            ("flow", "grad-tol") => self.flow_grad_tol = parse_num(section, key, value)?,
            ("flow", "max-iters") => self.flow_max_iters = parse_num(section, key, value)?,
            ("flow", "eta-min") => self.flow_eta_min = parse_num(section, key, value)?,
            ("output", "path") => self.out = Some(PathBuf::from(value)),
            ("output", "plot") => self.plot = Some(PathBuf::from(value)),
            _ => {
                return Err(config_err(if section.is_empty() {
                    format!("unknown global key `{key}` (only `seed` is global)")
                } else {
                    format!("unknown key `{key}` in section [{section}]")
                }))
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> CliResult<Grid> {
        let grid = if self.grid_periodic {
            Grid::periodic(self.grid_n, self.grid_length)?
        } else {
            Grid::line(self.grid_n, self.grid_length)?
        };
        Ok(grid)
    }

    pub fn constraint(&self) -> CliResult<ConstraintSpec> {
        match self.constraint_name.as_str() {
            "identity" => Ok(ConstraintSpec::identity()),
            "power" => Ok(ConstraintSpec::power(self.constraint_p.unwrap_or(2.0))?),
            "exp" => Ok(ConstraintSpec::exponential()),
            "weighted-linear" => {
                let profile = self.constraint_h.clone().ok_or_else(|| {
                    config_err("[constraint] weighted-linear needs h = PROFILE")
                })?;
                let length = self.grid_length;
                if profile.eval_at(0.0, length).is_none() {
                    return Err(config_err(
                        "[constraint] h must be an analytic profile (constant, affine, sine)",
                    ));
                }
                Ok(ConstraintSpec::weighted_linear(move |x| {
                    profile.eval_at(x, length).expect("analytic profile")
                }))
            }
            other => Err(config_err(format!(
                "[constraint] unknown name `{other}` (identity, power, exp, weighted-linear)"
            ))),
        }
    }

    pub fn ktarget(&self) -> CliResult<KTarget> {
        let k = KTarget::new(self.k)?;
        Ok(match self.k_tol {
            Some(tol) => k.with_tolerance(tol),
            None => k,
        })
    }

    /// Realizes the initial field; retracts it onto the constraint set
    /// when `[field] extend` is on.
    pub fn field(&self, grid: &Grid, c: &ConstraintSpec, k: &KTarget) -> CliResult<Field> {
        let rho = self.field_profile.realize(grid, self.seed)?;
        if self.extend_first {
            Ok(extend(&rho, c, k)?)
        } else {
            Ok(rho)
        }
    }

    /// Resolves the functional label; `+` builds sums of catalog entries.
    pub fn functional(&self) -> CliResult<Functional> {
        let mut parts = self.functional_label.split('+').map(str::trim);
        let first = parts
            .next()
            .filter(|p| !p.is_empty())
            .ok_or_else(|| config_err("[functional] label must not be empty"))?;
        let mut total = self.functional_part(first)?;
        for part in parts {
            total = total.add(self.functional_part(part)?);
        }
        Ok(total)
    }

    fn functional_part(&self, label: &str) -> CliResult<Functional> {
        match label {
            "square" => Ok(Functional::square()),
            "quartic" => Ok(Functional::quartic()),
            "entropy" => Ok(Functional::entropy()),
            "gradsq" => Ok(Functional::gradient_square()),
            "ratio-shape" => Ok(Functional::shape_concentration()),
            "ratio-square" => Ok(Functional::square_concentration()),
            "k-identity" => Ok(Functional::of_k(
                "k-identity",
                |k| k,
                |_| 1.0,
                Arc::new(self.constraint()?),
            )),
            "k-square" => Ok(Functional::of_k(
                "k-square",
                |k| k * k,
                |k| 2.0 * k,
                Arc::new(self.constraint()?),
            )),
            "k-sin" => Ok(Functional::of_k(
                "k-sin",
                |k| k.sin(),
                |k| k.cos(),
                Arc::new(self.constraint()?),
            )),
            other => {
                if let Some(spec) = other.strip_prefix("linear:") {
                    let profile = parse_profile("functional", "label", spec)?;
                    let length = self.grid_length;
                    if profile.eval_at(0.0, length).is_none() {
                        return Err(config_err(
                            "[functional] linear: needs an analytic profile",
                        ));
                    }
                    return Ok(Functional::linear("linear", move |x| {
                        profile.eval_at(x, length).expect("analytic profile")
                    }));
                }
                Err(config_err(format!(
                    "[functional] unknown label `{other}` (square, quartic, entropy, gradsq, \
                     ratio-shape, ratio-square, k-identity, k-square, k-sin, linear:PROFILE, \
                     `+` for sums)"
                )))
            }
        }
    }

    pub fn weight(&self, grid: &Grid) -> CliResult<WeightChoice> {
        let spec = self.weight_spec.trim();
        match spec {
            "f_of_rho" => Ok(WeightChoice::FOfRho),
            _ => {
                if let Some(idx) = spec.strip_prefix("point:") {
                    let i: usize = idx.parse().map_err(|_| {
                        config_err(format!("[deriv] weight point:{idx}: bad node index"))
                    })?;
                    return Ok(WeightChoice::Point(i));
                }
                if let Some(profile) = spec.strip_prefix("q:") {
                    let q = parse_profile("deriv", "weight", profile)?
                        .realize(grid, self.seed.wrapping_add(1))?;
                    return Ok(WeightChoice::CustomQ(q));
                }
                Err(config_err(format!(
                    "[deriv] unknown weight `{spec}` (f_of_rho, point:I, q:PROFILE)"
                )))
            }
        }
    }

    pub fn delta_field(&self, grid: &Grid) -> CliResult<Field> {
        Ok(self.delta_profile.realize(grid, self.seed.wrapping_add(2))?)
    }

    pub fn probe_options(&self) -> ProbeOptions {
        ProbeOptions {
            eps_schedule: self.eps_schedule.clone(),
            rel_tol: self.rel_tol,
        }
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            eta0: self.flow_eta0,
            grad_tol: self.flow_grad_tol,
            max_iters: self.flow_max_iters,
            eta_min: self.flow_eta_min,
            extend_first: self.extend_first,
            ..FlowOptions::default()
        }
    }
}
