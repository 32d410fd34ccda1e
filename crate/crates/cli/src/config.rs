use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dhj_core::hj_flow::BranchPolicy;
use dhj_core::optctrl::{builtin, discretize_right, reduce, ControlProblem, DiscretizedHamiltonian};
use dhj_core::NewtonConfig;

/// Rejected configuration; maps to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "dhj", version, about = "Discrete Hamilton-Jacobi experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the right discrete Hamilton map.
    Simulate(RunArgs),
    /// Generating-function recurrence for DS.
    HjFlow(RunArgs),
    /// Vector-field recurrence for the section gamma.
    HjVf(RunArgs),
    /// Trajectory, both HJ solvers and their errors side by side.
    Compare(RunArgs),
    /// Run the invariant checks and report PASS/FAIL.
    Check(RunArgs),
}

impl Command {
    pub fn mode(&self) -> Mode {
        match self {
            Command::Simulate(_) => Mode::Simulate,
            Command::HjFlow(_) => Mode::HjFlow,
            Command::HjVf(_) => Mode::HjVf,
            Command::Compare(_) => Mode::Compare,
            Command::Check(_) => Mode::Check,
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a) | Command::HjFlow(a) | Command::HjVf(a) | Command::Compare(a) | Command::Check(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    HjFlow,
    HjVf,
    Compare,
    Check,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::HjFlow => "hj-flow",
            Mode::HjVf => "hj-vf",
            Mode::Compare => "compare",
            Mode::Check => "check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Plus,
    Minus,
    Continuity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Solver {
    /// Closed-form recurrences of the benchmark (r = s = 1 only).
    #[default]
    Example,
    /// Newton-based solvers on the discretized model.
    Generic,
}

/// Flags shared by every subcommand. Each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Builtin model key.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    /// Initial configuration.
    #[arg(long, allow_hyphen_values = true)]
    pub q1: Option<f64>,
    /// Initial momentum.
    #[arg(long, allow_hyphen_values = true)]
    pub p1: Option<f64>,
    /// Overrides the second grid point fed to the HJ recurrences.
    #[arg(long, allow_hyphen_values = true)]
    pub q2: Option<f64>,
    /// Initial DS for hj-flow.
    #[arg(long, allow_hyphen_values = true)]
    pub ds1: Option<f64>,
    /// Initial section value for hj-vf.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Auxiliary constant of the DS recurrence.
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    #[arg(long, value_enum)]
    pub branch: Option<BranchArg>,
    #[arg(long, value_enum)]
    pub solver: Option<Solver>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Key/value (TOML) file with any of the options above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Log scale for the |.| panels.
    #[arg(long)]
    pub log: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub damping: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub fd_step: Option<f64>,
    /// Seed for the sampled checks.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub q1: f64,
    pub p1: f64,
    pub q2: Option<f64>,
    pub ds1: f64,
    pub gamma1: f64,
    pub steps: usize,
    pub newton: NewtonConfig,
    pub hj_h: f64,
    pub branch: BranchPolicy,
    pub solver: Solver,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub log_scale: bool,
    pub seed: u64,
}

impl RunConfig {
    pub fn defaults(mode: Mode) -> Self {
        let params = [("r".to_string(), 1.0), ("s".to_string(), 1.0)].into_iter().collect();
        Self {
            mode,
            model: "sakamoto1d".into(),
            params,
            q1: 5e-8,
            p1: 0.0,
            q2: None,
            ds1: 0.0,
            gamma1: 0.0,
            steps: 18,
            newton: NewtonConfig::default(),
            hj_h: 1e-4,
            branch: BranchPolicy::Continuity,
            solver: Solver::Example,
            csv: None,
            svg: None,
            log_scale: false,
            seed: 42,
        }
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(mode: Mode, args: &RunArgs) -> anyhow::Result<Self> {
        let mut cfg = Self::defaults(mode);
        if let Some(path) = &args.config {
            cfg.apply_file(path)?;
        }
        cfg.apply_args(args);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| bad(format!("{}: {e}", path.display())))?;
        for (key, value) in &table {
            let num = || -> anyhow::Result<f64> {
                match value {
                    toml::Value::Float(x) => Ok(*x),
                    toml::Value::Integer(i) => Ok(*i as f64),
                    _ => Err(bad(format!("'{key}' must be a number"))),
                }
            };
            let count = || -> anyhow::Result<usize> {
                value
                    .as_integer()
                    .and_then(|i| usize::try_from(i).ok())
                    .ok_or_else(|| bad(format!("'{key}' must be a non-negative integer")))
            };
            let text = || -> anyhow::Result<&str> { value.as_str().ok_or_else(|| bad(format!("'{key}' must be a string"))) };
            match key.as_str() {
                "model" => self.model = text()?.to_string(),
                "r" | "s" => {
                    self.params.insert(key.clone(), num()?);
                }
                "q1" => self.q1 = num()?,
                "p1" => self.p1 = num()?,
                "q2" => self.q2 = Some(num()?),
                "ds1" => self.ds1 = num()?,
                "gamma1" => self.gamma1 = num()?,
                "steps" => self.steps = count()?,
                "h" => self.hj_h = num()?,
                "branch" => {
                    self.branch = match text()? {
                        "plus" => BranchPolicy::Plus,
                        "minus" => BranchPolicy::Minus,
                        "continuity" => BranchPolicy::Continuity,
                        other => return Err(bad(format!("unknown branch '{other}'"))),
                    }
                }
                "solver" => {
                    self.solver = Solver::from_str(text()?, false).map_err(|e| bad(format!("solver: {e}")))?
                }
                "csv" => self.csv = Some(PathBuf::from(text()?)),
                "svg" => self.svg = Some(PathBuf::from(text()?)),
                "log" => {
                    self.log_scale = value.as_bool().ok_or_else(|| bad("'log' must be true or false"))?;
                }
                "tol" => self.newton.tol = num()?,
                "max_iter" | "max-iter" => self.newton.max_iter = count()?,
                "damping" => self.newton.damping = num()?,
                "fd_step" | "fd-step" => self.newton.fd_step = num()?,
                "seed" => self.seed = count()? as u64,
                other => return Err(bad(format!("unknown config key '{other}'"))),
            }
        }
        Ok(())
    }

    fn apply_args(&mut self, a: &RunArgs) {
        if let Some(m) = &a.model {
            self.model = m.clone();
        }
        if let Some(r) = a.r {
            self.params.insert("r".into(), r);
        }
        if let Some(s) = a.s {
            self.params.insert("s".into(), s);
        }
        set(&mut self.q1, a.q1);
        set(&mut self.p1, a.p1);
        if a.q2.is_some() {
            self.q2 = a.q2;
        }
        set(&mut self.ds1, a.ds1);
        set(&mut self.gamma1, a.gamma1);
        set(&mut self.steps, a.steps);
        set(&mut self.hj_h, a.h);
        if let Some(b) = a.branch {
            self.branch = match b {
                BranchArg::Plus => BranchPolicy::Plus,
                BranchArg::Minus => BranchPolicy::Minus,
                BranchArg::Continuity => BranchPolicy::Continuity,
            };
        }
        set(&mut self.solver, a.solver);
        if a.csv.is_some() {
            self.csv = a.csv.clone();
        }
        if a.svg.is_some() {
            self.svg = a.svg.clone();
        }
        self.log_scale |= a.log;
        set(&mut self.newton.tol, a.tol);
        set(&mut self.newton.max_iter, a.max_iter);
        set(&mut self.newton.damping, a.damping);
        set(&mut self.newton.fd_step, a.fd_step);
        set(&mut self.seed, a.seed);
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.steps == 0 {
            return Err(bad("steps must be >= 1"));
        }
        for (name, x) in [("q1", self.q1), ("p1", self.p1), ("ds1", self.ds1), ("gamma1", self.gamma1), ("h", self.hj_h)] {
            if !x.is_finite() {
                return Err(bad(format!("{name} must be finite")));
            }
        }
        if self.q2.is_some_and(|q| !q.is_finite()) {
            return Err(bad("q2 must be finite"));
        }
        self.newton.validate().map_err(|e| bad(e.to_string()))?;
        self.problem()?;
        if self.solver == Solver::Example && !self.closed_form_applies() {
            return Err(bad(
                "the example solver needs sakamoto1d with r = s = 1; use --solver generic",
            ));
        }
        Ok(())
    }

    pub fn problem(&self) -> anyhow::Result<ControlProblem> {
        builtin(&self.model, &self.params).map_err(|e| bad(e.to_string()))
    }

    pub fn hamiltonian(&self) -> anyhow::Result<DiscretizedHamiltonian> {
        Ok(discretize_right(reduce(self.problem()?).with_config(self.newton)))
    }

    /// The closed-form recurrences are derived for the unit-parameter benchmark.
    pub fn closed_form_applies(&self) -> bool {
        self.model == "sakamoto1d" && self.params.get("r") == Some(&1.0) && self.params.get("s") == Some(&1.0)
    }

    /// `# key = value` lines recording everything needed to rerun.
    pub fn header_lines(&self) -> Vec<String> {
        let mut out = vec![format!("dhj {}", self.mode.name()), format!("model = \"{}\"", self.model)];
        out.extend(self.params.iter().map(|(k, v)| format!("{k} = {v:e}")));
        out.push(format!("q1 = {:e}", self.q1));
        out.push(format!("p1 = {:e}", self.p1));
        if let Some(q2) = self.q2 {
            out.push(format!("q2 = {q2:e}"));
        }
        out.push(format!("ds1 = {:e}", self.ds1));
        out.push(format!("gamma1 = {:e}", self.gamma1));
        out.push(format!("steps = {}", self.steps));
        out.push(format!("h = {:e}", self.hj_h));
        out.push(format!("branch = \"{}\"", branch_name(self.branch)));
        out.push(format!(
            "solver = \"{}\"",
            match self.solver {
                Solver::Example => "example",
                Solver::Generic => "generic",
            }
        ));
        out.push(format!("tol = {:e}", self.newton.tol));
        out.push(format!("max_iter = {}", self.newton.max_iter));
        out.push(format!("damping = {:e}", self.newton.damping));
        out.push(format!("fd_step = {:e}", self.newton.fd_step));
        out
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn branch_name(b: BranchPolicy) -> &'static str {
    match b {
        BranchPolicy::Plus => "plus",
        BranchPolicy::Minus => "minus",
        BranchPolicy::Continuity => "continuity",
    }
}
