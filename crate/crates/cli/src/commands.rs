use dhj_core::hj_flow::{commutativity_defect, run_example_flow, solve_generating_sequence, GeneratingSequence, Root};
use dhj_core::hj_vf::{run_example_vf, slope, solve_gamma_generic, vf_residual, GammaSequence};
use dhj_core::mechanics::{run_trajectory, DiscreteHamiltonian, DiscreteTrajectory, Truncation};
use dhj_core::{scalar, PhasePoint, RealVec};

use crate::config::{Mode, RunConfig, Solver};
use crate::csv::{fmt_num, Cell, Table};
use crate::svg::{signed_and_abs, Series};

/// Rendered artifacts of one command.
#[derive(Debug, Clone, Default)]
pub struct Output {
    /// CSV table, or the report text for `check`.
    pub text: String,
    pub svg: Option<String>,
    /// Set when a numerical failure truncated the run.
    pub failure: Option<String>,
}

pub fn execute(cfg: &RunConfig) -> anyhow::Result<Output> {
    match cfg.mode {
        Mode::Simulate => simulate(cfg),
        Mode::HjFlow => hj_flow(cfg),
        Mode::HjVf => hj_vf(cfg),
        Mode::Compare => compare(cfg),
        Mode::Check => {
            let h = cfg.hamiltonian()?;
            let problem = cfg.problem()?;
            let report = crate::check::run_checks(&h, Some(&problem), cfg);
            Ok(Output {
                text: report.render(),
                svg: None,
                failure: (!report.passed()).then(|| format!("{} check(s) failed", report.failures())),
            })
        }
    }
}

fn describe(t: &Truncation) -> String {
    format!("truncated: {} at j={} ({})", t.error.kind(), t.index, t.error)
}

fn trajectory(cfg: &RunConfig, h: &dyn DiscreteHamiltonian) -> anyhow::Result<DiscreteTrajectory> {
    let x0 = PhasePoint::scalar(1, cfg.q1, cfg.p1)?;
    Ok(run_trajectory(h, &x0, cfg.steps, &cfg.newton)?)
}

/// The configuration grid fed to the HJ recurrences: the trajectory's `q`
/// values, with the second point optionally overridden.
fn grid(cfg: &RunConfig, traj: &DiscreteTrajectory) -> Vec<f64> {
    let mut q = traj.q_values();
    if let Some(q2) = cfg.q2 {
        if q.len() >= 2 {
            q[1] = q2;
        } else {
            q.push(q2);
        }
    }
    q
}

struct Failures(Vec<String>);

impl Failures {
    fn note(&mut self, table: &mut Table, prefix: &str, t: Option<&Truncation>) {
        if let Some(t) = t {
            let line = format!("{prefix}{}", describe(t));
            table.comments.push(line.clone());
            self.0.push(line);
        }
    }

    fn into_option(self) -> Option<String> {
        (!self.0.is_empty()).then(|| self.0.join("; "))
    }
}

fn short_grid(table: &mut Table, fails: &mut Failures) {
    let line = "truncated: trajectory ended before a second grid point".to_string();
    table.comments.push(line.clone());
    fails.0.push(line);
}

pub fn simulate(cfg: &RunConfig) -> anyhow::Result<Output> {
    let h = cfg.hamiltonian()?;
    let traj = trajectory(cfg, &h)?;
    let mut table = Table::new(cfg.header_lines(), &["j", "q", "p", "abs_q", "abs_p"]);
    let mut fails = Failures(Vec::new());
    fails.note(&mut table, "", traj.meta.truncation.as_ref());
    for x in &traj.points {
        let (q, p) = (x.q[0], x.p[0]);
        table.push(vec![Cell::Int(x.index), q.into(), p.into(), q.abs().into(), p.abs().into()]);
    }
    let svg = cfg.svg.as_ref().map(|_| {
        let s = Series::new("p", &traj.q_values(), &traj.p_values());
        signed_and_abs("discrete trajectory", "q", "p", vec![s], cfg.log_scale)
    });
    Ok(Output {
        text: table.render(),
        svg,
        failure: fails.into_option(),
    })
}

/// Flow sequence per the configured solver.
fn flow_sequence(cfg: &RunConfig, h: &dyn DiscreteHamiltonian, grid: &[f64]) -> anyhow::Result<GeneratingSequence> {
    Ok(match cfg.solver {
        Solver::Example => run_example_flow(grid, cfg.ds1, cfg.hj_h, cfg.branch)?,
        Solver::Generic => solve_generating_sequence(h, &scalar(cfg.q1), 0.0, &scalar(cfg.ds1), cfg.steps, &cfg.newton)?,
    })
}

fn gamma_sequence(cfg: &RunConfig, h: &dyn DiscreteHamiltonian, grid: &[f64]) -> anyhow::Result<GammaSequence> {
    Ok(match cfg.solver {
        Solver::Example => run_example_vf(grid, cfg.gamma1)?,
        Solver::Generic => {
            let g: Vec<RealVec> = grid.iter().map(|&q| scalar(q)).collect();
            solve_gamma_generic(h, &g, &scalar(cfg.gamma1), &cfg.newton)?
        }
    })
}

pub fn hj_flow(cfg: &RunConfig) -> anyhow::Result<Output> {
    let h = cfg.hamiltonian()?;
    let traj = trajectory(cfg, &h)?;
    let grid = grid(cfg, &traj);
    let mut table = Table::new(cfg.header_lines(), &["j", "q", "S", "DS", "branch", "residual"]);
    let mut fails = Failures(Vec::new());
    if cfg.solver == Solver::Example && grid.len() < 2 {
        fails.note(&mut table, "trajectory ", traj.meta.truncation.as_ref());
        short_grid(&mut table, &mut fails);
        table.push(vec![Cell::Int(1), cfg.q1.into(), Cell::Empty, cfg.ds1.into(), Cell::Empty, Cell::Empty]);
        return Ok(Output {
            text: table.render(),
            svg: None,
            failure: fails.into_option(),
        });
    }
    let seq = flow_sequence(cfg, &h, &grid)?;
    fails.note(&mut table, "", seq.truncation.as_ref());
    if seq.degenerate {
        table.comments.push("degenerate: a step mapped q != 0 onto the origin".into());
    }
    for (k, e) in seq.entries.iter().enumerate() {
        let branch = seq.branch_log.iter().find(|c| c.j == e.j).map_or(Cell::Empty, |c| {
            Cell::Text(if c.chosen == Root::Plus { "plus" } else { "minus" }.into())
        });
        let residual = match (k, cfg.solver) {
            (0, _) => Cell::Empty,
            (_, Solver::Generic) => e.residual.into(),
            (_, Solver::Example) => {
                let prev = &seq.entries[k - 1];
                commutativity_defect(&h, &prev.q, &prev.ds, &e.ds).ok().into()
            }
        };
        table.push(vec![Cell::Int(e.j), e.q[0].into(), e.s.into(), e.ds[0].into(), branch, residual]);
    }
    if let Some(j) = seq.first_branch_switch() {
        table.comments.push(format!("first minus-root selection at j={j}"));
    }
    let svg = cfg.svg.as_ref().map(|_| {
        let s = Series::new("DS", &seq.q_values(), &seq.ds_values());
        signed_and_abs("generating-function recurrence", "q", "DS", vec![s], cfg.log_scale)
    });
    Ok(Output {
        text: table.render(),
        svg,
        failure: fails.into_option(),
    })
}

/// Vector-field residual of consecutive section values, with slope
/// `gamma_{j-1} / q_j`; `None` on the first entry or a zero grid point.
fn gamma_residuals(h: &dyn DiscreteHamiltonian, seq: &GammaSequence) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for w in seq.entries.windows(2) {
        let q = w[1].q[0];
        let r = (q != 0.0)
            .then(|| vf_residual(h, &w[0].q, &w[1].gamma, &slope(w[0].gamma[0] / q)).ok())
            .flatten();
        out.push(r);
    }
    out
}

pub fn hj_vf(cfg: &RunConfig) -> anyhow::Result<Output> {
    let h = cfg.hamiltonian()?;
    let traj = trajectory(cfg, &h)?;
    let grid = grid(cfg, &traj);
    let mut table = Table::new(cfg.header_lines(), &["j", "q", "gamma", "residual"]);
    let mut fails = Failures(Vec::new());
    if grid.len() < 2 {
        fails.note(&mut table, "trajectory ", traj.meta.truncation.as_ref());
        short_grid(&mut table, &mut fails);
        table.push(vec![Cell::Int(1), cfg.q1.into(), cfg.gamma1.into(), Cell::Empty]);
        return Ok(Output {
            text: table.render(),
            svg: None,
            failure: fails.into_option(),
        });
    }
    let seq = gamma_sequence(cfg, &h, &grid)?;
    fails.note(&mut table, "", seq.truncation.as_ref());
    for (e, r) in seq.entries.iter().zip(gamma_residuals(&h, &seq)) {
        table.push(vec![Cell::Int(e.j), e.q[0].into(), e.gamma[0].into(), r.into()]);
    }
    let svg = cfg.svg.as_ref().map(|_| {
        let s = Series::new("gamma", &seq.q_values(), &seq.gamma_values());
        signed_and_abs("vector-field recurrence", "q", "gamma", vec![s], cfg.log_scale)
    });
    Ok(Output {
        text: table.render(),
        svg,
        failure: fails.into_option(),
    })
}

/// Error statistics over aligned indices with `|q| < 0.9`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareSummary {
    pub n: usize,
    pub flow_max: f64,
    pub flow_mean: f64,
    pub vf_max: f64,
    pub vf_mean: f64,
}

impl CompareSummary {
    pub fn vf_not_worse(&self) -> bool {
        self.vf_mean <= self.flow_mean
    }
}

pub fn summarize(q: &[f64], err_flow: &[f64], err_vf: &[f64]) -> CompareSummary {
    let idx: Vec<usize> = (0..q.len()).filter(|&k| q[k].abs() < 0.9).collect();
    let n = idx.len();
    let stat = |e: &[f64]| {
        let max = idx.iter().map(|&k| e[k]).fold(0.0, f64::max);
        let mean = if n == 0 { 0.0 } else { idx.iter().map(|&k| e[k]).sum::<f64>() / n as f64 };
        (max, mean)
    };
    let (flow_max, flow_mean) = stat(err_flow);
    let (vf_max, vf_mean) = stat(err_vf);
    CompareSummary {
        n,
        flow_max,
        flow_mean,
        vf_max,
        vf_mean,
    }
}

/// Aligned trajectory, flow and section sequences.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub j: Vec<usize>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub ds: Vec<f64>,
    pub gamma: Vec<f64>,
    pub err_flow: Vec<f64>,
    pub err_vf: Vec<f64>,
    pub lengths: (usize, usize, usize),
    pub truncations: Vec<String>,
}

impl Comparison {
    pub fn summary(&self) -> CompareSummary {
        summarize(&self.q, &self.err_flow, &self.err_vf)
    }
}

pub fn comparison(cfg: &RunConfig) -> anyhow::Result<Comparison> {
    let h = cfg.hamiltonian()?;
    let traj = trajectory(cfg, &h)?;
    let grid = traj.q_values();
    let mut truncations: Vec<String> = traj.meta.truncation.iter().map(|t| format!("trajectory {}", describe(t))).collect();
    let (ds, gamma) = if grid.len() >= 2 {
        let (flow, vf) = std::thread::scope(|scope| {
            let flow = scope.spawn(|| flow_sequence(cfg, &h, &grid));
            let vf = gamma_sequence(cfg, &h, &grid);
            (flow.join().expect("flow worker panicked"), vf)
        });
        let (flow, vf) = (flow?, vf?);
        truncations.extend(flow.truncation.iter().map(|t| format!("hj-flow {}", describe(t))));
        truncations.extend(vf.truncation.iter().map(|t| format!("hj-vf {}", describe(t))));
        (flow.ds_values(), vf.gamma_values())
    } else {
        (vec![cfg.ds1], vec![cfg.gamma1])
    };
    let p = traj.p_values();
    let lengths = (p.len(), ds.len(), gamma.len());
    let n = p.len().min(ds.len()).min(gamma.len());
    let err = |xs: &[f64]| (0..n).map(|k| (xs[k] - p[k]).abs()).collect::<Vec<_>>();
    Ok(Comparison {
        j: traj.points.iter().take(n).map(|x| x.index).collect(),
        q: grid[..n].to_vec(),
        err_flow: err(&ds),
        err_vf: err(&gamma),
        p: p[..n].to_vec(),
        ds: ds[..n].to_vec(),
        gamma: gamma[..n].to_vec(),
        lengths,
        truncations,
    })
}

pub fn compare(cfg: &RunConfig) -> anyhow::Result<Output> {
    let c = comparison(cfg)?;
    let mut table = Table::new(cfg.header_lines(), &["j", "q", "p", "DS", "gamma", "err_flow", "err_vf"]);
    table.comments.extend(c.truncations.iter().cloned());
    for k in 0..c.q.len() {
        table.push(vec![
            Cell::Int(c.j[k]),
            c.q[k].into(),
            c.p[k].into(),
            c.ds[k].into(),
            c.gamma[k].into(),
            c.err_flow[k].into(),
            c.err_vf[k].into(),
        ]);
    }
    let s = c.summary();
    let (lp, lf, lv) = c.lengths;
    if lp != lf || lp != lv {
        table
            .footer
            .push(format!("common prefix: {} rows (trajectory {lp}, hj-flow {lf}, hj-vf {lv})", c.q.len()));
    }
    table.footer.push(format!("summary over |q| < 0.9: n = {}", s.n));
    table
        .footer
        .push(format!("err_flow max = {} mean = {}", fmt_num(s.flow_max), fmt_num(s.flow_mean)));
    table
        .footer
        .push(format!("err_vf max = {} mean = {}", fmt_num(s.vf_max), fmt_num(s.vf_mean)));
    table
        .footer
        .push(format!("ranking: mean(err_vf) <= mean(err_flow): {}", s.vf_not_worse()));
    let svg = cfg.svg.as_ref().map(|_| {
        let series = vec![
            Series::new("p", &c.q, &c.p),
            Series::new("gamma", &c.q, &c.gamma),
            Series::new("DS", &c.q, &c.ds),
        ];
        signed_and_abs("trajectory vs HJ solvers", "q", "momentum", series, cfg.log_scale)
    });
    Ok(Output {
        text: table.render(),
        svg,
        failure: (!c.truncations.is_empty()).then(|| c.truncations.join("; ")),
    })
}
