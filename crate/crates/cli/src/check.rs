use dhj_core::hj_flow::solve_generating_sequence;
use dhj_core::hj_vf::{run_example_vf, solve_gamma_generic};
use dhj_core::mechanics::{
    free_particle, hamiltonian_from_lagrangian, left_right_relation_residual, partial_consistency_gap,
    run_trajectory, symplecticity_defect, verify_step, DiscreteHamiltonian, Side,
};
use dhj_core::optctrl::{eliminate_control, secondary_constraint, ControlProblem};
use dhj_core::{scalar, Error, PhasePoint, RealVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;

pub const SAMPLE_POINTS: usize = 100;
pub const PARTIAL_GAP_TOL: f64 = 1e-6;
pub const SYMPLECTIC_TOL: f64 = 1e-5;
pub const RELATION_TOL: f64 = 1e-9;
pub const HJ_RESIDUAL_TOL: f64 = 1e-12;
pub const MOMENTUM_TOL: f64 = 1e-12;
pub const VF_AGREEMENT_TOL: f64 = 1e-9;
pub const CONSTRAINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub seed: u64,
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    pub fn failures(&self) -> usize {
        self.lines.iter().filter(|l| l.verdict == Verdict::Fail).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn line(&self, name: &str) -> Option<&CheckLine> {
        self.lines.iter().find(|l| l.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = format!("seed = {}\n", self.seed);
        for l in &self.lines {
            let tag = match l.verdict {
                Verdict::Pass => "PASS",
                Verdict::Fail => "FAIL",
                Verdict::Skip => "SKIP",
            };
            out.push_str(&format!("{tag} {}: {}\n", l.name, l.detail));
        }
        out
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn measured(name: &'static str, value: f64, tol: f64, what: &str) -> CheckLine {
    CheckLine {
        name,
        verdict: verdict(value < tol),
        detail: format!("{what} = {value:.3e} (tol {tol:e})"),
    }
}

fn failed(name: &'static str, err: &Error) -> CheckLine {
    CheckLine {
        name,
        verdict: Verdict::Fail,
        detail: format!("{}: {err}", err.kind()),
    }
}

fn from_result(name: &'static str, r: Result<CheckLine, Error>) -> CheckLine {
    r.unwrap_or_else(|e| failed(name, &e))
}

/// Runs every invariant check against `h` (and `problem`, when given) at the
/// configured start point.
pub fn run_checks(h: &dyn DiscreteHamiltonian, problem: Option<&ControlProblem>, cfg: &RunConfig) -> CheckReport {
    let mut lines = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples: Vec<(RealVec, RealVec)> = (0..SAMPLE_POINTS)
        .map(|_| (scalar(rng.gen_range(-1.0..1.0)), scalar(rng.gen_range(-1.0..1.0))))
        .collect();

    lines.push(from_result(
        "partial-consistency",
        partial_consistency_gap(h, &samples).map(|g| measured("partial-consistency", g, PARTIAL_GAP_TOL, "max relative gap")),
    ));

    let start = PhasePoint::scalar(1, cfg.q1, cfg.p1);
    let traj = start.and_then(|x| run_trajectory(h, &x, cfg.steps, &cfg.newton));
    let traj = match traj {
        Ok(t) => t,
        Err(e) => {
            lines.push(failed("trajectory", &e));
            return CheckReport { seed: cfg.seed, lines };
        }
    };
    lines.push(match &traj.meta.truncation {
        Some(t) => CheckLine {
            name: "trajectory",
            verdict: Verdict::Fail,
            detail: format!("{} at j={}: {}", t.error.kind(), t.index, t.error),
        },
        None => CheckLine {
            name: "trajectory",
            verdict: Verdict::Pass,
            detail: format!("{} steps", cfg.steps),
        },
    });

    let inner: Vec<&PhasePoint> = traj.points.iter().filter(|x| x.q[0].abs() < 0.9).take(20).collect();
    lines.push(from_result("symplecticity", (|| {
        let mut worst: f64 = 0.0;
        for x in &inner {
            worst = worst.max(symplecticity_defect(h, x, 1e-6, &cfg.newton)?);
        }
        Ok(CheckLine {
            name: "symplecticity",
            verdict: verdict(worst < SYMPLECTIC_TOL),
            detail: format!(
                "max |det DF - 1| = {worst:.3e} over {} points with |q| < 0.9 (tol {SYMPLECTIC_TOL:e})",
                inner.len()
            ),
        })
    })()));

    lines.push(from_result("step-verification", (|| {
        let mut worst: f64 = 0.0;
        for w in traj.points.windows(2) {
            worst = worst.max(verify_step(h, &w[0], &w[1])?);
        }
        Ok(CheckLine {
            name: "step-verification",
            verdict: verdict(worst <= cfg.newton.tol),
            detail: format!("max step residual = {worst:.3e} (tol {:e})", cfg.newton.tol),
        })
    })()));

    lines.push(from_result("left-right-relation", (|| {
        let l = free_particle(1, 1.0);
        let hp = hamiltonian_from_lagrangian(l.clone(), Side::Right);
        let hm = hamiltonian_from_lagrangian(l, Side::Left);
        let fp = run_trajectory(&hp, &PhasePoint::scalar(1, 0.3, 0.7)?, 50, &cfg.newton)?;
        let mut worst: f64 = 0.0;
        for w in fp.points.windows(2) {
            worst = worst.max(left_right_relation_residual(&hp, &hm, &w[0].q, &w[0].p, &w[1].q, &w[1].p)?);
        }
        Ok(measured("left-right-relation", worst, RELATION_TOL, "free particle, 50 steps"))
    })()));

    let flow = solve_generating_sequence(h, &scalar(cfg.q1), 0.0, &scalar(cfg.p1), cfg.steps, &cfg.newton);
    lines.push(from_result("hj-residual", flow.as_ref().map_err(Clone::clone).map(|seq| {
        measured("hj-residual", seq.max_residual(), HJ_RESIDUAL_TOL, "max |HJ residual|")
    })));
    lines.push(from_result("momentum-identification", flow.map(|seq| {
        let worst = seq
            .entries
            .iter()
            .zip(&traj.points)
            .map(|(e, x)| (e.ds[0] - x.p[0]).abs() / x.p[0].abs().max(1.0))
            .fold(0.0, f64::max);
        measured("momentum-identification", worst, MOMENTUM_TOL, "max |DS - p| / max(1, |p|)")
    })));

    lines.push(if !cfg.closed_form_applies() {
        CheckLine {
            name: "vf-agreement",
            verdict: Verdict::Skip,
            detail: "closed form needs sakamoto1d with r = s = 1".into(),
        }
    } else if traj.points.len() < 2 {
        CheckLine {
            name: "vf-agreement",
            verdict: Verdict::Skip,
            detail: "trajectory too short for a grid".into(),
        }
    } else {
        from_result("vf-agreement", (|| {
            let grid = traj.q_values();
            let closed = run_example_vf(&grid, 0.0)?;
            let vgrid: Vec<RealVec> = grid.iter().map(|&q| scalar(q)).collect();
            let generic = solve_gamma_generic(h, &vgrid, &scalar(0.0), &cfg.newton)?;
            let worst = closed
                .gamma_values()
                .iter()
                .zip(generic.gamma_values())
                .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                .fold(0.0, f64::max);
            Ok(measured("vf-agreement", worst, VF_AGREEMENT_TOL, "max closed-form vs generic gap"))
        })())
    });

    if let Some(cp) = problem {
        lines.push(from_result("constraint", (|| {
            let mut worst: f64 = 0.0;
            for (q, p) in &samples {
                let u = eliminate_control(cp, q, p, &cfg.newton, &RealVec::zeros(cp.k))?;
                worst = worst.max(secondary_constraint(cp, q, p, &u)?.amax());
            }
            Ok(measured("constraint", worst, CONSTRAINT_TOL, "max |phi(q, p, u*)|"))
        })()));
    }

    CheckReport { seed: cfg.seed, lines }
}
