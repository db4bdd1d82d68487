//! Projected Newton on the incremental potential with a CCD-filtered
//! backtracking line search. One call to [`step`] advances one time step.

use std::time::Instant;

use crate::ccd::{max_step, DEFAULT_FACTOR, DEFAULT_SLACK};
use crate::error::{Error, Result};
use crate::sparse::BlockMatrix;
use crate::subspace::{evaluate, incremental_potential, Assembly, Evaluation, Reduction, SimState, StepContext};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Time step (s).
    pub h: f64,
    /// Newton termination threshold on `|p|_inf / h` (m/s).
    pub tol_v: f64,
    pub max_newton: usize,
    /// Backtracking shrink factor.
    pub beta: f64,
    /// Sufficient-decrease constant; 0 means plain decrease.
    pub armijo: f64,
    pub ccd_slack: f64,
    pub ccd_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            h: 0.01,
            tol_v: 1e-3,
            max_newton: 100,
            beta: 0.5,
            armijo: 0.0,
            ccd_slack: DEFAULT_SLACK,
            ccd_factor: DEFAULT_FACTOR,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.h > 0.0
            && self.tol_v > 0.0
            && self.beta > 0.0
            && self.beta < 1.0
            && self.armijo >= 0.0
            && self.armijo < 1.0
            && self.ccd_slack > 0.0
            && self.ccd_slack < 1.0
            && self.ccd_factor > 0.0
            && self.ccd_factor <= 1.0
            && self.max_newton > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!("invalid solver config {self:?}")))
        }
    }
}

/// Non-fatal solver outcomes that still return a feasible state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    LineSearchStall,
    MaxIterationsExceeded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepStats {
    pub newton_iters: usize,
    pub ls_trials: usize,
    /// `|grad E|_inf` over free DoFs at the returned iterate.
    pub grad_norm: f64,
    /// Smallest pair distance over accepted iterates (m), infinite without pairs.
    pub min_dist: f64,
    pub wall_ms: f64,
    /// Pairs closer than the activation distance at the returned iterate.
    pub n_pairs: usize,
    /// Accepted Newton iterates whose energy did not strictly decrease.
    pub descent_violations: usize,
    pub diagnostic: Option<Diagnostic>,
}

pub struct StepOutput {
    pub state: SimState,
    pub stats: StepStats,
    /// Evaluation at the returned configuration (contact contributions feed
    /// the force log).
    pub evaluation: Evaluation,
}

/// `|p|_inf / h <= tol_v`.
pub fn check_convergence(p: &[Vec3], h: f64, tol_v: f64) -> bool {
    p.iter().map(|v| v.amax()).fold(0.0, f64::max) / h <= tol_v
}

/// Solves `H_ff p_f = -(g_f + H_fs p_s)` with `p_s` given on the fixed nodes.
pub fn newton_iteration(hess: &BlockMatrix, grad: &[Vec3], free: &[bool], p_fixed: Option<&[Vec3]>) -> Result<Vec<Vec3>> {
    let mut rhs: Vec<Vec3> = grad.iter().map(|g| -g).collect();
    if let Some(ps) = p_fixed {
        let coupled = hess.mul(ps);
        for (r, c) in rhs.iter_mut().zip(&coupled) {
            *r -= c;
        }
    }
    let mut p = hess.solve_free(&rhs, free)?;
    if let Some(ps) = p_fixed {
        for (i, &f) in free.iter().enumerate() {
            if !f {
                p[i] = ps[i];
            }
        }
    }
    Ok(p)
}

pub struct LineSearch {
    pub alpha: f64,
    pub energy: f64,
    pub trials: usize,
    pub stalled: bool,
}

fn axpy(q: &[Vec3], p: &[Vec3], alpha: f64) -> Vec<Vec3> {
    q.iter().zip(p).map(|(a, b)| a + b * alpha).collect()
}

/// Backtracks from the CCD clamp until the energy decreases.
pub fn filtered_line_search(
    ctx: &StepContext,
    q: &[Vec3],
    p: &[Vec3],
    e0: f64,
    slope: f64,
    x: &[Vec3],
    cfg: &SolverConfig,
) -> Result<LineSearch> {
    let dx = ctx.reduction.embed(p);
    let mut alpha = max_step(x, &dx, &ctx.assembly.surface, cfg.ccd_slack, cfg.ccd_factor);
    let mut trials = 0;
    loop {
        trials += 1;
        let trial = axpy(q, p, alpha);
        let e = match incremental_potential(ctx, &trial) {
            Ok(e) => e,
            Err(Error::NonpositiveDistance(_)) => f64::INFINITY,
            Err(err) => return Err(err),
        };
        if e < e0 && e <= e0 + cfg.armijo * alpha * slope {
            return Ok(LineSearch {
                alpha,
                energy: e,
                trials,
                stalled: false,
            });
        }
        alpha *= cfg.beta;
        if alpha < 1e-12 {
            return Ok(LineSearch {
                alpha: 0.0,
                energy: e0,
                trials,
                stalled: true,
            });
        }
    }
}

fn dot(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u.dot(v)).sum()
}

fn free_grad_norm(g: &[Vec3], free: &[bool]) -> f64 {
    g.iter()
        .zip(free)
        .filter(|(_, &f)| f)
        .map(|(v, _)| v.amax())
        .fold(0.0, f64::max)
}

/// Advances `state` by one step. Scripted nodes are first driven to
/// `targets` along CCD-safe steps with the free nodes following the
/// linearized response, then the free nodes are minimized by Newton.
pub fn step(
    asm: &Assembly,
    reduction: &dyn Reduction,
    state: &SimState,
    targets: &[Vec3],
    cfg: &SolverConfig,
) -> Result<StepOutput> {
    let start = Instant::now();
    let h = cfg.h;
    let ctx = StepContext::new(asm, reduction, state, h)?;
    let free = asm.free();
    let mut q = state.q.clone();
    let mut stats = StepStats {
        newton_iters: 0,
        ls_trials: 0,
        grad_norm: 0.0,
        min_dist: f64::INFINITY,
        wall_ms: 0.0,
        n_pairs: 0,
        descent_violations: 0,
        diagnostic: None,
    };
    let mut previous: Option<f64> = None;
    let mut converged = false;
    let mut eval = evaluate(&ctx, &q, true, true)?;
    while stats.newton_iters < cfg.max_newton {
        stats.newton_iters += 1;
        stats.min_dist = stats.min_dist.min(eval.min_distance());
        let hess = eval.hess.as_ref().expect("hessian requested");
        let transport: Vec<Vec3> = (0..q.len())
            .map(|i| if free[i] { Vec3::zeros() } else { targets[i] - q[i] })
            .collect();
        if transport.iter().any(|v| *v != Vec3::zeros()) {
            // move scripted nodes toward their end-of-step pose
            let p = newton_iteration(hess, &eval.grad, &free, Some(&transport))?;
            let dx = reduction.embed(&p);
            let alpha = max_step(&eval.x, &dx, &asm.surface, cfg.ccd_slack, cfg.ccd_factor);
            stats.ls_trials += 1;
            q = axpy(&q, &p, alpha);
            if alpha >= 1.0 {
                for (i, &f) in free.iter().enumerate() {
                    if !f {
                        q[i] = targets[i];
                    }
                }
            }
            previous = None;
            eval = evaluate(&ctx, &q, true, true)?;
            continue;
        }
        if let Some(e_prev) = previous {
            if eval.energy >= e_prev {
                stats.descent_violations += 1;
            }
        }
        if free_grad_norm(&eval.grad, &free) == 0.0 {
            converged = true;
            break;
        }
        let p = newton_iteration(hess, &eval.grad, &free, None)?;
        if check_convergence(&p, h, cfg.tol_v) {
            converged = true;
            break;
        }
        let slope = dot(&eval.grad, &p);
        let ls = filtered_line_search(&ctx, &q, &p, eval.energy, slope, &eval.x, cfg)?;
        stats.ls_trials += ls.trials;
        if ls.stalled {
            stats.diagnostic = Some(Diagnostic::LineSearchStall);
            converged = true;
            break;
        }
        previous = Some(eval.energy);
        q = axpy(&q, &p, ls.alpha);
        eval = evaluate(&ctx, &q, true, true)?;
    }
    if !converged {
        stats.diagnostic = Some(Diagnostic::MaxIterationsExceeded);
    }
    stats.min_dist = stats.min_dist.min(eval.min_distance());
    stats.grad_norm = free_grad_norm(&eval.grad, &free);
    stats.n_pairs = eval.pairs.iter().filter(|p| p.d < asm.contact.dhat).count();
    let qdot = q.iter().zip(&state.q).map(|(a, b)| (a - b) / h).collect();
    let new_state = SimState {
        x: eval.x.clone(),
        q,
        qdot,
        step: state.step + 1,
        t: (state.step + 1) as f64 * h,
    };
    stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(StepOutput {
        state: new_state,
        stats,
        evaluation: eval,
    })
}
