//! Restarted primal-dual hybrid gradient solver for the assembled LP.
//!
//! The iteration is the standard PDHG saddle-point scheme on
//! `min_x max_y  c.x + y.(Kx - q)` with `x` boxed in `[0,1]`, equality duals
//! free and inequality duals projected to `y >= 0`. Diagonal step sizes
//! follow the Pock-Chambolle rule (per-column/per-row inverse absolute sums),
//! and progress-based adaptive restarts reset the running average whenever
//! the best candidate's KKT score has decayed enough or stalls.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::lp::problem::LpProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMode {
    Relative,
    Absolute,
}

impl GapMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GapMode::Relative => "rel",
            GapMode::Absolute => "abs",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RestartPolicy {
    /// Candidate evaluation cadence, in iterations.
    pub check_every: usize,
    /// Restart when the candidate score drops below this fraction of the
    /// score at the last restart.
    pub sufficient_decay: f64,
    /// Restart on stalling once the score is below this fraction.
    pub necessary_decay: f64,
}

impl Default for RestartPolicy {
    fn default() -> Self {
        Self {
            check_every: 64,
            sufficient_decay: 0.2,
            necessary_decay: 0.8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub gap_mode: GapMode,
    pub gap_tolerance: f64,
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    pub restart: RestartPolicy,
    pub preconditioned: bool,
    /// Reserved; the solver is deterministic and never draws randomness.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_mode: GapMode::Relative,
            gap_tolerance: 1e-6,
            residual_tolerance: 1e-8,
            max_iterations: 1_000_000,
            restart: RestartPolicy::default(),
            preconditioned: true,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.gap_tolerance) || !positive(self.residual_tolerance) {
            return Err(Error::InvalidArgument {
                message: "solver tolerances must be positive".to_string(),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument {
                message: "max iterations must be at least 1".to_string(),
            });
        }
        if self.restart.check_every == 0 {
            return Err(Error::InvalidArgument {
                message: "restart cadence must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

/// Fractional solution with dual certificates and recomputed residuals.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub free_values: Vec<f64>,
    pub priced_values: Vec<f64>,
    pub colour_values: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub dual_eq: Vec<f64>,
    /// Coupling-row duals then the budget-row dual; non-negative.
    pub dual_ineq: Vec<f64>,
    /// Scaled infinity-norm violation of the constraint system.
    pub primal_residual: f64,
    /// Scaled dual infeasibility; identically zero here because every column
    /// is boxed, so reduced costs are fully attributable to bound duals.
    pub dual_residual: f64,
    /// `objective - dual_objective`. May be marginally negative: the primal
    /// iterate is only feasible up to `primal_residual`, and expanding the
    /// Lagrangian bounds the deviation by `|y|_1` times the violation.
    pub duality_gap: f64,
    pub iterations: usize,
    pub wall_time: Duration,
    pub converged: bool,
    pub gap_mode: GapMode,
    pub gap_tolerance: f64,
}

impl LpSolution {
    pub fn primal_vector(&self) -> Vec<f64> {
        let mut x =
            Vec::with_capacity(self.free_values.len() + self.priced_values.len() + self.colour_values.len());
        x.extend_from_slice(&self.free_values);
        x.extend_from_slice(&self.priced_values);
        x.extend_from_slice(&self.colour_values);
        x
    }

    pub fn dual_vector(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.dual_eq.len() + self.dual_ineq.len());
        y.extend_from_slice(&self.dual_eq);
        y.extend_from_slice(&self.dual_ineq);
        y
    }

    pub fn relative_gap(&self) -> f64 {
        self.duality_gap.abs() / (1.0 + self.objective.abs() + self.dual_objective.abs())
    }
}

/// Counts of near-integral entries, with 0.999 treated as 1 and 0.001 as 0.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct IntegralityStats {
    pub colour_ones: usize,
    pub colour_nonzeros: usize,
    pub free_ones: usize,
    pub free_nonzeros: usize,
    pub priced_ones: usize,
    pub priced_nonzeros: usize,
    pub colour_ones_pct_of_budget: f64,
    pub colour_nonzeros_pct_of_budget: f64,
}

const ONE_THRESHOLD: f64 = 0.999;
const ZERO_THRESHOLD: f64 = 0.001;

impl IntegralityStats {
    pub fn from_solution(budget: usize, solution: &LpSolution) -> Self {
        let count = |v: &[f64]| {
            let ones = v.iter().filter(|&&x| x >= ONE_THRESHOLD).count();
            let nonzeros = v.iter().filter(|&&x| x > ZERO_THRESHOLD).count();
            (ones, nonzeros)
        };
        let (colour_ones, colour_nonzeros) = count(&solution.colour_values);
        let (free_ones, free_nonzeros) = count(&solution.free_values);
        let (priced_ones, priced_nonzeros) = count(&solution.priced_values);
        let pct = |n: usize| {
            if budget == 0 {
                0.0
            } else {
                100.0 * n as f64 / budget as f64
            }
        };
        Self {
            colour_ones,
            colour_nonzeros,
            free_ones,
            free_nonzeros,
            priced_ones,
            priced_nonzeros,
            colour_ones_pct_of_budget: pct(colour_ones),
            colour_nonzeros_pct_of_budget: pct(colour_nonzeros),
        }
    }
}

struct Kkt {
    primal_obj: f64,
    dual_obj: f64,
    primal_res: f64,
    dual_res: f64,
    gap: f64,
    rel_gap: f64,
    score: f64,
}

impl Kkt {
    fn converged(&self, opts: &SolverOptions) -> bool {
        let gap_ok = match opts.gap_mode {
            GapMode::Relative => self.rel_gap <= opts.gap_tolerance,
            GapMode::Absolute => self.gap.abs() <= opts.gap_tolerance,
        };
        gap_ok
            && self.primal_res <= opts.residual_tolerance
            && self.dual_res <= opts.residual_tolerance
    }
}

struct Evaluator<'a> {
    problem: &'a LpProblem,
    rhs_scale: f64,
    obj_scale: f64,
    kx: Vec<f64>,
    kty: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(problem: &'a LpProblem) -> Self {
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        Self {
            problem,
            rhs_scale: 1.0 + inf(&problem.rhs),
            obj_scale: 1.0 + inf(&problem.objective),
            kx: vec![0.0; problem.n_rows()],
            kty: vec![0.0; problem.n_cols()],
        }
    }

    fn eval(&mut self, x: &[f64], y: &[f64]) -> Kkt {
        let p = self.problem;
        p.constraint.matvec(x, &mut self.kx);
        let mut primal_res_abs = 0.0f64;
        for i in 0..p.n_rows() {
            let violation = if i < p.n_eq_rows {
                (self.kx[i] - p.rhs[i]).abs()
            } else {
                (self.kx[i] - p.rhs[i]).max(0.0)
            };
            primal_res_abs = primal_res_abs.max(violation);
        }
        let primal_obj: f64 = p.objective.iter().zip(x).map(|(c, v)| c * v).sum();

        p.constraint_t.matvec(y, &mut self.kty);
        let mut dual_obj: f64 = -p.rhs.iter().zip(y).map(|(q, v)| q * v).sum::<f64>();
        let mut dual_res_abs = 0.0f64;
        for j in 0..p.n_cols() {
            let reduced = p.objective[j] + self.kty[j];
            // Bounds are finite on both sides, so the reduced cost splits
            // exactly into lower/upper bound multipliers; the lower bound 0
            // contributes nothing and the upper bound 1 contributes min(0, r).
            dual_obj += reduced.min(0.0);
            let attributed = reduced.max(0.0) + reduced.min(0.0);
            dual_res_abs = dual_res_abs.max((reduced - attributed).abs());
        }

        let gap = primal_obj - dual_obj;
        let rel_gap = gap.abs() / (1.0 + primal_obj.abs() + dual_obj.abs());
        let primal_res = primal_res_abs / self.rhs_scale;
        let dual_res = dual_res_abs / self.obj_scale;
        Kkt {
            primal_obj,
            dual_obj,
            primal_res,
            dual_res,
            gap,
            rel_gap,
            score: rel_gap.max(primal_res).max(dual_res),
        }
    }
}

fn step_sizes(problem: &LpProblem, preconditioned: bool) -> (Vec<f64>, Vec<f64>) {
    if preconditioned {
        // Pock-Chambolle diagonal scaling with alpha = 1: tau_j = 1 / sum_i
        // |K_ij|, sigma_i = 1 / sum_j |K_ij|. Empty rows/columns fall back to
        // unit steps (their updates are trivial).
        let col_sums = problem.constraint_t.row_abs_sums();
        let row_sums = problem.constraint.row_abs_sums();
        let tau = col_sums
            .iter()
            .map(|&s| if s > 0.0 { 1.0 / s } else { 1.0 })
            .collect();
        let sigma = row_sums
            .iter()
            .map(|&s| if s > 0.0 { 1.0 / s } else { 1.0 })
            .collect();
        (tau, sigma)
    } else {
        // Scalar steps 0.9 / ||K||_2 with the norm estimated by power
        // iteration on K'K from a deterministic start vector.
        let n = problem.n_cols();
        let mut v = vec![1.0 / (n.max(1) as f64).sqrt(); n];
        let mut kv = vec![0.0; problem.n_rows()];
        let mut ktkv = vec![0.0; n];
        let mut norm_sq = 0.0f64;
        for _ in 0..64 {
            problem.constraint.matvec(&v, &mut kv);
            problem.constraint_t.matvec(&kv, &mut ktkv);
            norm_sq = ktkv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm_sq <= f64::MIN_POSITIVE {
                break;
            }
            for (dst, &src) in v.iter_mut().zip(&ktkv) {
                *dst = src / norm_sq;
            }
        }
        let spectral = norm_sq.sqrt();
        let step = if spectral > 0.0 { 0.9 / spectral } else { 1.0 };
        (vec![step; n], vec![step; problem.n_rows()])
    }
}

/// Solves the LP with restarted, preconditioned PDHG.
///
/// Terminates once the duality gap (in the configured mode) and the scaled
/// residuals all meet their tolerances, or at the iteration cap with the
/// result flagged `converged = false`. Runs are bit-for-bit deterministic for
/// identical inputs and options.
pub fn solve_pdhg(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution> {
    opts.validate()?;
    if problem.objective.len() != problem.n_cols() || problem.rhs.len() != problem.n_rows() {
        return Err(Error::DimensionMismatch {
            what: "problem vectors".to_string(),
            expected: problem.n_cols(),
            got: problem.objective.len(),
        });
    }
    let start = Instant::now();
    let n = problem.n_cols();
    let m = problem.n_rows();
    let n_eq = problem.n_eq_rows;
    let (tau, sigma) = step_sizes(problem, opts.preconditioned);

    let mut x = vec![0.0f64; n];
    let mut y = vec![0.0f64; m];
    let mut x_new = vec![0.0f64; n];
    let mut x_bar = vec![0.0f64; n];
    let mut kty = vec![0.0f64; n];
    let mut kx = vec![0.0f64; m];

    let mut x_sum = vec![0.0f64; n];
    let mut y_sum = vec![0.0f64; m];
    let mut avg_len = 0usize;
    let mut x_avg = vec![0.0f64; n];
    let mut y_avg = vec![0.0f64; m];

    let mut evaluator = Evaluator::new(problem);
    let mut score_at_restart = f64::INFINITY;
    let mut last_candidate_score = f64::INFINITY;

    let mut iterations = 0usize;
    loop {
        iterations += 1;
        problem.constraint_t.matvec(&y, &mut kty);
        for j in 0..n {
            x_new[j] = (x[j] - tau[j] * (problem.objective[j] + kty[j])).clamp(0.0, 1.0);
            x_bar[j] = 2.0 * x_new[j] - x[j];
        }
        problem.constraint.matvec(&x_bar, &mut kx);
        for i in 0..m {
            let mut v = y[i] + sigma[i] * (kx[i] - problem.rhs[i]);
            if i >= n_eq {
                v = v.max(0.0);
            }
            y[i] = v;
        }
        std::mem::swap(&mut x, &mut x_new);

        for (sum, &v) in x_sum.iter_mut().zip(&x) {
            *sum += v;
        }
        for (sum, &v) in y_sum.iter_mut().zip(&y) {
            *sum += v;
        }
        avg_len += 1;

        let at_cap = iterations >= opts.max_iterations;
        if iterations.is_multiple_of(opts.restart.check_every) || at_cap {
            let inv = 1.0 / avg_len as f64;
            for (dst, &s) in x_avg.iter_mut().zip(&x_sum) {
                *dst = s * inv;
            }
            for (dst, &s) in y_avg.iter_mut().zip(&y_sum) {
                *dst = s * inv;
            }
            let current = evaluator.eval(&x, &y);
            let average = evaluator.eval(&x_avg, &y_avg);

            if current.converged(opts) || average.converged(opts) {
                let use_current = current.converged(opts)
                    && (!average.converged(opts) || current.score <= average.score);
                let (kkt, px, py) = if use_current {
                    (current, &x, &y)
                } else {
                    (average, &x_avg, &y_avg)
                };
                return Ok(finish(problem, opts, px, py, &kkt, iterations, true, start));
            }
            if at_cap {
                let (kkt, px, py) = if current.score <= average.score {
                    (current, &x, &y)
                } else {
                    (average, &x_avg, &y_avg)
                };
                return Ok(finish(problem, opts, px, py, &kkt, iterations, false, start));
            }

            let candidate_is_avg = average.score < current.score;
            let candidate = if candidate_is_avg { &average } else { &current };
            let sufficient = candidate.score <= opts.restart.sufficient_decay * score_at_restart;
            let stalled = candidate.score <= opts.restart.necessary_decay * score_at_restart
                && candidate.score > last_candidate_score;
            if sufficient || stalled {
                if candidate_is_avg {
                    x.copy_from_slice(&x_avg);
                    y.copy_from_slice(&y_avg);
                }
                x_sum.iter_mut().for_each(|v| *v = 0.0);
                y_sum.iter_mut().for_each(|v| *v = 0.0);
                avg_len = 0;
                score_at_restart = candidate.score;
                last_candidate_score = f64::INFINITY;
            } else {
                last_candidate_score = candidate.score;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &LpProblem,
    opts: &SolverOptions,
    x: &[f64],
    y: &[f64],
    kkt: &Kkt,
    iterations: usize,
    converged: bool,
    start: Instant,
) -> LpSolution {
    let nf = problem.n_free;
    let np = problem.n_priced;
    LpSolution {
        free_values: x[..nf].to_vec(),
        priced_values: x[nf..nf + np].to_vec(),
        colour_values: x[nf + np..].to_vec(),
        objective: kkt.primal_obj,
        dual_objective: kkt.dual_obj,
        dual_eq: y[..problem.n_eq_rows].to_vec(),
        dual_ineq: y[problem.n_eq_rows..].to_vec(),
        primal_residual: kkt.primal_res,
        dual_residual: kkt.dual_res,
        duality_gap: kkt.gap,
        iterations,
        wall_time: start.elapsed(),
        converged,
        gap_mode: opts.gap_mode,
        gap_tolerance: opts.gap_tolerance,
    }
}

/// Recomputes the certified primal/dual pair for a stored solution.
///
/// The dual value is the Lagrangian dual objective evaluated at the stored
/// multipliers, with inequality duals clamped to their sign constraint and
/// reduced costs absorbed by the box-bound multipliers. By weak duality it
/// never exceeds the value of any feasible primal point beyond floating-point
/// rounding; against the solver's own near-feasible iterate the gap can dip
/// below zero by at most `|y|_1` times the primal violation.
pub fn duality_gap(problem: &LpProblem, solution: &LpSolution) -> Result<(f64, f64, f64)> {
    if solution.free_values.len() != problem.n_free
        || solution.priced_values.len() != problem.n_priced
        || solution.colour_values.len() != problem.n_colours
    {
        return Err(Error::DimensionMismatch {
            what: "primal vectors".to_string(),
            expected: problem.n_cols(),
            got: solution.free_values.len()
                + solution.priced_values.len()
                + solution.colour_values.len(),
        });
    }
    if solution.dual_eq.len() != problem.n_eq_rows
        || solution.dual_ineq.len() != problem.n_ineq_rows()
    {
        return Err(Error::DimensionMismatch {
            what: "dual vectors".to_string(),
            expected: problem.n_rows(),
            got: solution.dual_eq.len() + solution.dual_ineq.len(),
        });
    }
    let x = solution.primal_vector();
    let mut y = solution.dual_vector();
    for v in y[problem.n_eq_rows..].iter_mut() {
        *v = v.max(0.0);
    }
    let primal: f64 = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let mut kty = vec![0.0; problem.n_cols()];
    problem.constraint_t.matvec(&y, &mut kty);
    let mut dual: f64 = -problem.rhs.iter().zip(&y).map(|(q, v)| q * v).sum::<f64>();
    for (c, t) in problem.objective.iter().zip(&kty) {
        dual += (c + t).min(0.0);
    }
    Ok((primal, dual, primal - dual))
}
