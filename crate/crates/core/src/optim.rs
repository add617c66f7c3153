//! Block-coordinate projected-gradient driver shared by the BTD and DGM
//! solvers.
//!
//! A problem exposes its variables as flat blocks. One iteration visits the
//! blocks in order and takes one step on each, using either an Adam-type
//! adaptive rule or plain gradient descent with projected Armijo
//! backtracking (monotone by construction).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam moment decay rates and denominator guard.
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Sufficient-decrease constant of the Armijo test.
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    #[default]
    Adaptive,
    PlainGd,
}

/// What a solver must provide to be driven block by block.
pub trait BlockProblem {
    fn n_blocks(&self) -> usize;
    fn block(&self, b: usize) -> &[f64];
    fn block_mut(&mut self, b: usize) -> &mut [f64];
    /// Whether block `b` is projected onto the nonnegative orthant.
    fn nonnegative(&self, b: usize) -> bool;
    fn objective(&self) -> f64;
    /// Gradient of the objective with respect to block `b`.
    fn gradient(&self, b: usize) -> Vec<f64>;
    /// Objective and gradient of block `b` at the current point; override
    /// when both come out of one pass.
    fn value_and_gradient(&self, b: usize) -> (f64, Vec<f64>) {
        (self.objective(), self.gradient(b))
    }
    /// Called after the driver restored the initial point because the run
    /// diverged; `attempt` counts from 1.
    fn on_restart(&mut self, _attempt: u32) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdOptions {
    pub kind: OptimizerKind,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Restart when the objective exceeds this multiple of its initial value.
    pub divergence_factor: f64,
    pub max_restarts: u32,
    /// Per-iteration multiplicative step decay (`1.0` keeps steps fixed).
    pub step_decay: f64,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adaptive,
            max_iters: 300,
            rel_tol: 1e-3,
            divergence_factor: 10.0,
            max_restarts: 3,
            step_decay: 1.0,
        }
    }
}

impl BcdOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol must be positive"));
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return Err(Error::invalid("step_decay must lie in (0, 1]"));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::invalid("divergence_factor must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub objective: f64,
    pub wall_ms: f64,
}

/// Objective after every iteration; entry 0 is the starting point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    pub converged: bool,
    pub restarts: u32,
}

impl Trace {
    pub fn objectives(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.objective).collect()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.entries.last().map(|e| e.objective)
    }

    pub fn iterations(&self) -> usize {
        self.entries.last().map_or(0, |e| e.iter)
    }

    /// `iter,objective,wall_ms` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,objective,wall_ms\n");
        for e in &self.entries {
            out.push_str(&format!("{},{:.12e},{:.3}\n", e.iter, e.objective, e.wall_ms));
        }
        out
    }
}

/// First/second-moment state for one block.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.t = 0;
    }

    /// One bias-corrected step of size `lr`, then optional projection.
    pub fn step(&mut self, x: &mut [f64], g: &[f64], lr: f64, nonnegative: bool) {
        debug_assert_eq!(x.len(), g.len());
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (((xi, &gi), mi), vi) in x.iter_mut().zip(g).zip(&mut self.m).zip(&mut self.v) {
            *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
            *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
            *xi -= lr * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
            if nonnegative && *xi < 0.0 {
                *xi = 0.0;
            }
        }
    }
}

pub fn project_nonnegative(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite {what}")))
    }
}

fn check_objective(value: f64, iter: usize) -> Result<f64> {
    if value.is_nan() {
        Err(Error::Numerical(format!("objective is NaN at iteration {iter}")))
    } else {
        Ok(value)
    }
}

/// Projected Armijo step on block `b`. Returns the new objective (unchanged
/// if no trial step decreased it).
fn armijo_step<P: BlockProblem>(problem: &mut P, b: usize, g: &[f64], step: f64, f0: f64) -> f64 {
    let nonneg = problem.nonnegative(b);
    let x0 = problem.block(b).to_vec();
    let mut t = step;
    for _ in 0..MAX_BACKTRACKS {
        let x = problem.block_mut(b);
        let mut decrease = 0.0;
        for ((xi, &x0i), &gi) in x.iter_mut().zip(&x0).zip(g) {
            let mut v = x0i - t * gi;
            if nonneg && v < 0.0 {
                v = 0.0;
            }
            *xi = v;
            decrease += gi * (v - x0i);
        }
        if decrease == 0.0 {
            break;
        }
        let f = problem.objective();
        if f.is_finite() && f <= f0 + ARMIJO_C * decrease {
            return f;
        }
        t *= 0.5;
    }
    problem.block_mut(b).copy_from_slice(&x0);
    f0
}

/// Run block-coordinate descent until the relative objective change drops
/// below `rel_tol` or `max_iters` iterations have been taken.
///
/// `steps[b]` is the initial step size of block `b`. If the objective ever
/// exceeds `divergence_factor` times its starting value, the starting point
/// is restored, [`BlockProblem::on_restart`] is called, all steps are halved
/// and the moments are cleared; after `max_restarts` such restarts the run
/// fails with [`Error::Numerical`].
pub fn run_bcd<P: BlockProblem>(problem: &mut P, steps: &[f64], opts: &BcdOptions) -> Result<Trace> {
    opts.validate()?;
    let nb = problem.n_blocks();
    if steps.len() != nb {
        return Err(Error::dims(format!("{} step sizes for {nb} blocks", steps.len())));
    }
    if steps.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::invalid("step sizes must be positive"));
    }
    let start = Instant::now();
    let initial: Vec<Vec<f64>> = (0..nb).map(|b| problem.block(b).to_vec()).collect();
    let mut steps = steps.to_vec();
    let mut moments: Vec<Adam> = initial.iter().map(|x| Adam::new(x.len())).collect();
    let mut restarts = 0u32;

    'attempt: loop {
        // The first block's gradient is computed together with the objective
        // that closes the previous iteration.
        let (f_init, mut first_grad) = problem.value_and_gradient(0);
        let f_init = check_objective(f_init, 0)?;
        let ceiling = opts.divergence_factor * f_init.abs().max(f64::MIN_POSITIVE);
        let mut trace = Trace {
            entries: vec![TraceEntry {
                iter: 0,
                objective: f_init,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            }],
            converged: false,
            restarts,
        };
        let mut prev = f_init;
        let base_steps = steps.clone();
        for iter in 1..=opts.max_iters {
            let scale = opts.step_decay.powi(iter as i32 - 1);
            for (s, b) in steps.iter_mut().zip(&base_steps) {
                *s = b * scale;
            }
            let mut current = prev;
            for b in 0..nb {
                let g = if b == 0 {
                    std::mem::take(&mut first_grad)
                } else {
                    problem.gradient(b)
                };
                check_finite("gradient", &g)?;
                match opts.kind {
                    OptimizerKind::Adaptive => {
                        let nonneg = problem.nonnegative(b);
                        moments[b].step(problem.block_mut(b), &g, steps[b], nonneg);
                    }
                    OptimizerKind::PlainGd => {
                        current = armijo_step(problem, b, &g, steps[b], current);
                    }
                }
            }
            let (f, g0) = problem.value_and_gradient(0);
            first_grad = g0;
            let f = check_objective(f, iter)?;
            if f > ceiling || f.is_infinite() {
                if restarts >= opts.max_restarts {
                    return Err(Error::Numerical(format!(
                        "objective diverged ({f:e} vs initial {f_init:e}) after {restarts} restarts"
                    )));
                }
                restarts += 1;
                for (b, x) in initial.iter().enumerate() {
                    problem.block_mut(b).copy_from_slice(x);
                }
                problem.on_restart(restarts);
                steps = base_steps.iter().map(|s| s * 0.5).collect();
                moments.iter_mut().for_each(Adam::reset);
                continue 'attempt;
            }
            trace.entries.push(TraceEntry {
                iter,
                objective: f,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            let rel = (prev - f).abs() / prev.abs().max(f64::MIN_POSITIVE);
            prev = f;
            if rel < opts.rel_tol {
                trace.converged = true;
                break;
            }
        }
        return Ok(trace);
    }
}
