//! Limited-memory BFGS with Armijo backtracking.
//!
//! The learning problem is reparametrized to be unconstrained, so a plain
//! quasi-Newton method suffices. Non-finite objective values are treated as
//! `+∞` and simply rejected by the line search.

use std::collections::VecDeque;

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop after this many consecutive iterations without an improving step.
    pub stagnation_limit: usize,
    /// Stop as soon as the objective drops below this value.
    pub target: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub max_backtracks: usize,
    /// Stop when `‖∇f‖∞` falls below this value.
    pub grad_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 200,
            stagnation_limit: 20,
            target: f64::NEG_INFINITY,
            c1: 1e-4,
            max_backtracks: 40,
            grad_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    TargetReached,
    MaxIterations,
    Stagnated,
    Stationary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    /// Objective at the start followed by the best value after every iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sanitize(f: f64) -> f64 {
    if f.is_finite() {
        f
    } else {
        f64::INFINITY
    }
}

/// Two-loop recursion: `-H ∇f` from the stored curvature pairs.
fn direction(grad: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `f` from `x0`. `grad` must return the gradient of `f`.
pub fn minimize<F, G>(f: F, grad: G, x0: Vec<f64>, cfg: &LbfgsConfig) -> OptimOutcome
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = x0;
    let mut fx = sanitize(f(&x));
    let mut history = vec![fx];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut stall = 0;
    let mut iterations = 0;
    if fx < cfg.target {
        return OptimOutcome {
            x,
            f: fx,
            history,
            iterations,
            stop: StopReason::TargetReached,
        };
    }
    let mut g = grad(&x);
    let stop = loop {
        if iterations >= cfg.max_iters {
            break StopReason::MaxIterations;
        }
        if g.iter().all(|v| v.abs() < cfg.grad_tol) {
            break StopReason::Stationary;
        }
        iterations += 1;
        let mut d = direction(&g, &pairs);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) || !slope.is_finite() {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut step = if pairs.is_empty() {
            1.0 / dot(&g, &g).sqrt().max(1e-300)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let ft = sanitize(f(&trial));
            if ft <= fx + cfg.c1 * step * slope && ft < fx {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((xn, fn_)) => {
                let gn = grad(&xn);
                let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy.is_finite() {
                    pairs.push_back((s, y, 1.0 / sy));
                    if pairs.len() > cfg.memory {
                        pairs.pop_front();
                    }
                }
                x = xn;
                fx = fn_;
                g = gn;
                stall = 0;
            }
            None => {
                pairs.clear();
                stall += 1;
            }
        }
        history.push(fx);
        if fx < cfg.target {
            break StopReason::TargetReached;
        }
        if stall >= cfg.stagnation_limit {
            break StopReason::Stagnated;
        }
    };
    OptimOutcome {
        x,
        f: fx,
        history,
        iterations,
        stop,
    }
}
