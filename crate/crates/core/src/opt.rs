//! Log-likelihood maximizer: full-batch gradient ascent with an adaptive
//! step to find the basin, then L-BFGS with Armijo backtracking to polish to
//! the gradient tolerance. A mini-batch SGD mode is available for parity
//! with the sampling-based trainer. Everything is deterministic given the
//! configuration and seed.

use alloc::vec::Vec;

use crate::linalg::inf_norm;
use crate::rng;

/// A maximization target over a packed parameter vector. `gradient` must
/// return zeros at fixed coordinates; the optimizer then never moves them.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Number of additive rows, for mini-batch mode.
    fn n_rows(&self) -> usize {
        1
    }
    /// Mean gradient over a row subset. Defaults to the full gradient.
    fn gradient_rows(&self, x: &[f64], _rows: &[usize]) -> Vec<f64> {
        self.gradient(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimMode {
    FullBatch,
    MiniBatchSgd {
        batch_size: usize,
        learning_rate: f64,
        epochs: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Convergence: gradient infinity norm at or below this value.
    pub grad_tol: f64,
    /// Initial ascent step for the warmup phase.
    pub initial_step: f64,
    /// Warmup gradient-ascent iterations before quasi-Newton refinement.
    pub ga_iters: usize,
    /// Enable the L-BFGS refinement pass.
    pub quasi_newton: bool,
    pub lbfgs_memory: usize,
    pub mode: OptimMode,
    /// Seed for the mini-batch shuffle; unused in full-batch mode.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 10_000,
            grad_tol: 1e-5,
            initial_step: 0.1,
            ga_iters: 25,
            quasi_newton: true,
            lbfgs_memory: 8,
            mode: OptimMode::FullBatch,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub fn maximize<O: Objective>(obj: &O, x0: Vec<f64>, cfg: &OptimizerConfig) -> OptimOutcome {
    match &cfg.mode {
        OptimMode::FullBatch => maximize_full_batch(obj, x0, cfg),
        OptimMode::MiniBatchSgd { batch_size, learning_rate, epochs } => {
            maximize_sgd(obj, x0, cfg, *batch_size, *learning_rate, *epochs)
        }
    }
}

fn maximize_full_batch<O: Objective>(obj: &O, x0: Vec<f64>, cfg: &OptimizerConfig) -> OptimOutcome {
    let mut x = x0;
    let mut f = obj.value(&x);
    let mut g = obj.gradient(&x);
    let mut iterations = 0;

    // Phase 1: adaptive-step gradient ascent.
    let mut step = cfg.initial_step;
    while iterations < cfg.ga_iters.min(cfg.max_iters) {
        if inf_norm(&g) <= cfg.grad_tol {
            return OptimOutcome { grad_inf_norm: inf_norm(&g), x, value: f, converged: true, iterations };
        }
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(g.iter()).map(|(xi, gi)| xi + step * gi).collect();
            let ft = obj.value(&trial);
            if ft.is_finite() && ft > f {
                x = trial;
                f = ft;
                g = obj.gradient(&x);
                step *= 1.5;
                accepted = true;
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        iterations += 1;
        if !accepted {
            break; // stalled; hand over to the quasi-Newton pass
        }
    }

    // Phase 2: L-BFGS refinement.
    if cfg.quasi_newton {
        let m = cfg.lbfgs_memory.max(1);
        let mut s_hist: Vec<Vec<f64>> = Vec::new();
        let mut y_hist: Vec<Vec<f64>> = Vec::new();
        let mut rho_hist: Vec<f64> = Vec::new();

        while iterations < cfg.max_iters {
            let gnorm = inf_norm(&g);
            if gnorm <= cfg.grad_tol {
                return OptimOutcome { x, value: f, grad_inf_norm: gnorm, converged: true, iterations };
            }
            let dir = lbfgs_direction(&g, &s_hist, &y_hist, &rho_hist);
            // dir should be an ascent direction; fall back to the gradient
            let slope = dot(&dir, &g);
            let (dir, slope) = if slope > 0.0 { (dir, slope) } else { (g.clone(), dot(&g, &g)) };

            // Armijo backtracking on the ascent direction.
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> =
                    x.iter().zip(dir.iter()).map(|(xi, di)| xi + alpha * di).collect();
                let ft = obj.value(&trial);
                if ft.is_finite() && ft >= f + 1e-4 * alpha * slope {
                    let gt = obj.gradient(&trial);
                    let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = gt.iter().zip(g.iter()).map(|(a, b)| b - a).collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-12 {
                        if s_hist.len() == m {
                            s_hist.remove(0);
                            y_hist.remove(0);
                            rho_hist.remove(0);
                        }
                        s_hist.push(s);
                        y_hist.push(y);
                        rho_hist.push(1.0 / sy);
                    }
                    x = trial;
                    f = ft;
                    g = gt;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            iterations += 1;
            if !moved {
                break; // line search exhausted
            }
        }
    }

    let gnorm = inf_norm(&g);
    OptimOutcome { converged: gnorm <= cfg.grad_tol, x, value: f, grad_inf_norm: gnorm, iterations }
}

/// Two-loop recursion for an ascent direction on f, using the descent
/// machinery on -f. History vectors are zero at fixed coordinates, so the
/// returned direction is too.
fn lbfgs_direction(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>], rho: &[f64]) -> Vec<f64> {
    // minimize -f: gradient of -f is -g; direction for x is the negation.
    let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
    let k = s_hist.len();
    let mut alphas = alloc::vec![0.0; k];
    for i in (0..k).rev() {
        // s and y here are stored as (s, grad_prev - grad_next) = y for -f
        let a = rho[i] * dot(&s_hist[i], &q);
        alphas[i] = a;
        for (qj, yj) in q.iter_mut().zip(y_hist[i].iter()) {
            *qj -= a * yj;
        }
    }
    if k > 0 {
        let last = k - 1;
        let yy = dot(&y_hist[last], &y_hist[last]);
        if yy > 0.0 {
            let gamma = 1.0 / (rho[last] * yy);
            for qj in q.iter_mut() {
                *qj *= gamma;
            }
        }
    }
    for i in 0..k {
        let b = rho[i] * dot(&y_hist[i], &q);
        let a = alphas[i];
        for (qj, sj) in q.iter_mut().zip(s_hist[i].iter()) {
            *qj += (a - b) * sj;
        }
    }
    // q now approximates -H^-1 * (-g) scaled; negate to step uphill on f
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn maximize_sgd<O: Objective>(
    obj: &O,
    x0: Vec<f64>,
    cfg: &OptimizerConfig,
    batch_size: usize,
    learning_rate: f64,
    epochs: usize,
) -> OptimOutcome {
    use rand::seq::SliceRandom;
    let n = obj.n_rows();
    let batch_size = batch_size.max(1).min(n.max(1));
    let mut x = x0;
    let mut iterations = 0;
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = rng::stream_rng(cfg.seed, epoch as u64);
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            let g = obj.gradient_rows(&x, batch);
            for (xi, gi) in x.iter_mut().zip(g.iter()) {
                *xi += learning_rate * gi;
            }
            iterations += 1;
        }
    }
    let value = obj.value(&x);
    let g = obj.gradient(&x);
    let gnorm = inf_norm(&g);
    OptimOutcome { converged: gnorm <= cfg.grad_tol, x, value, grad_inf_norm: gnorm, iterations }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::linalg::dot(a, b)
}
