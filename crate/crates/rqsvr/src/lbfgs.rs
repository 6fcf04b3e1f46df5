//! Limited-memory BFGS minimization for small smooth problems.
//!
//! Two-loop recursion over a bounded history of curvature pairs, combined
//! with a strong-Wolfe line search (bracket and bisection zoom). The line
//! search never accepts a point with a higher value than the iterate it
//! started from, so the objective is non-increasing across iterations.

/// Optimizer settings.
#[derive(Debug, Clone)]
pub struct Options {
    /// Number of curvature pairs retained.
    pub memory: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    /// Iteration cap per minimization.
    pub max_iters: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options { memory: 10, grad_tol: 1e-8, max_iters: 500, c1: 1e-4, c2: 0.9 }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimize `f`, which writes the gradient into its second argument and
/// returns the objective value.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &Options) -> Outcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut value = f(&x, &mut grad);

    // (s, y, rho) history, newest last.
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        let gnorm = norm(&grad);
        if !gnorm.is_finite() || gnorm <= opts.grad_tol {
            break;
        }

        // Two-loop recursion for the search direction.
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = match history.last() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0,
        };
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            // Fall back to steepest descent when curvature info misleads.
            dir = grad.iter().map(|g| -g).collect();
            slope = -gnorm * gnorm;
        }

        let Some((new_x, new_grad, new_value)) = wolfe_search(&mut f, &x, value, &dir, slope, opts)
        else {
            break;
        };

        let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == opts.memory {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }

        x = new_x;
        grad = new_grad;
        value = new_value;
        iterations += 1;
    }

    Outcome { grad_norm: norm(&grad), x, value, iterations }
}

/// Strong-Wolfe line search. Returns `(x, grad, value)` or `None` when no
/// acceptable step is found; never returns a point above the start value.
fn wolfe_search<F>(
    f: &mut F,
    x: &[f64],
    value0: f64,
    dir: &[f64],
    slope0: f64,
    opts: &Options,
) -> Option<(Vec<f64>, Vec<f64>, f64)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let a_max = 1e6;
    let mut a_prev = 0.0;
    let mut v_prev = value0;
    let mut a = 1.0;
    let mut grad_a = vec![0.0; n];

    for i in 0..20 {
        let xa: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + a * di).collect();
        let v = f(&xa, &mut grad_a);
        let slope_a = dot(&grad_a, dir);
        if !v.is_finite() || v > value0 + opts.c1 * a * slope0 || (i > 0 && v >= v_prev) {
            return zoom(f, x, value0, dir, slope0, a_prev, v_prev, a, opts);
        }
        if slope_a.abs() <= -opts.c2 * slope0 {
            return Some((xa, grad_a, v));
        }
        if slope_a >= 0.0 {
            return zoom(f, x, value0, dir, slope0, a, v, a_prev, opts);
        }
        a_prev = a;
        v_prev = v;
        a = (2.0 * a).min(a_max);
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn zoom<F>(
    f: &mut F,
    x: &[f64],
    value0: f64,
    dir: &[f64],
    slope0: f64,
    mut a_lo: f64,
    mut v_lo: f64,
    mut a_hi: f64,
    opts: &Options,
) -> Option<(Vec<f64>, Vec<f64>, f64)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let mut grad_a = vec![0.0; n];
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    for _ in 0..30 {
        let a = 0.5 * (a_lo + a_hi);
        let xa: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + a * di).collect();
        let v = f(&xa, &mut grad_a);
        let slope_a = dot(&grad_a, dir);
        if v.is_finite() && v < value0 && best.as_ref().is_none_or(|b| v < b.2) {
            best = Some((xa.clone(), grad_a.clone(), v));
        }
        if !v.is_finite() || v > value0 + opts.c1 * a * slope0 || v >= v_lo {
            a_hi = a;
        } else {
            if slope_a.abs() <= -opts.c2 * slope0 {
                return Some((xa, grad_a, v));
            }
            if slope_a * (a_hi - a_lo) >= 0.0 {
                a_hi = a_lo;
            }
            a_lo = a;
            v_lo = v;
        }
        if (a_hi - a_lo).abs() < 1e-16 {
            break;
        }
    }
    best
}
