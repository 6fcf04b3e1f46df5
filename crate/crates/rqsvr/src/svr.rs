//! ε-support vector regression in an explicit feature space.
//!
//! The dual problem is solved by sequential minimal optimization over the
//! `2ℓ` box variables (α, α*): each step picks the maximal-KKT-violating
//! pair, solves the two-variable subproblem analytically and clips to the
//! box, until the maximal violation drops below the tolerance. The weight
//! vector is maintained explicitly (linear kernel), so gradients cost
//! O(ℓd) per step.
//!
//! Hyperparameter selection runs a C grid search with k-fold
//! cross-validation; the fold assignment is drawn once per search and
//! reused for every grid value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::kfold_splits;
use crate::features::FeatureDataset;
use crate::seeds::fnv1a64;

/// Default KKT-violation stopping tolerance of the solver.
pub const DEFAULT_TOL: f64 = 1e-3;

/// Guard for vanishing curvature in the pair update.
const TAU: f64 = 1e-12;

/// Safety cap on pair updates.
const MAX_ITER: usize = 20_000_000;

#[derive(Debug, Error)]
pub enum SvrError {
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("row {row} has {got} features, expected {expected}")]
    RowLengthMismatch { row: usize, got: usize, expected: usize },
    #[error("x has {rows} rows but y has {targets} targets")]
    TargetLengthMismatch { rows: usize, targets: usize },
    #[error("non-finite value in training data at row {0}")]
    NonFinite(usize),
    #[error("penalty C must be positive, got {0}")]
    BadPenalty(f64),
    #[error("epsilon must be nonnegative, got {0}")]
    BadEpsilon(f64),
    #[error("solver tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("prediction input has {got} features, model has {expected}")]
    PredictDimensionMismatch { got: usize, expected: usize },
    #[error("cross-validation needs 2 <= k <= n, got k = {k} for n = {n}")]
    BadFoldCount { k: usize, n: usize },
    #[error("grid of C values is empty")]
    EmptyGrid,
}

/// Penalty and tube width of the ε-SVR problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrHyperparams {
    pub c: f64,
    pub epsilon: f64,
}

impl Default for SvrHyperparams {
    fn default() -> Self {
        SvrHyperparams { c: 1.0, epsilon: 0.1 }
    }
}

/// A converged fit: primal weights, bias, and the signed dual coefficients
/// `α_i - α*_i` (one per training row, each in `[-C, C]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SvrFit {
    pub w: Vec<f64>,
    pub b: f64,
    pub dual_coefs: Vec<f64>,
    /// Dual objective (minimized form) at the returned point.
    pub objective: f64,
    /// Number of pair updates performed.
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate(x: &[Vec<f64>], y: &[f64], hp: &SvrHyperparams, tol: f64) -> Result<usize, SvrError> {
    if x.len() < 2 {
        return Err(SvrError::TooFewRows(x.len()));
    }
    if x.len() != y.len() {
        return Err(SvrError::TargetLengthMismatch { rows: x.len(), targets: y.len() });
    }
    let d = x[0].len();
    for (row, xi) in x.iter().enumerate() {
        if xi.len() != d {
            return Err(SvrError::RowLengthMismatch { row, got: xi.len(), expected: d });
        }
        if xi.iter().any(|v| !v.is_finite()) || !y[row].is_finite() {
            return Err(SvrError::NonFinite(row));
        }
    }
    if !(hp.c > 0.0) {
        return Err(SvrError::BadPenalty(hp.c));
    }
    if !(hp.epsilon >= 0.0) {
        return Err(SvrError::BadEpsilon(hp.epsilon));
    }
    if !(tol > 0.0) {
        return Err(SvrError::BadTolerance(tol));
    }
    Ok(d)
}

/// Train an ε-SVR by SMO on the dual, stopping when the maximal KKT
/// violation falls below `tol`.
///
/// Degenerate datasets (e.g. identical rows with conflicting targets)
/// converge to `w = 0` with the best feasible bias rather than erroring.
pub fn fit_epsilon_svr(
    x: &[Vec<f64>],
    y: &[f64],
    hp: &SvrHyperparams,
    tol: f64,
) -> Result<SvrFit, SvrError> {
    let d = validate(x, y, hp, tol)?;
    let l = x.len();
    let c = hp.c;
    let eps = hp.epsilon;

    // Variables t in 0..2l: t < l are α (label +1), t >= l are α* (label -1).
    // Gradient of variable t is y_t * (w·x_i) + eps - y_t * y_i.
    let mut beta = vec![0.0f64; 2 * l];
    let mut w = vec![0.0f64; d];
    let mut f: Vec<f64> = vec![0.0; l];
    let mut iterations = 0usize;
    let bound_tol = 1e-10 * c.max(1.0);

    let label = |t: usize| if t < l { 1.0 } else { -1.0 };

    loop {
        // Maximal-violating-pair selection over the up/low index sets.
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        let mut t_up = None;
        let mut t_low = None;
        for t in 0..2 * l {
            let i = t % l;
            let yt = label(t);
            let g = yt * f[i] + eps - yt * y[i];
            let score = -yt * g;
            let movable_up = beta[t] < c - bound_tol;
            let movable_down = beta[t] > bound_tol;
            let in_up = if yt > 0.0 { movable_up } else { movable_down };
            let in_low = if yt > 0.0 { movable_down } else { movable_up };
            if in_up && score > m_up {
                m_up = score;
                t_up = Some(t);
            }
            if in_low && score < m_low {
                m_low = score;
                t_low = Some(t);
            }
        }
        let (Some(ti), Some(tj)) = (t_up, t_low) else { break };
        if m_up - m_low <= tol || iterations >= MAX_ITER {
            break;
        }

        let (ii, jj) = (ti % l, tj % l);
        let (yi, yj) = (label(ti), label(tj));
        let kii = dot(&x[ii], &x[ii]);
        let kjj = dot(&x[jj], &x[jj]);
        let kij = dot(&x[ii], &x[jj]);
        let quad = (kii + kjj - 2.0 * kij).max(TAU);

        // Feasible direction: beta[ti] += yi*λ, beta[tj] -= yj*λ.
        let mut lambda = (m_up - m_low) / quad;
        let cap_i = if yi > 0.0 { c - beta[ti] } else { beta[ti] };
        let cap_j = if yj > 0.0 { beta[tj] } else { c - beta[tj] };
        lambda = lambda.min(cap_i).min(cap_j);
        if lambda <= 0.0 {
            break;
        }

        let snap = |v: f64| {
            if v < bound_tol {
                0.0
            } else if v > c - bound_tol {
                c
            } else {
                v
            }
        };
        beta[ti] = snap(beta[ti] + yi * lambda);
        beta[tj] = snap(beta[tj] - yj * lambda);

        for (wk, (xik, xjk)) in w.iter_mut().zip(x[ii].iter().zip(&x[jj])) {
            *wk += lambda * (xik - xjk);
        }
        iterations += 1;
        if iterations % 1024 == 0 {
            // Rebuild w from the duals to cancel accumulated rounding.
            w = weights_from_duals(x, &beta, d);
        }
        for (fi, xi) in f.iter_mut().zip(x) {
            *fi = dot(&w, xi);
        }
    }

    let w = weights_from_duals(x, &beta, d);
    let dual_coefs: Vec<f64> = (0..l).map(|i| beta[i] - beta[l + i]).collect();
    let b = solve_bias(x, y, &beta, &w, c, eps, bound_tol);

    let norm_sqr = dot(&w, &w);
    let linear: f64 = eps * beta.iter().sum::<f64>()
        - y.iter().zip(&dual_coefs).map(|(yi, t)| yi * t).sum::<f64>();
    let objective = 0.5 * norm_sqr + linear;

    Ok(SvrFit { w, b, dual_coefs, objective, iterations })
}

fn weights_from_duals(x: &[Vec<f64>], beta: &[f64], d: usize) -> Vec<f64> {
    let l = x.len();
    let mut w = vec![0.0; d];
    for i in 0..l {
        let theta = beta[i] - beta[l + i];
        if theta != 0.0 {
            for (wk, xik) in w.iter_mut().zip(&x[i]) {
                *wk += theta * xik;
            }
        }
    }
    w
}

/// Bias from the KKT conditions: average the implied value over free
/// support vectors; with none free, take the midpoint of the feasible
/// interval (a constant-target fit lands exactly on the tube midpoint).
fn solve_bias(
    x: &[Vec<f64>],
    y: &[f64],
    beta: &[f64],
    w: &[f64],
    c: f64,
    eps: f64,
    bound_tol: f64,
) -> f64 {
    let l = x.len();
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..l {
        let g = y[i] - dot(w, &x[i]);
        let a_plus = beta[i];
        let a_minus = beta[l + i];
        if a_plus > bound_tol && a_plus < c - bound_tol {
            free_sum += g - eps;
            free_count += 1;
        }
        if a_minus > bound_tol && a_minus < c - bound_tol {
            free_sum += g + eps;
            free_count += 1;
        }
        if a_plus <= bound_tol {
            lo = lo.max(g - eps);
        } else if a_plus >= c - bound_tol {
            hi = hi.min(g - eps);
        }
        if a_minus <= bound_tol {
            hi = hi.min(g + eps);
        } else if a_minus >= c - bound_tol {
            lo = lo.max(g + eps);
        }
    }
    if free_count > 0 {
        free_sum / free_count as f64
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

/// Linear-model prediction `w·φ + b`.
pub fn predict_classical(fit: &SvrFit, phi: &[f64]) -> Result<f64, SvrError> {
    if phi.len() != fit.w.len() {
        return Err(SvrError::PredictDimensionMismatch { got: phi.len(), expected: fit.w.len() });
    }
    Ok(dot(&fit.w, phi) + fit.b)
}

/// The grid {10^-3, ..., 10^2} used by default for the C search.
pub fn default_c_grid() -> Vec<f64> {
    (-3..=2).map(|k| 10f64.powi(k)).collect()
}

/// Per-C cross-validation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub c: f64,
    pub fold_mses: Vec<f64>,
    pub mean_mse: f64,
    /// Hash of the fold assignment used for this entry; identical across
    /// entries by construction.
    pub fold_hash: String,
}

/// Outcome of the C grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<f64>,
    pub k: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Fold id per dataset row; a pure function of (n, k, seed).
    pub fold_assignment: Vec<usize>,
    pub fold_hash: String,
    pub entries: Vec<CvEntry>,
    pub best_c: f64,
}

pub fn fold_assignment_hash(assignment: &[usize]) -> String {
    let bytes: Vec<u8> = assignment.iter().flat_map(|&f| (f as u32).to_le_bytes()).collect();
    format!("{:016x}", fnv1a64(&bytes))
}

/// Grid search over C with k-fold cross-validation. The data is shuffled
/// once with the seed; every C value reuses the same folds. The best C is
/// the grid value with the smallest mean MSE (first on ties).
pub fn grid_search_cv(
    data: &FeatureDataset,
    grid: &[f64],
    k: usize,
    epsilon: f64,
    seed: u64,
) -> Result<CvReport, SvrError> {
    let n = data.len();
    if grid.is_empty() {
        return Err(SvrError::EmptyGrid);
    }
    if k < 2 || k > n {
        return Err(SvrError::BadFoldCount { k, n });
    }
    let assignment = kfold_splits(n, k, seed).map_err(|_| SvrError::BadFoldCount { k, n })?;
    let fold_hash = fold_assignment_hash(&assignment);

    let mut entries = Vec::with_capacity(grid.len());
    for &c in grid {
        let hp = SvrHyperparams { c, epsilon };
        let mut fold_mses = Vec::with_capacity(k);
        for fold in 0..k {
            let mut train_x = Vec::new();
            let mut train_y = Vec::new();
            let mut test_x = Vec::new();
            let mut test_y = Vec::new();
            for i in 0..n {
                if assignment[i] == fold {
                    test_x.push(data.x[i].clone());
                    test_y.push(data.y[i]);
                } else {
                    train_x.push(data.x[i].clone());
                    train_y.push(data.y[i]);
                }
            }
            let fit = fit_epsilon_svr(&train_x, &train_y, &hp, DEFAULT_TOL)?;
            let mse = test_x
                .iter()
                .zip(&test_y)
                .map(|(xi, yi)| {
                    let e = dot(&fit.w, xi) + fit.b - yi;
                    e * e
                })
                .sum::<f64>()
                / test_y.len() as f64;
            fold_mses.push(mse);
        }
        let mean_mse = fold_mses.iter().sum::<f64>() / k as f64;
        entries.push(CvEntry { c, fold_mses, mean_mse, fold_hash: fold_hash.clone() });
    }

    let best_c = entries
        .iter()
        .min_by(|a, b| a.mean_mse.partial_cmp(&b.mean_mse).unwrap())
        .map(|e| e.c)
        .unwrap();

    Ok(CvReport {
        grid: grid.to_vec(),
        k,
        epsilon,
        seed,
        fold_assignment: assignment,
        fold_hash,
        entries,
        best_c,
    })
}
