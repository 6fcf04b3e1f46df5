//! Cosine feature map and its parameter fit.
//!
//! Inputs are pairs (spindle speed, tool wear). After min-max normalization
//! the map produces 11 features: the five non-constant degree-2 monomials
//! and the same monomial basis (including the constant) multiplied by a
//! variable-frequency wave term
//!
//! ```text
//! ω_α(x̃) = cos(α₁ + α₂x̃₁ + α₃x̃₂ + α₄x̃₁² + α₅x̃₁x̃₂ + α₆x̃₂²)
//! ```
//!
//! The parameters (α, β, c) of the auxiliary model `f = β·φ(x̃; α) + c` are
//! fitted by least squares: every trial starts from a perturbed α, solves
//! (β, c) exactly as a linear subproblem, then descends the joint
//! 18-parameter objective with L-BFGS. A patience-based local search keeps
//! perturbing the best starting point found so far.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lbfgs;

/// Number of features produced by the map.
pub const PHI_DIM: usize = 11;
/// α (6) + β (11) + c (1).
pub const PARAM_DIM: usize = 18;

/// Reference wave parameters fitted on the machining-center A dataset.
pub const ALPHA_CENTER_A: Alpha = Alpha([
    15.52749483,
    -4.46971848,
    -9.55499409,
    -14.22448621,
    -2.38118747,
    14.75707122,
]);

/// Reference wave parameters fitted on the machining-center B dataset.
pub const ALPHA_CENTER_B: Alpha = Alpha([
    -2.87183284,
    11.95336368,
    0.99781459,
    28.58595761,
    2.27955561,
    -4.34204599,
]);

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("input feature {index} is constant over the dataset; min-max range is zero")]
    DegenerateRange { index: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite value encountered in input")]
    NonFinite,
}

/// Per-feature minimum and range of the training data, used for min-max
/// normalization (training min maps to 0, training max to 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    /// Per-feature minimum (RPM, cm²).
    pub m: [f64; 2],
    /// Per-feature range (RPM, cm²).
    pub s: [f64; 2],
}

impl NormStats {
    pub fn normalize(&self, x: [f64; 2]) -> [f64; 2] {
        [(x[0] - self.m[0]) / self.s[0], (x[1] - self.m[1]) / self.s[1]]
    }
}

/// Phase/frequency coefficients of the wave term, on normalized inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha(pub [f64; 6]);

/// Full parameter set of the fitted feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub alpha: Alpha,
    pub beta: [f64; PHI_DIM],
    pub c: f64,
    pub norm: NormStats,
    /// Mean squared error of the auxiliary least-squares model on the data
    /// the parameters were fitted to.
    pub fit_mse: f64,
}

/// A labelled point: raw input (speed RPM, wear cm²) and stability limit.
pub type Point = ([f64; 2], f64);

/// Feature-space dataset: one 11-vector per record plus the target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl FeatureDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Min and range per input feature over the dataset.
pub fn compute_norm_stats(points: &[Point]) -> Result<NormStats, FeatureError> {
    if points.len() < 2 {
        return Err(FeatureError::TooFewPoints { need: 2, got: points.len() });
    }
    let mut m = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (x, _) in points {
        for i in 0..2 {
            if !x[i].is_finite() {
                return Err(FeatureError::NonFinite);
            }
            m[i] = m[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
    }
    let s = [hi[0] - m[0], hi[1] - m[1]];
    for (i, &si) in s.iter().enumerate() {
        if si <= 0.0 {
            return Err(FeatureError::DegenerateRange { index: i });
        }
    }
    Ok(NormStats { m, s })
}

/// Degree-2 monomial basis [1, x̃₁, x̃₂, x̃₁², x̃₁x̃₂, x̃₂²]; the same basis
/// feeds the cosine argument and the ω-block of the feature map.
#[inline]
fn monomials(xt: [f64; 2]) -> [f64; 6] {
    let (a, b) = (xt[0], xt[1]);
    [1.0, a, b, a * a, a * b, b * b]
}

/// Wave term: cosine of the degree-2 polynomial in the normalized inputs.
pub fn omega(xt: [f64; 2], alpha: &Alpha) -> f64 {
    let g = monomials(xt);
    let arg: f64 = alpha.0.iter().zip(&g).map(|(a, gi)| a * gi).sum();
    arg.cos()
}

/// The 11-feature map on a normalized input.
pub fn phi_cos(xt: [f64; 2], alpha: &Alpha) -> [f64; PHI_DIM] {
    let g = monomials(xt);
    let w = omega(xt, alpha);
    [
        g[1],
        g[2],
        g[3],
        g[4],
        g[5],
        w,
        g[1] * w,
        g[2] * w,
        g[3] * w,
        g[4] * w,
        g[5] * w,
    ]
}

/// Auxiliary model value β·φ(x̃; α) + c on a normalized input.
pub fn model_value(alpha: &Alpha, beta: &[f64; PHI_DIM], c: f64, xt: [f64; 2]) -> f64 {
    let phi = phi_cos(xt, alpha);
    beta.iter().zip(&phi).map(|(b, p)| b * p).sum::<f64>() + c
}

/// Mean squared error of the fitted parameters on a raw dataset.
pub fn model_mse(params: &FeatureParams, points: &[Point]) -> Result<f64, FeatureError> {
    if points.is_empty() {
        return Err(FeatureError::EmptyDataset);
    }
    let mut acc = 0.0;
    for &(x, y) in points {
        let e = model_value(&params.alpha, &params.beta, params.c, params.norm.normalize(x)) - y;
        acc += e * e;
    }
    Ok(acc / points.len() as f64)
}

/// Map a raw dataset through the fitted feature map. Inputs outside the
/// training range normalize to values outside [0, 1] and are accepted.
pub fn build_feature_dataset(points: &[Point], params: &FeatureParams) -> FeatureDataset {
    let mut x = Vec::with_capacity(points.len());
    let mut y = Vec::with_capacity(points.len());
    for &(xi, yi) in points {
        x.push(phi_cos(params.norm.normalize(xi), &params.alpha).to_vec());
        y.push(yi);
    }
    FeatureDataset { x, y }
}

/// Objective and analytic gradient of the mean squared error over the
/// joint parameter vector [α; β; c], on pre-normalized points. This is the
/// function the fit descends; it is public so the gradient can be checked
/// against finite differences.
pub fn mse_objective(theta: &[f64], pts: &[([f64; 2], f64)], grad: &mut [f64]) -> f64 {
    debug_assert_eq!(theta.len(), PARAM_DIM);
    let alpha: &[f64] = &theta[0..6];
    let beta: &[f64] = &theta[6..17];
    let c = theta[17];
    let n = pts.len() as f64;
    grad.fill(0.0);
    let mut acc = 0.0;
    for &(xt, y) in pts {
        let g = monomials(xt);
        let arg: f64 = alpha.iter().zip(&g).map(|(a, gi)| a * gi).sum();
        let (sin_u, cos_u) = arg.sin_cos();
        let mut value = c;
        for k in 0..5 {
            value += beta[k] * g[k + 1];
        }
        // β-weight of the wave block at this point.
        let mut wave_coef = 0.0;
        for k in 0..6 {
            wave_coef += beta[5 + k] * g[k];
        }
        value += wave_coef * cos_u;
        let e = value - y;
        acc += e * e;

        let scale = 2.0 * e / n;
        for r in 0..6 {
            grad[r] += scale * wave_coef * (-sin_u) * g[r];
        }
        for k in 0..5 {
            grad[6 + k] += scale * g[k + 1];
        }
        for k in 0..6 {
            grad[11 + k] += scale * g[k] * cos_u;
        }
        grad[17] += scale;
    }
    acc / n
}

/// Exact least-squares solve for (β, c) given α, via SVD on the 12-column
/// design matrix. Rank deficiency (e.g. a constant wave term duplicating
/// the monomial block) resolves to the minimum-norm solution.
fn solve_beta_c(alpha: &Alpha, pts: &[([f64; 2], f64)]) -> ([f64; PHI_DIM], f64) {
    let n = pts.len();
    let mut design = nalgebra::DMatrix::<f64>::zeros(n, PHI_DIM + 1);
    let mut rhs = nalgebra::DVector::<f64>::zeros(n);
    for (row, &(xt, y)) in pts.iter().enumerate() {
        let phi = phi_cos(xt, alpha);
        for (col, &p) in phi.iter().enumerate() {
            design[(row, col)] = p;
        }
        design[(row, PHI_DIM)] = 1.0;
        rhs[row] = y;
    }
    let svd = design.svd(true, true);
    let sol = svd.solve(&rhs, 1e-12).expect("SVD solve cannot fail with both factors");
    let mut beta = [0.0; PHI_DIM];
    beta.copy_from_slice(&sol.as_slice()[..PHI_DIM]);
    (beta, sol[PHI_DIM])
}

/// Settings for the restart-based parameter fit.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub seed: u64,
    /// Consecutive non-improving trials before stopping.
    pub patience: usize,
    /// Standard deviation of the per-component Gaussian start perturbation.
    pub restart_std: f64,
    /// Hard cap on the total number of trials, if any.
    pub max_trials: Option<usize>,
    pub lbfgs: lbfgs::Options,
}

impl FitOptions {
    pub fn new(seed: u64) -> Self {
        FitOptions {
            seed,
            patience: 1000,
            restart_std: 10.0,
            max_trials: None,
            lbfgs: lbfgs::Options::default(),
        }
    }
}

/// Fit (α, β, c) by randomized local search over α starting points.
///
/// Each trial perturbs the incumbent start (initially the origin) with
/// i.i.d. Gaussian noise, solves (β, c) in closed form for that α, then
/// runs a joint L-BFGS descent. The incumbent is the *starting* α whose
/// descent reached the lowest MSE so far; the returned parameters are the
/// best post-descent values. Deterministic for a fixed seed.
pub fn fit_feature_params(points: &[Point], opts: &FitOptions) -> Result<FeatureParams, FeatureError> {
    if points.len() <= PARAM_DIM {
        return Err(FeatureError::TooFewPoints { need: PARAM_DIM + 1, got: points.len() });
    }
    for &(x, y) in points {
        if !x[0].is_finite() || !x[1].is_finite() || !y.is_finite() {
            return Err(FeatureError::NonFinite);
        }
    }
    let norm = compute_norm_stats(points)?;
    let pts: Vec<([f64; 2], f64)> = points.iter().map(|&(x, y)| (norm.normalize(x), y)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let noise = Normal::new(0.0, opts.restart_std).expect("std must be finite");

    let mut incumbent_start: Option<[f64; 6]> = None;
    let mut best: Option<(Alpha, [f64; PHI_DIM], f64, f64)> = None;
    let mut stale = 0usize;
    let mut trial = 0usize;

    while stale < opts.patience && opts.max_trials.is_none_or(|cap| trial < cap) {
        let mut start_alpha = incumbent_start.unwrap_or([0.0; 6]);
        for a in start_alpha.iter_mut() {
            *a += noise.sample(&mut rng);
        }
        let alpha0 = Alpha(start_alpha);
        let (beta0, c0) = solve_beta_c(&alpha0, &pts);

        let mut theta = [0.0; PARAM_DIM];
        theta[0..6].copy_from_slice(&start_alpha);
        theta[6..17].copy_from_slice(&beta0);
        theta[17] = c0;
        let out = lbfgs::minimize(|t, g| mse_objective(t, &pts, g), &theta, &opts.lbfgs);

        if best.as_ref().is_none_or(|(_, _, _, mse)| out.value < *mse) {
            let mut alpha = [0.0; 6];
            alpha.copy_from_slice(&out.x[0..6]);
            let mut beta = [0.0; PHI_DIM];
            beta.copy_from_slice(&out.x[6..17]);
            best = Some((Alpha(alpha), beta, out.x[17], out.value));
            incumbent_start = Some(start_alpha);
            stale = 0;
        } else {
            stale += 1;
        }
        trial += 1;
    }

    let (alpha, beta, c, fit_mse) = best.expect("at least one trial runs");
    Ok(FeatureParams { alpha, beta, c, norm, fit_mse })
}

/// MSE of the best plain degree-2 polynomial model (the α = 0 wave term is
/// constant, so the map collapses onto the monomial basis). Used as a
/// baseline the cosine fit must not lose to.
pub fn polynomial_baseline_mse(points: &[Point]) -> Result<f64, FeatureError> {
    if points.is_empty() {
        return Err(FeatureError::EmptyDataset);
    }
    let norm = compute_norm_stats(points)?;
    let pts: Vec<([f64; 2], f64)> = points.iter().map(|&(x, y)| (norm.normalize(x), y)).collect();
    let n = pts.len();
    let mut design = nalgebra::DMatrix::<f64>::zeros(n, 6);
    let mut rhs = nalgebra::DVector::<f64>::zeros(n);
    for (row, &(xt, y)) in pts.iter().enumerate() {
        let g = monomials(xt);
        for (col, &v) in g.iter().enumerate() {
            design[(row, col)] = v;
        }
        rhs[row] = y;
    }
    let svd = design.clone().svd(true, true);
    let sol = svd.solve(&rhs, 1e-12).expect("SVD solve cannot fail with both factors");
    let residual = design * sol - rhs;
    Ok(residual.norm_squared() / n as f64)
}
