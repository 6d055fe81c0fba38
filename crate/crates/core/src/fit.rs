//! Blockwise coordinate descent over (means, column precision, row
//! precision): accelerated fused-mean solve, two graphical-lasso block
//! updates, identifiability normalization, warm-started duals, convergence
//! monitoring on the penalized objective, and post-hoc thresholding that
//! turns near-equal mean entries into exact ties.

use crate::error::{Error, Result};
use crate::glasso::{glasso_solve, GlassoProblem};
use crate::linalg::{Matrix, SymMatrix};
use crate::matnorm::{
    class_counts_and_means, flipflop_mle, neg_loglik_g, s_delta, s_phi, LabeledMatrixDataset,
    ModelParameters,
};
use crate::meanfuse::{
    class_pairs, compute_weights, solve_mean_subproblem, step_size_bound_from_eigs, AccelConfig,
    FusionState, MeanProblem, PairWeights,
};

/// Penalty levels and solver controls for one fit.
#[derive(Clone, Debug)]
pub struct PenaltyConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Outer stopping tolerance: stop when the objective decrease falls below
    /// `epsilon * |f(initialization)|`.
    pub epsilon: f64,
    pub max_outer_iter: usize,
    /// Post-convergence fusing: mean-difference entries at or below this are
    /// set exactly equal.
    pub mean_fuse_threshold: f64,
    pub glasso_tol: f64,
    pub glasso_max_iter: usize,
    pub ama: AccelConfig,
    /// Mild tolerance for the flip-flop initializer.
    pub flipflop_tol: f64,
    pub flipflop_max_iter: usize,
}

impl PenaltyConfig {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            epsilon: 1e-6,
            max_outer_iter: 100,
            mean_fuse_threshold: 1e-6,
            glasso_tol: 1e-6,
            glasso_max_iter: 500,
            ama: AccelConfig::default(),
            flipflop_tol: 1e-3,
            flipflop_max_iter: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "penalties must be nonnegative (lambda1 = {}, lambda2 = {})",
                self.lambda1, self.lambda2
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.mean_fuse_threshold >= 0.0) {
            return Err(Error::InvalidArgument("mean_fuse_threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-outer-iteration solver diagnostics.
#[derive(Clone, Debug)]
pub struct OuterIterationStats {
    pub objective: f64,
    pub rho: f64,
    pub ama_iterations: usize,
    pub ama_primal_residual: f64,
    pub ama_converged: bool,
    pub glasso_delta_iterations: usize,
    pub glasso_delta_residual: f64,
    pub glasso_phi_iterations: usize,
    pub glasso_phi_residual: f64,
}

/// A completed fit: parameters, the outer objective trace (initial value
/// first), and inner-solver diagnostics.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: ModelParameters,
    pub objective_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_diagnostics: Vec<OuterIterationStats>,
    pub converged: bool,
    /// Final dual iterates of the mean solver, for warm-starting a related
    /// fit (adjacent tuning-grid cell).
    pub final_duals: Vec<Matrix>,
}

impl FitResult {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            phi: self.params.phi.clone(),
            delta: self.params.delta.clone(),
            duals: self.final_duals.clone(),
        }
    }
}

/// Starting point carried between related fits.
#[derive(Clone, Debug)]
pub struct WarmStart {
    pub phi: SymMatrix,
    pub delta: SymMatrix,
    pub duals: Vec<Matrix>,
}

/// Rescales `(phi_tilde, delta)` to the canonical pair with
/// `||phi||_1 = r`, leaving the penalized objective unchanged.
pub fn normalize_pair(phi_tilde: &SymMatrix, delta: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let norm = phi_tilde.l1_norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidArgument(
            "cannot normalize a zero (or non-finite) phi".into(),
        ));
    }
    let r = phi_tilde.dim() as f64;
    Ok((phi_tilde.scale(r / norm), delta.scale(norm / r)))
}

fn fusion_penalty(
    mu: &[Matrix],
    weights: &[PairWeights],
    lambda1: f64,
    strict_forced: bool,
) -> Result<f64> {
    if lambda1 == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (p, (j, m)) in class_pairs(mu.len()).into_iter().enumerate() {
        let w = &weights[p];
        let diff = mu[j].sub(&mu[m]);
        for row in 0..diff.rows() {
            for col in 0..diff.cols() {
                let d = diff.get(row, col);
                if w.is_forced(row, col) {
                    if strict_forced && d != 0.0 {
                        return Err(Error::ForcedEqualViolated {
                            class_a: j + 1,
                            class_b: m + 1,
                            row,
                            col,
                        });
                    }
                    // Fused limit: contributes zero.
                } else {
                    total += w.values().get(row, col) * d.abs();
                }
            }
        }
    }
    Ok(lambda1 * total)
}

/// The penalized objective
/// `f = g + lambda1 sum_{j<m} ||w o (mu_j - mu_m)||_1 + lambda2 ||delta||_1 ||phi||_1`
/// with data-driven weights. Forced-equal weight entries (classes whose
/// sample means tie exactly) must be fused in `mu`; a violation is an error.
pub fn penalized_objective_f(
    data: &LabeledMatrixDataset,
    mu: &[Matrix],
    phi: &SymMatrix,
    delta: &SymMatrix,
    cfg: &PenaltyConfig,
) -> Result<f64> {
    let summary = class_counts_and_means(data)?;
    let weights = compute_weights(&summary.means);
    objective_with_weights(data, mu, phi, delta, cfg, &weights, true)
}

fn objective_with_weights(
    data: &LabeledMatrixDataset,
    mu: &[Matrix],
    phi: &SymMatrix,
    delta: &SymMatrix,
    cfg: &PenaltyConfig,
    weights: &[PairWeights],
    strict_forced: bool,
) -> Result<f64> {
    let g = neg_loglik_g(data, mu, phi, delta)?;
    let penalty = fusion_penalty(mu, weights, cfg.lambda1, strict_forced)?;
    Ok(g + penalty + cfg.lambda2 * delta.l1_norm() * phi.l1_norm())
}

/// Entrywise post-hoc fusing: per entry, classes whose pairwise differences
/// fall within the threshold (or whose pair is forced-equal) are merged to
/// their prior-weighted average. Merging is transitive.
fn threshold_fuse(
    mu: &mut [Matrix],
    priors: &[f64],
    weights: &[PairWeights],
    threshold: f64,
) {
    let j_classes = mu.len();
    if j_classes < 2 {
        return;
    }
    let pairs = class_pairs(j_classes);
    let (r, c) = (mu[0].rows(), mu[0].cols());
    let mut parent: Vec<usize> = Vec::with_capacity(j_classes);
    for row in 0..r {
        for col in 0..c {
            parent.clear();
            parent.extend(0..j_classes);
            fn find(parent: &mut Vec<usize>, i: usize) -> usize {
                let mut root = i;
                while parent[root] != root {
                    root = parent[root];
                }
                let mut cur = i;
                while parent[cur] != root {
                    let next = parent[cur];
                    parent[cur] = root;
                    cur = next;
                }
                root
            }
            for (p, &(j, m)) in pairs.iter().enumerate() {
                let diff = (mu[j].get(row, col) - mu[m].get(row, col)).abs();
                if weights[p].is_forced(row, col) || diff <= threshold {
                    let (rj, rm) = (find(&mut parent, j), find(&mut parent, m));
                    if rj != rm {
                        parent[rm] = rj;
                    }
                }
            }
            // Prior-weighted average within each merged component.
            let mut weight_sum = vec![0.0f64; j_classes];
            let mut value_sum = vec![0.0f64; j_classes];
            for j in 0..j_classes {
                let root = find(&mut parent, j);
                weight_sum[root] += priors[j];
                value_sum[root] += priors[j] * mu[j].get(row, col);
            }
            for j in 0..j_classes {
                let root = find(&mut parent, j);
                if weight_sum[root] > 0.0 {
                    let fused = value_sum[root] / weight_sum[root];
                    mu[j].set(row, col, fused);
                }
            }
        }
    }
}

/// Fits the penalized model by blockwise coordinate descent (cold start).
pub fn fit(data: &LabeledMatrixDataset, cfg: &PenaltyConfig) -> Result<FitResult> {
    fit_warm(data, cfg, None)
}

/// Fits with an optional warm start for the precision pair and mean-solver
/// duals. Cold starts initialize from the diagonal of a mildly-converged
/// flip-flop maximum-likelihood estimate.
pub fn fit_warm(
    data: &LabeledMatrixDataset,
    cfg: &PenaltyConfig,
    warm: Option<&WarmStart>,
) -> Result<FitResult> {
    cfg.validate()?;
    let (r, c) = (data.r(), data.c());
    let summary = class_counts_and_means(data)?;
    let weights = compute_weights(&summary.means);
    let pairs = class_pairs(data.num_classes());

    let (mut phi, mut delta) = match warm {
        Some(w) if w.phi.dim() == r && w.delta.dim() == c => {
            normalize_pair(&w.phi, &w.delta)?
        }
        _ => {
            let ff = flipflop_mle(data, cfg.flipflop_tol, cfg.flipflop_max_iter)?;
            let phi0 = SymMatrix::diag(&ff.phi.diagonal());
            let delta0 = SymMatrix::diag(&ff.delta.diagonal());
            normalize_pair(&phi0, &delta0)?
        }
    };
    let mut duals = match warm {
        Some(w) if w.duals.len() == pairs.len() => w.duals.clone(),
        _ => vec![Matrix::zeros(r, c); pairs.len()],
    };

    let mut mu = summary.means.clone();
    let f_init = objective_with_weights(data, &mu, &phi, &delta, cfg, &weights, false)?;
    let mut trace = vec![f_init];
    let mut diagnostics = Vec::new();
    let mut f_prev = f_init;
    let mut converged = false;
    let mut outer_iterations = 0;

    for _ in 0..cfg.max_outer_iter {
        outer_iterations += 1;

        // Mean block: accelerated alternating minimization, warm-started duals.
        let prob = MeanProblem::new(
            summary.means.clone(),
            summary.priors.clone(),
            &phi,
            &delta,
            cfg.lambda1,
            weights.clone(),
        )?;
        let rho = step_size_bound_from_eigs(
            prob.phi_min_eigenvalue(),
            prob.delta_min_eigenvalue(),
            &summary.priors,
        );
        let msol =
            solve_mean_subproblem(&prob, FusionState::warm(&prob, rho, duals), &cfg.ama);
        mu = msol.mu;
        duals = msol.state.gamma;

        // Delta block: GL{S_delta(mu, phi), (lambda2/r) ||phi||_1}.
        let sd = s_delta(data, &mu, &phi);
        let tau_delta = cfg.lambda2 * phi.l1_norm() / r as f64;
        let (delta_tilde, gd_iters, gd_res) =
            solve_gl_block(sd, tau_delta, cfg, Some(&delta))?;

        // Phi block: GL{S_phi(mu, delta_tilde), (lambda2/c) ||delta_tilde||_1}.
        let sp = s_phi(data, &mu, &delta_tilde);
        let tau_phi = cfg.lambda2 * delta_tilde.l1_norm() / c as f64;
        let (phi_tilde, gp_iters, gp_res) = solve_gl_block(sp, tau_phi, cfg, Some(&phi))?;

        // Identifiability normalization; leaves the objective unchanged.
        let (phi_bar, delta_bar) = normalize_pair(&phi_tilde, &delta_tilde)?;
        phi = phi_bar;
        delta = delta_bar;

        let f_cur = objective_with_weights(data, &mu, &phi, &delta, cfg, &weights, false)?;
        trace.push(f_cur);
        diagnostics.push(OuterIterationStats {
            objective: f_cur,
            rho,
            ama_iterations: msol.iterations,
            ama_primal_residual: msol.primal_residual,
            ama_converged: msol.converged,
            glasso_delta_iterations: gd_iters,
            glasso_delta_residual: gd_res,
            glasso_phi_iterations: gp_iters,
            glasso_phi_residual: gp_res,
        });

        if f_prev - f_cur < cfg.epsilon * f_init.abs() {
            converged = true;
            break;
        }
        f_prev = f_cur;
    }

    threshold_fuse(&mut mu, &summary.priors, &weights, cfg.mean_fuse_threshold);

    let params = ModelParameters { priors: summary.priors, means: mu, phi, delta };
    params.validate()?;
    Ok(FitResult {
        params,
        objective_trace: trace,
        outer_iterations,
        inner_diagnostics: diagnostics,
        converged,
        final_duals: duals,
    })
}

/// One graphical-lasso block solve; a max-iteration stop is downgraded to its
/// best iterate (the proximal path is monotone, so descent is preserved).
fn solve_gl_block(
    s: SymMatrix,
    tau: f64,
    cfg: &PenaltyConfig,
    warm: Option<&SymMatrix>,
) -> Result<(SymMatrix, usize, f64)> {
    let problem = GlassoProblem::new(s, tau)?;
    match glasso_solve(&problem, cfg.glasso_tol, cfg.glasso_max_iter, warm) {
        Ok(sol) => Ok((sol.theta, sol.iterations, sol.kkt_residual)),
        Err(Error::GlassoMaxIter { iterations, residual, best }) => {
            Ok((*best, iterations, residual))
        }
        Err(e) => Err(e),
    }
}
