//! Fused-mean block update: minimizes
//! `g(mu, phi, delta) + lambda1 sum_{j<m} ||w_{j,m} o (mu_j - mu_m)||_1`
//! over the class means by an accelerated alternating minimization algorithm
//! on the constrained reformulation `Theta_{j,m} = mu_j - mu_m`:
//! closed-form mu updates, entrywise soft-threshold Theta updates, and dual
//! ascent on the Lagrangian variables Gamma, with Nesterov extrapolation on
//! the duals restarted on a fixed 200-iteration schedule (and adaptively when
//! the combined residual grows).

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Matrix, SymMatrix};

/// Ordered class pairs `(j, m)` with `j < m` (0-based), in the canonical
/// enumeration used to key `Theta`, `Gamma`, and weights.
pub fn class_pairs(num_classes: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(num_classes * num_classes.saturating_sub(1) / 2);
    for j in 0..num_classes {
        for m in (j + 1)..num_classes {
            out.push((j, m));
        }
    }
    out
}

/// Fusion weights for one class pair. Entries where the sample means agree
/// exactly carry infinite weight; those are flagged `forced` (the fused
/// limit: the corresponding difference is constrained to zero).
#[derive(Clone, Debug)]
pub struct PairWeights {
    values: Matrix,
    forced: Vec<bool>,
}

impl PairWeights {
    pub fn new(values: Matrix, forced: Vec<bool>) -> Result<Self> {
        if forced.len() != values.rows() * values.cols() {
            return Err(Error::Dimension {
                context: "pair weights",
                expected: format!("{} flags", values.rows() * values.cols()),
                found: format!("{}", forced.len()),
            });
        }
        if values.data().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        Ok(Self { values, forced })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    #[inline]
    pub fn is_forced(&self, i: usize, j: usize) -> bool {
        self.forced[i * self.values.cols() + j]
    }

    pub fn any_forced(&self) -> bool {
        self.forced.iter().any(|&f| f)
    }
}

/// Data-driven weights `w_{j,m} = 1/|xbar_j - xbar_m|` entrywise, with
/// zero denominators flagged as forced-equal. Returned in `class_pairs`
/// order.
pub fn compute_weights(class_means: &[Matrix]) -> Vec<PairWeights> {
    class_pairs(class_means.len())
        .into_iter()
        .map(|(j, m)| {
            let diff = class_means[j].sub(&class_means[m]);
            let mut forced = Vec::with_capacity(diff.rows() * diff.cols());
            let values = diff.map(|d| {
                if d == 0.0 {
                    forced.push(true);
                    0.0
                } else {
                    forced.push(false);
                    1.0 / d.abs()
                }
            });
            PairWeights { values, forced }
        })
        .collect()
}

/// The mean subproblem: data summaries, fixed precision factors with their
/// eigendecompositions cached, the fusion penalty level, and the weights.
#[derive(Clone, Debug)]
pub struct MeanProblem {
    xbar: Vec<Matrix>,
    priors: Vec<f64>,
    lambda1: f64,
    weights: Vec<PairWeights>,
    phi: SymMatrix,
    delta: SymMatrix,
    phi_inv: Matrix,
    delta_inv: Matrix,
    phi_min_eig: f64,
    delta_min_eig: f64,
}

impl MeanProblem {
    pub fn new(
        xbar: Vec<Matrix>,
        priors: Vec<f64>,
        phi: &SymMatrix,
        delta: &SymMatrix,
        lambda1: f64,
        weights: Vec<PairWeights>,
    ) -> Result<Self> {
        let j = xbar.len();
        if priors.len() != j {
            return Err(Error::Dimension {
                context: "mean problem priors",
                expected: format!("{j}"),
                found: format!("{}", priors.len()),
            });
        }
        if weights.len() != j * j.saturating_sub(1) / 2 {
            return Err(Error::Dimension {
                context: "mean problem weights",
                expected: format!("{} pairs", j * j.saturating_sub(1) / 2),
                found: format!("{}", weights.len()),
            });
        }
        if !(lambda1 >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda1 must be >= 0, got {lambda1}")));
        }
        let phi_eig = sym_eigen(phi)?;
        let delta_eig = sym_eigen(delta)?;
        let (phi_min_eig, delta_min_eig) = (phi_eig.min_eigenvalue(), delta_eig.min_eigenvalue());
        if phi_min_eig <= 0.0 || delta_min_eig <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                pivot: 0,
                value: phi_min_eig.min(delta_min_eig),
            });
        }
        Ok(Self {
            xbar,
            priors,
            lambda1,
            weights,
            phi: phi.clone(),
            delta: delta.clone(),
            phi_inv: phi_eig.inverse()?.to_matrix(),
            delta_inv: delta_eig.inverse()?.to_matrix(),
            phi_min_eig,
            delta_min_eig,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.xbar.len()
    }

    pub fn xbar(&self) -> &[Matrix] {
        &self.xbar
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn weights(&self) -> &[PairWeights] {
        &self.weights
    }

    pub fn phi_min_eigenvalue(&self) -> f64 {
        self.phi_min_eig
    }

    pub fn delta_min_eigenvalue(&self) -> f64 {
        self.delta_min_eig
    }

    /// The mu-relevant part of the objective:
    /// `sum_j pi_j tr{phi (xbar_j - mu_j) delta (xbar_j - mu_j)^T}
    ///  + lambda1 sum_{j<m} ||w o (mu_j - mu_m)||_1`.
    /// Forced-equal entries contribute zero when the difference is zero and
    /// infinity otherwise.
    pub fn objective(&self, mu: &[Matrix]) -> f64 {
        let phi_m = self.phi.to_matrix();
        let delta_m = self.delta.to_matrix();
        let mut val = 0.0;
        for (j, m) in mu.iter().enumerate() {
            let a = self.xbar[j].sub(m);
            let pa = phi_m.matmul(&a);
            let ad = a.matmul(&delta_m);
            val += self.priors[j]
                * pa.data().iter().zip(ad.data()).map(|(x, y)| x * y).sum::<f64>();
        }
        if self.lambda1 > 0.0 {
            for (p, (j, m)) in class_pairs(mu.len()).into_iter().enumerate() {
                let w = &self.weights[p];
                let diff = mu[j].sub(&mu[m]);
                for row in 0..diff.rows() {
                    for col in 0..diff.cols() {
                        let d = diff.get(row, col);
                        if w.is_forced(row, col) {
                            if d != 0.0 {
                                return f64::INFINITY;
                            }
                        } else {
                            val += self.lambda1 * w.values().get(row, col) * d.abs();
                        }
                    }
                }
            }
        }
        val
    }
}

/// Primal/dual iterates of the alternating minimization algorithm.
#[derive(Clone, Debug)]
pub struct FusionState {
    pub mu: Vec<Matrix>,
    pub theta: Vec<Matrix>,
    pub gamma: Vec<Matrix>,
    pub rho: f64,
}

impl FusionState {
    /// Cold start: means at the sample means, differences as primal Theta,
    /// zero duals.
    pub fn cold(prob: &MeanProblem, rho: f64) -> Self {
        let mu: Vec<Matrix> = prob.xbar().to_vec();
        let theta: Vec<Matrix> = class_pairs(mu.len())
            .into_iter()
            .map(|(j, m)| mu[j].sub(&mu[m]))
            .collect();
        let gamma = vec![Matrix::zeros(mu[0].rows(), mu[0].cols()); theta.len()];
        Self { mu, theta, gamma, rho }
    }

    /// Warm start from previous dual iterates.
    pub fn warm(prob: &MeanProblem, rho: f64, gamma: Vec<Matrix>) -> Self {
        let mut s = Self::cold(prob, rho);
        if gamma.len() == s.gamma.len() {
            s.gamma = gamma;
        }
        s
    }
}

/// Entrywise soft-thresholding `soft(x, tau) = max(|x| - tau, 0) sign(x)`.
pub fn soft_threshold(x: &Matrix, tau: &Matrix) -> Matrix {
    assert!(x.same_shape(tau), "soft_threshold shape mismatch");
    x.zip_with(tau, |v, t| {
        let m = v.abs() - t;
        if m > 0.0 {
            m * v.signum()
        } else {
            0.0
        }
    })
}

fn soft_threshold_weighted(x: &Matrix, scale: f64, w: &PairWeights) -> Matrix {
    Matrix::from_fn(x.rows(), x.cols(), |i, j| {
        if w.is_forced(i, j) {
            0.0
        } else {
            let v = x.get(i, j);
            let m = v.abs() - scale * w.values().get(i, j);
            if m > 0.0 {
                m * v.signum()
            } else {
                0.0
            }
        }
    })
}

/// Closed-form first-order optimality update:
/// `mu_j = xbar_j + (1/(2 pi_j)) phi^{-1} (sum_{m>j} Gamma_{j,m} - sum_{m<j} Gamma_{m,j}) delta^{-1}`.
pub fn mu_step(gamma: &[Matrix], prob: &MeanProblem) -> Vec<Matrix> {
    let j_classes = prob.num_classes();
    let pairs = class_pairs(j_classes);
    let (r, c) = (prob.xbar()[0].rows(), prob.xbar()[0].cols());
    let mut net = vec![Matrix::zeros(r, c); j_classes];
    for (p, (j, m)) in pairs.into_iter().enumerate() {
        net[j] = net[j].add(&gamma[p]);
        net[m] = net[m].sub(&gamma[p]);
    }
    (0..j_classes)
        .map(|j| {
            let corr = prob
                .phi_inv
                .matmul(&net[j])
                .matmul(&prob.delta_inv)
                .scale(1.0 / (2.0 * prob.priors()[j]));
            prob.xbar()[j].add(&corr)
        })
        .collect()
}

/// Soft-threshold update
/// `Theta_{j,m} = soft(mu_j - mu_m - Gamma_{j,m}/rho, (lambda1/rho) w_{j,m})`,
/// with forced-equal entries pinned to zero.
pub fn theta_step(mu: &[Matrix], gamma: &[Matrix], rho: f64, prob: &MeanProblem) -> Vec<Matrix> {
    class_pairs(mu.len())
        .into_iter()
        .enumerate()
        .map(|(p, (j, m))| {
            let target = mu[j].sub(&mu[m]).sub(&gamma[p].scale(1.0 / rho));
            soft_threshold_weighted(&target, prob.lambda1() / rho, &prob.weights()[p])
        })
        .collect()
}

/// Dual ascent `Gamma_{j,m} <- Gamma_{j,m} + rho (Theta_{j,m} - mu_j + mu_m)`.
pub fn gamma_step(gamma: &[Matrix], theta: &[Matrix], mu: &[Matrix], rho: f64) -> Vec<Matrix> {
    class_pairs(mu.len())
        .into_iter()
        .enumerate()
        .map(|(p, (j, m))| {
            let resid = theta[p].sub(&mu[j]).add(&mu[m]);
            gamma[p].add(&resid.scale(rho))
        })
        .collect()
}

/// Convergence-safe step size: the theoretical bound
/// `min_j(pi_j) 4 k_phi k_delta / J` divided by 10 for numerical headroom.
pub fn step_size_bound(phi: &SymMatrix, delta: &SymMatrix, priors: &[f64]) -> Result<f64> {
    let k_phi = sym_eigen(phi)?.min_eigenvalue();
    let k_delta = sym_eigen(delta)?.min_eigenvalue();
    Ok(step_size_bound_from_eigs(k_phi, k_delta, priors))
}

/// Same bound with the minimum eigenvalues already in hand.
pub fn step_size_bound_from_eigs(k_phi: f64, k_delta: f64, priors: &[f64]) -> f64 {
    let min_prior = priors.iter().cloned().fold(f64::INFINITY, f64::min);
    let j = priors.len() as f64;
    min_prior * 4.0 * k_phi * k_delta / (10.0 * j)
}

/// Inner-solver controls.
#[derive(Clone, Debug)]
pub struct AccelConfig {
    /// Max-norm tolerance on the primal residual and relative dual change.
    pub tol: f64,
    /// Absolute duality-gap tolerance; bounds how far the returned means can
    /// sit above the block optimum (keeps the outer descent monotone).
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Fixed acceleration-restart interval.
    pub restart_interval: usize,
    /// Also restart whenever the combined residual increases.
    pub adaptive_restart: bool,
}

impl Default for AccelConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            gap_tol: 1e-9,
            max_iter: 10_000,
            restart_interval: 200,
            adaptive_restart: true,
        }
    }
}

/// Exact duality gap of the mean subproblem at `mu = mu_step(gamma)`:
/// `sum lambda1 w |d| + <gamma, d>` over pair entries, `d = mu_j - mu_m`,
/// valid (finite) only when `|gamma| <= lambda1 w` entrywise. Forced-equal
/// entries contribute `|gamma d|`.
fn duality_gap(mu: &[Matrix], gamma: &[Matrix], prob: &MeanProblem) -> f64 {
    let mut gap = 0.0;
    for (p, (j, m)) in class_pairs(mu.len()).into_iter().enumerate() {
        let w = &prob.weights()[p];
        let diff = mu[j].sub(&mu[m]);
        for row in 0..diff.rows() {
            for col in 0..diff.cols() {
                let d = diff.get(row, col);
                let g = gamma[p].get(row, col);
                if w.is_forced(row, col) {
                    gap += (g * d).abs();
                } else {
                    let bound = prob.lambda1() * w.values().get(row, col);
                    if g.abs() > bound * (1.0 + 1e-12) {
                        return f64::INFINITY;
                    }
                    gap += bound * d.abs() + g * d;
                }
            }
        }
    }
    gap
}

/// Outcome of one mean-subproblem solve. Non-convergence is a status, not an
/// error: the outer descent may proceed with the best iterates.
#[derive(Clone, Debug)]
pub struct MeanSolve {
    pub mu: Vec<Matrix>,
    pub state: FusionState,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_change: f64,
    pub converged: bool,
}

fn max_norm_over(mats: &[Matrix]) -> f64 {
    mats.iter().fold(0.0f64, |m, x| m.max(x.max_abs()))
}

/// Runs the accelerated alternating minimization until both the primal
/// residual `max_{j<m} ||Theta - (mu_j - mu_m)||_max` and the relative dual
/// change fall below `accel.tol`. A final unaccelerated pass re-derives
/// `mu` and `Theta` from the converged duals so the returned `mu` is exactly
/// stationary for the returned `Gamma`.
pub fn solve_mean_subproblem(
    prob: &MeanProblem,
    init: FusionState,
    accel: &AccelConfig,
) -> MeanSolve {
    let rho = init.rho;
    let pairs = class_pairs(prob.num_classes());

    // No penalty (or a single class): the minimizer is the sample means.
    if prob.lambda1() == 0.0 || pairs.is_empty() {
        let mu = prob.xbar().to_vec();
        let theta: Vec<Matrix> =
            pairs.iter().map(|&(j, m)| mu[j].sub(&mu[m])).collect();
        let gamma = vec![Matrix::zeros(mu[0].rows(), mu[0].cols()); pairs.len()];
        return MeanSolve {
            mu: mu.clone(),
            state: FusionState { mu, theta, gamma, rho },
            iterations: 1,
            primal_residual: 0.0,
            dual_change: 0.0,
            converged: true,
        };
    }

    let mut gamma = init.gamma;
    let mut gamma_hat = gamma.clone();
    let mut alpha = 1.0f64;
    let mut prev_combined = f64::INFINITY;
    let mut since_restart = 0usize;

    let mut iterations = 0;
    let mut primal_residual = f64::INFINITY;
    let mut dual_change = f64::INFINITY;
    let mut converged = false;

    for t in 1..=accel.max_iter {
        iterations = t;
        let mu = mu_step(&gamma_hat, prob);
        let theta = theta_step(&mu, &gamma_hat, rho, prob);
        let residuals: Vec<Matrix> = pairs
            .iter()
            .enumerate()
            .map(|(p, &(j, m))| theta[p].sub(&mu[j]).add(&mu[m]))
            .collect();
        // Dual ascent from the extrapolated point.
        let new_gamma: Vec<Matrix> = gamma_hat
            .iter()
            .zip(&residuals)
            .map(|(gh, res)| gh.add(&res.scale(rho)))
            .collect();

        primal_residual = max_norm_over(&residuals);
        let gamma_scale = max_norm_over(&new_gamma).max(1.0);
        dual_change = new_gamma
            .iter()
            .zip(&gamma)
            .fold(0.0f64, |m, (a, b)| m.max(a.max_abs_diff(b)))
            / gamma_scale;

        if !primal_residual.is_finite() {
            // Diverged (step size too large); report the blowup.
            gamma = new_gamma;
            break;
        }
        if primal_residual <= accel.tol
            && dual_change <= accel.tol
            && duality_gap(&mu, &gamma_hat, prob) <= accel.gap_tol
        {
            gamma = new_gamma;
            converged = true;
            break;
        }

        let combined: f64 = new_gamma
            .iter()
            .zip(&gamma_hat)
            .map(|(a, b)| {
                let d = a.sub(b);
                d.data().iter().map(|v| v * v).sum::<f64>()
            })
            .sum();

        since_restart += 1;
        let fixed_restart = since_restart >= accel.restart_interval;
        let adaptive_restart =
            accel.adaptive_restart && combined.is_finite() && combined > prev_combined;
        if fixed_restart || adaptive_restart {
            alpha = 1.0;
            gamma_hat = new_gamma.clone();
            since_restart = 0;
            prev_combined = f64::INFINITY;
        } else {
            let alpha_next = 0.5 * (1.0 + (1.0 + 4.0 * alpha * alpha).sqrt());
            let beta = (alpha - 1.0) / alpha_next;
            gamma_hat = new_gamma
                .iter()
                .zip(&gamma)
                .map(|(cur, prev)| cur.add(&cur.sub(prev).scale(beta)))
                .collect();
            alpha = alpha_next;
            prev_combined = combined;
        }
        gamma = new_gamma;
    }

    // Final unaccelerated pass: mu is the exact minimizer of F_0(., Theta, gamma)
    // for the returned duals, and Theta satisfies its subgradient equation.
    let mu = mu_step(&gamma, prob);
    let theta = theta_step(&mu, &gamma, rho, prob);
    let final_primal = pairs
        .iter()
        .enumerate()
        .fold(0.0f64, |m, (p, &(j, mm))| {
            m.max(theta[p].sub(&mu[j]).add(&mu[mm]).max_abs())
        });
    if final_primal.is_finite() {
        primal_residual = final_primal;
    }

    MeanSolve {
        mu: mu.clone(),
        state: FusionState { mu, theta, gamma, rho },
        iterations,
        primal_residual,
        dual_change,
        converged,
    }
}
