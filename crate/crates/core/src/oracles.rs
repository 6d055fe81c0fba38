//! Brute-force reference solvers for test suites. These deliberately share
//! nothing with the production solvers beyond the dense kernels: the
//! graphical-lasso oracle is a projected subgradient method on the symmetric
//! free parameterization, and the mean oracle is plain subgradient descent on
//! the fused objective. Both use restarted Polyak steps (target = best value
//! so far minus a shrinking slack).

use crate::linalg::{cholesky, sym_eigen, Matrix, SymMatrix};
use crate::meanfuse::{class_pairs, PairWeights};

/// Objective `tr(S Theta) - log det Theta + tau ||Theta||_1`, evaluated
/// directly; +inf outside the positive definite cone.
pub fn glasso_objective_direct(theta: &SymMatrix, s: &SymMatrix, tau: f64) -> f64 {
    match cholesky(theta) {
        Ok(ch) => s.trace_product(theta) - ch.log_det() + tau * theta.l1_norm(),
        Err(_) => f64::INFINITY,
    }
}

/// Projected subgradient minimization of the graphical-lasso objective.
/// Returns the best iterate and its objective value.
pub fn glasso_subgradient_oracle(
    s: &SymMatrix,
    tau: f64,
    iterations: usize,
) -> (SymMatrix, f64) {
    let d = s.dim();
    let eig_floor = 1e-6;
    let mut theta =
        SymMatrix::diag(&(0..d).map(|a| 1.0 / (s.get(a, a) + tau).max(1e-3)).collect::<Vec<_>>());
    let mut best = theta.clone();
    let mut f_best = glasso_objective_direct(&theta, s, tau);
    let mut slack = 0.5;
    let phase_len = 1500;
    let mut phase_start_best = f_best;

    for k in 0..iterations {
        // Subgradient: S - Theta^{-1} + tau sign(Theta), sign(0) = 0.
        let inv = cholesky(&theta).expect("projected iterate is PD").inverse();
        let sub = SymMatrix::from_fn(d, |a, b| {
            s.get(a, b) - inv.get(a, b) + tau * sign0(theta.get(a, b))
        });
        let norm_sq: f64 = sub.data().iter().map(|v| v * v).sum();
        if norm_sq <= 1e-30 {
            break;
        }
        let f_cur = glasso_objective_direct(&theta, s, tau);
        // Polyak step toward the estimated optimum.
        let step = (f_cur - (f_best - slack)).max(1e-12) / norm_sq;
        let cand = theta.to_matrix().sub(&sub.to_matrix().scale(step));
        // Projection: clamp the spectrum away from zero when needed.
        let mut cand_sym = SymMatrix::symmetrized(&cand);
        if cholesky(&cand_sym).is_err() {
            let e = sym_eigen(&cand_sym).expect("finite symmetric iterate");
            cand_sym = e.apply_spectrum(|v| v.max(eig_floor));
        }
        theta = cand_sym;
        let f_new = glasso_objective_direct(&theta, s, tau);
        if f_new < f_best {
            f_best = f_new;
            best = theta.clone();
        }
        // Halve the Polyak slack only when a phase failed to realize it;
        // the iterate keeps wandering (subgradient methods are not descent
        // methods, resetting to the incumbent stalls them on kinks).
        if k % phase_len == phase_len - 1 {
            if f_best > phase_start_best - 0.5 * slack {
                slack = (slack * 0.5).max(1e-11);
            }
            phase_start_best = f_best;
        }
    }
    (best, f_best)
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Fused-mean objective of the mean subproblem, evaluated directly:
/// `sum_j pi_j tr{phi (xbar_j - mu_j) delta (xbar_j - mu_j)^T}
///  + lambda1 sum_{j<m} ||w o (mu_j - mu_m)||_1`.
pub fn mean_objective_direct(
    mu: &[Matrix],
    xbar: &[Matrix],
    priors: &[f64],
    phi: &SymMatrix,
    delta: &SymMatrix,
    lambda1: f64,
    weights: &[PairWeights],
) -> f64 {
    let phi_m = phi.to_matrix();
    let delta_m = delta.to_matrix();
    let mut val = 0.0;
    for (j, m) in mu.iter().enumerate() {
        let a = xbar[j].sub(m);
        let pa = phi_m.matmul(&a);
        let ad = a.matmul(&delta_m);
        val += priors[j] * pa.data().iter().zip(ad.data()).map(|(x, y)| x * y).sum::<f64>();
    }
    for (p, (j, m)) in class_pairs(mu.len()).into_iter().enumerate() {
        let diff = mu[j].sub(&mu[m]);
        for row in 0..diff.rows() {
            for col in 0..diff.cols() {
                if !weights[p].is_forced(row, col) {
                    val += lambda1
                        * weights[p].values().get(row, col)
                        * diff.get(row, col).abs();
                }
            }
        }
    }
    val
}

/// Plain subgradient descent on the fused-mean objective. Returns the best
/// iterate and its objective value.
#[allow(clippy::too_many_arguments)]
pub fn mean_subgradient_oracle(
    xbar: &[Matrix],
    priors: &[f64],
    phi: &SymMatrix,
    delta: &SymMatrix,
    lambda1: f64,
    weights: &[PairWeights],
    iterations: usize,
) -> (Vec<Matrix>, f64) {
    let j_classes = xbar.len();
    let (r, c) = (xbar[0].rows(), xbar[0].cols());
    let pairs = class_pairs(j_classes);
    let phi_m = phi.to_matrix();
    let delta_m = delta.to_matrix();

    let mut mu: Vec<Matrix> = xbar.to_vec();
    let mut best = mu.clone();
    let mut f_best = mean_objective_direct(&mu, xbar, priors, phi, delta, lambda1, weights);
    let mut slack = 0.5;
    let phase_len = 1500;
    let mut phase_start_best = f_best;

    for k in 0..iterations {
        // Subgradient of the smooth part plus the weighted L1 fusion term.
        let mut grad = Vec::with_capacity(j_classes);
        for j in 0..j_classes {
            let a = xbar[j].sub(&mu[j]);
            grad.push(phi_m.matmul(&a).matmul(&delta_m).scale(-2.0 * priors[j]));
        }
        for (p, &(j, m)) in pairs.iter().enumerate() {
            let diff = mu[j].sub(&mu[m]);
            for row in 0..r {
                for col in 0..c {
                    if weights[p].is_forced(row, col) {
                        continue;
                    }
                    let g = lambda1
                        * weights[p].values().get(row, col)
                        * sign0(diff.get(row, col));
                    let gj = grad[j].get(row, col);
                    grad[j].set(row, col, gj + g);
                    let gm = grad[m].get(row, col);
                    grad[m].set(row, col, gm - g);
                }
            }
        }
        let norm_sq: f64 = grad.iter().map(|g| g.data().iter().map(|v| v * v).sum::<f64>()).sum();
        if norm_sq <= 1e-30 {
            break;
        }
        let f_cur = mean_objective_direct(&mu, xbar, priors, phi, delta, lambda1, weights);
        let step = (f_cur - (f_best - slack)).max(1e-12) / norm_sq;
        for (m, g) in mu.iter_mut().zip(&grad) {
            *m = m.sub(&g.scale(step));
        }
        let f_new = mean_objective_direct(&mu, xbar, priors, phi, delta, lambda1, weights);
        if f_new < f_best {
            f_best = f_new;
            best = mu.clone();
        }
        if k % phase_len == phase_len - 1 {
            if f_best > phase_start_best - 0.5 * slack {
                slack = (slack * 0.5).max(1e-11);
            }
            phase_start_best = f_best;
        }
    }
    (best, f_best)
}
