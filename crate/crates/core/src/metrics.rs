//! Evaluation: test-set misclassification and TPR/TNR of mean-difference
//! support recovery. The difference matrix `D(mu)` stacks the vectorized
//! consecutive differences `vec(mu_1 - mu_2), ..., vec(mu_{J-1} - mu_J)` as
//! columns.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Fraction of mismatched labels.
pub fn misclassification_rate(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::Dimension {
            context: "misclassification rate",
            expected: format!("{} predictions", truth.len()),
            found: format!("{}", predictions.len()),
        });
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("misclassification rate of empty sets".into()));
    }
    let wrong = predictions.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / predictions.len() as f64)
}

/// Support-recovery rates. Denominators of zero (no true nonzeros, or no
/// true zeros) surface as `None`, never as a silent 0/0.
#[derive(Clone, Debug)]
pub struct SupportRecovery {
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    /// Row-major `rc x (J-1)` support indicators of `D(mu_hat)`.
    pub d_hat_support: Vec<bool>,
    /// Same shape for `D(mu_star)`.
    pub d_star_support: Vec<bool>,
    pub rows: usize,
    pub cols: usize,
}

fn difference_support(mu: &[Matrix], zero_tol: f64) -> Vec<bool> {
    let (r, c) = (mu[0].rows(), mu[0].cols());
    let rc = r * c;
    let cols = mu.len() - 1;
    let mut support = vec![false; rc * cols];
    for (k, w) in mu.windows(2).enumerate() {
        let diff = w[0].sub(&w[1]);
        for (z, v) in diff.vec_col_major().iter().enumerate() {
            support[z * cols + k] = v.abs() > zero_tol;
        }
    }
    support
}

/// TPR and TNR of the estimated mean-difference support against the truth,
/// entries within `zero_tol` counting as zero.
pub fn support_metrics(
    mu_hat: &[Matrix],
    mu_star: &[Matrix],
    zero_tol: f64,
) -> Result<SupportRecovery> {
    if mu_hat.len() != mu_star.len() || mu_hat.is_empty() {
        return Err(Error::Dimension {
            context: "support metrics",
            expected: format!("{} means", mu_star.len()),
            found: format!("{}", mu_hat.len()),
        });
    }
    if mu_hat.len() < 2 {
        return Err(Error::InvalidArgument(
            "support metrics need at least two classes".into(),
        ));
    }
    for (a, b) in mu_hat.iter().zip(mu_star) {
        if !a.same_shape(b) || !a.same_shape(&mu_hat[0]) {
            return Err(Error::Dimension {
                context: "support metrics means",
                expected: format!("{}x{}", mu_hat[0].rows(), mu_hat[0].cols()),
                found: format!("{}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
            });
        }
    }
    let d_hat = difference_support(mu_hat, zero_tol);
    let d_star = difference_support(mu_star, zero_tol);

    let mut true_pos = 0usize;
    let mut star_pos = 0usize;
    let mut true_neg = 0usize;
    let mut star_neg = 0usize;
    for (h, s) in d_hat.iter().zip(&d_star) {
        if *s {
            star_pos += 1;
            if *h {
                true_pos += 1;
            }
        } else {
            star_neg += 1;
            if !*h {
                true_neg += 1;
            }
        }
    }
    Ok(SupportRecovery {
        tpr: (star_pos > 0).then(|| true_pos as f64 / star_pos as f64),
        tnr: (star_neg > 0).then(|| true_neg as f64 / star_neg as f64),
        d_hat_support: d_hat,
        d_star_support: d_star,
        rows: mu_hat[0].rows() * mu_hat[0].cols(),
        cols: mu_hat.len() - 1,
    })
}
