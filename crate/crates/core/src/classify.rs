//! Plug-in linear discriminant rule induced by the fitted model: the class
//! score is the log-prior plus the (negative half) Mahalanobis term under the
//! Kronecker precision; class-independent constants are dropped.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::matnorm::ModelParameters;

/// Per-class discriminant scores and the predicted label (1-based). Ties
/// break to the smallest class index.
#[derive(Clone, Debug)]
pub struct DiscriminantScores {
    pub scores: Vec<f64>,
    pub predicted: usize,
}

/// `score_j = log pi_j - (1/2) tr{phi (x - mu_j) delta (x - mu_j)^T}`.
pub fn score(x: &Matrix, params: &ModelParameters) -> Result<DiscriminantScores> {
    if x.rows() != params.r() || x.cols() != params.c() {
        return Err(Error::Dimension {
            context: "classifier input",
            expected: format!("{}x{}", params.r(), params.c()),
            found: format!("{}x{}", x.rows(), x.cols()),
        });
    }
    let phi_m = params.phi.to_matrix();
    let delta_m = params.delta.to_matrix();
    let mut scores = Vec::with_capacity(params.num_classes());
    for (mu, &prior) in params.means.iter().zip(&params.priors) {
        let a = x.sub(mu);
        let pa = phi_m.matmul(&a);
        let ad = a.matmul(&delta_m);
        let quad: f64 = pa.data().iter().zip(ad.data()).map(|(p, d)| p * d).sum();
        scores.push(prior.ln() - 0.5 * quad);
    }
    let mut predicted = 0;
    for (j, &s) in scores.iter().enumerate() {
        if s > scores[predicted] {
            predicted = j;
        }
    }
    Ok(DiscriminantScores { scores, predicted: predicted + 1 })
}

/// Scores every observation; deterministic elementwise application.
pub fn predict_batch(xs: &[Matrix], params: &ModelParameters) -> Result<Vec<usize>> {
    xs.iter().map(|x| score(x, params).map(|s| s.predicted)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron_sym, SymMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_spd(dim: usize, rng: &mut impl Rng) -> SymMatrix {
        let a = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let aat = a.matmul(&a.transpose());
        SymMatrix::from_fn(dim, |i, j| {
            aat.get(i, j) / dim as f64 + if i == j { 1.0 } else { 0.0 }
        })
    }

    fn params(r: usize, c: usize, means: Vec<Matrix>, priors: Vec<f64>) -> ModelParameters {
        ModelParameters {
            priors,
            means,
            phi: SymMatrix::identity(r),
            delta: SymMatrix::identity(c),
        }
    }

    #[test]
    fn predicts_own_mean() {
        let mu1 = Matrix::zeros(2, 2);
        let mu2 = Matrix::from_fn(2, 2, |_, _| 10.0);
        let p = params(2, 2, vec![mu1.clone(), mu2], vec![0.5, 0.5]);
        assert_eq!(score(&mu1, &p).unwrap().predicted, 1);
    }

    #[test]
    fn prior_dominates_when_means_tie() {
        let mu = Matrix::from_fn(2, 2, |i, j| (i * 2 + j) as f64);
        let p = params(2, 2, vec![mu.clone(), mu.clone()], vec![0.9, 0.1]);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..10 {
            let x = Matrix::from_fn(2, 2, |_, _| rng.random_range(-3.0..3.0));
            assert_eq!(score(&x, &p).unwrap().predicted, 1);
        }
    }

    #[test]
    fn ties_break_to_smallest_index() {
        let mu = Matrix::zeros(1, 1);
        let p = params(1, 1, vec![mu.clone(), mu.clone(), mu.clone()], vec![1.0 / 3.0; 3]);
        let s = score(&Matrix::from_rows(1, 1, vec![0.7]).unwrap(), &p).unwrap();
        assert_eq!(s.predicted, 1);
        assert_eq!(s.scores[0], s.scores[1]);
    }

    #[test]
    fn agrees_with_vec_form_discriminant() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..20 {
            let r = rng.random_range(2..5usize);
            let c = rng.random_range(2..5usize);
            let j = 3;
            let means: Vec<Matrix> =
                (0..j).map(|_| Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))).collect();
            let raw: Vec<f64> = (0..j).map(|_| rng.random_range(0.2..1.0)).collect();
            let tot: f64 = raw.iter().sum();
            let priors: Vec<f64> = raw.iter().map(|v| v / tot).collect();
            let p = ModelParameters {
                priors: priors.clone(),
                means: means.clone(),
                phi: random_spd(r, &mut rng),
                delta: random_spd(c, &mut rng),
            };
            let x = Matrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0));
            let s = score(&x, &p).unwrap();

            let big = kron_sym(&p.delta, &p.phi);
            for k in 0..j {
                let v = x.sub(&means[k]).vec_col_major();
                let mut quad = 0.0;
                for a in 0..v.len() {
                    for b in 0..v.len() {
                        quad += v[a] * big.get(a, b) * v[b];
                    }
                }
                let oracle = priors[k].ln() - 0.5 * quad;
                assert!((s.scores[k] - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
            }
        }
    }

    #[test]
    fn prediction_invariant_to_precision_rescaling() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let (r, c) = (3, 2);
        let means: Vec<Matrix> =
            (0..3).map(|_| Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))).collect();
        let p = ModelParameters {
            priors: vec![1.0 / 3.0; 3],
            means,
            phi: random_spd(r, &mut rng),
            delta: random_spd(c, &mut rng),
        };
        for &t in &[0.5, 2.0, 7.3] {
            let rescaled = ModelParameters {
                priors: p.priors.clone(),
                means: p.means.clone(),
                phi: p.phi.scale(1.0 / t),
                delta: p.delta.scale(t),
            };
            for _ in 0..20 {
                let x = Matrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0));
                assert_eq!(
                    score(&x, &p).unwrap().predicted,
                    score(&x, &rescaled).unwrap().predicted
                );
            }
        }
    }

    #[test]
    fn translation_equivariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let (r, c) = (2, 3);
        let means: Vec<Matrix> =
            (0..2).map(|_| Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))).collect();
        let shift = Matrix::from_fn(r, c, |_, _| rng.random_range(-5.0..5.0));
        let p = ModelParameters {
            priors: vec![0.5, 0.5],
            means: means.clone(),
            phi: random_spd(r, &mut rng),
            delta: random_spd(c, &mut rng),
        };
        let p_shift = ModelParameters {
            priors: p.priors.clone(),
            means: means.iter().map(|m| m.add(&shift)).collect(),
            phi: p.phi.clone(),
            delta: p.delta.clone(),
        };
        for _ in 0..20 {
            let x = Matrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0));
            let s = score(&x, &p).unwrap();
            let s2 = score(&x.add(&shift), &p_shift).unwrap();
            let d = s.scores[0] - s.scores[1];
            let d2 = s2.scores[0] - s2.scores[1];
            assert!((d - d2).abs() < 1e-9 * d.abs().max(1.0));
            assert_eq!(s.predicted, s2.predicted);
        }
    }

    #[test]
    fn empty_batch_and_dimension_errors() {
        let p = params(2, 2, vec![Matrix::zeros(2, 2)], vec![1.0]);
        assert!(predict_batch(&[], &p).unwrap().is_empty());
        let bad = Matrix::zeros(3, 2);
        assert!(matches!(score(&bad, &p), Err(Error::Dimension { .. })));
    }
}
