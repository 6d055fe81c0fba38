//! Matrix-normal model: labeled matrix datasets, model parameters, the
//! unpenalized negative log-likelihood `g`, scatter matrices, sampling, and
//! the flip-flop maximum-likelihood estimator used for initialization and as
//! the unpenalized baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix, SymMatrix};

/// One observation: an `r x c` predictor with a class label in `1..=J`.
/// Label `0` marks an unlabeled observation (prediction-only data).
#[derive(Clone, Debug)]
pub struct Observation {
    pub x: Matrix,
    pub label: usize,
}

/// A dataset of equally-shaped matrix observations.
#[derive(Clone, Debug)]
pub struct LabeledMatrixDataset {
    r: usize,
    c: usize,
    num_classes: usize,
    observations: Vec<Observation>,
}

impl LabeledMatrixDataset {
    pub fn new(
        r: usize,
        c: usize,
        num_classes: usize,
        observations: Vec<Observation>,
    ) -> Result<Self> {
        for (i, obs) in observations.iter().enumerate() {
            if obs.x.rows() != r || obs.x.cols() != c {
                return Err(Error::Dimension {
                    context: "dataset observation",
                    expected: format!("{r}x{c}"),
                    found: format!("{}x{} at index {i}", obs.x.rows(), obs.x.cols()),
                });
            }
            if obs.label > num_classes {
                return Err(Error::InvalidArgument(format!(
                    "label {} at index {i} outside 0..={num_classes}",
                    obs.label
                )));
            }
        }
        Ok(Self { r, c, num_classes, observations })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.observations.iter().all(|o| o.label >= 1)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.observations.iter().map(|o| o.label).collect()
    }

    /// Sub-dataset by observation indices (used by cross-validation).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let obs = indices.iter().map(|&i| self.observations[i].clone()).collect();
        Self::new(self.r, self.c, self.num_classes, obs)
    }
}

/// Fitted or true parameters of the matrix-variate LDA model.
#[derive(Clone, Debug)]
pub struct ModelParameters {
    pub priors: Vec<f64>,
    pub means: Vec<Matrix>,
    pub phi: SymMatrix,
    pub delta: SymMatrix,
}

impl ModelParameters {
    pub fn num_classes(&self) -> usize {
        self.priors.len()
    }

    pub fn r(&self) -> usize {
        self.phi.dim()
    }

    pub fn c(&self) -> usize {
        self.delta.dim()
    }

    /// Checks the type invariants: priors form a probability vector, both
    /// precision factors are positive definite, mean shapes agree.
    pub fn validate(&self) -> Result<()> {
        if self.means.len() != self.priors.len() {
            return Err(Error::Dimension {
                context: "model parameters",
                expected: format!("{} means", self.priors.len()),
                found: format!("{}", self.means.len()),
            });
        }
        let total: f64 = self.priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 || self.priors.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "priors must be positive and sum to 1 (sum = {total})"
            )));
        }
        for m in &self.means {
            if m.rows() != self.r() || m.cols() != self.c() {
                return Err(Error::Dimension {
                    context: "model means",
                    expected: format!("{}x{}", self.r(), self.c()),
                    found: format!("{}x{}", m.rows(), m.cols()),
                });
            }
        }
        cholesky(&self.phi)?;
        cholesky(&self.delta)?;
        Ok(())
    }

    /// Whether the pair is in canonical form, `||phi||_1 = r`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.phi.l1_norm() - self.r() as f64).abs() <= tol
    }
}

/// Per-class counts, empirical priors, and sample mean matrices.
#[derive(Clone, Debug)]
pub struct ClassSummary {
    pub counts: Vec<usize>,
    pub priors: Vec<f64>,
    pub means: Vec<Matrix>,
}

/// Computes `n_j`, `pi_hat_j = n_j / n`, and the per-class sample means.
/// Every class `1..=J` must be represented.
pub fn class_counts_and_means(data: &LabeledMatrixDataset) -> Result<ClassSummary> {
    let j = data.num_classes();
    let mut counts = vec![0usize; j];
    let mut sums = vec![Matrix::zeros(data.r(), data.c()); j];
    for obs in data.observations() {
        if obs.label == 0 {
            return Err(Error::InvalidArgument(
                "dataset contains unlabeled observations; labels 1..=J required for fitting".into(),
            ));
        }
        counts[obs.label - 1] += 1;
        sums[obs.label - 1] = sums[obs.label - 1].add(&obs.x);
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass { label: k + 1 });
    }
    let n = data.n() as f64;
    let priors = counts.iter().map(|&c| c as f64 / n).collect();
    let means = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| s.scale(1.0 / c as f64))
        .collect();
    Ok(ClassSummary { counts, priors, means })
}

/// Row scatter `S_phi(mu, delta) = (1/(n c)) sum_j sum_{y_i=j} (x_i - mu_j) delta (x_i - mu_j)^T`.
pub fn s_phi(data: &LabeledMatrixDataset, mu: &[Matrix], delta: &SymMatrix) -> SymMatrix {
    let (r, n, c) = (data.r(), data.n() as f64, data.c() as f64);
    let delta_m = delta.to_matrix();
    let mut acc = Matrix::zeros(r, r);
    for obs in data.observations() {
        let a = obs.x.sub(&mu[obs.label - 1]);
        let ad = a.matmul(&delta_m);
        acc = acc.add(&ad.matmul(&a.transpose()));
    }
    SymMatrix::symmetrized(&acc.scale(1.0 / (n * c)))
}

/// Column scatter `S_delta(mu, phi) = (1/(n r)) sum_j sum_{y_i=j} (x_i - mu_j)^T phi (x_i - mu_j)`.
pub fn s_delta(data: &LabeledMatrixDataset, mu: &[Matrix], phi: &SymMatrix) -> SymMatrix {
    let (c, n, r) = (data.c(), data.n() as f64, data.r() as f64);
    let phi_m = phi.to_matrix();
    let mut acc = Matrix::zeros(c, c);
    for obs in data.observations() {
        let a = obs.x.sub(&mu[obs.label - 1]);
        let pa = phi_m.matmul(&a);
        acc = acc.add(&a.transpose().matmul(&pa));
    }
    SymMatrix::symmetrized(&acc.scale(1.0 / (n * r)))
}

/// The unpenalized objective
/// `g(mu, phi, delta) = (1/n) sum tr{phi (x - mu_j) delta (x - mu_j)^T}
///  - c log det(phi) - r log det(delta)`
/// (normalizing constants are omitted throughout).
pub fn neg_loglik_g(
    data: &LabeledMatrixDataset,
    mu: &[Matrix],
    phi: &SymMatrix,
    delta: &SymMatrix,
) -> Result<f64> {
    if mu.len() != data.num_classes() {
        return Err(Error::Dimension {
            context: "neg_loglik_g means",
            expected: format!("{}", data.num_classes()),
            found: format!("{}", mu.len()),
        });
    }
    let logdet_phi = cholesky(phi)?.log_det();
    let logdet_delta = cholesky(delta)?.log_det();
    let phi_m = phi.to_matrix();
    let delta_m = delta.to_matrix();
    let mut trace_sum = 0.0;
    for obs in data.observations() {
        let a = obs.x.sub(&mu[obs.label - 1]);
        // tr{phi a delta a^T} = sum((phi a) o (a delta))
        let pa = phi_m.matmul(&a);
        let ad = a.matmul(&delta_m);
        trace_sum += pa.data().iter().zip(ad.data()).map(|(x, y)| x * y).sum::<f64>();
    }
    Ok(trace_sum / data.n() as f64
        - data.c() as f64 * logdet_phi
        - data.r() as f64 * logdet_delta)
}

/// Class-conditional covariance specification for sampling.
#[derive(Clone, Debug)]
pub enum Covariance {
    /// Kronecker-structured precision `Sigma^{-1} = delta (x) phi`.
    KroneckerPrecision { phi: SymMatrix, delta: SymMatrix },
    /// Dense `rc x rc` covariance matrix.
    Full { sigma: SymMatrix },
}

enum SamplerPath {
    Kron { l_phi_inv: Matrix, l_delta_inv: Matrix },
    Full { l: Matrix },
}

/// Draws matrix-normal observations: `X = mu + unvec(L z)` with `L L^T = Sigma`
/// and `z` standard normal filled in column-major (vec) order. In the
/// Kronecker case `chol(Sigma) = chol(delta^{-1}) (x) chol(phi^{-1})`, applied
/// as `L_phi_inv Z L_delta_inv^T` without forming the big product.
pub struct MatrixNormalSampler {
    mu: Matrix,
    path: SamplerPath,
}

impl MatrixNormalSampler {
    pub fn new(mu: Matrix, cov: &Covariance) -> Result<Self> {
        let path = match cov {
            Covariance::KroneckerPrecision { phi, delta } => {
                if phi.dim() != mu.rows() || delta.dim() != mu.cols() {
                    return Err(Error::Dimension {
                        context: "sampler precision factors",
                        expected: format!("{}x{} mean", phi.dim(), delta.dim()),
                        found: format!("{}x{}", mu.rows(), mu.cols()),
                    });
                }
                let phi_inv = cholesky(phi)?.inverse();
                let delta_inv = cholesky(delta)?.inverse();
                SamplerPath::Kron {
                    l_phi_inv: cholesky(&phi_inv)?.lower().clone(),
                    l_delta_inv: cholesky(&delta_inv)?.lower().clone(),
                }
            }
            Covariance::Full { sigma } => {
                if sigma.dim() != mu.rows() * mu.cols() {
                    return Err(Error::Dimension {
                        context: "sampler covariance",
                        expected: format!("{} (= r*c)", mu.rows() * mu.cols()),
                        found: format!("{}", sigma.dim()),
                    });
                }
                SamplerPath::Full { l: cholesky(sigma)?.lower().clone() }
            }
        };
        Ok(Self { mu, path })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Matrix {
        let (r, c) = (self.mu.rows(), self.mu.cols());
        let z: Vec<f64> = (0..r * c).map(|_| rng.sample(StandardNormal)).collect();
        match &self.path {
            SamplerPath::Kron { l_phi_inv, l_delta_inv } => {
                let zm = Matrix::from_vec_col_major(r, c, &z);
                self.mu.add(&l_phi_inv.matmul(&zm).matmul(&l_delta_inv.transpose()))
            }
            SamplerPath::Full { l } => {
                let n = r * c;
                let mut lz = vec![0.0; n];
                for i in 0..n {
                    let row = l.row(i);
                    let mut s = 0.0;
                    for k in 0..=i {
                        s += row[k] * z[k];
                    }
                    lz[i] = s;
                }
                self.mu.add(&Matrix::from_vec_col_major(r, c, &lz))
            }
        }
    }
}

/// One-shot seeded draw; `sampler + ChaCha12Rng` underneath, so the result is
/// reproducible given the seed.
pub fn sample_matrix_normal(mu: &Matrix, cov: &Covariance, seed: u64) -> Result<Matrix> {
    let sampler = MatrixNormalSampler::new(mu.clone(), cov)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok(sampler.sample(&mut rng))
}

/// Result of the flip-flop maximum-likelihood iteration.
#[derive(Clone, Debug)]
pub struct FlipFlopFit {
    pub phi: SymMatrix,
    pub delta: SymMatrix,
    pub means: Vec<Matrix>,
    pub iterations: usize,
    pub objective: f64,
}

/// Alternating maximum-likelihood updates `phi <- S_phi(xbar, delta)^{-1}`,
/// `delta <- S_delta(xbar, phi)^{-1}` with means fixed at the class sample
/// means, run until the relative change of `g` drops below `tol`. The
/// returned pair is normalized so that `||phi||_1 = r`.
pub fn flipflop_mle(
    data: &LabeledMatrixDataset,
    tol: f64,
    max_iter: usize,
) -> Result<FlipFlopFit> {
    let (r, c, n) = (data.r(), data.c(), data.n());
    if n * c <= r {
        return Err(Error::SingularScatter { which: "S_phi" });
    }
    if n * r <= c {
        return Err(Error::SingularScatter { which: "S_delta" });
    }
    let summary = class_counts_and_means(data)?;
    let means = summary.means;

    let mut delta = SymMatrix::identity(c);
    let mut phi = SymMatrix::identity(r);
    let mut g_prev = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let sp = s_phi(data, &means, &delta);
        phi = cholesky(&sp)
            .map_err(|_| Error::SingularScatter { which: "S_phi" })?
            .inverse();
        let sd = s_delta(data, &means, &phi);
        delta = cholesky(&sd)
            .map_err(|_| Error::SingularScatter { which: "S_delta" })?
            .inverse();
        let g = neg_loglik_g(data, &means, &phi, &delta)?;
        if g_prev.is_finite() && (g_prev - g).abs() <= tol * g_prev.abs().max(1e-10) {
            break;
        }
        g_prev = g;
    }
    // Normalize: ||phi||_1 = r without changing g.
    let t = r as f64 / phi.l1_norm();
    let phi = phi.scale(t);
    let delta = delta.scale(1.0 / t);
    let objective = neg_loglik_g(data, &means, &phi, &delta)?;
    Ok(FlipFlopFit { phi, delta, means, iterations, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron_sym, sym_eigen};
    use rand::Rng;

    fn dataset_1x1(values: &[(f64, usize)], j: usize) -> LabeledMatrixDataset {
        let obs = values
            .iter()
            .map(|&(v, label)| Observation { x: Matrix::from_rows(1, 1, vec![v]).unwrap(), label })
            .collect();
        LabeledMatrixDataset::new(1, 1, j, obs).unwrap()
    }

    fn random_spd(dim: usize, rng: &mut impl Rng) -> SymMatrix {
        let a = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let aat = a.matmul(&a.transpose());
        SymMatrix::from_fn(dim, |i, j| {
            aat.get(i, j) / dim as f64 + if i == j { 1.0 } else { 0.0 }
        })
    }

    fn identity_cov(r: usize, c: usize) -> Covariance {
        Covariance::KroneckerPrecision {
            phi: SymMatrix::identity(r),
            delta: SymMatrix::identity(c),
        }
    }

    fn simulate_identity(
        r: usize,
        c: usize,
        n_per_class: &[usize],
        seed: u64,
    ) -> LabeledMatrixDataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut obs = Vec::new();
        for (k, &nk) in n_per_class.iter().enumerate() {
            let sampler =
                MatrixNormalSampler::new(Matrix::zeros(r, c), &identity_cov(r, c)).unwrap();
            for _ in 0..nk {
                obs.push(Observation { x: sampler.sample(&mut rng), label: k + 1 });
            }
        }
        LabeledMatrixDataset::new(r, c, n_per_class.len(), obs).unwrap()
    }

    #[test]
    fn counts_and_means_basics() {
        let d = dataset_1x1(&[(1.0, 1), (3.0, 2)], 2);
        let s = class_counts_and_means(&d).unwrap();
        assert_eq!(s.counts, vec![1, 1]);
        assert_eq!(s.priors, vec![0.5, 0.5]);
        assert_eq!(s.means[0].get(0, 0), 1.0);
        assert_eq!(s.means[1].get(0, 0), 3.0);

        let d = dataset_1x1(&[(0.0, 1), (3.0, 1), (6.0, 1)], 1);
        let s = class_counts_and_means(&d).unwrap();
        assert_eq!(s.means[0].get(0, 0), 3.0);
    }

    #[test]
    fn empty_class_is_reported_by_label() {
        let d = dataset_1x1(&[(1.0, 1)], 2);
        match class_counts_and_means(&d) {
            Err(Error::EmptyClass { label }) => assert_eq!(label, 2),
            other => panic!("expected EmptyClass, got {other:?}"),
        }
    }

    #[test]
    fn g_scalar_cases() {
        let d = dataset_1x1(&[(2.0, 1)], 1);
        let one = SymMatrix::identity(1);
        let mu = vec![Matrix::from_rows(1, 1, vec![2.0]).unwrap()];
        assert!(neg_loglik_g(&d, &mu, &one, &one).unwrap().abs() < 1e-15);
        let mu0 = vec![Matrix::zeros(1, 1)];
        assert!((neg_loglik_g(&d, &mu0, &one, &one).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn g_matches_vec_form_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for &(r, c) in &[(2usize, 3usize), (4, 4), (3, 2)] {
            let phi = random_spd(r, &mut rng);
            let delta = random_spd(c, &mut rng);
            let mu = vec![Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))];
            let obs: Vec<Observation> = (0..6)
                .map(|_| Observation {
                    x: Matrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0)),
                    label: 1,
                })
                .collect();
            let data = LabeledMatrixDataset::new(r, c, 1, obs).unwrap();
            let g = neg_loglik_g(&data, &mu, &phi, &delta).unwrap();

            // Oracle: (1/n) sum vec(x-mu)^T (delta (x) phi) vec(x-mu) - log det(delta (x) phi)
            let big = kron_sym(&delta, &phi);
            let logdet = cholesky(&big).unwrap().log_det();
            let mut quad = 0.0;
            for o in data.observations() {
                let v = o.x.sub(&mu[0]).vec_col_major();
                let mut s = 0.0;
                for a in 0..v.len() {
                    for b in 0..v.len() {
                        s += v[a] * big.get(a, b) * v[b];
                    }
                }
                quad += s;
            }
            let oracle = quad / data.n() as f64 - logdet;
            assert!((g - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
        }
    }

    #[test]
    fn g_scale_invariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let (r, c) = (3, 4);
        let phi = random_spd(r, &mut rng);
        let delta = random_spd(c, &mut rng);
        let data = simulate_identity(r, c, &[5, 4], 17);
        let mu = class_counts_and_means(&data).unwrap().means;
        let g = neg_loglik_g(&data, &mu, &phi, &delta).unwrap();
        for &t in &[0.5, 2.0, 13.7] {
            let g_t =
                neg_loglik_g(&data, &mu, &phi.scale(1.0 / t), &delta.scale(t)).unwrap();
            assert!((g - g_t).abs() <= 1e-10 * g.abs().max(1.0));
        }
    }

    #[test]
    fn scatter_matrices_are_psd() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let data = simulate_identity(4, 3, &[6, 6], 23);
        for _ in 0..5 {
            let phi = random_spd(4, &mut rng);
            let delta = random_spd(3, &mut rng);
            let mu: Vec<Matrix> =
                (0..2).map(|_| Matrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0))).collect();
            let sp = s_phi(&data, &mu, &delta);
            let sd = s_delta(&data, &mu, &phi);
            let scale_p = sp.max_abs().max(1.0);
            let scale_d = sd.max_abs().max(1.0);
            assert!(sym_eigen(&sp).unwrap().min_eigenvalue() >= -1e-10 * scale_p);
            assert!(sym_eigen(&sd).unwrap().min_eigenvalue() >= -1e-10 * scale_d);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let mu = Matrix::zeros(2, 2);
        let a = sample_matrix_normal(&mu, &identity_cov(2, 2), 42).unwrap();
        let b = sample_matrix_normal(&mu, &identity_cov(2, 2), 42).unwrap();
        assert_eq!(a, b);
        let c = sample_matrix_normal(&mu, &identity_cov(2, 2), 43).unwrap();
        assert!(a.max_abs_diff(&c) > 0.0);
    }

    #[test]
    fn sampling_identity_covariance_monte_carlo() {
        let (r, c) = (2, 2);
        let sampler =
            MatrixNormalSampler::new(Matrix::zeros(r, c), &identity_cov(r, c)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let n = 100_000;
        let p = r * c;
        let mut cov = vec![0.0; p * p];
        let mut mean = vec![0.0; p];
        for _ in 0..n {
            let v = sampler.sample(&mut rng).vec_col_major();
            for a in 0..p {
                mean[a] += v[a];
                for b in 0..p {
                    cov[a * p + b] += v[a] * v[b];
                }
            }
        }
        for a in 0..p {
            assert!((mean[a] / n as f64).abs() < 0.05);
            for b in 0..p {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((cov[a * p + b] / n as f64 - target).abs() < 0.05);
            }
        }
    }

    #[test]
    fn kron_and_full_paths_match_in_moments() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let (r, c) = (2, 2);
        let phi = random_spd(r, &mut rng);
        let delta = random_spd(c, &mut rng);
        let sigma = kron_sym(&cholesky(&delta).unwrap().inverse(), &cholesky(&phi).unwrap().inverse());
        let kron_sampler = MatrixNormalSampler::new(
            Matrix::zeros(r, c),
            &Covariance::KroneckerPrecision { phi: phi.clone(), delta: delta.clone() },
        )
        .unwrap();
        let full_sampler =
            MatrixNormalSampler::new(Matrix::zeros(r, c), &Covariance::Full { sigma }).unwrap();

        let n = 100_000;
        let p = r * c;
        let mut rng_a = ChaCha12Rng::seed_from_u64(1001);
        let mut rng_b = ChaCha12Rng::seed_from_u64(1001);
        let mut cov_a = vec![0.0; p * p];
        let mut cov_b = vec![0.0; p * p];
        for _ in 0..n {
            let va = kron_sampler.sample(&mut rng_a).vec_col_major();
            let vb = full_sampler.sample(&mut rng_b).vec_col_major();
            for x in 0..p {
                for y in 0..p {
                    cov_a[x * p + y] += va[x] * va[y];
                    cov_b[x * p + y] += vb[x] * vb[y];
                }
            }
        }
        for i in 0..p * p {
            assert!((cov_a[i] / n as f64 - cov_b[i] / n as f64).abs() < 0.05);
        }
    }

    #[test]
    fn flipflop_recovers_identity_structure() {
        let data = simulate_identity(4, 4, &[250, 250], 31);
        let fit = flipflop_mle(&data, 1e-8, 200).unwrap();
        // Normalized truth: phi = I scaled so l1 = r, i.e. exactly I.
        assert!(fit.phi.max_abs_diff(&SymMatrix::identity(4)) < 0.1);
        // Delta absorbs the scale; compare up to normalization.
        let d = fit.delta.scale(4.0 / fit.delta.l1_norm());
        assert!(d.max_abs_diff(&SymMatrix::identity(4)) < 0.1);
        assert!((fit.phi.l1_norm() - 4.0).abs() < 1e-8);
    }

    #[test]
    fn flipflop_objective_non_increasing_and_fixed_point() {
        let data = simulate_identity(3, 5, &[40, 35], 77);
        let means = class_counts_and_means(&data).unwrap().means;

        // Re-run the iteration manually to watch g decrease.
        let mut delta = SymMatrix::identity(5);
        let mut phi;
        let mut gs = Vec::new();
        for _ in 0..20 {
            phi = cholesky(&s_phi(&data, &means, &delta)).unwrap().inverse();
            delta = cholesky(&s_delta(&data, &means, &phi)).unwrap().inverse();
            gs.push(neg_loglik_g(&data, &means, &phi, &delta).unwrap());
        }
        for w in gs.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * w[0].abs());
        }

        let fit = flipflop_mle(&data, 1e-10, 500).unwrap();
        // Fixed point: phi^{-1} == S_phi(xbar, delta) at the solution.
        let phi_inv = cholesky(&fit.phi).unwrap().inverse();
        let sp = s_phi(&data, &fit.means, &fit.delta);
        assert!(phi_inv.max_abs_diff(&sp) <= 1e-6 * sp.max_abs().max(1.0));
        let delta_inv = cholesky(&fit.delta).unwrap().inverse();
        let sd = s_delta(&data, &fit.means, &fit.phi);
        assert!(delta_inv.max_abs_diff(&sd) <= 1e-6 * sd.max_abs().max(1.0));
    }

    #[test]
    fn flipflop_requires_enough_observations() {
        let data = simulate_identity(8, 1, &[3], 3);
        assert!(matches!(
            flipflop_mle(&data, 1e-3, 10),
            Err(Error::SingularScatter { .. })
        ));
    }
}
