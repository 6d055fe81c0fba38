//! Simulation designs: three-class mean structures that differ on one
//! randomly placed 4x4 submatrix, and four covariance models (two
//! Kronecker-structured, two dense).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, sym_eigen, Matrix, SymMatrix};
use crate::matnorm::{Covariance, LabeledMatrixDataset, MatrixNormalSampler, Observation};

pub const BLOCK_SIZE: usize = 4;
const NUM_CLASSES: usize = 3;

/// The four covariance designs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceModel {
    M1,
    M2,
    M3,
    M4,
}

impl CovarianceModel {
    pub fn from_number(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Self::M1),
            2 => Ok(Self::M2),
            3 => Ok(Self::M3),
            4 => Ok(Self::M4),
            _ => Err(Error::InvalidArgument(format!("model must be 1..=4, got {n}"))),
        }
    }

    pub fn number(self) -> usize {
        match self {
            Self::M1 => 1,
            Self::M2 => 2,
            Self::M3 => 3,
            Self::M4 => 4,
        }
    }
}

/// The three 4x4 value blocks placed on the active submatrix of the class
/// means.
#[derive(Clone, Debug)]
pub struct MeanPattern {
    pub blocks: [Matrix; NUM_CLASSES],
}

impl MeanPattern {
    pub fn new(blocks: [Matrix; NUM_CLASSES]) -> Result<Self> {
        for b in &blocks {
            if b.rows() != BLOCK_SIZE || b.cols() != BLOCK_SIZE {
                return Err(Error::Dimension {
                    context: "mean pattern block",
                    expected: format!("{BLOCK_SIZE}x{BLOCK_SIZE}"),
                    found: format!("{}x{}", b.rows(), b.cols()),
                });
            }
        }
        Ok(Self { blocks })
    }

    /// Documented default: class 1 zero, class 2 a 0.5 diagonal stripe,
    /// class 3 a unit anti-diagonal stripe.
    pub fn default_pattern() -> Self {
        let zero = Matrix::zeros(BLOCK_SIZE, BLOCK_SIZE);
        let diag = Matrix::from_fn(BLOCK_SIZE, BLOCK_SIZE, |i, j| if i == j { 0.5 } else { 0.0 });
        let anti = Matrix::from_fn(BLOCK_SIZE, BLOCK_SIZE, |i, j| {
            if i + j == BLOCK_SIZE - 1 {
                1.0
            } else {
                0.0
            }
        });
        Self { blocks: [zero, diag, anti] }
    }
}

impl Default for MeanPattern {
    fn default() -> Self {
        Self::default_pattern()
    }
}

/// Dimensions, sample sizes, pattern, and seed for one replication.
#[derive(Clone, Debug)]
pub struct SimulationSpec {
    pub model: CovarianceModel,
    pub r: usize,
    pub c: usize,
    pub n_train: usize,
    pub n_validate: usize,
    pub n_test: usize,
    pub mean_pattern: MeanPattern,
    pub seed: u64,
}

const MODEL3_ALLOWED: [usize; 4] = [8, 16, 32, 64];

impl SimulationSpec {
    pub fn new(model: CovarianceModel, r: usize, c: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            model,
            r,
            c,
            n_train: 75,
            n_validate: 75,
            n_test: 1000,
            mean_pattern: MeanPattern::default_pattern(),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < BLOCK_SIZE || self.c < BLOCK_SIZE {
            return Err(Error::InvalidArgument(format!(
                "dimensions must fit the {BLOCK_SIZE}x{BLOCK_SIZE} signal block, got {}x{}",
                self.r, self.c
            )));
        }
        if self.model == CovarianceModel::M3 {
            let square_ok = self.r == self.c && MODEL3_ALLOWED.contains(&self.c);
            let wide_ok = self.r == 32 && MODEL3_ALLOWED.contains(&self.c);
            if !square_ok && !wide_ok {
                return Err(Error::InvalidArgument(format!(
                    "model 3 covariance is positive definite only for r=c in {MODEL3_ALLOWED:?} \
                     or r=32 with c in {MODEL3_ALLOWED:?}; got ({}, {})",
                    self.r, self.c
                )));
            }
        }
        Ok(())
    }
}

/// True covariance of a generated replicate: the Kronecker precision pair
/// for models 1-2, the dense covariance for models 3-4.
#[derive(Clone, Debug)]
pub enum TrueCovariance {
    Kronecker { phi: SymMatrix, delta: SymMatrix },
    Full { sigma: SymMatrix },
}

/// One simulated replication: the three datasets plus the generating truth.
#[derive(Clone, Debug)]
pub struct GeneratedReplicate {
    pub train: LabeledMatrixDataset,
    pub validate: LabeledMatrixDataset,
    pub test: LabeledMatrixDataset,
    pub true_means: Vec<Matrix>,
    pub true_priors: Vec<f64>,
    pub true_covariance: TrueCovariance,
    pub block_position: (usize, usize),
}

/// Builds the three mean matrices: zeros with the pattern blocks inserted at
/// a uniformly random admissible offset (shared across classes).
pub fn build_means(spec: &SimulationSpec) -> Result<(Vec<Matrix>, (usize, usize))> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, 0);
    let row_off = rng.random_range(0..=(spec.r - BLOCK_SIZE));
    let col_off = rng.random_range(0..=(spec.c - BLOCK_SIZE));
    let means = spec
        .mean_pattern
        .blocks
        .iter()
        .map(|block| {
            Matrix::from_fn(spec.r, spec.c, |i, j| {
                if i >= row_off && i < row_off + BLOCK_SIZE && j >= col_off && j < col_off + BLOCK_SIZE
                {
                    block.get(i - row_off, j - col_off)
                } else {
                    0.0
                }
            })
        })
        .collect();
    Ok((means, (row_off, col_off)))
}

/// AR(1)-style row covariance of models 1-2: entry `0.7^{|a-b|}`.
pub fn model1_row_cov(r: usize) -> SymMatrix {
    SymMatrix::from_fn(r, |a, b| 0.7f64.powi((a as i64 - b as i64).unsigned_abs() as i32))
}

/// Compound-symmetric column covariance of model 1: unit diagonal, 0.7 off.
pub fn model1_col_cov(c: usize) -> SymMatrix {
    SymMatrix::from_fn(c, |a, b| if a == b { 1.0 } else { 0.7 })
}

/// Whether any pair of classes disagrees at entry `(i, j)` of the means.
/// All-pairs disagreement reduces to consecutive disagreement.
fn is_signal_entry(means: &[Matrix], i: usize, j: usize) -> bool {
    means.windows(2).any(|w| w[0].get(i, j) != w[1].get(i, j))
}

/// Columns that contain at least one mean difference.
fn signal_columns(means: &[Matrix]) -> Vec<bool> {
    let (r, c) = (means[0].rows(), means[0].cols());
    (0..c)
        .map(|col| (0..r).any(|row| is_signal_entry(means, row, col)))
        .collect()
}

/// Block-diagonal column covariance of model 2: unit diagonal and 0.7
/// between column pairs that both carry mean differences.
pub fn model2_col_cov(c: usize, means: &[Matrix]) -> SymMatrix {
    let signal = signal_columns(means);
    SymMatrix::from_fn(c, |a, b| {
        if a == b {
            1.0
        } else if signal[a] && signal[b] {
            0.7
        } else {
            0.0
        }
    })
}

/// Dense model-3 covariance
/// `Cov(X_{a,b}, X_{c,d}) = {0.5 1(b!=d) + 1(b=d)} (rho_b rho_d)^{|a-c|} / (1 - rho_b rho_d)`
/// in column-stacking vec order; `rhos` has one value per column.
pub fn model3_sigma(r: usize, c: usize, rhos: &[f64]) -> Result<SymMatrix> {
    if rhos.len() != c {
        return Err(Error::Dimension {
            context: "model 3 rho vector",
            expected: format!("{c}"),
            found: format!("{}", rhos.len()),
        });
    }
    let n = r * c;
    let sigma = SymMatrix::from_fn(n, |u, v| {
        // vec index -> (row a, col b), column-stacked.
        let (a, b) = (u % r, u / r);
        let (cc, d) = (v % r, v / r);
        let factor = if b == d { 1.0 } else { 0.5 };
        let prod = rhos[b] * rhos[d];
        factor * prod.powi((a as i64 - cc as i64).unsigned_abs() as i32) / (1.0 - prod)
    });
    verify_pd("3", &sigma)?;
    Ok(sigma)
}

/// Equally spaced column correlations between 0.5 and 0.9, endpoints included.
pub fn model3_rhos(c: usize) -> Vec<f64> {
    if c == 1 {
        return vec![0.5];
    }
    (0..c).map(|k| 0.5 + 0.4 * k as f64 / (c - 1) as f64).collect()
}

/// Dense model-4 covariance: unit diagonal, 0.5 between distinct coordinates
/// that both carry mean differences, zero elsewhere.
pub fn model4_sigma(r: usize, c: usize, means: &[Matrix]) -> Result<SymMatrix> {
    let n = r * c;
    let signal: Vec<bool> = (0..n)
        .map(|u| is_signal_entry(means, u % r, u / r))
        .collect();
    let sigma = SymMatrix::from_fn(n, |u, v| {
        if u == v {
            1.0
        } else if signal[u] && signal[v] {
            0.5
        } else {
            0.0
        }
    });
    verify_pd("4", &sigma)?;
    Ok(sigma)
}

fn verify_pd(model: &'static str, sigma: &SymMatrix) -> Result<()> {
    if cholesky(sigma).is_ok() {
        return Ok(());
    }
    // Only bother with the (expensive) eigenvalue for a readable error when
    // the dimension is small.
    let min_eig = if sigma.dim() <= 256 {
        sym_eigen(sigma).ok().map(|e| e.min_eigenvalue())
    } else {
        None
    };
    Err(Error::NonPositiveDefiniteSigma {
        model: match model {
            "3" => "3",
            _ => "4",
        },
        min_eigenvalue: min_eig,
    })
}

/// Sampling covariance plus the stored ground truth.
pub struct BuiltCovariance {
    pub sampling: Covariance,
    pub truth: TrueCovariance,
}

/// Assembles the covariance of the given spec. Models 1-2 return the
/// Kronecker precision pair (inverted covariance factors, normalized so
/// `||phi||_1 = r`); models 3-4 a dense covariance.
pub fn build_covariance(spec: &SimulationSpec, means: &[Matrix]) -> Result<BuiltCovariance> {
    match spec.model {
        CovarianceModel::M1 | CovarianceModel::M2 => {
            let row_cov = model1_row_cov(spec.r);
            let col_cov = match spec.model {
                CovarianceModel::M1 => model1_col_cov(spec.c),
                _ => model2_col_cov(spec.c, means),
            };
            let phi_prec = cholesky(&row_cov)
                .map_err(|_| Error::NonPositiveDefiniteSigma { model: "1/2 row factor", min_eigenvalue: None })?
                .inverse();
            let delta_prec = cholesky(&col_cov)
                .map_err(|_| Error::NonPositiveDefiniteSigma { model: "1/2 column factor", min_eigenvalue: None })?
                .inverse();
            // Canonical truth: ||phi||_1 = r.
            let t = spec.r as f64 / phi_prec.l1_norm();
            let truth = TrueCovariance::Kronecker {
                phi: phi_prec.scale(t),
                delta: delta_prec.scale(1.0 / t),
            };
            Ok(BuiltCovariance {
                sampling: Covariance::KroneckerPrecision { phi: phi_prec, delta: delta_prec },
                truth,
            })
        }
        CovarianceModel::M3 => {
            let sigma = model3_sigma(spec.r, spec.c, &model3_rhos(spec.c))?;
            Ok(BuiltCovariance {
                sampling: Covariance::Full { sigma: sigma.clone() },
                truth: TrueCovariance::Full { sigma },
            })
        }
        CovarianceModel::M4 => {
            let sigma = model4_sigma(spec.r, spec.c, means)?;
            Ok(BuiltCovariance {
                sampling: Covariance::Full { sigma: sigma.clone() },
                truth: TrueCovariance::Full { sigma },
            })
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates one replication: labels i.i.d. uniform over the three classes,
/// features matrix-normal per the model, deterministically split into
/// train/validate/test. Fully reproducible from the spec.
pub fn generate_replicate(spec: &SimulationSpec) -> Result<GeneratedReplicate> {
    spec.validate()?;
    let (means, block_position) = build_means(spec)?;
    let built = build_covariance(spec, &means)?;
    let samplers: Vec<MatrixNormalSampler> = means
        .iter()
        .map(|mu| MatrixNormalSampler::new(mu.clone(), &built.sampling))
        .collect::<Result<_>>()?;

    let n_total = spec.n_train + spec.n_validate + spec.n_test;
    let mut label_rng = stream_rng(spec.seed, 1);
    let mut noise_rng = stream_rng(spec.seed, 2);
    let mut observations = Vec::with_capacity(n_total);
    for _ in 0..n_total {
        let label = label_rng.random_range(1..=NUM_CLASSES);
        let x = samplers[label - 1].sample(&mut noise_rng);
        observations.push(Observation { x, label });
    }

    let make = |obs: &[Observation]| {
        LabeledMatrixDataset::new(spec.r, spec.c, NUM_CLASSES, obs.to_vec())
    };
    let train = make(&observations[..spec.n_train])?;
    let validate = make(&observations[spec.n_train..spec.n_train + spec.n_validate])?;
    let test = make(&observations[spec.n_train + spec.n_validate..])?;

    Ok(GeneratedReplicate {
        train,
        validate,
        test,
        true_means: means,
        true_priors: vec![1.0 / NUM_CLASSES as f64; NUM_CLASSES],
        true_covariance: built.truth,
        block_position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron_sym;

    fn spec(model: CovarianceModel, r: usize, c: usize, seed: u64) -> SimulationSpec {
        SimulationSpec::new(model, r, c, seed).unwrap()
    }

    #[test]
    fn block_forced_to_origin_when_exact_fit() {
        let s = spec(CovarianceModel::M1, 4, 4, 7);
        let (_, pos) = build_means(&s).unwrap();
        assert_eq!(pos, (0, 0));
    }

    #[test]
    fn all_zero_pattern_gives_zero_means() {
        let mut s = spec(CovarianceModel::M1, 8, 8, 7);
        let z = Matrix::zeros(4, 4);
        s.mean_pattern = MeanPattern::new([z.clone(), z.clone(), z]).unwrap();
        let (means, _) = build_means(&s).unwrap();
        for m in means {
            assert_eq!(m.max_abs(), 0.0);
        }
    }

    #[test]
    fn nonzero_entries_confined_to_block_window() {
        for seed in 0..100 {
            let s = spec(CovarianceModel::M1, 9, 12, seed);
            let (means, (ro, co)) = build_means(&s).unwrap();
            for m in &means {
                for i in 0..9 {
                    for j in 0..12 {
                        if m.get(i, j) != 0.0 {
                            assert!(i >= ro && i < ro + 4 && j >= co && j < co + 4);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn model1_matrices_match_display() {
        let phi = model1_row_cov(2);
        assert_eq!(phi.get(0, 0), 1.0);
        assert_eq!(phi.get(0, 1), 0.7);
        assert_eq!(phi.get(1, 0), 0.7);
        let phi3 = model1_row_cov(3);
        assert!((phi3.get(0, 2) - 0.49).abs() < 1e-15);
        let delta = model1_col_cov(3);
        assert_eq!(delta.get(0, 0), 1.0);
        assert_eq!(delta.get(0, 2), 0.7);
    }

    #[test]
    fn model2_column_blocks_are_positive_definite() {
        for seed in [1u64, 5, 9, 40] {
            let s = spec(CovarianceModel::M2, 8, 8, seed);
            let (means, (_, co)) = build_means(&s).unwrap();
            let delta = model2_col_cov(8, &means);
            // Off-block columns are uncorrelated.
            for a in 0..8 {
                for b in 0..8 {
                    if a != b && (a < co || a >= co + 4 || b < co || b >= co + 4) {
                        assert_eq!(delta.get(a, b), 0.0);
                    }
                }
            }
            let min = sym_eigen(&delta).unwrap().min_eigenvalue();
            assert!(min > 0.0, "model 2 delta not PD: min eig {min}");
        }
    }

    #[test]
    fn model3_constant_rho_factorizes_as_kronecker() {
        // With all column correlations equal, the dense covariance equals
        // CS(0.5) (x) AR(rho^2)/(1-rho^2).
        let (r, c, rho) = (3usize, 2usize, 0.6f64);
        let sigma = model3_sigma(r, c, &vec![rho; c]).unwrap();
        let col = SymMatrix::from_fn(c, |a, b| if a == b { 1.0 } else { 0.5 });
        let row = SymMatrix::from_fn(r, |a, b| {
            (rho * rho).powi((a as i64 - b as i64).unsigned_abs() as i32) / (1.0 - rho * rho)
        });
        let kron_form = kron_sym(&col, &row);
        assert!(sigma.max_abs_diff(&kron_form) < 1e-12);
    }

    #[test]
    fn model3_standard_spacing_is_pd() {
        let rhos = model3_rhos(8);
        assert!((rhos[0] - 0.5).abs() < 1e-15);
        assert!((rhos[7] - 0.9).abs() < 1e-15);
        let sigma = model3_sigma(8, 8, &rhos).unwrap();
        assert!(cholesky(&sigma).is_ok());
    }

    #[test]
    fn model4_unit_diagonal_and_pd() {
        let s = spec(CovarianceModel::M4, 8, 8, 11);
        let (means, _) = build_means(&s).unwrap();
        let sigma = model4_sigma(8, 8, &means).unwrap();
        for u in 0..64 {
            assert_eq!(sigma.get(u, u), 1.0);
        }
        assert!(cholesky(&sigma).is_ok());
    }

    #[test]
    fn model3_dimension_restrictions() {
        assert!(SimulationSpec::new(CovarianceModel::M3, 16, 64, 1).is_err());
        assert!(SimulationSpec::new(CovarianceModel::M3, 32, 64, 1).is_ok());
        assert!(SimulationSpec::new(CovarianceModel::M3, 8, 8, 1).is_ok());
        assert!(SimulationSpec::new(CovarianceModel::M3, 12, 12, 1).is_err());
    }

    #[test]
    fn replicate_counts_and_determinism() {
        let s = spec(CovarianceModel::M1, 8, 8, 99);
        let a = generate_replicate(&s).unwrap();
        assert_eq!(a.train.n(), 75);
        assert_eq!(a.validate.n(), 75);
        assert_eq!(a.test.n(), 1000);
        let b = generate_replicate(&s).unwrap();
        assert_eq!(a.block_position, b.block_position);
        for (oa, ob) in a.train.observations().iter().zip(b.train.observations()) {
            assert_eq!(oa.label, ob.label);
            assert_eq!(oa.x, ob.x);
        }
    }

    #[test]
    fn test_labels_roughly_uniform() {
        let s = spec(CovarianceModel::M1, 4, 4, 123);
        let rep = generate_replicate(&s).unwrap();
        let mut counts = [0usize; 3];
        for o in rep.test.observations() {
            counts[o.label - 1] += 1;
        }
        for &cnt in &counts {
            let freq = cnt as f64 / rep.test.n() as f64;
            assert!((freq - 1.0 / 3.0).abs() < 0.05, "class frequency {freq}");
        }
    }

    #[test]
    fn kronecker_and_full_sampling_match_in_second_moments() {
        // Model-1 structure at r=c=4 sampled through both code paths.
        let (r, c) = (4usize, 4usize);
        let row_cov = model1_row_cov(r);
        let col_cov = model1_col_cov(c);
        let phi = cholesky(&row_cov).unwrap().inverse();
        let delta = cholesky(&col_cov).unwrap().inverse();
        let kron_path = MatrixNormalSampler::new(
            Matrix::zeros(r, c),
            &Covariance::KroneckerPrecision { phi, delta },
        )
        .unwrap();
        let full_path = MatrixNormalSampler::new(
            Matrix::zeros(r, c),
            &Covariance::Full { sigma: kron_sym(&col_cov, &row_cov) },
        )
        .unwrap();

        let n = 100_000;
        let p = r * c;
        let mut rng1 = ChaCha12Rng::seed_from_u64(5);
        let mut rng2 = ChaCha12Rng::seed_from_u64(6);
        let mut m1 = vec![0.0; p * p];
        let mut m2 = vec![0.0; p * p];
        for _ in 0..n {
            let v1 = kron_path.sample(&mut rng1).vec_col_major();
            let v2 = full_path.sample(&mut rng2).vec_col_major();
            for a in 0..p {
                for b in 0..p {
                    m1[a * p + b] += v1[a] * v1[b];
                    m2[a * p + b] += v2[a] * v2[b];
                }
            }
        }
        for i in 0..p * p {
            assert!((m1[i] / n as f64 - m2[i] / n as f64).abs() < 0.05);
        }
    }
}
