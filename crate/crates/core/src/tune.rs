//! Tuning-parameter selection: validation-set grid search over
//! `(lambda1, lambda2)` and stratified k-fold cross-validation. Grid cells
//! are independent jobs; within a `lambda1` row the fits chain warm starts
//! through descending `lambda2` (sparser models are cheaper starting points).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::classify::predict_batch;
use crate::error::{Error, Result};
use crate::fit::{fit_warm, PenaltyConfig, WarmStart};
use crate::matnorm::LabeledMatrixDataset;
use crate::metrics::misclassification_rate;

/// Candidate penalty values, sorted ascending with duplicates removed.
#[derive(Clone, Debug)]
pub struct TuningGrid {
    pub lambda1_values: Vec<f64>,
    pub lambda2_values: Vec<f64>,
}

impl TuningGrid {
    pub fn new(lambda1_values: Vec<f64>, lambda2_values: Vec<f64>) -> Result<Self> {
        Ok(Self {
            lambda1_values: Self::clean(lambda1_values)?,
            lambda2_values: Self::clean(lambda2_values)?,
        })
    }

    fn clean(mut values: Vec<f64>) -> Result<Vec<f64>> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty tuning grid".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("grid values must be nonnegative".into()));
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite grid values"));
        values.dedup();
        Ok(values)
    }

    /// Powers of two over an exponent range, endpoints included.
    pub fn pow2_range(lo: f64, step: f64, hi: f64) -> Result<Vec<f64>> {
        if !(step > 0.0) || hi < lo {
            return Err(Error::InvalidArgument(format!(
                "bad pow2 range: lo {lo}, step {step}, hi {hi}"
            )));
        }
        let mut values = Vec::new();
        let mut k = 0usize;
        loop {
            let x = lo + step * k as f64;
            if x > hi + 1e-12 {
                break;
            }
            values.push(2f64.powf(x));
            k += 1;
        }
        Ok(values)
    }

    /// The default candidate set `{2^x : x = -12, -11.5, ..., 12}` on both
    /// axes.
    pub fn pow2_default() -> Self {
        let values = Self::pow2_range(-12.0, 0.5, 12.0).expect("static range");
        Self { lambda1_values: values.clone(), lambda2_values: values }
    }
}

/// One evaluated grid cell; `error` is `None` when the fit failed.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub lambda1: f64,
    pub lambda2: f64,
    pub error: Option<f64>,
}

/// Grid-search outcome: every cell, the chosen pair (ties break to larger
/// `lambda1`, then larger `lambda2`), and how many cells tied at the
/// minimum.
#[derive(Clone, Debug)]
pub struct TuningReport {
    pub cells: Vec<CellResult>,
    pub chosen: (f64, f64),
    pub best_error: f64,
    pub tie_count: usize,
    pub warnings: Vec<String>,
}

fn choose(cells: &[CellResult]) -> Result<(f64, f64, f64, usize)> {
    let mut best: Option<(f64, f64, f64)> = None;
    for cell in cells {
        let Some(err) = cell.error else { continue };
        let better = match best {
            None => true,
            Some((be, bl1, bl2)) => {
                err < be
                    || (err == be
                        && (cell.lambda1 > bl1 || (cell.lambda1 == bl1 && cell.lambda2 > bl2)))
            }
        };
        if better {
            best = Some((err, cell.lambda1, cell.lambda2));
        }
    }
    let (err, l1, l2) = best.ok_or(Error::AllCellsFailed)?;
    let ties = cells.iter().filter(|c| c.error == Some(err)).count();
    Ok((l1, l2, err, ties))
}

fn sweep_row(
    train: &LabeledMatrixDataset,
    lambda1: f64,
    lambda2_desc: &[f64],
    base: &PenaltyConfig,
    warm_starts: bool,
    mut evaluate: impl FnMut(&crate::fit::FitResult) -> Result<f64>,
) -> Vec<CellResult> {
    let mut warm: Option<WarmStart> = None;
    let mut out = Vec::with_capacity(lambda2_desc.len());
    for &lambda2 in lambda2_desc {
        let mut cfg = base.clone();
        cfg.lambda1 = lambda1;
        cfg.lambda2 = lambda2;
        let error = match fit_warm(train, &cfg, warm.as_ref().filter(|_| warm_starts)) {
            Ok(result) => {
                let err = evaluate(&result).ok();
                if warm_starts {
                    warm = Some(result.warm_start());
                }
                err
            }
            Err(_) => None,
        };
        out.push(CellResult { lambda1, lambda2, error });
    }
    out
}

/// Fits every grid cell on `train`, scores on `validate`, and reports the
/// arg-min cell. Rows (fixed `lambda1`) run in parallel; results aggregate
/// in grid order regardless of scheduling.
pub fn grid_search(
    train: &LabeledMatrixDataset,
    validate: &LabeledMatrixDataset,
    grid: &TuningGrid,
    fit_cfg: &PenaltyConfig,
) -> Result<TuningReport> {
    grid_search_with(train, validate, grid, fit_cfg, true)
}

/// As [`grid_search`], with warm starting switchable (warm starts are an
/// optimization, not a semantic change).
pub fn grid_search_with(
    train: &LabeledMatrixDataset,
    validate: &LabeledMatrixDataset,
    grid: &TuningGrid,
    fit_cfg: &PenaltyConfig,
    warm_starts: bool,
) -> Result<TuningReport> {
    if validate.n() == 0 {
        return Err(Error::InvalidArgument("empty validation set".into()));
    }
    let mut lambda2_desc = grid.lambda2_values.clone();
    lambda2_desc.reverse();
    let val_x: Vec<_> = validate.observations().iter().map(|o| o.x.clone()).collect();
    let val_y = validate.labels();

    let rows: Vec<Vec<CellResult>> = grid
        .lambda1_values
        .par_iter()
        .map(|&lambda1| {
            sweep_row(train, lambda1, &lambda2_desc, fit_cfg, warm_starts, |result| {
                let pred = predict_batch(&val_x, &result.params)?;
                misclassification_rate(&pred, &val_y)
            })
        })
        .collect();

    let cells: Vec<CellResult> = rows.into_iter().flatten().collect();
    let (l1, l2, best_error, tie_count) = choose(&cells)?;
    Ok(TuningReport { cells, chosen: (l1, l2), best_error, tie_count, warnings: Vec::new() })
}

/// Deterministic fold assignment, stratified by class when every class has
/// at least `k` members; otherwise plain shuffled round-robin with a
/// warning.
fn assign_folds(
    data: &LabeledMatrixDataset,
    k: usize,
    seed: u64,
    warnings: &mut Vec<String>,
) -> Vec<usize> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = data.n();
    let j = data.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); j + 1];
    for (i, obs) in data.observations().iter().enumerate() {
        by_class[obs.label].push(i);
    }
    let stratified = by_class.iter().skip(1).all(|ix| ix.is_empty() || ix.len() >= k);

    let mut fold = vec![0usize; n];
    if stratified {
        let mut cursor = 0usize;
        for ix in by_class.iter_mut().skip(1) {
            ix.shuffle(&mut rng);
            for &i in ix.iter() {
                fold[i] = cursor % k;
                cursor += 1;
            }
        }
    } else {
        warnings.push(format!(
            "a class has fewer than k = {k} members; falling back to unstratified folds"
        ));
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        for (cursor, &i) in all.iter().enumerate() {
            fold[i] = cursor % k;
        }
    }
    fold
}

/// Stratified k-fold cross-validation over the grid: per cell, the mean of
/// the held-out fold error rates; the tie rule matches [`grid_search`].
pub fn kfold_cv(
    data: &LabeledMatrixDataset,
    k: usize,
    grid: &TuningGrid,
    fit_cfg: &PenaltyConfig,
    seed: u64,
) -> Result<TuningReport> {
    if k < 2 || data.n() < k {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= k <= n for cross-validation (k = {k}, n = {})",
            data.n()
        )));
    }
    let mut warnings = Vec::new();
    let fold = assign_folds(data, k, seed, &mut warnings);

    let splits: Vec<(LabeledMatrixDataset, Vec<crate::linalg::Matrix>, Vec<usize>)> = (0..k)
        .map(|f| {
            let train_ix: Vec<usize> =
                (0..data.n()).filter(|&i| fold[i] != f).collect();
            let held: Vec<usize> = (0..data.n()).filter(|&i| fold[i] == f).collect();
            let train = data.subset(&train_ix)?;
            let xs = held.iter().map(|&i| data.observations()[i].x.clone()).collect();
            let ys = held.iter().map(|&i| data.observations()[i].label).collect();
            Ok((train, xs, ys))
        })
        .collect::<Result<_>>()?;

    let mut lambda2_desc = grid.lambda2_values.clone();
    lambda2_desc.reverse();

    // One warm-start chain per (fold, lambda1 row); chains run in parallel.
    let jobs: Vec<(usize, f64)> = (0..k)
        .flat_map(|f| grid.lambda1_values.iter().map(move |&l1| (f, l1)))
        .collect();
    let per_job: Vec<Vec<CellResult>> = jobs
        .par_iter()
        .map(|&(f, lambda1)| {
            let (train, xs, ys) = &splits[f];
            sweep_row(train, lambda1, &lambda2_desc, fit_cfg, true, |result| {
                let pred = predict_batch(xs, &result.params)?;
                misclassification_rate(&pred, ys)
            })
        })
        .collect();

    // Average fold errors per cell; a cell fails if any fold failed.
    let n1 = grid.lambda1_values.len();
    let n2 = lambda2_desc.len();
    let mut cells = Vec::with_capacity(n1 * n2);
    for (row, &lambda1) in grid.lambda1_values.iter().enumerate() {
        for col in 0..n2 {
            let mut total = 0.0;
            let mut ok = true;
            for f in 0..k {
                match per_job[f * n1 + row][col].error {
                    Some(e) => total += e,
                    None => ok = false,
                }
            }
            cells.push(CellResult {
                lambda1,
                lambda2: lambda2_desc[col],
                error: ok.then(|| total / k as f64),
            });
        }
    }
    let (l1, l2, best_error, tie_count) = choose(&cells)?;
    Ok(TuningReport { cells, chosen: (l1, l2), best_error, tie_count, warnings })
}
