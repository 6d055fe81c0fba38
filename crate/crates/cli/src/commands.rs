//! Subcommand implementations. All output is deterministic given the flags;
//! logs go to stderr, primary tabular output to files/stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use klda::classify::{predict_batch, score};
use klda::fit::{fit, FitResult, PenaltyConfig};
use klda::linalg::Matrix;
use klda::metrics::{misclassification_rate, support_metrics};
use klda::sim::{
    generate_replicate, CovarianceModel, GeneratedReplicate, MeanPattern, SimulationSpec,
    TrueCovariance, BLOCK_SIZE,
};
use klda::tune::{grid_search, kfold_cv, TuningGrid, TuningReport};

use crate::errors::{data_err, CliError, CliResult};
use crate::formats::{FitMeta, ModelFile, save_dataset, load_dataset};

const ZERO_TOL: f64 = 1e-8;

/// Parses a mean-pattern file: 48 whitespace-separated reals (three 4x4
/// blocks, row-major, classes in order). Lines starting with `#` are
/// comments.
pub fn load_pattern(path: &Path) -> CliResult<MeanPattern> {
    let text = fs::read_to_string(path).map_err(|e| data_err(&path.display().to_string(), e))?;
    let vals: Vec<f64> = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split_whitespace())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| CliError::Data(format!("{}: bad value {t:?}: {e}", path.display())))
        })
        .collect::<CliResult<_>>()?;
    let need = 3 * BLOCK_SIZE * BLOCK_SIZE;
    if vals.len() != need {
        return Err(CliError::Data(format!(
            "{}: expected {need} values (three {BLOCK_SIZE}x{BLOCK_SIZE} blocks), found {}",
            path.display(),
            vals.len()
        )));
    }
    let block = |k: usize| {
        Matrix::from_rows(
            BLOCK_SIZE,
            BLOCK_SIZE,
            vals[k * 16..(k + 1) * 16].to_vec(),
        )
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    };
    MeanPattern::new([block(0)?, block(1)?, block(2)?])
        .map_err(|e| CliError::Data(e.to_string()))
}

pub struct SimulateArgs {
    pub model: usize,
    pub r: usize,
    pub c: usize,
    pub seed: u64,
    pub out_prefix: PathBuf,
    pub pattern_file: Option<PathBuf>,
    pub n_train: usize,
    pub n_validate: usize,
    pub n_test: usize,
}

fn build_spec(args: &SimulateArgs) -> CliResult<SimulationSpec> {
    let model = CovarianceModel::from_number(args.model)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut spec = SimulationSpec::new(model, args.r, args.c, args.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    spec.n_train = args.n_train;
    spec.n_validate = args.n_validate;
    spec.n_test = args.n_test;
    if let Some(p) = &args.pattern_file {
        spec.mean_pattern = load_pattern(p)?;
    }
    Ok(spec)
}

fn truth_model_file(rep: &GeneratedReplicate) -> ModelFile {
    match &rep.true_covariance {
        TrueCovariance::Kronecker { phi, delta } => {
            let params = klda::matnorm::ModelParameters {
                priors: rep.true_priors.clone(),
                means: rep.true_means.clone(),
                phi: phi.clone(),
                delta: delta.clone(),
            };
            ModelFile::from_params(&params, None)
        }
        TrueCovariance::Full { sigma } => {
            ModelFile::from_dense_truth(&rep.true_priors, &rep.true_means, sigma)
        }
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let spec = build_spec(args)?;
    let rep = generate_replicate(&spec)?;
    let prefix = &args.out_prefix;
    let path = |suffix: &str| -> PathBuf {
        let mut s = prefix.as_os_str().to_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    save_dataset(&path(".train.kld"), &rep.train)?;
    save_dataset(&path(".validate.kld"), &rep.validate)?;
    save_dataset(&path(".test.kld"), &rep.test)?;
    truth_model_file(&rep).save(&path(".truth.json"))?;
    eprintln!(
        "model {} at {}x{}: signal block at ({}, {}); wrote {}.{{train,validate,test}}.kld + .truth.json",
        args.model,
        args.r,
        args.c,
        rep.block_position.0,
        rep.block_position.1,
        prefix.display()
    );
    Ok(())
}

pub enum Tuning {
    Fixed,
    Validate(PathBuf),
    CrossValidate { k: usize, seed: u64 },
}

pub struct FitArgs {
    pub train: PathBuf,
    pub lambda1: f64,
    pub lambda2: f64,
    pub tuning: Tuning,
    pub grid: Option<String>,
    pub out: PathBuf,
    pub config: PenaltyConfig,
}

fn tuning_grid(args: &FitArgs) -> CliResult<TuningGrid> {
    match &args.grid {
        Some(spec) => crate::config::parse_grid(spec),
        None => Ok(TuningGrid::pow2_default()),
    }
}

fn report_summary(report: &TuningReport) -> String {
    format!(
        "chosen lambda1 = {}, lambda2 = {} (validation error {:.4}, {} tie{})",
        report.chosen.0,
        report.chosen.1,
        report.best_error,
        report.tie_count,
        if report.tie_count == 1 { "" } else { "s" }
    )
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let train = load_dataset(&args.train)?;
    if !train.is_fully_labeled() {
        return Err(CliError::Data(format!(
            "{}: training data contains unlabeled observations",
            args.train.display()
        )));
    }
    let mut cfg = args.config.clone();
    match &args.tuning {
        Tuning::Fixed => {
            cfg.lambda1 = args.lambda1;
            cfg.lambda2 = args.lambda2;
        }
        Tuning::Validate(path) => {
            let validate = load_dataset(path)?;
            let grid = tuning_grid(args)?;
            let report = grid_search(&train, &validate, &grid, &cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("{}", report_summary(&report));
            (cfg.lambda1, cfg.lambda2) = report.chosen;
        }
        Tuning::CrossValidate { k, seed } => {
            let grid = tuning_grid(args)?;
            let report = kfold_cv(&train, *k, &grid, &cfg, *seed)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("{}", report_summary(&report));
            (cfg.lambda1, cfg.lambda2) = report.chosen;
        }
    }

    let result = fit(&train, &cfg)?;
    if !result.converged {
        eprintln!(
            "warning: fit did not converge within {} outer iterations",
            cfg.max_outer_iter
        );
    }
    write_fit_outputs(&result, &cfg, &args.out)
}

fn write_fit_outputs(result: &FitResult, cfg: &PenaltyConfig, out: &Path) -> CliResult<()> {
    let meta = FitMeta {
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        objective: *result.objective_trace.last().expect("nonempty trace"),
        outer_iterations: result.outer_iterations,
        converged: result.converged,
        software_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    ModelFile::from_params(&result.params, Some(meta)).save(out)?;
    // Sidecar objective trace, one value per line.
    let mut trace = String::new();
    for v in &result.objective_trace {
        let _ = writeln!(trace, "{v}");
    }
    let mut trace_path = out.as_os_str().to_os_string();
    trace_path.push(".trace");
    fs::write(PathBuf::from(&trace_path), trace)
        .map_err(|e| data_err(&PathBuf::from(trace_path).display().to_string(), e))?;
    Ok(())
}

pub struct PredictArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
}

pub fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    let model = ModelFile::load(&args.model)?;
    let params = model.to_params()?;
    let data = load_dataset(&args.data)?;
    if data.r() != params.r() || data.c() != params.c() {
        return Err(CliError::Data(format!(
            "model is {}x{} but data is {}x{}",
            params.r(),
            params.c(),
            data.r(),
            data.c()
        )));
    }

    let mut csv = String::from("index,true,predicted");
    for j in 1..=params.num_classes() {
        let _ = write!(csv, ",score_{j}");
    }
    csv.push('\n');
    let mut predictions = Vec::with_capacity(data.n());
    for (i, obs) in data.observations().iter().enumerate() {
        let s = score(&obs.x, &params).map_err(|e| CliError::Data(e.to_string()))?;
        let truth = if obs.label == 0 { "NA".to_string() } else { obs.label.to_string() };
        let _ = write!(csv, "{},{},{}", i, truth, s.predicted);
        for v in &s.scores {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
        predictions.push(s.predicted);
    }
    fs::write(&args.out, csv).map_err(|e| data_err(&args.out.display().to_string(), e))?;

    if data.n() > 0 && data.is_fully_labeled() {
        let rate = misclassification_rate(&predictions, &data.labels())?;
        println!("misclassification_rate {rate}");
    }
    Ok(())
}

pub struct BenchArgs {
    pub model: usize,
    pub dims: Vec<(usize, usize)>,
    pub reps: usize,
    pub seed: u64,
    pub grid: Option<String>,
    pub out: PathBuf,
    pub config: PenaltyConfig,
    pub pattern_file: Option<PathBuf>,
}

struct RepOutcome {
    r: usize,
    c: usize,
    rep: usize,
    rows: Vec<(String, f64, Option<f64>, Option<f64>)>,
}

fn run_replicate(
    model: usize,
    r: usize,
    c: usize,
    rep_index: usize,
    seed: u64,
    grid: &TuningGrid,
    cfg: &PenaltyConfig,
    pattern: Option<&MeanPattern>,
) -> CliResult<RepOutcome> {
    let covmodel =
        CovarianceModel::from_number(model).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut spec = SimulationSpec::new(covmodel, r, c, seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(p) = pattern {
        spec.mean_pattern = p.clone();
    }
    let repdata = generate_replicate(&spec)?;
    let test_x: Vec<Matrix> =
        repdata.test.observations().iter().map(|o| o.x.clone()).collect();
    let test_y = repdata.test.labels();

    let evaluate = |result: &FitResult| -> CliResult<(f64, Option<f64>, Option<f64>)> {
        let pred = predict_batch(&test_x, &result.params)?;
        let miscls = misclassification_rate(&pred, &test_y)?;
        let support = support_metrics(&result.params.means, &repdata.true_means, ZERO_TOL)?;
        Ok((miscls, support.tpr, support.tnr))
    };

    // Penalized fit with validation-tuned penalties, refit on the training set.
    let report = grid_search(&repdata.train, &repdata.validate, grid, cfg)?;
    let mut tuned_cfg = cfg.clone();
    (tuned_cfg.lambda1, tuned_cfg.lambda2) = report.chosen;
    let pmn = fit(&repdata.train, &tuned_cfg)?;
    let (pmn_miscls, pmn_tpr, pmn_tnr) = evaluate(&pmn)?;

    // Unpenalized matrix-normal baseline.
    let mut mle_cfg = cfg.clone();
    mle_cfg.lambda1 = 0.0;
    mle_cfg.lambda2 = 0.0;
    let mle = fit(&repdata.train, &mle_cfg)?;
    let (mle_miscls, mle_tpr, mle_tnr) = evaluate(&mle)?;

    Ok(RepOutcome {
        r,
        c,
        rep: rep_index,
        rows: vec![
            ("PMN".to_string(), pmn_miscls, pmn_tpr, pmn_tnr),
            ("MN".to_string(), mle_miscls, mle_tpr, mle_tnr),
        ],
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".to_string())
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<()> {
    if args.reps == 0 {
        return Err(CliError::Usage("reps must be positive".into()));
    }
    let grid = match &args.grid {
        Some(spec) => crate::config::parse_grid(spec)?,
        None => TuningGrid::pow2_default(),
    };
    let pattern = match &args.pattern_file {
        Some(p) => Some(load_pattern(p)?),
        None => None,
    };

    let jobs: Vec<(usize, usize, usize)> = args
        .dims
        .iter()
        .flat_map(|&(r, c)| (0..args.reps).map(move |rep| (r, c, rep)))
        .collect();
    let outcomes: Vec<(usize, CliResult<RepOutcome>)> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(r, c, rep))| {
            let seed = args.seed.wrapping_add(rep as u64);
            (
                i,
                run_replicate(args.model, r, c, rep, seed, &grid, &args.config, pattern.as_ref()),
            )
        })
        .collect();

    let mut tsv = String::from("method\tr\tc\trep\tmiscls\ttpr\ttnr\n");
    let mut failures = 0usize;
    let mut agg: Vec<((String, usize, usize), (f64, f64, f64, usize))> = Vec::new();
    for (_, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                for (method, miscls, tpr, tnr) in &o.rows {
                    let _ = writeln!(
                        tsv,
                        "{method}\t{}\t{}\t{}\t{miscls}\t{}\t{}",
                        o.r,
                        o.c,
                        o.rep,
                        fmt_opt(*tpr),
                        fmt_opt(*tnr)
                    );
                    let key = (method.clone(), o.r, o.c);
                    let slot = match agg.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, s)) => s,
                        None => {
                            agg.push((key, (0.0, 0.0, 0.0, 0)));
                            &mut agg.last_mut().unwrap().1
                        }
                    };
                    slot.0 += miscls;
                    slot.1 += tpr.unwrap_or(0.0);
                    slot.2 += tnr.unwrap_or(0.0);
                    slot.3 += 1;
                }
            }
            Err(e) => {
                failures += 1;
                eprintln!("replicate failed: {e}");
            }
        }
    }
    agg.sort_by(|a, b| a.0.cmp(&b.0));
    for ((method, r, c), (m, tp, tn, n)) in &agg {
        let n = *n as f64;
        let _ = writeln!(
            tsv,
            "#agg\t{method}\t{r}\t{c}\tmean_miscls={}\tmean_tpr={}\tmean_tnr={}",
            m / n,
            tp / n,
            tn / n
        );
    }
    fs::write(&args.out, tsv).map_err(|e| data_err(&args.out.display().to_string(), e))?;

    let total = jobs.len();
    if failures * 10 > total {
        return Err(CliError::Numeric(format!(
            "{failures} of {total} replicates failed (more than 10%)"
        )));
    }
    if failures > 0 {
        eprintln!("warning: {failures} of {total} replicates failed and were excluded");
    }
    Ok(())
}
