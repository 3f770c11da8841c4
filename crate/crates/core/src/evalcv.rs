//! Repeated k-fold cross-validation with nested lambda tuning, baseline
//! models, and cross-validated R² reporting.
//!
//! Feature rows are computed once per subject (they depend on no other
//! subject), while standardization statistics, the lambda path, and
//! training-fold means are always recomputed strictly inside training data.
//! Subjects are canonically ordered by id before the seeded shuffle, so the
//! input order of subjects never matters. Each replication draws from its own
//! ChaCha stream, so parallel and serial runs agree exactly.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BSplineBasis, BasisConfig};
use crate::empdist::{build_empirical_distribution, BuildOptions, Grid};
use crate::error::{Error, Result};
use crate::features::{
    compute_features, curve_features, standardize, FeatureMatrix, FeatureMeta, FeatureTensor,
    IndexOrder, Standardization,
};
use crate::ingest::ObservationSet;
use crate::odds::OddsPolicy;
use crate::penreg::{fit_path, lambda_path, FitOptions, GlmSpec, PenaltySpec};

/// Covariate model under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Single scalar covariate: mean log-activity.
    BaselineMean,
    /// kappa features from the survival curve.
    Survival,
    Odds1,
    Odds2,
    Odds4,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "baseline_mean" => Ok(ModelKind::BaselineMean),
            "survival" => Ok(ModelKind::Survival),
            "odds1" => Ok(ModelKind::Odds1),
            "odds2" => Ok(ModelKind::Odds2),
            "odds4" => Ok(ModelKind::Odds4),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVConfig {
    pub model: ModelKind,
    pub penalty: PenaltySpec,
    pub n_folds: usize,
    pub n_replications: usize,
    pub seed: u64,
    /// Inner folds for lambda selection.
    pub inner_folds: usize,
    pub grid_points: usize,
    pub d_max: f64,
    pub basis: BasisConfig,
    pub policy: OddsPolicy,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    pub drop_zeros: bool,
}

impl CVConfig {
    pub fn new(model: ModelKind, penalty: PenaltySpec, seed: u64) -> Self {
        CVConfig {
            model,
            penalty,
            n_folds: 5,
            n_replications: 100,
            seed,
            inner_folds: 5,
            grid_points: 50,
            d_max: 9.6,
            basis: BasisConfig { degree: 3, n_interior: 8, d_max: 9.6 },
            policy: OddsPolicy::default(),
            n_lambda: 25,
            lambda_ratio: 1e-2,
            drop_zeros: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::Config(format!("n_folds must be >= 2, got {}", self.n_folds)));
        }
        if self.inner_folds < 2 {
            return Err(Error::Config(format!(
                "inner_folds must be >= 2, got {}",
                self.inner_folds
            )));
        }
        if self.n_replications == 0 {
            return Err(Error::Config("n_replications must be positive".into()));
        }
        self.penalty.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDiagnostics {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub chosen_lambda: f64,
    pub active_set_size: usize,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationDiagnostics {
    pub replication: usize,
    pub r_squared: f64,
    pub folds: Vec<FoldDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub r_squared: Vec<f64>,
    pub mean_r_squared: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub replications: Vec<ReplicationDiagnostics>,
    pub config: CVConfig,
}

/// Single-covariate design: per-subject mean of the transformed counts.
pub fn baseline_mean_model(subjects: &[ObservationSet]) -> Result<FeatureMatrix> {
    if subjects.is_empty() {
        return Err(Error::Degenerate("no subjects".into()));
    }
    let n = subjects.len();
    let mut x = Array2::zeros((n, 1));
    let mut y = Array1::zeros(n);
    let mut subject_ids = Vec::with_capacity(n);
    for (i, s) in subjects.iter().enumerate() {
        if s.values.is_empty() {
            return Err(Error::Degenerate(format!("subject {} has no values", s.subject_id)));
        }
        x[(i, 0)] = s.values.iter().sum::<f64>() / s.values.len() as f64;
        y[i] = s.outcome;
        subject_ids.push(s.subject_id.clone());
    }
    Ok(FeatureMatrix {
        x,
        y,
        subject_ids,
        meta: FeatureMeta {
            index_order: IndexOrder::One,
            grid_points: 0,
            d_max: 0.0,
            basis: BasisConfig { degree: 0, n_interior: 0, d_max: 0.0 },
            policy: OddsPolicy::default(),
        },
        total_cap_count: 0,
    })
}

/// kappa survival-curve features per subject: the 1-index quadrature pipeline
/// with S in place of h1.
pub fn survival_model_features(
    subjects: &[ObservationSet],
    basis: &BSplineBasis,
    grid: &Grid,
    build: BuildOptions,
) -> Result<FeatureMatrix> {
    if subjects.is_empty() {
        return Err(Error::Degenerate("no subjects".into()));
    }
    let n = subjects.len();
    let kappa = basis.kappa();
    let mut x = Array2::zeros((n, kappa));
    let mut y = Array1::zeros(n);
    let mut subject_ids = Vec::with_capacity(n);
    for (i, s) in subjects.iter().enumerate() {
        let dist = build_empirical_distribution(s, grid, build)?;
        let features = curve_features(&dist.survival, basis, grid)?;
        for (j, v) in features.into_iter().enumerate() {
            x[(i, j)] = v;
        }
        y[i] = s.outcome;
        subject_ids.push(s.subject_id.clone());
    }
    Ok(FeatureMatrix {
        x,
        y,
        subject_ids,
        meta: FeatureMeta {
            index_order: IndexOrder::One,
            grid_points: grid.len(),
            d_max: grid.d_max(),
            basis: basis.config(),
            policy: OddsPolicy::default(),
        },
        total_cap_count: 0,
    })
}

/// Raw per-subject feature rows for the configured model. Subjects are used
/// in the order given; callers wanting canonical order sort first.
pub fn model_features(subjects: &[ObservationSet], config: &CVConfig) -> Result<FeatureMatrix> {
    let grid = Grid::new(config.grid_points, config.d_max)?;
    let basis = BSplineBasis::from_config(&config.basis)?;
    let build = BuildOptions { drop_zeros: config.drop_zeros };
    match config.model {
        ModelKind::BaselineMean => baseline_mean_model(subjects),
        ModelKind::Survival => survival_model_features(subjects, &basis, &grid, build),
        ModelKind::Odds1 | ModelKind::Odds2 | ModelKind::Odds4 => {
            let order = match config.model {
                ModelKind::Odds1 => IndexOrder::One,
                ModelKind::Odds2 => IndexOrder::Two,
                _ => IndexOrder::Four,
            };
            let tensors: Vec<FeatureTensor> = subjects
                .par_iter()
                .map(|s| {
                    let dist = build_empirical_distribution(s, &grid, build)?;
                    compute_features(&dist, &s.subject_id, &basis, config.policy, order)
                })
                .collect::<Result<_>>()?;
            let outcomes: Vec<f64> = subjects.iter().map(|s| s.outcome).collect();
            FeatureMatrix::from_tensors(&tensors, &outcomes)
        }
    }
}

fn take_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), x.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).assign(&x.row(i));
    }
    out
}

fn take_values(y: &Array1<f64>, idx: &[usize]) -> Array1<f64> {
    Array1::from(idx.iter().map(|&i| y[i]).collect::<Vec<_>>())
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Contiguous fold boundaries for n items over k folds.
fn fold_ranges(n: usize, k: usize) -> Vec<(usize, usize)> {
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        out.push((start, start + len));
        start += len;
    }
    out
}

/// Select lambda on the training rows by inner CV, then refit and predict.
///
/// Returns (test squared errors summed, test total squares about the training
/// mean, diagnostics). All statistics that could leak — standardization,
/// lambda path, training mean — come from training rows only.
fn fit_fold(
    x: &Array2<f64>,
    y: &Array1<f64>,
    train_idx: &[usize],
    test_idx: &[usize],
    config: &CVConfig,
    rng: &mut ChaCha8Rng,
    fold: usize,
) -> Result<(f64, f64, FoldDiagnostics)> {
    let x_train = take_rows(x, train_idx);
    let y_train = take_values(y, train_idx);
    let y_bar_train = y_train.sum() / y_train.len() as f64;
    if y_train.iter().all(|&v| (v - y_bar_train).abs() < 1e-14) {
        return Ok((
            0.0,
            0.0,
            FoldDiagnostics {
                fold,
                n_train: train_idx.len(),
                n_test: test_idx.len(),
                chosen_lambda: f64::NAN,
                active_set_size: 0,
                skipped: true,
            },
        ));
    }

    let options = FitOptions::default();
    // lambda selection only compares validation MSEs, which are insensitive
    // to the last digits of the coefficients; the final refit gets full
    // precision
    let inner_options = FitOptions { tol: 1e-5, max_iter: 20_000 };
    let glm = GlmSpec::gaussian();

    // lambda sequence from the full training fold
    let train_std = Standardization::fit(&x_train);
    let x_train_z = train_std.transform(&x_train);
    let lambdas = lambda_path(
        &x_train_z.view(),
        &y_train.view(),
        &config.penalty,
        config.n_lambda,
        config.lambda_ratio,
    )?;

    // inner CV: mean squared prediction error per lambda
    let mut inner_order: Vec<usize> = (0..train_idx.len()).collect();
    inner_order.shuffle(rng);
    let mut mse = vec![0.0f64; lambdas.len()];
    let mut counts = vec![0usize; lambdas.len()];
    for (start, end) in fold_ranges(inner_order.len(), config.inner_folds) {
        let val_local: Vec<usize> = inner_order[start..end].to_vec();
        let fit_local: Vec<usize> = inner_order[..start]
            .iter()
            .chain(&inner_order[end..])
            .copied()
            .collect();
        if fit_local.len() < 2 || val_local.is_empty() {
            continue;
        }
        let x_fit = take_rows(&x_train, &fit_local);
        let y_fit = take_values(&y_train, &fit_local);
        if y_fit.iter().all(|&v| v == y_fit[0]) {
            continue;
        }
        let std_fit = Standardization::fit(&x_fit);
        let x_fit_z = std_fit.transform(&x_fit);
        let fits =
            fit_path(&x_fit_z.view(), &y_fit.view(), glm, &config.penalty, &lambdas, &inner_options)?;
        let x_val = take_rows(&x_train, &val_local);
        let y_val = take_values(&y_train, &val_local);
        for (li, inner) in fits.iter().enumerate() {
            let (icpt, theta) =
                std_fit.destandardize_coefficients(inner.intercept, inner.theta.as_slice().unwrap());
            let theta = Array1::from(theta);
            let pred = x_val.dot(&theta) + icpt;
            let sse: f64 = pred
                .iter()
                .zip(y_val.iter())
                .map(|(&p, &t)| (t - p) * (t - p))
                .sum();
            mse[li] += sse;
            counts[li] += val_local.len();
        }
    }
    let best = (0..lambdas.len())
        .filter(|&li| counts[li] > 0)
        .min_by(|&a, &b| {
            (mse[a] / counts[a] as f64)
                .partial_cmp(&(mse[b] / counts[b] as f64))
                .unwrap()
        })
        .ok_or_else(|| Error::Degenerate("no usable inner folds".into()))?;

    // refit on the full training fold, warm-starting down the path
    let final_fits = fit_path(
        &x_train_z.view(),
        &y_train.view(),
        glm,
        &config.penalty,
        &lambdas[..=best],
        &options,
    )?;
    let chosen = final_fits.last().unwrap();
    let active_set_size = chosen.theta.iter().filter(|&&t| t != 0.0).count();
    let (icpt, theta) =
        train_std.destandardize_coefficients(chosen.intercept, chosen.theta.as_slice().unwrap());
    let theta = Array1::from(theta);

    let x_test = take_rows(x, test_idx);
    let y_test = take_values(y, test_idx);
    let pred = x_test.dot(&theta) + icpt;
    let sse: f64 = pred
        .iter()
        .zip(y_test.iter())
        .map(|(&p, &t)| (t - p) * (t - p))
        .sum();
    let sst: f64 = y_test.iter().map(|&t| (t - y_bar_train) * (t - y_bar_train)).sum();

    Ok((
        sse,
        sst,
        FoldDiagnostics {
            fold,
            n_train: train_idx.len(),
            n_test: test_idx.len(),
            chosen_lambda: lambdas[best],
            active_set_size,
            skipped: false,
        },
    ))
}

fn run_replication(
    x: &Array2<f64>,
    y: &Array1<f64>,
    config: &CVConfig,
    replication: usize,
) -> Result<ReplicationDiagnostics> {
    let n = x.nrows();
    // independent stream per replication: parallel and serial runs agree
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replication as u64 + 1);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut sse_total = 0.0;
    let mut sst_total = 0.0;
    let mut folds = Vec::with_capacity(config.n_folds);
    for (fold, (start, end)) in fold_ranges(n, config.n_folds).into_iter().enumerate() {
        let test_idx: Vec<usize> = order[start..end].to_vec();
        let train_idx: Vec<usize> =
            order[..start].iter().chain(&order[end..]).copied().collect();
        let (sse, sst, diag) = fit_fold(x, y, &train_idx, &test_idx, config, &mut rng, fold)?;
        sse_total += sse;
        sst_total += sst;
        folds.push(diag);
    }
    let r_squared = if sst_total > 0.0 { 1.0 - sse_total / sst_total } else { f64::NAN };
    Ok(ReplicationDiagnostics { replication, r_squared, folds })
}

/// Repeated k-fold cross-validation of the configured model.
pub fn cross_validate(subjects: &[ObservationSet], config: &CVConfig) -> Result<CVReport> {
    config.validate()?;
    if subjects.len() < 2 * config.n_folds {
        return Err(Error::Degenerate(format!(
            "need at least {} subjects for {}-fold CV, got {}",
            2 * config.n_folds,
            config.n_folds,
            subjects.len()
        )));
    }
    // canonical order: the seeded shuffle keys on position in this ordering,
    // so the caller's input order is irrelevant
    let mut ordered: Vec<ObservationSet> = subjects.to_vec();
    ordered.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));

    let raw = model_features(&ordered, config)?;
    let replications: Vec<ReplicationDiagnostics> = (0..config.n_replications)
        .into_par_iter()
        .map(|rep| run_replication(&raw.x, &raw.y, config, rep))
        .collect::<Result<_>>()?;

    let r_squared: Vec<f64> = replications.iter().map(|r| r.r_squared).collect();
    let mean_r_squared = r_squared.iter().sum::<f64>() / r_squared.len() as f64;
    let mut sorted = r_squared.clone();
    sorted.sort_by(f64::total_cmp);
    let ci_lower = empirical_quantile(&sorted, 0.025);
    let ci_upper = empirical_quantile(&sorted, 0.975);

    Ok(CVReport {
        r_squared,
        mean_r_squared,
        ci_lower,
        ci_upper,
        replications,
        config: config.clone(),
    })
}

/// In-sample fit of the configured model at the smallest path lambda; returns
/// the in-sample R². Used by the perfect-signal recovery check.
pub fn in_sample_r_squared(subjects: &[ObservationSet], config: &CVConfig) -> Result<f64> {
    let mut ordered: Vec<ObservationSet> = subjects.to_vec();
    ordered.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    let raw = model_features(&ordered, config)?;
    let design = standardize(&raw);
    let lambdas = lambda_path(
        &design.x.view(),
        &design.y.view(),
        &config.penalty,
        config.n_lambda,
        config.lambda_ratio,
    )?;
    let fits = fit_path(
        &design.x.view(),
        &design.y.view(),
        GlmSpec::gaussian(),
        &config.penalty,
        &lambdas,
        &FitOptions::default(),
    )?;
    let last = fits.last().unwrap();
    let pred = design.x.dot(&last.theta) + last.intercept;
    let y_bar = design.y.sum() / design.y.len() as f64;
    let sse: f64 = design
        .y
        .iter()
        .zip(pred.iter())
        .map(|(&t, &p)| (t - p) * (t - p))
        .sum();
    let sst: f64 = design.y.iter().map(|&t| (t - y_bar) * (t - y_bar)).sum();
    Ok(1.0 - sse / sst)
}
