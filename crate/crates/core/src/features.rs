//! Per-subject feature coefficients by trapezoidal quadrature of basis
//! products against odds surfaces, and design-matrix assembly.
//!
//! Quadrature lives on the shared grid points u_1..u_G. The 2-index features
//! are computed as WB' H WB with WB the weight-scaled basis matrix; the
//! 4-index tensor is never materialized per entry during quadrature: it is
//! the outer product of the two kappa^2 factor vectors `a` (from the capped
//! reciprocal |dF| matrix) and `c` (from the |dF| matrix).
//!
//! Vectorization order is fixed globally: the last index moves fastest, so
//! the flat 4-index position of (k1,k2,k3,k4) is ((k1*k + k2)*k + k3)*k + k4.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::basis::{BSplineBasis, BasisConfig};
use crate::empdist::{EmpiricalDistribution, Grid};
use crate::error::{Error, Result};
use crate::odds::{OddsEvaluator, OddsPolicy};

/// Trapezoidal weights over the grid points (integration over [u_1, u_G]).
pub fn trapezoid_weights(grid: &Grid) -> Vec<f64> {
    let g_count = grid.len();
    let h = grid.cell_width();
    let mut w = vec![h; g_count];
    w[0] = h / 2.0;
    w[g_count - 1] = h / 2.0;
    w
}

/// Weight-scaled basis matrix WB[g, k] = w_g * B_k(u_g).
pub fn weighted_basis_matrix(basis: &BSplineBasis, grid: &Grid) -> Result<Array2<f64>> {
    let mut m = basis.matrix(grid)?;
    let w = trapezoid_weights(grid);
    for (g, &wg) in w.iter().enumerate() {
        for k in 0..basis.kappa() {
            m[(g, k)] *= wg;
        }
    }
    Ok(m)
}

/// Which odds object feeds the feature quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexOrder {
    One,
    Two,
    Four,
}

impl IndexOrder {
    pub fn arity(&self) -> usize {
        match self {
            IndexOrder::One => 1,
            IndexOrder::Two => 2,
            IndexOrder::Four => 4,
        }
    }

    /// Feature dimension kappa^d.
    pub fn dim(&self, kappa: usize) -> usize {
        match self {
            IndexOrder::One => kappa,
            IndexOrder::Two => kappa * kappa,
            IndexOrder::Four => kappa * kappa * kappa * kappa,
        }
    }
}

impl std::str::FromStr for IndexOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(IndexOrder::One),
            "2" => Ok(IndexOrder::Two),
            "4" => Ok(IndexOrder::Four),
            other => Err(Error::Config(format!("unknown index order `{other}`"))),
        }
    }
}

/// Provenance shared by every feature tensor in one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub index_order: IndexOrder,
    pub grid_points: usize,
    pub d_max: f64,
    pub basis: BasisConfig,
    pub policy: OddsPolicy,
}

/// Feature coefficients for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    pub subject_id: String,
    pub meta: FeatureMeta,
    pub values: FeatureValues,
    pub cap_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureValues {
    /// Flat vector, length kappa (1-index) or kappa^2 (2-index).
    Dense(Vec<f64>),
    /// 4-index rank-1 form: the full tensor is the outer product a (x) c.
    Factored { a: Vec<f64>, c: Vec<f64> },
}

impl FeatureTensor {
    /// Materialize the flat feature row (outer product for the factored form).
    pub fn to_dense(&self) -> Vec<f64> {
        match &self.values {
            FeatureValues::Dense(v) => v.clone(),
            FeatureValues::Factored { a, c } => {
                let mut out = Vec::with_capacity(a.len() * c.len());
                for &ai in a {
                    for &ci in c {
                        out.push(ai * ci);
                    }
                }
                out
            }
        }
    }

    pub fn dim(&self) -> usize {
        match &self.values {
            FeatureValues::Dense(v) => v.len(),
            FeatureValues::Factored { a, c } => a.len() * c.len(),
        }
    }
}

/// W_k = sum_g w_g B_k(u_g) h1(u_g); returns the kappa-vector and cap count.
pub fn features_1d(
    dist: &EmpiricalDistribution,
    basis: &BSplineBasis,
    policy: OddsPolicy,
) -> Result<(Vec<f64>, u64)> {
    let mut ev = OddsEvaluator::new(dist, policy);
    let h1 = ev.odds1_vector();
    let features = curve_features(&h1, basis, &dist.grid)?;
    Ok((features, ev.cap_count()))
}

/// Quadrature of the basis against an arbitrary gridded curve; shared by the
/// 1-index odds features and the survival-covariate baseline.
pub fn curve_features(curve: &[f64], basis: &BSplineBasis, grid: &Grid) -> Result<Vec<f64>> {
    if curve.len() != grid.len() {
        return Err(Error::Shape(format!(
            "curve length {} does not match grid length {}",
            curve.len(),
            grid.len()
        )));
    }
    let wb = weighted_basis_matrix(basis, grid)?;
    let curve = Array1::from(curve.to_vec());
    Ok(wb.t().dot(&curve).to_vec())
}

/// 2-index features as the flat row-major kappa x kappa matrix WB' H WB.
pub fn features_2d(
    dist: &EmpiricalDistribution,
    basis: &BSplineBasis,
    policy: OddsPolicy,
) -> Result<(Vec<f64>, u64)> {
    let mut ev = OddsEvaluator::new(dist, policy);
    let surface = ev.odds2_surface();
    let wb = weighted_basis_matrix(basis, &dist.grid)?;
    let result = wb.t().dot(&surface).dot(&wb);
    Ok((result.into_iter().collect(), ev.cap_count()))
}

/// 4-index features in factored form: a from the capped 1/|dF| matrix, c from
/// the |dF| matrix. The full tensor is a (x) c with the last index fastest.
pub fn features_4d_factored(
    dist: &EmpiricalDistribution,
    basis: &BSplineBasis,
    policy: OddsPolicy,
) -> Result<(Vec<f64>, Vec<f64>, u64)> {
    let mut ev = OddsEvaluator::new(dist, policy);
    let (a_mat, c_mat) = ev.factor_odds4();
    let wb = weighted_basis_matrix(basis, &dist.grid)?;
    let a = wb.t().dot(&a_mat).dot(&wb);
    let c = wb.t().dot(&c_mat).dot(&wb);
    Ok((
        a.into_iter().collect(),
        c.into_iter().collect(),
        ev.cap_count(),
    ))
}

/// Compute the feature tensor of one subject for the requested index order.
pub fn compute_features(
    dist: &EmpiricalDistribution,
    subject_id: &str,
    basis: &BSplineBasis,
    policy: OddsPolicy,
    order: IndexOrder,
) -> Result<FeatureTensor> {
    let meta = FeatureMeta {
        index_order: order,
        grid_points: dist.grid.len(),
        d_max: dist.grid.d_max(),
        basis: basis.config(),
        policy,
    };
    let (values, cap_count) = match order {
        IndexOrder::One => {
            let (v, caps) = features_1d(dist, basis, policy)?;
            (FeatureValues::Dense(v), caps)
        }
        IndexOrder::Two => {
            let (v, caps) = features_2d(dist, basis, policy)?;
            (FeatureValues::Dense(v), caps)
        }
        IndexOrder::Four => {
            let (a, c, caps) = features_4d_factored(dist, basis, policy)?;
            (FeatureValues::Factored { a, c }, caps)
        }
    };
    Ok(FeatureTensor {
        subject_id: subject_id.to_string(),
        meta,
        values,
        cap_count,
    })
}

/// Column standardization statistics; constant columns are recorded and their
/// standardized values forced to zero (equivalent to dropping the column while
/// preserving indexing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub dropped: Vec<usize>,
}

const CONSTANT_COLUMN_TOL: f64 = 1e-12;

impl Standardization {
    /// Column means and population standard deviations of a raw matrix.
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows() as f64;
        let p = x.ncols();
        let mut means = vec![0.0; p];
        let mut sds = vec![0.0; p];
        let mut dropped = Vec::new();
        for j in 0..p {
            let col = x.column(j);
            let mean = col.sum() / n;
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            means[j] = mean;
            if sd <= CONSTANT_COLUMN_TOL {
                sds[j] = 1.0; // placeholder; column is zeroed out
                dropped.push(j);
            } else {
                sds[j] = sd;
            }
        }
        Standardization { means, sds, dropped }
    }

    /// Standardize with these statistics (train statistics may be applied to
    /// held-out rows). Dropped columns become identically zero.
    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        let is_dropped = self.dropped_mask(x.ncols());
        for j in 0..x.ncols() {
            let (m, s) = (self.means[j], self.sds[j]);
            if is_dropped[j] {
                out.column_mut(j).fill(0.0);
            } else {
                out.column_mut(j).mapv_inplace(|v| (v - m) / s);
            }
        }
        out
    }

    /// Invert the transform (round-trips to the raw matrix).
    pub fn inverse_transform(&self, z: &Array2<f64>, original: Option<&Array2<f64>>) -> Array2<f64> {
        let mut out = z.clone();
        let is_dropped = self.dropped_mask(z.ncols());
        for j in 0..z.ncols() {
            let (m, s) = (self.means[j], self.sds[j]);
            if is_dropped[j] {
                // constant column: restore from the original if available
                if let Some(orig) = original {
                    out.column_mut(j).assign(&orig.column(j));
                } else {
                    out.column_mut(j).fill(m);
                }
            } else {
                out.column_mut(j).mapv_inplace(|v| v * s + m);
            }
        }
        out
    }

    fn dropped_mask(&self, p: usize) -> Vec<bool> {
        let mut mask = vec![false; p];
        for &j in &self.dropped {
            mask[j] = true;
        }
        mask
    }

    /// Map standardized-scale coefficients back to the original scale.
    /// Returns (intercept, theta) on the raw-covariate scale.
    pub fn destandardize_coefficients(
        &self,
        intercept_std: f64,
        theta_std: &[f64],
    ) -> (f64, Vec<f64>) {
        let mut intercept = intercept_std;
        let mut theta = vec![0.0; theta_std.len()];
        let is_dropped = self.dropped_mask(theta_std.len());
        for j in 0..theta_std.len() {
            if is_dropped[j] {
                continue;
            }
            theta[j] = theta_std[j] / self.sds[j];
            intercept -= theta_std[j] * self.means[j] / self.sds[j];
        }
        (intercept, theta)
    }
}

/// Raw (unstandardized) stacked feature rows plus the outcome vector.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub subject_ids: Vec<String>,
    pub meta: FeatureMeta,
    pub total_cap_count: u64,
}

impl FeatureMatrix {
    pub fn from_tensors(features: &[FeatureTensor], outcomes: &[f64]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Degenerate("no feature tensors to assemble".into()));
        }
        if features.len() != outcomes.len() {
            return Err(Error::Shape(format!(
                "{} feature tensors but {} outcomes",
                features.len(),
                outcomes.len()
            )));
        }
        let meta = features[0].meta.clone();
        let p = features[0].dim();
        let mut x = Array2::zeros((features.len(), p));
        let mut total_cap_count = 0;
        let mut subject_ids = Vec::with_capacity(features.len());
        for (i, ft) in features.iter().enumerate() {
            if ft.meta != meta {
                return Err(Error::Config(format!(
                    "subject {} has mismatched feature metadata",
                    ft.subject_id
                )));
            }
            let row = ft.to_dense();
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite feature for subject {} at column {j}",
                        ft.subject_id
                    )));
                }
                x[(i, j)] = v;
            }
            total_cap_count += ft.cap_count;
            subject_ids.push(ft.subject_id.clone());
        }
        Ok(FeatureMatrix {
            x,
            y: Array1::from(outcomes.to_vec()),
            subject_ids,
            meta,
            total_cap_count,
        })
    }
}

/// Standardized design ready for penalized fitting.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub standardization: Standardization,
    pub subject_ids: Vec<String>,
    pub meta: FeatureMeta,
    pub total_cap_count: u64,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Stack feature tensors, standardize columns, attach the outcome.
pub fn assemble_design(features: &[FeatureTensor], outcomes: &[f64]) -> Result<DesignMatrix> {
    let raw = FeatureMatrix::from_tensors(features, outcomes)?;
    Ok(standardize(&raw))
}

/// Standardize a raw feature matrix using its own statistics.
pub fn standardize(raw: &FeatureMatrix) -> DesignMatrix {
    let standardization = Standardization::fit(&raw.x);
    let x = standardization.transform(&raw.x);
    DesignMatrix {
        x,
        y: raw.y.clone(),
        standardization,
        subject_ids: raw.subject_ids.clone(),
        meta: raw.meta.clone(),
        total_cap_count: raw.total_cap_count,
    }
}
