//! Clamped B-spline basis on [0, d_max] with equally spaced interior knots.
//!
//! Degree q, L interior knots, kappa = L + q + 1 basis functions. Evaluation
//! uses the triangular Cox-de Boor table, so only the q+1 active functions are
//! computed per point. The closed right endpoint is handled by the right-limit
//! convention (last span), keeping the partition of unity at u = d_max.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::empdist::Grid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    degree: usize,
    n_interior: usize,
    d_max: f64,
    knots: Vec<f64>,
}

/// Serializable (q, L, D) triple stamped into results files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub degree: usize,
    pub n_interior: usize,
    pub d_max: f64,
}

impl BSplineBasis {
    pub fn new(degree: usize, n_interior: usize, d_max: f64) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Config("degree must be >= 1".into()));
        }
        if !(d_max > 0.0) {
            return Err(Error::Config(format!("d_max must be positive, got {d_max}")));
        }
        let mut knots = Vec::with_capacity(2 * (degree + 1) + n_interior);
        knots.extend(std::iter::repeat(0.0).take(degree + 1));
        for i in 1..=n_interior {
            knots.push(d_max * i as f64 / (n_interior + 1) as f64);
        }
        knots.extend(std::iter::repeat(d_max).take(degree + 1));
        Ok(BSplineBasis { degree, n_interior, d_max, knots })
    }

    pub fn from_config(cfg: &BasisConfig) -> Result<Self> {
        Self::new(cfg.degree, cfg.n_interior, cfg.d_max)
    }

    pub fn config(&self) -> BasisConfig {
        BasisConfig {
            degree: self.degree,
            n_interior: self.n_interior,
            d_max: self.d_max,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Number of basis functions, kappa = L + q + 1.
    pub fn kappa(&self) -> usize {
        self.n_interior + self.degree + 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Index of the knot span containing u, with the last span claiming the
    /// closed right endpoint.
    fn find_span(&self, u: f64) -> usize {
        let q = self.degree;
        let kappa = self.kappa();
        if u >= self.knots[kappa] {
            return kappa - 1;
        }
        // spans live in knots[q..=kappa]; binary search for knots[s] <= u < knots[s+1]
        let mut lo = q;
        let mut hi = kappa - 1;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.knots[mid] <= u {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Evaluate all kappa basis functions at u; at most q+1 entries are nonzero.
    pub fn eval(&self, u: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.kappa()];
        self.eval_into(u, &mut out)?;
        Ok(out)
    }

    /// Evaluate into a caller-provided kappa-length buffer.
    pub fn eval_into(&self, u: f64, out: &mut [f64]) -> Result<()> {
        if u < 0.0 || u > self.d_max {
            return Err(Error::Domain(format!(
                "u = {u} outside basis domain [0, {}]",
                self.d_max
            )));
        }
        let q = self.degree;
        let span = self.find_span(u);
        // triangular Cox-de Boor table over the active span
        let mut values = vec![0.0; q + 1];
        let mut left = vec![0.0; q + 1];
        let mut right = vec![0.0; q + 1];
        values[0] = 1.0;
        for d in 1..=q {
            left[d] = u - self.knots[span + 1 - d];
            right[d] = self.knots[span + d] - u;
            let mut saved = 0.0;
            for j in 0..d {
                let denom = right[j + 1] + left[d - j];
                let term = if denom != 0.0 { values[j] / denom } else { 0.0 };
                values[j] = saved + right[j + 1] * term;
                saved = left[d - j] * term;
            }
            values[d] = saved;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &v) in values.iter().enumerate() {
            out[span - q + j] = v;
        }
        Ok(())
    }

    /// G x kappa matrix of basis values at the grid points.
    pub fn matrix(&self, grid: &Grid) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((grid.len(), self.kappa()));
        let mut row = vec![0.0; self.kappa()];
        for (g, &u) in grid.points().iter().enumerate() {
            self.eval_into(u, &mut row)?;
            for (k, &v) in row.iter().enumerate() {
                out[(g, k)] = v;
            }
        }
        Ok(out)
    }

    /// Greville abscissae; with these as coefficients the spline reproduces u.
    pub fn greville_abscissae(&self) -> Vec<f64> {
        let q = self.degree;
        (0..self.kappa())
            .map(|k| self.knots[k + 1..=k + q].iter().sum::<f64>() / q as f64)
            .collect()
    }
}
