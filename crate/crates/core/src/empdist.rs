//! Subject-specific empirical distributions on a shared grid over [0, D].
//!
//! The grid partitions [0, D] into `n_points` half-open cells ((g-1)Δ, gΔ]
//! with cell 1 = [0, Δ], Δ = D / n_points. Grid point u_g = gΔ is the right
//! endpoint of cell g, so F(u_g) = P{X <= u_g} is exact at grid points.
//! Mass at exactly 0 lands in the first cell; observations above D are clamped
//! into the top cell and counted in `n_clamped`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ObservationSet;

/// Shared evaluation grid over [0, d_max].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    d_max: f64,
    n_points: usize,
    points: Vec<f64>,
    cell_width: f64,
}

impl Grid {
    pub fn new(n_points: usize, d_max: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::Config(format!("grid needs >= 2 points, got {n_points}")));
        }
        if !(d_max > 0.0) {
            return Err(Error::Config(format!("d_max must be positive, got {d_max}")));
        }
        let cell_width = d_max / n_points as f64;
        let points = (1..=n_points).map(|g| g as f64 * cell_width).collect();
        Ok(Grid { d_max, n_points, points, cell_width })
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, g: usize) -> f64 {
        self.points[g]
    }

    /// 0-based cell index for a value in [0, d_max]; values above d_max clamp
    /// into the top cell.
    pub fn cell_of(&self, x: f64) -> usize {
        if x <= self.cell_width {
            return 0;
        }
        let g = (x / self.cell_width).ceil() as usize;
        g.min(self.n_points) - 1
    }
}

/// Per-subject PMF/CDF/survival on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub grid: Grid,
    pub pmf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub survival: Vec<f64>,
    /// Number of observations the distribution was built from (m_i).
    pub n_obs: usize,
    /// Observations above d_max that were clamped into the top cell.
    pub n_clamped: usize,
}

/// Options for [`build_empirical_distribution`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Drop observations exactly equal to 0 before binning (the alternative
    /// reading of the discrete-CDF convention F(0) = 0).
    pub drop_zeros: bool,
}

/// Bin one subject's observations onto the grid.
///
/// p(u_g) = (#observations in cell g) / m; F and S by exact cumulative counts,
/// so F(u_G) = 1 holds exactly.
pub fn build_empirical_distribution(
    obs: &ObservationSet,
    grid: &Grid,
    options: BuildOptions,
) -> Result<EmpiricalDistribution> {
    let values: Vec<f64> = if options.drop_zeros {
        obs.values.iter().copied().filter(|&v| v != 0.0).collect()
    } else {
        obs.values.clone()
    };
    if values.is_empty() {
        return Err(Error::Degenerate(format!(
            "subject {} has no observations to bin",
            obs.subject_id
        )));
    }
    let g_count = grid.len();
    let mut counts = vec![0u64; g_count];
    let mut n_clamped = 0usize;
    for &v in &values {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Data(format!(
                "subject {}: observation {v} is not a finite nonnegative value",
                obs.subject_id
            )));
        }
        if v > grid.d_max() {
            n_clamped += 1;
        }
        counts[grid.cell_of(v)] += 1;
    }
    let m = values.len() as f64;
    let pmf: Vec<f64> = counts.iter().map(|&c| c as f64 / m).collect();
    // cumulative integer counts keep F(u_G) = 1 exact
    let mut cum = 0u64;
    let mut cdf = Vec::with_capacity(g_count);
    for &c in &counts {
        cum += c;
        cdf.push(cum as f64 / m);
    }
    let survival = cdf.iter().map(|&f| 1.0 - f).collect();
    Ok(EmpiricalDistribution {
        grid: grid.clone(),
        pmf,
        cdf,
        survival,
        n_obs: values.len(),
        n_clamped,
    })
}

impl EmpiricalDistribution {
    /// Discrete hazard p(u_g) / S(u_g), with S taken at the same index.
    ///
    /// Returns the cap value when S(u_g) falls below the policy's denominator
    /// floor; the cap is recorded on the evaluator's counter by callers that
    /// track diagnostics (see the odds module).
    pub fn hazard(&self, g: usize, policy: &crate::odds::OddsPolicy) -> f64 {
        let p = self.pmf[g];
        let s = self.survival[g];
        if s < policy.denom_floor {
            return policy.cap;
        }
        (p / s).min(policy.cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odds::OddsPolicy;

    fn obs(values: Vec<f64>) -> ObservationSet {
        ObservationSet { subject_id: "t".into(), values, outcome: 0.0 }
    }

    fn dist(values: Vec<f64>, n_points: usize, d_max: f64) -> EmpiricalDistribution {
        let grid = Grid::new(n_points, d_max).unwrap();
        build_empirical_distribution(&obs(values), &grid, BuildOptions::default()).unwrap()
    }

    #[test]
    fn point_mass_at_zero() {
        let d = dist(vec![0.0; 10], 50, 9.6);
        assert_eq!(d.pmf[0], 1.0);
        assert!(d.cdf.iter().all(|&f| f == 1.0));
        assert!(d.survival.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn binning_example_from_direct_oracle() {
        // {0.1, 5.0}, G=50, D=9.6 => Δ=0.192, cells 1 and ceil(5.0/0.192)=27
        let d = dist(vec![0.1, 5.0], 50, 9.6);
        assert_eq!(d.pmf[0], 0.5);
        assert_eq!(d.pmf[26], 0.5);
        assert_eq!(d.pmf.iter().filter(|&&p| p > 0.0).count(), 2);
    }

    #[test]
    fn cdf_ends_at_one_and_prefix_sums_hold() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..200);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..12.0)).collect();
            let d = dist(values, 50, 9.6);
            assert_eq!(*d.cdf.last().unwrap(), 1.0);
            let total: f64 = d.pmf.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let mut prefix = 0.0;
            for g in 0..d.grid.len() {
                prefix += d.pmf[g];
                assert!((d.cdf[g] - prefix).abs() < 1e-12);
                assert!((d.survival[g] - (1.0 - d.cdf[g])).abs() < 1e-15);
                if g > 0 {
                    assert!(d.cdf[g] >= d.cdf[g - 1]);
                }
            }
        }
    }

    #[test]
    fn clamping_keeps_mass_normalized() {
        let d = dist(vec![1.0, 20.0, 50.0], 10, 9.6);
        assert_eq!(d.n_clamped, 2);
        assert!((d.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((d.pmf[9] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn duplicating_observations_leaves_distribution_unchanged() {
        let values = vec![0.3, 1.7, 4.4, 9.0];
        let doubled: Vec<f64> = values.iter().chain(values.iter()).copied().collect();
        let a = dist(values, 50, 9.6);
        let b = dist(doubled, 50, 9.6);
        assert_eq!(a.pmf, b.pmf);
        assert_eq!(a.cdf, b.cdf);
    }

    #[test]
    fn drop_zeros_option() {
        let grid = Grid::new(4, 4.0).unwrap();
        let d = build_empirical_distribution(
            &obs(vec![0.0, 0.0, 3.5]),
            &grid,
            BuildOptions { drop_zeros: true },
        )
        .unwrap();
        assert_eq!(d.n_obs, 1);
        assert_eq!(d.pmf[3], 1.0);
    }

    #[test]
    fn empty_input_is_degenerate() {
        let grid = Grid::new(4, 4.0).unwrap();
        assert!(matches!(
            build_empirical_distribution(&obs(vec![]), &grid, BuildOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn hazard_examples() {
        let policy = OddsPolicy::default();
        // uniform mass over cells 1..4 of a 4-cell grid
        let d = dist(vec![0.5, 1.5, 2.5, 3.5], 4, 4.0);
        assert!((d.hazard(0, &policy) - 0.25 / 0.75).abs() < 1e-15);
        // top cell: S = 0 there, capped
        assert_eq!(d.hazard(3, &policy), policy.cap);
        // p = 0 and S > 0 => 0
        let d2 = dist(vec![0.5, 3.5], 4, 4.0);
        assert_eq!(d2.hazard(1, &policy), 0.0);
        // uncapped hazard matches the brute-force quotient
        for g in 0..3 {
            if d.survival[g] >= policy.denom_floor {
                assert!((d.hazard(g, &policy) - d.pmf[g] / d.survival[g]).abs() < 1e-14);
            }
        }
    }
}
