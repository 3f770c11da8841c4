//! Generalized odds evaluation from empirical distributions.
//!
//! h1(u) = S(u)/F(u), h2(u1,u2) = S(u2)/F(u1) and the 4-index form
//! h4(u1,u2,u3,u4) = |F(u4)-F(u3)| / |F(u2)-F(u1)|. Every quotient is guarded
//! by a denominator floor and a pointwise cap; capped evaluations are counted
//! on the evaluator for diagnostics.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::empdist::EmpiricalDistribution;

/// Denominator floor and pointwise cap for odds quotients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsPolicy {
    pub denom_floor: f64,
    pub cap: f64,
}

impl Default for OddsPolicy {
    fn default() -> Self {
        OddsPolicy { denom_floor: 1e-12, cap: 1e3 }
    }
}

impl OddsPolicy {
    pub fn new(denom_floor: f64, cap: f64) -> crate::error::Result<Self> {
        if !(denom_floor > 0.0) {
            return Err(crate::error::Error::Config(format!(
                "denom_floor must be positive, got {denom_floor}"
            )));
        }
        if !(cap > 1.0) {
            return Err(crate::error::Error::Config(format!(
                "cap must exceed 1, got {cap}"
            )));
        }
        Ok(OddsPolicy { denom_floor, cap })
    }
}

/// Grid location for CDF lookups in h4. `Origin` is the virtual point below
/// the first cell where F = 0, needed for the PMF special case
/// h4(0, D, k, k-1) = p(k) even though the first grid cell carries mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridBound {
    Origin,
    Point(usize),
}

/// Odds evaluator over one immutable distribution.
///
/// `cap_count` is the number of evaluations where the raw quotient exceeded
/// the cap or the denominator fell below the floor. Workers evaluating in
/// parallel should each hold their own evaluator and merge counts afterwards.
pub struct OddsEvaluator<'a> {
    dist: &'a EmpiricalDistribution,
    policy: OddsPolicy,
    cap_count: u64,
}

impl<'a> OddsEvaluator<'a> {
    pub fn new(dist: &'a EmpiricalDistribution, policy: OddsPolicy) -> Self {
        OddsEvaluator { dist, policy, cap_count: 0 }
    }

    pub fn policy(&self) -> OddsPolicy {
        self.policy
    }

    pub fn cap_count(&self) -> u64 {
        self.cap_count
    }

    pub fn cdf_at(&self, bound: GridBound) -> f64 {
        match bound {
            GridBound::Origin => 0.0,
            GridBound::Point(g) => self.dist.cdf[g],
        }
    }

    fn capped_quotient(&mut self, numer: f64, denom: f64) -> f64 {
        if denom < self.policy.denom_floor {
            self.cap_count += 1;
            let raw = numer / self.policy.denom_floor;
            return raw.min(self.policy.cap);
        }
        let raw = numer / denom;
        if raw > self.policy.cap {
            self.cap_count += 1;
            return self.policy.cap;
        }
        raw
    }

    /// Odds of survival h1(u_g) = S(u_g)/F(u_g).
    pub fn odds1(&mut self, g: usize) -> f64 {
        let s = self.dist.survival[g];
        let f = self.dist.cdf[g];
        self.capped_quotient(s, f)
    }

    /// h2(u_{g1}, u_{g2}) = S(u_{g2})/F(u_{g1}).
    pub fn odds2(&mut self, g1: usize, g2: usize) -> f64 {
        let s = self.dist.survival[g2];
        let f = self.dist.cdf[g1];
        self.capped_quotient(s, f)
    }

    /// h4(u1,u2,u3,u4) = |F(u4)-F(u3)| / |F(u2)-F(u1)|.
    pub fn odds4(&mut self, b1: GridBound, b2: GridBound, b3: GridBound, b4: GridBound) -> f64 {
        let numer = (self.cdf_at(b4) - self.cdf_at(b3)).abs();
        let denom = (self.cdf_at(b2) - self.cdf_at(b1)).abs();
        self.capped_quotient(numer, denom)
    }

    /// 1-index vector over the whole grid.
    pub fn odds1_vector(&mut self) -> Vec<f64> {
        (0..self.dist.grid.len()).map(|g| self.odds1(g)).collect()
    }

    /// Full 2-index surface H[g1, g2] = h2(u_{g1}, u_{g2}).
    pub fn odds2_surface(&mut self) -> Array2<f64> {
        let g_count = self.dist.grid.len();
        Array2::from_shape_fn((g_count, g_count), |(g1, g2)| {
            let s = self.dist.survival[g2];
            let f = self.dist.cdf[g1];
            if f < self.policy.denom_floor {
                self.cap_count += 1;
                (s / self.policy.denom_floor).min(self.policy.cap)
            } else {
                let raw = s / f;
                if raw > self.policy.cap {
                    self.cap_count += 1;
                    self.policy.cap
                } else {
                    raw
                }
            }
        })
    }

    /// Residual-life surface: entry (t, u) = h4(t, D, t, t+u) with t+u clamped
    /// at the top grid point. Shape (G+1) x (G+1): row 0 is the virtual origin
    /// (where the row equals the CDF itself), row t >= 1 is grid point t-1;
    /// column u is an offset of u grid cells, so column 0 is the empty interval
    /// (value 0). Rows are nondecreasing in u and end at 1 wherever S at the
    /// row's base point is above the floor.
    pub fn residual_life_surface(&mut self) -> Array2<f64> {
        let g_count = self.dist.grid.len();
        let top = GridBound::Point(g_count - 1);
        let mut out = Array2::zeros((g_count + 1, g_count + 1));
        for t in 0..=g_count {
            let base = if t == 0 { GridBound::Origin } else { GridBound::Point(t - 1) };
            for u in 0..=g_count {
                out[(t, u)] = if u == 0 {
                    0.0
                } else {
                    // offset of u cells from the base, clamped to the top point
                    let target = (t + u).min(g_count) - 1;
                    self.odds4(base, top, base, GridBound::Point(target))
                };
            }
        }
        out
    }

    /// Rank-1 factorization of the 4-index surface:
    /// A[g1,g2] = min(cap, 1/max(|F(u2)-F(u1)|, floor)) and
    /// C[g3,g4] = |F(u4)-F(u3)|, so uncapped entries satisfy
    /// A[g1,g2] * C[g3,g4] = h4(g1,g2,g3,g4).
    pub fn factor_odds4(&mut self) -> (Array2<f64>, Array2<f64>) {
        let g_count = self.dist.grid.len();
        let cdf = &self.dist.cdf;
        let mut a = Array2::zeros((g_count, g_count));
        for g1 in 0..g_count {
            for g2 in 0..g_count {
                let denom = (cdf[g2] - cdf[g1]).abs();
                if denom < self.policy.denom_floor {
                    self.cap_count += 1;
                    a[(g1, g2)] = (1.0 / self.policy.denom_floor).min(self.policy.cap);
                } else {
                    let raw = 1.0 / denom;
                    if raw > self.policy.cap {
                        self.cap_count += 1;
                        a[(g1, g2)] = self.policy.cap;
                    } else {
                        a[(g1, g2)] = raw;
                    }
                }
            }
        }
        let c = Array2::from_shape_fn((g_count, g_count), |(g3, g4)| (cdf[g4] - cdf[g3]).abs());
        (a, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empdist::{build_empirical_distribution, BuildOptions, Grid};
    use crate::ingest::ObservationSet;
    use rand::{Rng, SeedableRng};

    fn random_dist(
        rng: &mut impl Rng,
        n_points: usize,
        d_max: f64,
    ) -> EmpiricalDistribution {
        let n = rng.gen_range(5..80);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..d_max)).collect();
        let obs = ObservationSet { subject_id: "r".into(), values, outcome: 0.0 };
        let grid = Grid::new(n_points, d_max).unwrap();
        build_empirical_distribution(&obs, &grid, BuildOptions::default()).unwrap()
    }

    #[test]
    fn odds1_examples() {
        let grid = Grid::new(2, 2.0).unwrap();
        let obs = ObservationSet {
            subject_id: "t".into(),
            values: vec![0.5, 1.5],
            outcome: 0.0,
        };
        let d = build_empirical_distribution(&obs, &grid, BuildOptions::default()).unwrap();
        let mut ev = OddsEvaluator::new(&d, OddsPolicy::default());
        // F(u_1) = 0.5 -> even odds
        assert_eq!(ev.odds1(0), 1.0);
    }

    #[test]
    fn odds1_formula_at_f_017() {
        // (1 - 0.17) / 0.17; the formula is authoritative
        let v: f64 = (1.0 - 0.17) / 0.17;
        assert!((v - 4.882).abs() < 1e-3);
    }

    #[test]
    fn odds1_caps_when_f_is_zero() {
        let grid = Grid::new(4, 4.0).unwrap();
        let obs = ObservationSet { subject_id: "t".into(), values: vec![3.9], outcome: 0.0 };
        let d = build_empirical_distribution(&obs, &grid, BuildOptions::default()).unwrap();
        let policy = OddsPolicy::default();
        let mut ev = OddsEvaluator::new(&d, policy);
        assert_eq!(ev.odds1(0), policy.cap);
        assert_eq!(ev.cap_count(), 1);
    }

    #[test]
    fn diagonal_and_boundary_identities() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let d = random_dist(&mut rng, 20, 9.6);
            let g_count = d.grid.len();
            let policy = OddsPolicy::default();
            for g in 0..g_count {
                let mut ev = OddsEvaluator::new(&d, policy);
                let h2 = ev.odds2(g, g);
                let mut ev2 = OddsEvaluator::new(&d, policy);
                let h1 = ev2.odds1(g);
                assert_eq!(h2, h1, "diagonal identity at g={g}");
                // h2(D, u) = S(u): F(D) = 1
                let mut ev3 = OddsEvaluator::new(&d, policy);
                assert_eq!(ev3.odds2(g_count - 1, g), d.survival[g]);
                // h2(u, D) = 0 whenever F(u) >= floor
                if d.cdf[g] >= policy.denom_floor {
                    let mut ev4 = OddsEvaluator::new(&d, policy);
                    assert_eq!(ev4.odds2(g, g_count - 1), 0.0);
                }
            }
        }
    }

    #[test]
    fn odds4_reduction_identities() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let policy = OddsPolicy::default();
        for _ in 0..50 {
            let d = random_dist(&mut rng, 25, 9.6);
            let g_count = d.grid.len();
            let top = GridBound::Point(g_count - 1);
            let mut ev = OddsEvaluator::new(&d, policy);
            for k in 0..g_count {
                // pmf: h4(0, D, k-1, k) = p(k), denominator |F(D)-F(0)| = 1
                let below = if k == 0 { GridBound::Origin } else { GridBound::Point(k - 1) };
                let pmf = ev.odds4(GridBound::Origin, top, below, GridBound::Point(k));
                assert!((pmf - d.pmf[k]).abs() < 1e-14, "pmf identity at k={k}");
                // hazard: h4(k, D, k-1, k) = p(k)/S(k) where uncapped
                if d.survival[k] >= policy.denom_floor
                    && d.pmf[k] / d.survival[k] <= policy.cap
                {
                    let before = ev.cap_count();
                    let haz = ev.odds4(GridBound::Point(k), top, below, GridBound::Point(k));
                    assert_eq!(ev.cap_count(), before);
                    assert!((haz - d.pmf[k] / d.survival[k]).abs() < 1e-14);
                }
            }
            // residual life: h4(t, D, t, t+u) = (F(t+u)-F(t))/(1-F(t))
            for _ in 0..20 {
                let t = rng.gen_range(0..g_count);
                let u = rng.gen_range(0..g_count - t);
                if d.survival[t] >= policy.denom_floor {
                    let expect = (d.cdf[t + u] - d.cdf[t]) / (1.0 - d.cdf[t]);
                    if expect <= policy.cap {
                        let got = ev.odds4(
                            GridBound::Point(t),
                            top,
                            GridBound::Point(t),
                            GridBound::Point(t + u),
                        );
                        assert!((got - expect).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn identical_intervals_give_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let d = random_dist(&mut rng, 20, 9.6);
        let policy = OddsPolicy::default();
        let mut ev = OddsEvaluator::new(&d, policy);
        for _ in 0..50 {
            let g1 = rng.gen_range(0..20);
            let g2 = rng.gen_range(0..20);
            if (d.cdf[g2] - d.cdf[g1]).abs() >= policy.denom_floor {
                let v = ev.odds4(
                    GridBound::Point(g1),
                    GridBound::Point(g2),
                    GridBound::Point(g1),
                    GridBound::Point(g2),
                );
                assert!((v - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn odds1_monotone_where_uncapped() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let d = random_dist(&mut rng, 30, 9.6);
            let policy = OddsPolicy::default();
            let mut ev = OddsEvaluator::new(&d, policy);
            let values = ev.odds1_vector();
            if ev.cap_count() == 0 {
                for w in values.windows(2) {
                    assert!(w[1] <= w[0] + 1e-15);
                }
            }
        }
    }

    #[test]
    fn residual_life_surface_properties() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let d = random_dist(&mut rng, 20, 9.6);
        let policy = OddsPolicy::default();
        let mut ev = OddsEvaluator::new(&d, policy);
        let surf = ev.residual_life_surface();
        let g_count = d.grid.len();
        // origin row equals the CDF (shifted by the offset-0 column)
        assert_eq!(surf[(0, 0)], 0.0);
        for u in 1..=g_count {
            assert!((surf[(0, u)] - d.cdf[u - 1]).abs() < 1e-15);
        }
        for t in 1..=g_count {
            let f_base = d.cdf[t - 1];
            if 1.0 - f_base < policy.denom_floor {
                continue;
            }
            assert_eq!(surf[(t, 0)], 0.0);
            for u in 1..=g_count {
                assert!(surf[(t, u)] + 1e-15 >= surf[(t, u - 1)]);
                // brute-force oracle
                let target = (t + u).min(g_count) - 1;
                let expect = (d.cdf[target] - f_base) / (1.0 - f_base);
                assert!((surf[(t, u)] - expect.min(policy.cap)).abs() < 1e-14);
            }
            assert!((surf[(t, g_count)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn factorization_matrices_are_symmetric_with_zero_c_diagonal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let d = random_dist(&mut rng, 15, 9.6);
        let mut ev = OddsEvaluator::new(&d, OddsPolicy::default());
        let (a, c) = ev.factor_odds4();
        for g in 0..15 {
            assert_eq!(c[(g, g)], 0.0);
            for h in 0..15 {
                assert_eq!(a[(g, h)], a[(h, g)]);
                assert_eq!(c[(g, h)], c[(h, g)]);
            }
        }
    }

    #[test]
    fn factorization_reproduces_odds4_on_exhaustive_small_grid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let d = random_dist(&mut rng, 10, 9.6);
        let policy = OddsPolicy::default();
        let mut ev = OddsEvaluator::new(&d, policy);
        let (a, c) = ev.factor_odds4();
        for g1 in 0..10 {
            for g2 in 0..10 {
                let denom = (d.cdf[g2] - d.cdf[g1]).abs();
                if denom < policy.denom_floor || 1.0 / denom > policy.cap {
                    continue; // capped entries deviate by design
                }
                for g3 in 0..10 {
                    for g4 in 0..10 {
                        let direct = ev.odds4(
                            GridBound::Point(g1),
                            GridBound::Point(g2),
                            GridBound::Point(g3),
                            GridBound::Point(g4),
                        );
                        if direct < policy.cap {
                            let product = a[(g1, g2)] * c[(g3, g4)];
                            assert!(
                                (product - direct).abs() < 1e-14,
                                "mismatch at ({g1},{g2},{g3},{g4})"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cap_count_tracks_every_guarded_evaluation() {
        let grid = Grid::new(4, 4.0).unwrap();
        let obs = ObservationSet { subject_id: "t".into(), values: vec![0.1], outcome: 0.0 };
        let d = build_empirical_distribution(&obs, &grid, BuildOptions::default()).unwrap();
        // F = 1 everywhere, S = 0 everywhere: odds1 never capped
        let mut ev = OddsEvaluator::new(&d, OddsPolicy::default());
        let _ = ev.odds1_vector();
        assert_eq!(ev.cap_count(), 0);
        // |F(u2)-F(u1)| = 0 everywhere off the support step: A mostly capped
        let mut ev2 = OddsEvaluator::new(&d, OddsPolicy::default());
        let (_, _) = ev2.factor_odds4();
        assert_eq!(ev2.cap_count(), 16); // all pairs have |ΔF| = 0
    }
}
