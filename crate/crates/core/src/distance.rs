//! Empirical Wasserstein-1 distances between equal-size sample clouds.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::stream_rng;

/// Largest cloud accepted by the exact matching solver.
pub const EXACT_CAP: usize = 2000;

/// Default number of projections for the sliced estimator.
pub const SLICED_PROJECTIONS: usize = 64;

/// `count × dim` samples with the seed that produced them, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    samples: DMatrix<f64>,
    seed: Option<u64>,
}

impl SampleBatch {
    pub fn new(samples: DMatrix<f64>, seed: Option<u64>) -> Result<Self> {
        let dim = samples.ncols();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidParameter {
                name: "dim",
                value: dim as f64,
            });
        }
        if samples.nrows() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                found: samples.nrows(),
            });
        }
        Ok(Self { samples, seed })
    }

    pub fn from_values(values: &[f64], seed: Option<u64>) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(values.len(), 1, values), seed)
    }

    pub fn from_pairs(xs: &[f64], ys: &[f64], seed: Option<u64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::CountMismatch {
                left: xs.len(),
                right: ys.len(),
            });
        }
        let mut m = DMatrix::zeros(xs.len(), 2);
        m.column_mut(0).copy_from_slice(xs);
        m.column_mut(1).copy_from_slice(ys);
        Self::new(m, seed)
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn count(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    fn point(&self, i: usize) -> (f64, f64) {
        let y = if self.dim() == 2 { self.samples[(i, 1)] } else { 0.0 };
        (self.samples[(i, 0)], y)
    }
}

fn check_counts(a: &SampleBatch, b: &SampleBatch) -> Result<()> {
    if a.count() != b.count() {
        return Err(Error::CountMismatch {
            left: a.count(),
            right: b.count(),
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Mean absolute difference of the sorted samples.
pub fn w1_sorted(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::CountMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

pub fn w1_empirical_1d(a: &SampleBatch, b: &SampleBatch) -> Result<f64> {
    check_counts(a, b)?;
    if a.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: a.dim(),
        });
    }
    w1_sorted(a.samples.as_slice(), b.samples.as_slice())
}

/// Estimator used by [`w1_empirical_2d`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum W1Method {
    /// Minimum-cost perfect matching.
    Exact,
    /// Mean 1D distance over random projections, scaled by `π/2` so that
    /// translated clouds are at their exact distance.
    Sliced { projections: usize, seed: u64 },
}

impl W1Method {
    pub fn sliced(seed: u64) -> Self {
        Self::Sliced {
            projections: SLICED_PROJECTIONS,
            seed,
        }
    }
}

pub fn w1_empirical_2d(a: &SampleBatch, b: &SampleBatch, method: W1Method) -> Result<f64> {
    check_counts(a, b)?;
    if a.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: a.dim(),
        });
    }
    match method {
        W1Method::Exact => {
            if a.count() > EXACT_CAP {
                return Err(Error::TooManyPoints {
                    count: a.count(),
                    cap: EXACT_CAP,
                });
            }
            let pa: Vec<_> = (0..a.count()).map(|i| a.point(i)).collect();
            let pb: Vec<_> = (0..b.count()).map(|i| b.point(i)).collect();
            let cost = |i: usize, j: usize| ((pa[i].0 - pb[j].0).powi(2) + (pa[i].1 - pb[j].1).powi(2)).sqrt();
            let assignment = min_cost_assignment(a.count(), cost);
            let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
            Ok(total / a.count() as f64)
        }
        W1Method::Sliced { projections, seed } => {
            if projections == 0 {
                return Err(Error::InvalidParameter {
                    name: "projections",
                    value: 0.0,
                });
            }
            let mut rng = stream_rng(seed, 0);
            let angles: Vec<f64> = (0..projections)
                .map(|_| rng.random_range(0.0..std::f64::consts::PI))
                .collect();
            let project = |s: &DMatrix<f64>, th: f64| -> Vec<f64> {
                let (c, sn) = (th.cos(), th.sin());
                (0..s.nrows()).map(|i| c * s[(i, 0)] + sn * s[(i, 1)]).collect()
            };
            let sum: f64 = angles
                .par_iter()
                .map(|&th| w1_sorted(&project(&a.samples, th), &project(&b.samples, th)).expect("equal counts"))
                .sum();
            Ok(std::f64::consts::FRAC_PI_2 * sum / projections as f64)
        }
    }
}

/// Shortest augmenting path assignment with dual potentials.
///
/// Returns `assignment[row] = column` minimizing the summed cost of a dense
/// `n × n` problem whose entries are produced on demand.
pub fn min_cost_assignment<C: Fn(usize, usize) -> f64>(n: usize, cost: C) -> Vec<usize> {
    // 1-based arrays, column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|m| *m = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian_cloud(n: usize, seed: u64, shift: f64) -> SampleBatch {
        let mut rng = stream_rng(seed, 0);
        let v: Vec<f64> = (0..2 * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut m = DMatrix::from_row_slice(n, 2, &v);
        m.column_mut(0).add_scalar_mut(shift);
        SampleBatch::new(m, Some(seed)).unwrap()
    }

    #[test]
    fn one_dimensional_examples() {
        let a = SampleBatch::from_values(&[1.0, 2.0, 3.0], None).unwrap();
        let b = SampleBatch::from_values(&[2.0, 3.0, 5.0], None).unwrap();
        assert!((w1_empirical_1d(&a, &b).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(w1_empirical_1d(&a, &a).unwrap(), 0.0);
        let c = SampleBatch::from_values(&[3.5, 1.5, 2.5], None).unwrap();
        assert!((w1_empirical_1d(&a, &c).unwrap() - 0.5).abs() < 1e-15);
        let d = SampleBatch::from_values(&[1.0, 2.0], None).unwrap();
        assert!(matches!(w1_empirical_1d(&a, &d), Err(Error::CountMismatch { .. })));
        assert!(SampleBatch::from_values(&[1.0], None).is_err());
    }

    #[test]
    fn three_point_matching() {
        let a = SampleBatch::from_pairs(&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], None).unwrap();
        let b = SampleBatch::from_pairs(&[1.0, 2.0, 0.0], &[1.0, 0.0, 2.0], None).unwrap();
        let want = (2f64.sqrt() + 2.0) / 3.0;
        assert!((w1_empirical_2d(&a, &b, W1Method::Exact).unwrap() - want).abs() < 1e-14);
        assert_eq!(w1_empirical_2d(&a, &a, W1Method::Exact).unwrap(), 0.0);
    }

    #[test]
    fn matching_against_brute_force() {
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = vec![];
            for p in perms(n - 1) {
                for k in 0..n {
                    let mut q = p.clone();
                    q.insert(k, n - 1);
                    out.push(q);
                }
            }
            out
        }
        for seed in 0..20 {
            let a = gaussian_cloud(6, seed, 0.0);
            let b = gaussian_cloud(6, seed + 100, 0.5);
            let brute = perms(6)
                .iter()
                .map(|p| {
                    (0..6)
                        .map(|i| {
                            let (x, y) = (a.point(i), b.point(p[i]));
                            ((x.0 - y.0).powi(2) + (x.1 - y.1).powi(2)).sqrt()
                        })
                        .sum::<f64>()
                        / 6.0
                })
                .fold(f64::INFINITY, f64::min);
            let exact = w1_empirical_2d(&a, &b, W1Method::Exact).unwrap();
            assert!((exact - brute).abs() < 1e-12, "{exact} {brute}");
        }
    }

    #[test]
    fn sliced_tracks_exact() {
        let a = gaussian_cloud(64, 3, 0.0);
        let b = gaussian_cloud(64, 4, 2.0);
        let e = w1_empirical_2d(&a, &b, W1Method::Exact).unwrap();
        let s = w1_empirical_2d(&a, &b, W1Method::sliced(5)).unwrap();
        assert!((s / e - 1.0).abs() < 0.2, "{s} {e}");
        let mut shifted = a.samples().clone();
        shifted.column_mut(0).add_scalar_mut(1.5);
        let d = SampleBatch::new(shifted, None).unwrap();
        assert!((w1_empirical_2d(&a, &d, W1Method::sliced(1)).unwrap() / 1.5 - 1.0).abs() < 0.15);
    }

    #[test]
    fn exact_cap_enforced() {
        let a = gaussian_cloud(EXACT_CAP + 1, 1, 0.0);
        assert!(matches!(
            w1_empirical_2d(&a, &a, W1Method::Exact),
            Err(Error::TooManyPoints { .. })
        ));
        assert!(w1_empirical_2d(&a, &a, W1Method::sliced(1)).unwrap() == 0.0);
    }

    #[test]
    fn self_distance_rate_in_one_dimension() {
        let mut ns = vec![];
        let mut ds = vec![];
        for (k, n) in [250usize, 1000, 4000, 16000, 64000].into_iter().enumerate() {
            let mut acc = 0.0;
            let reps = 20;
            for r in 0..reps {
                let mut ra = stream_rng(7, (k * 100 + r) as u64);
                let mut rb = stream_rng(8, (k * 100 + r) as u64);
                let a: Vec<f64> = (0..n).map(|_| ra.sample(StandardNormal)).collect();
                let b: Vec<f64> = (0..n).map(|_| rb.sample(StandardNormal)).collect();
                acc += w1_sorted(&a, &b).unwrap();
            }
            ns.push((n as f64).ln());
            ds.push((acc / reps as f64).ln());
        }
        let mx = ns.iter().sum::<f64>() / ns.len() as f64;
        let my = ds.iter().sum::<f64>() / ds.len() as f64;
        let slope = ns.iter().zip(&ds).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / ns.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope + 0.5).abs() < 0.15, "{slope}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn metric_axioms(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000, shift in -1.0f64..1.0) {
            let a = gaussian_cloud(30, s1, 0.0);
            let b = gaussian_cloud(30, s2 + 1000, shift);
            let c = gaussian_cloud(30, s3 + 2000, -shift);
            let ab = w1_empirical_2d(&a, &b, W1Method::Exact).unwrap();
            let ba = w1_empirical_2d(&b, &a, W1Method::Exact).unwrap();
            let bc = w1_empirical_2d(&b, &c, W1Method::Exact).unwrap();
            let ac = w1_empirical_2d(&a, &c, W1Method::Exact).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn translation_in_one_dimension(v in prop::collection::vec(-5.0f64..5.0, 2..50), c in -3.0f64..3.0) {
            let a = SampleBatch::from_values(&v, None).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let b = SampleBatch::from_values(&shifted, None).unwrap();
            prop_assert!((w1_empirical_1d(&a, &b).unwrap() - c.abs()).abs() < 1e-12);
        }
    }
}
