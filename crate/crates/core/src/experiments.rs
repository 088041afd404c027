//! The two worked examples, rate fitting, and the Monte Carlo pipelines
//! that exercise the bounds against empirical distances.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{cached_constant, d2_bound_chaos, dw_from_d2, BoundReport};
use crate::chaos::{cross_malliavin, gamma_discrepancy, sample_chaos, ChaosElement, ChaosVector, Kernel1, Kernel2};
use crate::distance::{w1_empirical_2d, SampleBatch, W1Method};
use crate::error::{Error, Result};
use crate::gamma_law::GammaNu;
use crate::hilbert::{g_function, h_function, orthonormal_frame};
use crate::stats::{stream_rng, MeanAccumulator, MeanEstimate};
use crate::stein::SteinEvaluator;

/// Default sweep over `n`.
pub const DEFAULT_SWEEP: [usize; 5] = [10, 30, 100, 300, 1000];

/// Default Monte Carlo sample count.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Log-log least-squares fit of `values` against `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub n: Vec<usize>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub residual: f64,
}

/// Least-squares `(slope, intercept, rms residual)` of `ln v` on `ln n`.
/// Needs at least two points.
pub fn log_log_fit(n: &[usize], values: &[f64]) -> Option<(f64, f64, f64)> {
    if n.len() != values.len() || n.len() < 2 || values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = n.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Some((slope, intercept, (rss / m).sqrt()))
}

pub fn fit_rate(n: &[usize], values: &[f64]) -> Result<RateSeries> {
    if n.len() != values.len() {
        return Err(Error::CountMismatch {
            left: n.len(),
            right: values.len(),
        });
    }
    if n.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            found: n.len(),
        });
    }
    if let Some((i, &v)) = values.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositive {
            n: n[i] as f64,
            value: v,
        });
    }
    let (slope, intercept, residual) = log_log_fit(n, values).ok_or(Error::InvalidParameter {
        name: "n",
        value: n[0] as f64,
    })?;
    Ok(RateSeries {
        n: n.to_vec(),
        values: values.to_vec(),
        slope,
        intercept,
        residual,
    })
}

/// Running slopes: entry `k` fits the first `k + 1` points, `None` below two.
pub fn running_slopes(n: &[usize], values: &[f64]) -> Vec<Option<f64>> {
    (1..=n.len())
        .map(|k| log_log_fit(&n[..k], &values[..k]).map(|f| f.0))
        .collect()
}

/// `A_n = (J - I)/(n - 1)` and `e_1 e_1ᵀ` in dimension `n`.
pub fn build_example1(n: usize) -> Result<(Kernel2, Kernel2)> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
        });
    }
    let mut a = DMatrix::from_element(n, n, 1.0 / (n - 1) as f64);
    a.fill_diagonal(0.0);
    Ok((Kernel2::new(a)?, Kernel2::basis_square(0, n)))
}

/// Example 1 in the basis `{e_1, w, complement}` with `w` the normalized sum
/// of `e_2..e_n`. The complement carries the isotropic block `-1/(n-1)`.
pub fn build_example1_reduced(n: usize) -> Result<(Kernel2, Kernel2)> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
        });
    }
    let m = (n - 1) as f64;
    let off = 1.0 / m.sqrt();
    let core = DMatrix::from_row_slice(2, 2, &[0.0, off, off, (m - 1.0) / m]);
    let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    Ok((
        Kernel2::with_tail(core, n - 2, -1.0 / m)?,
        Kernel2::with_tail(g, n - 2, 0.0)?,
    ))
}

/// `8n²/(n-1)³ + 4/(n-1)²`.
pub fn example1_discrepancy(n: usize) -> f64 {
    let (nf, m) = (n as f64, (n - 1) as f64);
    8.0 * nf * nf / (m * m * m) + 4.0 / (m * m)
}

/// Kernels of Example 2 on the joint frame of `h_1..h_n, g_1..g_n`.
#[derive(Debug, Clone)]
pub struct Example2 {
    pub n: usize,
    pub a: f64,
    pub u: Kernel2,
    pub v: Kernel2,
    /// Frame dimension; below `2n` when the generators are dependent.
    pub rank: usize,
}

impl Example2 {
    pub fn rank_deficit(&self) -> usize {
        2 * self.n - self.rank
    }
}

pub fn build_example2(n: usize, a: f64) -> Result<Example2> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
        });
    }
    if !(a > 0.0) {
        return Err(Error::InvalidParameter { name: "a", value: a });
    }
    let mut fs: Vec<_> = (1..=n).map(h_function).collect();
    fs.extend((1..=n).map(|i| g_function(i, a)));
    let frame = orthonormal_frame(&fs);
    let c = frame.coords();
    let scale = 1.0 / (n - 1) as f64;
    let pair_kernel = |cols: nalgebra::DMatrixView<f64>| -> Result<Kernel2> {
        // Σ_{i≠j} c_i c_jᵀ = s sᵀ - C Cᵀ with s the column sum
        let s: DVector<f64> = cols.column_sum();
        let m = (&s * s.transpose() - cols * cols.transpose()) * scale;
        Kernel2::new(m)
    };
    let u = pair_kernel(c.columns(0, n))?;
    let v = pair_kernel(c.columns(n, n))?;
    Ok(Example2 {
        n,
        a,
        u,
        v,
        rank: frame.rank(),
    })
}

/// One point of an example sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub report: BoundReport,
    /// Empirical distance proxy with its standard error.
    pub empirical: Option<MeanEstimate>,
    /// Certified `d_W` bound the proxy is compared against.
    pub dw_bound: Option<f64>,
}

/// Example 1 at each `n`. With `samples > 0` the sorted-sample `W_1`
/// between `U_n` and `F(1)` is estimated alongside.
pub fn example1_sweep(ns: &[usize], samples: usize, seed: u64) -> Result<Vec<SweepPoint>> {
    let c = cached_constant(1.0)?;
    let law = GammaNu::new(1.0)?;
    ns.par_iter()
        .map(|&n| {
            let (u, g) = build_example1_reduced(n)?;
            let ys = ChaosVector::new(vec![g.into()])?;
            let report = d2_bound_chaos(&u, &ys, 1.0, 0.0)?;
            let (empirical, dw_bound) = if samples >= 2 {
                let v = ChaosVector::new(vec![u.clone().into()])?;
                let us = sample_chaos(&v, samples, seed ^ (n as u64).rotate_left(32));
                let zs = law.sample(samples, seed.wrapping_add(n as u64));
                let mut a: Vec<f64> = us.column(0).iter().copied().collect();
                let mut b = zs;
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
                let est = crate::stats::mean_estimate(&diffs);
                let bound = dw_from_d2(1, c * gamma_discrepancy(&u, 1.0).sqrt())?;
                (Some(est), Some(bound))
            } else {
                (None, None)
            };
            Ok(SweepPoint {
                n,
                report,
                empirical,
                dw_bound,
            })
        })
        .collect()
}

/// Example 2 at each `n`: the chaos bound for `(U_n, V_n)` with the marginal
/// term given by the bound for `V_n` alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example2Point {
    pub n: usize,
    pub a: f64,
    pub rank: usize,
    /// `E[U_n V_n]`.
    pub cross_covariance: f64,
    pub report: BoundReport,
    /// Independence gap with its spread over replicates.
    pub independence_gap: Option<MeanEstimate>,
}

pub fn example2_point(n: usize, a: f64) -> Result<(Example2, Example2Point)> {
    let ex = build_example2(n, a)?;
    let empty = ChaosVector::new(vec![])?;
    let marginal = d2_bound_chaos(&ex.v, &empty, 1.0, 0.0)?.total;
    let ys = ChaosVector::new(vec![ex.v.clone().into()])?;
    let report = d2_bound_chaos(&ex.u, &ys, 1.0, marginal)?;
    let point = Example2Point {
        n,
        a,
        rank: ex.rank,
        cross_covariance: crate::chaos::covariance(&ex.u, &ex.v)?,
        report,
        independence_gap: None,
    };
    Ok((ex, point))
}

/// Example 2 over a sweep. Sweep points run sequentially because each one
/// already multiplies dense matrices of order `2n`.
pub fn example2_sweep(ns: &[usize], a: f64, gap: Option<GapConfig>, seed: u64) -> Result<Vec<Example2Point>> {
    ns.iter()
        .map(|&n| {
            let (ex, mut point) = example2_point(n, a)?;
            if let Some(cfg) = gap {
                let v = ChaosVector::new(vec![ex.u.into(), ex.v.into()])?;
                point.independence_gap = Some(independence_gap(&v, &cfg, seed ^ n as u64)?);
            }
            Ok(point)
        })
        .collect()
}

/// Settings for the joint-versus-product distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    pub samples: usize,
    pub replicates: usize,
    pub method: W1Method,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            replicates: 6,
            method: W1Method::Exact,
        }
    }
}

/// Mean over replicates of the 2D `W_1` between a joint sample of a two
/// element chaos vector and the same sample with its second column shuffled.
pub fn independence_gap(v: &ChaosVector, cfg: &GapConfig, seed: u64) -> Result<MeanEstimate> {
    if v.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: v.len(),
        });
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidParameter {
            name: "replicates",
            value: 0.0,
        });
    }
    let gaps = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let s = sample_chaos(v, cfg.samples, seed.wrapping_mul(0x9E37_79B9).wrapping_add(r as u64));
            let xs: Vec<f64> = s.column(0).iter().copied().collect();
            let mut ys: Vec<f64> = s.column(1).iter().copied().collect();
            let joint = SampleBatch::from_pairs(&xs, &ys, Some(seed))?;
            ys.shuffle(&mut stream_rng(seed, 1 << 32 | r as u64));
            let product = SampleBatch::from_pairs(&xs, &ys, Some(seed))?;
            w1_empirical_2d(&joint, &product, cfg.method)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut acc = MeanAccumulator::new();
    gaps.iter().for_each(|&g| acc.push(g));
    Ok(acc.estimate())
}

/// Correlation of the negative control pair.
pub const CONTROL_RHO: f64 = 0.8;

/// `X = ξ_1² - 1` and `Y = ρ ξ_1 + √(1 - ρ²) ξ_2`.
pub fn negative_control() -> Result<ChaosVector> {
    let x = Kernel2::basis_square(0, 2);
    let y = Kernel1::new(DVector::from_vec(vec![
        CONTROL_RHO,
        (1.0 - CONTROL_RHO * CONTROL_RHO).sqrt(),
    ]));
    ChaosVector::new(vec![x.into(), y.into()])
}

/// Cross term of the negative control; it does not depend on any index.
pub fn negative_control_cross() -> Result<f64> {
    let v = negative_control()?;
    let ChaosElement::Second(x) = &v.elements()[0] else {
        unreachable!()
    };
    cross_malliavin(x, &v.elements()[1])
}

/// Mean of `2(Z+ν) ∂f/∂x(Z, Y) - Z f(Z, Y)` over the given pairs, with the
/// derivative taken from the integral representation.
pub fn characterization_statistic(ev: &SteinEvaluator, pairs: &[(f64, f64)]) -> Result<MeanEstimate> {
    let nu = ev.law().nu();
    let vals = pairs
        .par_iter()
        .map(|&(z, y)| {
            let y = [y];
            let (f, df) = if ev.in_limit_window(z) {
                (ev.limit_value(&y)?, ev.limit_derivative(&y)?)
            } else {
                ev.value_and_direct_derivative(z, &y)?
            };
            Ok(2.0 * (z + nu) * df - z * f)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(crate::stats::mean_estimate(&vals))
}

/// `count` independent pairs `Z ~ F(ν)`, `Y ~ N(0, 1)`.
pub fn independent_pairs(law: GammaNu, count: usize, seed: u64) -> Vec<(f64, f64)> {
    let zs = law.sample(count, seed);
    let mut rng = stream_rng(seed, 1);
    zs.into_iter().map(|z| (z, StandardNormal.sample(&mut rng))).collect()
}

/// `count` dependent pairs `(ξ² - 1, ξ)`.
pub fn dependent_pairs(count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = stream_rng(seed, 2);
    (0..count)
        .map(|_| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            (xi * xi - 1.0, xi)
        })
        .collect()
}

/// CSV row of an example sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub discrepancy: f64,
    pub cross_term: f64,
    pub bound_total: f64,
    pub empirical_dw: Option<f64>,
    pub slope_running: Option<f64>,
}

/// Rows with running slopes of the bound totals.
pub fn sweep_rows<'a, I>(points: I) -> Vec<SweepRow>
where
    I: IntoIterator<Item = (usize, &'a BoundReport, Option<f64>)>,
{
    let pts: Vec<_> = points.into_iter().collect();
    let ns: Vec<usize> = pts.iter().map(|p| p.0).collect();
    let totals: Vec<f64> = pts.iter().map(|p| p.1.total).collect();
    let slopes = running_slopes(&ns, &totals);
    pts.into_iter()
        .zip(slopes)
        .map(|((n, r, emp), slope)| SweepRow {
            n,
            discrepancy: r.discrepancy,
            cross_term: r.cross_total(),
            bound_total: r.total,
            empirical_dw: emp,
            slope_running: slope,
        })
        .collect()
}
