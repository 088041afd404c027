//! Wiener chaos of orders 1 and 2 over a finite orthonormal frame.
//!
//! A second-order kernel with matrix `A` is realized as `I_2 = ξᵀAξ - tr A`
//! for a standard Gaussian vector `ξ`, so that `E[I_2²] = 2‖A‖²`. Kernels
//! carry an optional isotropic tail `α I_m` on the last `m` coordinates,
//! which lets highly symmetric kernels be handled without dense storage.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{stream_rng, MeanAccumulator, MeanEstimate};

/// Rows per independent random stream in parallel sampling.
const CHUNK: usize = 4096;

/// Symmetric second-order kernel `block_diag(core, α I_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2 {
    core: DMatrix<f64>,
    tail_dim: usize,
    tail_value: f64,
}

/// First-order kernel `a`, realized as `a·ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel1 {
    coeffs: DVector<f64>,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

impl Kernel2 {
    /// Dense kernel; the matrix is symmetrized.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_tail(matrix, 0, 0.0)
    }

    pub fn with_tail(core: DMatrix<f64>, tail_dim: usize, tail_value: f64) -> Result<Self> {
        if core.nrows() != core.ncols() {
            return Err(Error::DimensionMismatch {
                expected: core.nrows(),
                found: core.ncols(),
            });
        }
        Ok(Self {
            core: symmetrize(&core),
            tail_dim,
            tail_value,
        })
    }

    /// `e_i e_iᵀ` in dimension `dim`.
    pub fn basis_square(i: usize, dim: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, i)] = 1.0;
        Self {
            core: m,
            tail_dim: 0,
            tail_value: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.core.nrows() + self.tail_dim
    }

    pub fn core(&self) -> &DMatrix<f64> {
        &self.core
    }

    pub fn tail_dim(&self) -> usize {
        self.tail_dim
    }

    pub fn tail_value(&self) -> f64 {
        self.tail_value
    }

    pub fn trace(&self) -> f64 {
        self.core.trace() + self.tail_dim as f64 * self.tail_value
    }

    /// `‖A‖²_HS`.
    pub fn hs_norm_sq(&self) -> f64 {
        self.core.norm_squared() + self.tail_dim as f64 * self.tail_value * self.tail_value
    }

    /// Same kernel with the first `extra` tail coordinates moved into the core.
    pub fn expanded(&self, core_size: usize) -> Self {
        let k = self.core.nrows();
        if core_size <= k {
            return self.clone();
        }
        let extra = (core_size - k).min(self.tail_dim);
        let mut core = DMatrix::zeros(k + extra, k + extra);
        core.view_mut((0, 0), (k, k)).copy_from(&self.core);
        for i in k..k + extra {
            core[(i, i)] = self.tail_value;
        }
        Self {
            core,
            tail_dim: self.tail_dim - extra,
            tail_value: self.tail_value,
        }
    }

    /// Dense matrix of the whole kernel.
    pub fn to_dense(&self) -> DMatrix<f64> {
        self.expanded(self.dim()).core
    }

    /// Raw kernel value `ξᵀAξ - tr A` given the core coordinates and
    /// `Σ ξ_i²` over the tail coordinates.
    pub fn evaluate(&self, core_xi: &DVector<f64>, tail_chi2: f64) -> f64 {
        let k = self.core.nrows();
        let xi = core_xi.rows(0, k);
        let quad = xi.dot(&(&self.core * xi));
        let tail = if self.tail_dim > 0 {
            self.tail_value * (tail_chi2 - self.tail_dim as f64)
        } else {
            0.0
        };
        quad - self.core.trace() + tail
    }
}

impl Kernel1 {
    pub fn new(coeffs: DVector<f64>) -> Self {
        Self { coeffs }
    }

    /// `e_i` in dimension `dim`.
    pub fn basis(i: usize, dim: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        Self { coeffs: v }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    /// Number of leading coordinates that carry nonzero coefficients.
    fn support_len(&self) -> usize {
        self.coeffs.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1)
    }
}

/// Element of a chaos vector.
#[derive(Debug, Clone, PartialEq)]
pub enum ChaosElement {
    First(Kernel1),
    Second(Kernel2),
}

impl ChaosElement {
    pub fn dim(&self) -> usize {
        match self {
            Self::First(k) => k.dim(),
            Self::Second(k) => k.dim(),
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Self::First(_) => 1,
            Self::Second(_) => 2,
        }
    }
}

impl From<Kernel1> for ChaosElement {
    fn from(k: Kernel1) -> Self {
        Self::First(k)
    }
}

impl From<Kernel2> for ChaosElement {
    fn from(k: Kernel2) -> Self {
        Self::Second(k)
    }
}

/// Jointly realized chaos elements over one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosVector {
    dim: usize,
    core_size: usize,
    elements: Vec<ChaosElement>,
}

impl ChaosVector {
    pub fn new(elements: Vec<ChaosElement>) -> Result<Self> {
        let dim = elements.first().map_or(0, ChaosElement::dim);
        for e in &elements {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.dim(),
                });
            }
        }
        let core_size = elements
            .iter()
            .map(|e| match e {
                ChaosElement::First(k) => k.support_len(),
                ChaosElement::Second(k) => k.core.nrows(),
            })
            .max()
            .unwrap_or(0);
        let elements = elements
            .into_iter()
            .map(|e| match e {
                ChaosElement::Second(k) => ChaosElement::Second(k.expanded(core_size)),
                other => other,
            })
            .collect::<Vec<_>>();
        // All tails must now coincide so one chi-square draw serves every kernel.
        let core_size = elements
            .iter()
            .filter_map(|e| match e {
                ChaosElement::Second(k) => Some(k.core.nrows()),
                _ => None,
            })
            .max()
            .unwrap_or(core_size);
        Ok(Self {
            dim,
            core_size,
            elements,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[ChaosElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let k = self.core_size;
        let xi = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = self.dim - k;
        let chi2 = if m > 0 {
            ChiSquared::new(m as f64).expect("positive dof").sample(rng)
        } else {
            0.0
        };
        for (o, e) in out.iter_mut().zip(&self.elements) {
            *o = match e {
                ChaosElement::First(a) => a.coeffs.rows(0, k).dot(&xi),
                ChaosElement::Second(a) => a.evaluate(&xi, chi2),
            };
        }
    }
}

/// `count × elements` matrix of joint samples, reproducible from `seed`.
pub fn sample_chaos(v: &ChaosVector, count: usize, seed: u64) -> DMatrix<f64> {
    let e = v.len();
    let chunks: Vec<Vec<f64>> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let rows = CHUNK.min(count - c * CHUNK);
            let mut buf = vec![0.0; rows * e];
            for r in 0..rows {
                v.draw(&mut rng, &mut buf[r * e..(r + 1) * e]);
            }
            buf
        })
        .collect();
    let flat: Vec<f64> = chunks.into_iter().flatten().collect();
    DMatrix::from_row_slice(count, e, &flat)
}

fn aligned(a: &Kernel2, b: &Kernel2) -> Result<(Kernel2, Kernel2)> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let k = a.core.nrows().max(b.core.nrows());
    Ok((a.expanded(k), b.expanded(k)))
}

/// `tr(AB)`, the `r = 2` contraction.
fn trace_product(a: &Kernel2, b: &Kernel2) -> f64 {
    a.core.dot(&b.core) + a.tail_dim as f64 * a.tail_value * b.tail_value
}

/// `E[I_2(f) I_2(g)] = 2 tr(AB)`.
pub fn covariance(x: &Kernel2, y: &Kernel2) -> Result<f64> {
    let (a, b) = aligned(x, y)?;
    Ok(2.0 * trace_product(&a, &b))
}

/// Result of a contraction of two second-order kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Contraction {
    /// `r = 1`: the matrix `AB` (or its symmetrization) plus the tail product.
    Matrix {
        core: DMatrix<f64>,
        tail_dim: usize,
        tail_value: f64,
    },
    /// `r = 2`: `tr(AB)`.
    Scalar(f64),
}

impl Contraction {
    /// Symmetric kernel of a matrix contraction.
    pub fn into_kernel(self) -> Option<Kernel2> {
        match self {
            Self::Matrix {
                core,
                tail_dim,
                tail_value,
            } => Kernel2::with_tail(core, tail_dim, tail_value).ok(),
            Self::Scalar(_) => None,
        }
    }
}

/// `f ⊗_r g` for `r ∈ {1, 2}`.
pub fn contract(f: &Kernel2, g: &Kernel2, r: usize, symmetrize_result: bool) -> Result<Contraction> {
    let (a, b) = aligned(f, g)?;
    match r {
        1 => {
            let ab = &a.core * &b.core;
            let core = if symmetrize_result {
                let ba = &b.core * &a.core;
                let mut s = ab.zip_map(&ba, |x, y| 0.5 * (x + y));
                // exact symmetry: average with the transpose
                s = symmetrize(&s);
                s
            } else {
                ab
            };
            Ok(Contraction::Matrix {
                core,
                tail_dim: a.tail_dim,
                tail_value: a.tail_value * b.tail_value,
            })
        }
        2 => Ok(Contraction::Scalar(trace_product(&a, &b))),
        _ => Err(Error::InvalidParameter {
            name: "contraction order",
            value: r as f64,
        }),
    }
}

/// `8‖A - A²‖² + 4(ν - tr A²)²`.
pub fn gamma_discrepancy(x: &Kernel2, nu: f64) -> f64 {
    let a2 = &x.core * &x.core;
    let diff = (&x.core - &a2).norm_squared();
    let alpha = x.tail_value;
    let m = x.tail_dim as f64;
    let tail_diff = m * (alpha - alpha * alpha).powi(2);
    let tr_a2 = a2.trace() + m * alpha * alpha;
    8.0 * (diff + tail_diff) + 4.0 * (nu - tr_a2).powi(2)
}

/// `E[⟨D(-L)^{-1} X, D Y⟩²]`.
pub fn cross_malliavin(x: &Kernel2, y: &ChaosElement) -> Result<f64> {
    match y {
        ChaosElement::Second(b) => {
            let (a, b) = aligned(x, b)?;
            let ab = &a.core * &b.core;
            let c = &ab + ab.transpose();
            let tr = trace_product(&a, &b);
            let tail = a.tail_dim as f64 * (2.0 * a.tail_value * b.tail_value).powi(2);
            Ok((2.0 * tr).powi(2) + 2.0 * (c.norm_squared() + tail))
        }
        ChaosElement::First(b) => {
            if x.dim() != b.dim() {
                return Err(Error::DimensionMismatch {
                    expected: x.dim(),
                    found: b.dim(),
                });
            }
            let k = x.core.nrows().max(b.support_len());
            let a = x.expanded(k);
            let k = a.core.nrows();
            let ab = &a.core * b.coeffs.rows(0, k);
            let tail: f64 = b.coeffs.rows(k, b.dim() - k).norm_squared() * a.tail_value * a.tail_value;
            Ok(ab.norm_squared() + tail)
        }
    }
}

/// The two quantities of the fourth-moment criterion at `q = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NpCriterion {
    /// `|2‖A‖² - 2ν|`.
    pub variance_gap: f64,
    /// `‖A² - A‖²`.
    pub contraction_gap: f64,
}

pub fn np_criterion(x: &Kernel2, nu: f64) -> NpCriterion {
    let a2 = &x.core * &x.core;
    let alpha = x.tail_value;
    NpCriterion {
        variance_gap: (2.0 * x.hs_norm_sq() - 2.0 * nu).abs(),
        contraction_gap: (&a2 - &x.core).norm_squared() + x.tail_dim as f64 * (alpha * alpha - alpha).powi(2),
    }
}

fn mc_mean<F>(v: &ChaosVector, count: usize, seed: u64, stat: F) -> MeanEstimate
where
    F: Fn(&DVector<f64>, f64, &[f64]) -> f64 + Sync,
{
    let k = v.core_size;
    let m = v.dim - k;
    let e = v.len();
    (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let rows = CHUNK.min(count - c * CHUNK);
            let mut acc = MeanAccumulator::new();
            let mut vals = vec![0.0; e];
            let chi = (m > 0).then(|| ChiSquared::new(m as f64).expect("positive dof"));
            for _ in 0..rows {
                let xi = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
                let chi2 = chi.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                for (o, el) in vals.iter_mut().zip(&v.elements) {
                    *o = match el {
                        ChaosElement::First(a) => a.coeffs.rows(0, k).dot(&xi),
                        ChaosElement::Second(a) => a.evaluate(&xi, chi2),
                    };
                }
                acc.push(stat(&xi, chi2, &vals));
            }
            acc
        })
        .reduce(MeanAccumulator::new, MeanAccumulator::merge)
        .estimate()
}

/// Monte Carlo estimate of `E[(2(X + ν) - 2‖Aξ‖²)²]` for a dense kernel.
pub fn mc_gamma_discrepancy(x: &Kernel2, nu: f64, count: usize, seed: u64) -> MeanEstimate {
    let a = x.to_dense();
    let v = ChaosVector::new(vec![Kernel2::new(a.clone()).expect("square").into()]).expect("one element");
    mc_mean(&v, count, seed, |xi, _, vals| {
        let ax = &a * xi;
        (2.0 * (vals[0] + nu) - 2.0 * ax.norm_squared()).powi(2)
    })
}

/// Monte Carlo estimate of `E[⟨Aξ, D Y⟩²]` for dense kernels.
pub fn mc_cross_malliavin(x: &Kernel2, y: &ChaosElement, count: usize, seed: u64) -> Result<MeanEstimate> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let a = x.to_dense();
    let d = a.nrows();
    let v = ChaosVector::new(vec![Kernel2::new(a.clone())?.into()])?;
    Ok(match y {
        ChaosElement::Second(b) => {
            let b = b.to_dense();
            mc_mean(&v, count, seed, |xi, _, _| (2.0 * (&a * xi).dot(&(&b * xi))).powi(2))
        }
        ChaosElement::First(b) => {
            let b = b.coeffs.clone();
            debug_assert_eq!(b.len(), d);
            mc_mean(&v, count, seed, |xi, _, _| (&a * xi).dot(&b).powi(2))
        }
    })
}

/// Monte Carlo estimate of `E[I(f) I(g)]` style moments of a single kernel:
/// the mean of `X^power`.
pub fn mc_moment(x: &Kernel2, power: i32, count: usize, seed: u64) -> MeanEstimate {
    let v = ChaosVector::new(vec![x.clone().into()]).expect("one element");
    mc_mean(&v, count, seed, |_, _, vals| vals[0].powi(power))
}

// Dense symmetric tensors for the product formula check.

#[derive(Debug, Clone)]
struct Tensor {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Tensor {
    fn zeros(order: usize, dim: usize) -> Self {
        Self {
            order,
            dim,
            data: vec![0.0; dim.pow(order as u32)],
        }
    }

    fn index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.order];
        for k in (0..self.order).rev() {
            idx[k] = flat % self.dim;
            flat /= self.dim;
        }
        idx
    }

    fn from_element(e: &ChaosElement) -> Self {
        match e {
            ChaosElement::First(a) => Self {
                order: 1,
                dim: a.dim(),
                data: a.coeffs.iter().copied().collect(),
            },
            ChaosElement::Second(a) => {
                let m = a.to_dense();
                let d = m.nrows();
                let mut t = Self::zeros(2, d);
                for i in 0..d {
                    for j in 0..d {
                        t.data[i * d + j] = m[(i, j)];
                    }
                }
                t
            }
        }
    }

    /// Contract the last `r` indices of `self` with the first `r` of `other`.
    fn contract(&self, other: &Self, r: usize) -> Self {
        let order = self.order + other.order - 2 * r;
        let d = self.dim;
        let mut out = Self::zeros(order, d);
        let pairs = d.pow(r as u32);
        for flat in 0..out.data.len() {
            let idx = out.multi_index(flat);
            let (left, right) = idx.split_at(self.order - r);
            let mut s = 0.0;
            for c in 0..pairs {
                let mut cidx = vec![0; r];
                let mut cc = c;
                for k in (0..r).rev() {
                    cidx[k] = cc % d;
                    cc /= d;
                }
                let li: Vec<usize> = left.iter().chain(&cidx).copied().collect();
                let ri: Vec<usize> = cidx.iter().chain(right).copied().collect();
                s += self.data[self.index(&li)] * other.data[other.index(&ri)];
            }
            out.data[flat] = s;
        }
        out
    }

    fn symmetrized(&self) -> Self {
        let perms = permutations(self.order);
        let mut out = Self::zeros(self.order, self.dim);
        for flat in 0..self.data.len() {
            let idx = self.multi_index(flat);
            let mut s = 0.0;
            for p in &perms {
                let pi: Vec<usize> = p.iter().map(|&k| idx[k]).collect();
                s += self.data[self.index(&pi)];
            }
            out.data[flat] = s / perms.len() as f64;
        }
        out
    }

    /// `I_q(T)` as a sum of Hermite products.
    fn multiple_integral(&self, xi: &[f64]) -> f64 {
        if self.order == 0 {
            return self.data[0];
        }
        let mut s = 0.0;
        let mut counts = vec![0usize; self.dim];
        for flat in 0..self.data.len() {
            let v = self.data[flat];
            if v == 0.0 {
                continue;
            }
            counts.iter_mut().for_each(|c| *c = 0);
            for i in self.multi_index(flat) {
                counts[i] += 1;
            }
            let prod: f64 = counts.iter().zip(xi).map(|(&m, &x)| hermite(m, x)).product();
            s += v * prod;
        }
        s
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Probabilists' Hermite polynomial.
fn hermite(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Largest frame dimension accepted by [`product_formula_check`].
pub const PRODUCT_CHECK_MAX_DIM: usize = 6;

/// Maximum pathwise deviation between `I_p(f) I_q(g)` and the sum
/// `Σ_r r! C(p,r) C(q,r) I_{p+q-2r}(f ⊗̃_r g)` over `count` Gaussian draws.
pub fn product_formula_check(f: &ChaosElement, g: &ChaosElement, count: usize, seed: u64) -> Result<f64> {
    let d = f.dim();
    if g.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: g.dim(),
        });
    }
    if d > PRODUCT_CHECK_MAX_DIM {
        return Err(Error::TooManyPoints {
            count: d,
            cap: PRODUCT_CHECK_MAX_DIM,
        });
    }
    let (p, q) = (f.order(), g.order());
    let tf = Tensor::from_element(f);
    let tg = Tensor::from_element(g);
    let terms: Vec<(f64, Tensor)> = (0..=p.min(q))
        .map(|r| {
            let c = factorial(r) * binomial(p, r) * binomial(q, r);
            (c, tf.contract(&tg, r).symmetrized())
        })
        .collect();
    let v = ChaosVector::new(vec![f.clone(), g.clone()])?;
    let mut rng = stream_rng(seed, 0);
    let mut worst: f64 = 0.0;
    let mut buf = [0.0; 2];
    for _ in 0..count {
        let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let xv = DVector::from_column_slice(&xi);
        for (o, e) in buf.iter_mut().zip(v.elements()) {
            *o = match e {
                ChaosElement::First(a) => a.coeffs.dot(&xv),
                ChaosElement::Second(a) => a.to_dense().dot(&(&xv * xv.transpose())) - a.trace(),
            };
        }
        let lhs = buf[0] * buf[1];
        let rhs: f64 = terms.iter().map(|(c, t)| c * t.multiple_integral(&xi)).sum();
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
