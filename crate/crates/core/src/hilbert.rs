//! Step functions on the half-line, their exact inner products, and
//! orthonormal frames for finite families of them.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivot threshold below which a residual direction is treated as dependent.
pub const PIVOT_THRESHOLD: f64 = 1e-10;

/// A breakpoint stored as `base + offset`.
///
/// Lengths are computed as `(b.base - a.base) + (b.offset - a.offset)`, so a
/// small offset added to a large integer base is never rounded into it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub base: f64,
    pub offset: f64,
}

impl Point {
    pub fn new(base: f64, offset: f64) -> Self {
        Self { base, offset }
    }

    pub fn value(&self) -> f64 {
        self.base + self.offset
    }

    /// `other - self`.
    pub fn distance_to(&self, other: &Point) -> f64 {
        (other.base - self.base) + (other.offset - self.offset)
    }

    fn cmp_exact(&self, other: &Point) -> Ordering {
        self.distance_to(other)
            .partial_cmp(&0.0)
            .map(Ordering::reverse)
            .unwrap_or(Ordering::Equal)
    }
}

impl From<f64> for Point {
    fn from(v: f64) -> Self {
        Self::new(v, 0.0)
    }
}

/// Finitely supported step function: `values[i]` on `[breaks[i], breaks[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breaks: Vec<Point>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breaks: Vec<Point>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: values.len() + 1,
                found: breaks.len(),
            });
        }
        if let Some(first) = breaks.first() {
            if !(first.value() >= 0.0) {
                return Err(Error::Domain {
                    what: "step function support",
                    value: first.value(),
                });
            }
        }
        for w in breaks.windows(2) {
            if w[0].distance_to(&w[1]) <= 0.0 {
                return Err(Error::Domain {
                    what: "breakpoints not increasing",
                    value: w[1].value(),
                });
            }
        }
        Ok(Self { breaks, values })
    }

    /// Indicator of `[lo, hi]`.
    pub fn indicator(lo: impl Into<Point>, hi: impl Into<Point>) -> Result<Self> {
        Self::new(vec![lo.into(), hi.into()], vec![1.0])
    }

    pub fn breaks(&self) -> &[Point] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let p = Point::from(x);
        for (i, v) in self.values.iter().enumerate() {
            if self.breaks[i].cmp_exact(&p) != Ordering::Greater && p.cmp_exact(&self.breaks[i + 1]) == Ordering::Less {
                return *v;
            }
        }
        0.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// Exact `L²` inner product from interval overlaps.
pub fn inner_product(f: &StepFunction, g: &StepFunction) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    while i < f.values.len() && j < g.values.len() {
        let lo = if f.breaks[i].cmp_exact(&g.breaks[j]) == Ordering::Less {
            g.breaks[j]
        } else {
            f.breaks[i]
        };
        let f_ends_first = f.breaks[i + 1].cmp_exact(&g.breaks[j + 1]) == Ordering::Less;
        let hi = if f_ends_first { f.breaks[i + 1] } else { g.breaks[j + 1] };
        let len = lo.distance_to(&hi);
        if len > 0.0 {
            sum += f.values[i] * g.values[j] * len;
        }
        if f_ends_first {
            i += 1;
        } else {
            j += 1;
        }
    }
    sum
}

/// Pairwise inner products.
pub fn gram(fs: &[StepFunction]) -> DMatrix<f64> {
    let n = fs.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = inner_product(&fs[i], &fs[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Orthonormal basis of the span of a family, described by the coordinates
/// of each generator.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame {
    generators: Vec<StepFunction>,
    /// `rank × generators` matrix whose column `j` holds generator `j`.
    coords: DMatrix<f64>,
}

impl OrthonormalFrame {
    pub fn rank(&self) -> usize {
        self.coords.nrows()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn generators(&self) -> &[StepFunction] {
        &self.generators
    }

    /// Gram matrix rebuilt from the coordinates.
    pub fn reconstructed_gram(&self) -> DMatrix<f64> {
        self.coords.transpose() * &self.coords
    }
}

/// Pivoted Cholesky factorization of the Gram matrix with rank detection.
///
/// The Gram matrix is first split into connected components of its nonzero
/// pattern; each component is factorized on its own and gets its own block of
/// frame directions.
pub fn orthonormal_frame(fs: &[StepFunction]) -> OrthonormalFrame {
    let g = gram(fs);
    let m = fs.len();
    let components = components(&g);
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    for comp in &components {
        for col in pivoted_cholesky(&g, comp) {
            columns.push(col);
        }
    }
    let mut coords = DMatrix::zeros(columns.len(), m);
    for (r, col) in columns.iter().enumerate() {
        for &(i, v) in col {
            coords[(r, i)] = v;
        }
    }
    OrthonormalFrame {
        generators: fs.to_vec(),
        coords,
    }
}

fn components(g: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = g.nrows();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            for j in 0..n {
                if !seen[j] && g[(i, j)] != 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Columns of `L` (as sparse `(index, value)` lists) with `G ≈ L Lᵀ` on `idx`.
fn pivoted_cholesky(g: &DMatrix<f64>, idx: &[usize]) -> Vec<Vec<(usize, f64)>> {
    let k = idx.len();
    let mut diag: Vec<f64> = idx.iter().map(|&i| g[(i, i)]).collect();
    let mut used = vec![false; k];
    let mut cols: Vec<Vec<f64>> = Vec::new();
    loop {
        let pivot = (0..k)
            .filter(|&i| !used[i])
            .max_by(|&a, &b| diag[a].total_cmp(&diag[b]));
        let Some(p) = pivot else { break };
        if diag[p] < PIVOT_THRESHOLD {
            break;
        }
        used[p] = true;
        let lp = diag[p].sqrt();
        let mut col = vec![0.0; k];
        col[p] = lp;
        for i in 0..k {
            if used[i] {
                continue;
            }
            let mut v = g[(idx[i], idx[p])];
            for c in &cols {
                v -= c[i] * c[p];
            }
            col[i] = v / lp;
            diag[i] -= col[i] * col[i];
        }
        cols.push(col);
    }
    cols.into_iter()
        .map(|c| {
            c.into_iter()
                .enumerate()
                .filter(|(_, v)| *v != 0.0)
                .map(|(i, v)| (idx[i], v))
                .collect()
        })
        .collect()
}

/// `h_i = 1[2i, 2i+1]`.
pub fn h_function(i: usize) -> StepFunction {
    let b = 2.0 * i as f64;
    StepFunction::indicator(b, b + 1.0).expect("valid interval")
}

/// `g_i = 1[2i - 1 + 1/i, 2i + i^{-a}]`.
pub fn g_function(i: usize, a: f64) -> StepFunction {
    let fi = i as f64;
    StepFunction::indicator(Point::new(2.0 * fi - 1.0, 1.0 / fi), Point::new(2.0 * fi, fi.powf(-a)))
        .expect("valid interval")
}
