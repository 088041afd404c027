//! Small numerical helpers shared by the Monte Carlo code.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for stream `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Running first and second moments, mergeable across chunks.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    count: usize,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum.add(v);
        self.sum_sq.add(v * v);
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        self
    }

    pub fn estimate(&self) -> MeanEstimate {
        let n = self.count as f64;
        let mean = self.sum.value() / n;
        let var = ((self.sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
        MeanEstimate {
            mean,
            variance: var,
            std_error: (var / n).sqrt(),
            count: self.count,
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub count: usize,
}

impl MeanEstimate {
    /// Distance of the mean from `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.std_error
    }
}

/// Mean estimate of a slice.
pub fn mean_estimate(values: &[f64]) -> MeanEstimate {
    let mut acc = MeanAccumulator::new();
    for &v in values {
        acc.push(v);
    }
    acc.estimate()
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}
