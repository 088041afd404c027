//! The centered Gamma law: a gamma variable of shape `nu / 2` and scale 2,
//! shifted by `-nu`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};
use crate::special::{ln_gamma, ln_regularized_gamma, ln_reversed_incomplete_gamma, poisson_reciprocal_mean};
use crate::stats::stream_rng;

/// Parameter of the centered Gamma law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaNu {
    nu: f64,
}

impl GammaNu {
    pub fn new(nu: f64) -> Result<Self> {
        if nu > 0.0 && nu.is_finite() {
            Ok(Self { nu })
        } else {
            Err(Error::InvalidParameter { name: "nu", value: nu })
        }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Gamma shape `nu / 2`.
    pub fn shape(&self) -> f64 {
        0.5 * self.nu
    }

    pub fn mean(&self) -> f64 {
        0.0
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.nu
    }

    pub fn third_moment(&self) -> f64 {
        8.0 * self.nu
    }

    /// `ln p(x)` for `x > -nu`, `-∞` otherwise.
    pub fn ln_density_p(&self, x: f64) -> f64 {
        self.ln_density_p_offset(x + self.nu)
    }

    /// `ln p(-nu + t)`, exact for offsets far below the resolution of `nu`.
    pub fn ln_density_p_offset(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let k = self.shape();
        let z = 0.5 * t;
        (k - 1.0) * z.ln() - z - std::f64::consts::LN_2 - ln_gamma(k)
    }

    /// Density of the law, zero on `(-∞, -nu]`.
    pub fn density_p(&self, x: f64) -> f64 {
        self.ln_density_p(x).exp()
    }

    /// `ln q(x)` for `x < -nu`, `-∞` otherwise.
    pub fn ln_density_q(&self, x: f64) -> f64 {
        self.ln_density_q_offset(-(x + self.nu))
    }

    /// `ln q(-nu - t)`.
    pub fn ln_density_q_offset(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let k = self.shape();
        let z = 0.5 * t;
        (k - 1.0) * z.ln() + z - std::f64::consts::LN_2 - ln_gamma(k)
    }

    /// The mirrored weight `q`, zero on `[-nu, ∞)`.
    pub fn density_q(&self, x: f64) -> f64 {
        self.ln_density_q(x).exp()
    }

    /// `(ln F(x), ln (1 - F(x)))`.
    pub fn ln_cdf_pair(&self, x: f64) -> (f64, f64) {
        ln_regularized_gamma(self.shape(), 0.5 * (x + self.nu))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.ln_cdf_pair(x).0.exp()
    }

    pub fn survival(&self, x: f64) -> f64 {
        self.ln_cdf_pair(x).1.exp()
    }

    /// `ln F̃(x)` where `F̃(x) = ∫_x^{-nu} q`.
    pub fn ln_tail_ftilde(&self, x: f64) -> Result<f64> {
        let t = -(x + self.nu);
        if t < 0.0 || x.is_nan() {
            return Err(Error::Domain {
                what: "tail_ftilde",
                value: x,
            });
        }
        Ok(ln_reversed_incomplete_gamma(self.shape(), 0.5 * t))
    }

    pub fn tail_ftilde(&self, x: f64) -> Result<f64> {
        self.ln_tail_ftilde(x).map(f64::exp)
    }

    /// `F̃(x) / q(x)` for `x < -nu`; finite even where both factors overflow.
    pub fn tail_ratio(&self, x: f64) -> Result<f64> {
        let t = -(x + self.nu);
        if t < 0.0 || x.is_nan() {
            return Err(Error::Domain {
                what: "tail_ratio",
                value: x,
            });
        }
        let z = 0.5 * t;
        Ok(2.0 * z * poisson_reciprocal_mean(self.shape(), z))
    }

    /// Point beyond which the law carries at most `spec.tail_mass`.
    pub fn upper_cutoff(&self, spec: &QuadratureSpec) -> f64 {
        let target = spec.tail_mass.ln();
        let mut lo = -self.nu;
        let mut hi = self.nu.max(1.0);
        while self.ln_cdf_pair(hi).1 > target {
            lo = hi;
            hi = 2.0 * hi + 10.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.ln_cdf_pair(mid).1 > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * hi.abs().max(1.0) {
                break;
            }
        }
        hi
    }

    /// `∫_0^len g(t) dt` where `t` is the distance from `-nu`, with the edge
    /// desingularized for shapes below 1.
    ///
    /// The integrand may carry a factor behaving like `t^{k - 1}`.
    pub fn integrate_offset<G: Fn(f64) -> f64>(&self, g: G, len: f64, spec: &QuadratureSpec) -> Result<f64> {
        integrate_from_edge(self.shape(), g, len, spec)
    }

    /// `E[g(Z)]` by quadrature against `p` up to the tail cutoff.
    ///
    /// The mass beyond the cutoff is charged at the cutoff value of `g`.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G, spec: &QuadratureSpec) -> Result<f64> {
        let cutoff = self.upper_cutoff(spec);
        Ok(self.truncated_expectation(&g, cutoff, spec)? + g(cutoff) * self.survival(cutoff))
    }

    /// As [`expectation`](Self::expectation), with the tail beyond the cutoff
    /// expanded to first order using the derivative `dg`.
    pub fn expectation_with_slope<G, D>(&self, g: G, dg: D, spec: &QuadratureSpec) -> Result<f64>
    where
        G: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        let c = self.upper_cutoff(spec);
        let t = c + self.nu;
        let q = self.survival(c);
        // ∫_c^∞ (1 - F) = 2 (c + nu) p(c) - c (1 - F(c))
        let tail_area = 2.0 * t * self.ln_density_p_offset(t).exp() - c * q;
        Ok(self.truncated_expectation(&g, c, spec)? + g(c) * q + dg(c) * tail_area)
    }

    fn truncated_expectation<G: Fn(f64) -> f64>(&self, g: &G, cutoff: f64, spec: &QuadratureSpec) -> Result<f64> {
        let nu = self.nu;
        self.integrate_offset(|t| g(t - nu) * self.ln_density_p_offset(t).exp(), cutoff + nu, spec)
    }

    /// Independent draws from the law, reproducible from `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        self.sample_with(&mut rng, count)
    }

    /// Draws from a caller-owned generator.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let gamma = Gamma::new(self.shape(), 2.0).expect("shape and scale are positive");
        (0..count).map(|_| gamma.sample(rng) - self.nu).collect()
    }

    /// Residual of `2(x+nu)w(x) = ±∫ u w(u) du` for the density `w` of the branch
    /// containing `x`, relative to `max(1, |2(x+nu)w(x)|)` since the left
    /// density grows without bound.
    pub fn identity_residual(&self, x: f64, spec: &QuadratureSpec) -> Result<f64> {
        let t = x + self.nu;
        if t == 0.0 || x.is_nan() {
            return Err(Error::Domain {
                what: "identity_residual",
                value: x,
            });
        }
        let nu = self.nu;
        if t > 0.0 {
            let m = self.integrate_offset(|s| (s - nu) * self.ln_density_p_offset(s).exp(), t, spec)?;
            let lhs = 2.0 * t * self.ln_density_p_offset(t).exp();
            Ok((lhs + m).abs() / lhs.abs().max(1.0))
        } else {
            let m = self.integrate_offset(|s| (-nu - s) * self.ln_density_q_offset(s).exp(), -t, spec)?;
            let lhs = 2.0 * t * self.ln_density_q_offset(-t).exp();
            Ok((lhs - m).abs() / lhs.abs().max(1.0))
        }
    }
}

/// `∫_0^len g(t) dt` where `g` may behave like `t^{k-1}` at 0.
///
/// For `k < 1` the first unit is integrated in `s = t^k`, which makes the
/// integrand bounded.
pub(crate) fn integrate_from_edge<G: Fn(f64) -> f64>(k: f64, g: G, len: f64, spec: &QuadratureSpec) -> Result<f64> {
    if len <= 0.0 {
        return Ok(0.0);
    }
    if k >= 1.0 {
        return Ok(integrate(&g, 0.0, len, spec)?.value);
    }
    let head = len.min(1.0);
    let inv = 1.0 / k;
    let near = integrate(
        |s: f64| {
            if s <= 0.0 {
                return 0.0;
            }
            let t = s.powf(inv);
            g(t) * inv * s.powf(inv - 1.0)
        },
        0.0,
        head.powf(k),
        spec,
    )?
    .value;
    let far = if len > head {
        integrate(&g, head, len, spec)?.value
    } else {
        0.0
    };
    Ok(near + far)
}
