//! The bound functions `S` (right of `-nu`) and `R` (left of `-nu`) and the
//! uniform constant derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_law::GammaNu;
use crate::quadrature::QuadratureSpec;
use crate::special::{integrated_cdf_series, integrated_tail_series};

/// `S(x) = H(x) G(x) / ((x + nu)² p(x))` with `H = ∫_{-nu}^x F` and
/// `G = ∫_x^∞ (1 - F)`.
pub fn bound_s(law: GammaNu, x: f64) -> Result<f64> {
    let nu = law.nu();
    let t = x + nu;
    if t <= 0.0 || x.is_nan() {
        return Err(Error::Domain {
            what: "bound_s",
            value: x,
        });
    }
    let k = law.shape();
    let z = 0.5 * t;
    let (ln_p_cdf, ln_q) = law.ln_cdf_pair(x);
    let ln_p = law.ln_density_p_offset(t);
    // G / p = 2t - x (1 - F) / p
    let g_over_p = 2.0 * t - x * (ln_q - ln_p).exp();
    if z < k + 50.0 {
        let h_over_p = 4.0 * z * integrated_cdf_series(k, z);
        Ok(h_over_p * g_over_p * ln_p.exp() / (t * t))
    } else {
        let h = 2.0 * (z - k) * ln_p_cdf.exp() + 2.0 * t * ln_p.exp();
        Ok(h * g_over_p / (t * t))
    }
}

/// `R(x) = -x ∫_x^{-nu} F̃ / ((x + nu)² q(x))`.
pub fn bound_r(law: GammaNu, x: f64) -> Result<f64> {
    let nu = law.nu();
    let t = -(x + nu);
    if t <= 0.0 || x.is_nan() {
        return Err(Error::Domain {
            what: "bound_r",
            value: x,
        });
    }
    let k = law.shape();
    let z = 0.5 * t;
    let integral_over_q = if z < 30.0 {
        4.0 * z * z * integrated_tail_series(k, z)
    } else {
        -2.0 * t - x * law.tail_ratio(x)?
    };
    Ok(-x * integral_over_q / (t * t))
}

/// Search grid for [`uniform_constant_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantGrid {
    pub points_per_decade: usize,
    /// Smallest distance from `-nu` examined.
    pub min_offset: f64,
    /// Largest distance from `-nu` examined on the left.
    pub max_left_offset: f64,
}

impl Default for ConstantGrid {
    fn default() -> Self {
        Self {
            points_per_decade: 40,
            min_offset: 1e-6,
            max_left_offset: 1e4,
        }
    }
}

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(2);
    (0..=n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / n as f64).exp())
        .collect()
}

/// Maximum of `g` over a log grid of offsets, refined by golden section
/// around the best grid point.
fn sup_over_offsets(g: impl Fn(f64) -> f64, lo: f64, hi: f64, per_decade: usize) -> f64 {
    let grid = log_grid(lo, hi, per_decade);
    let values: Vec<f64> = grid.iter().map(|&t| g(t)).collect();
    let (best, &best_val) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    let mut a = grid[best.saturating_sub(1)].ln();
    let mut b = grid[(best + 1).min(grid.len() - 1)].ln();
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (g(c.exp()), g(d.exp()));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = g(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = g(d.exp());
        }
    }
    best_val.max(fc).max(fd)
}

/// `max(1, sup S, sup R)` with the default grid.
pub fn uniform_constant(law: GammaNu) -> f64 {
    uniform_constant_with(law, &ConstantGrid::default(), &QuadratureSpec::default())
}

/// `max(1, sup S, sup R)` where `S` is scanned up to the tail cutoff.
pub fn uniform_constant_with(law: GammaNu, grid: &ConstantGrid, spec: &QuadratureSpec) -> f64 {
    let nu = law.nu();
    let right = law.upper_cutoff(spec) + nu;
    let s = sup_over_offsets(
        |t| bound_s(law, -nu + t).unwrap_or(f64::NAN),
        grid.min_offset,
        right,
        grid.points_per_decade,
    );
    let r = sup_over_offsets(
        |t| bound_r(law, -nu - t).unwrap_or(f64::NAN),
        grid.min_offset,
        grid.max_left_offset,
        grid.points_per_decade,
    );
    1f64.max(s).max(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_panels};

    fn law(nu: f64) -> GammaNu {
        GammaNu::new(nu).unwrap()
    }

    #[test]
    fn edge_limits() {
        for &nu in &[1.0, 2.0] {
            let want = 4.0 / (2.0 + nu);
            assert!((bound_s(law(nu), -nu + 1e-4).unwrap() - want).abs() < 1e-2);
            assert!((bound_r(law(nu), -nu - 1e-4).unwrap() - want).abs() < 1e-2);
        }
    }

    #[test]
    fn s_is_at_most_two_on_positive_axis() {
        for &x in &[0.5, 1.0, 5.0, 20.0] {
            let s = bound_s(law(1.0), x).unwrap();
            assert!(s > 0.0 && s <= 2.0, "{x}: {s}");
        }
    }

    #[test]
    fn r_vanishes_far_left() {
        assert!(bound_r(law(1.0), -1e3).unwrap() < 0.05);
    }

    #[test]
    fn domains() {
        assert!(bound_s(law(1.0), -1.0).is_err());
        assert!(bound_r(law(1.0), -1.0).is_err());
        assert!(bound_r(law(1.0), 0.0).is_err());
    }

    // H and G by quadrature of the CDF, two independent schemes.
    #[test]
    fn s_matches_quadrature_oracles() {
        let l = law(1.0);
        let x = 0.5;
        let spec = QuadratureSpec::default();
        let cdf = |u: f64| statrs::function::gamma::gamma_lr(0.5, 0.5 * (u + 1.0));
        let s_of = |h: f64, g: f64| h * g / (1.5 * 1.5 * l.density_p(x));
        let h_a = integrate(cdf, -1.0, x, &spec).unwrap().value;
        let g_a = integrate(|u| 1.0 - cdf(u), x, 80.0, &spec).unwrap().value;
        let h_b = integrate_panels(|r: f64| 2.0 * r * cdf(-1.0 + r * r), 0.0, 1.5f64.sqrt(), 64, 20);
        let g_b = integrate_panels(|u| 1.0 - cdf(u), x, 80.0, 256, 20);
        let s = bound_s(l, x).unwrap();
        assert!((s - s_of(h_a, g_a)).abs() < 1e-8, "{s} {}", s_of(h_a, g_a));
        assert!((s - s_of(h_b, g_b)).abs() < 1e-8, "{s} {}", s_of(h_b, g_b));
    }

    #[test]
    fn r_matches_quadrature_oracles() {
        let l = law(2.0);
        let x = -5.0;
        let spec = QuadratureSpec::default();
        // F̃(w) = e^{-(w+2)/2} - 1 for nu = 2.
        let ft = |w: f64| (-(w + 2.0) / 2.0).exp() - 1.0;
        let r_of = |i: f64| -x * i / (9.0 * l.density_q(x));
        let a = integrate(ft, x, -2.0, &spec).unwrap().value;
        let b = integrate_panels(ft, x, -2.0, 16, 20);
        let r = bound_r(l, x).unwrap();
        assert!(r > 0.0);
        assert!((r - r_of(a)).abs() < 1e-8);
        assert!((r - r_of(b)).abs() < 1e-8);
    }

    #[test]
    fn series_and_closed_forms_agree_at_switch() {
        for &nu in &[0.5, 1.0, 5.5] {
            let l = law(nu);
            let k = l.shape();
            // right: both branches of S around z = k + 50
            let z = k + 50.0;
            let t = 2.0 * z;
            let lo = bound_s(l, -nu + t * (1.0 - 1e-9)).unwrap();
            let hi = bound_s(l, -nu + t * (1.0 + 1e-9)).unwrap();
            assert!((lo - hi).abs() < 1e-6 * lo, "{nu}: {lo} {hi}");
            // left: around z = 30
            let lo = bound_r(l, -nu - 60.0 * (1.0 - 1e-9)).unwrap();
            let hi = bound_r(l, -nu - 60.0 * (1.0 + 1e-9)).unwrap();
            assert!((lo - hi).abs() < 1e-8 * lo, "{nu}: {lo} {hi}");
        }
    }

    #[test]
    fn uniform_constant_properties() {
        for &nu in &[0.5, 1.0, 2.0, 5.5] {
            let c = uniform_constant(law(nu));
            assert!(c >= 4.0 / (2.0 + nu));
            assert!(c >= 1.0);
        }
        let spec = QuadratureSpec::default();
        let coarse = ConstantGrid {
            points_per_decade: 20,
            ..Default::default()
        };
        let fine = ConstantGrid {
            points_per_decade: 40,
            ..Default::default()
        };
        let a = uniform_constant_with(law(1.0), &coarse, &spec);
        let b = uniform_constant_with(law(1.0), &fine, &spec);
        assert!((a - b).abs() < 0.01 * b);
    }
}
