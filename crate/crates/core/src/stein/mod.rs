//! Bounded solution of `2(x+nu) ∂f/∂x - x f = h(x, y) - E[h(Z, y)]`.
//!
//! The solution is evaluated through integrals of `∂h/∂x` against `F`,
//! `1 - F` and the mirrored tail `F̃`, which stay well conditioned at the
//! support edge and in both tails.

mod constants;
pub mod suite;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub use constants::{bound_r, bound_s, uniform_constant, uniform_constant_with, ConstantGrid};
pub use suite::TestFunction;

use crate::error::{Error, Result};
use crate::gamma_law::GammaNu;
use crate::quadrature::{integrate, QuadratureSpec};
use crate::special::ln_regularized_gamma;

/// Relative half-width of the window around `-nu` where limit formulas are used.
pub const LIMIT_WINDOW: f64 = 1e-6;

/// Extra length beyond the tail cutoff for integrals weighted by `1 - F`
/// relative to the density at the evaluation point.
const TAIL_PAD: f64 = 60.0;

type Memo = Mutex<HashMap<Vec<u64>, Arc<OnceLock<Result<f64>>>>>;

/// Evaluator of `f_h` for one test function and one law.
pub struct SteinEvaluator {
    law: GammaNu,
    h: TestFunction,
    spec: QuadratureSpec,
    cutoff: f64,
    expected: Memo,
    edge_gap: Memo,
}

impl std::fmt::Debug for SteinEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SteinEvaluator")
            .field("law", &self.law)
            .field("h", &self.h)
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

fn memo_key(y: &[f64]) -> Vec<u64> {
    y.iter().map(|v| v.to_bits()).collect()
}

fn memoized(memo: &Memo, y: &[f64], compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
    let cell = {
        let mut map = memo.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(memo_key(y)).or_default().clone()
    };
    cell.get_or_init(compute).clone()
}

impl SteinEvaluator {
    pub fn new(law: GammaNu, h: TestFunction, spec: QuadratureSpec) -> Self {
        let cutoff = law.upper_cutoff(&spec);
        Self {
            law,
            h,
            spec,
            cutoff,
            expected: Mutex::new(HashMap::new()),
            edge_gap: Mutex::new(HashMap::new()),
        }
    }

    pub fn law(&self) -> GammaNu {
        self.law
    }

    pub fn test_function(&self) -> &TestFunction {
        &self.h
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    fn check_arity(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.h.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.h.arity(),
                found: y.len(),
            });
        }
        Ok(())
    }

    /// Whether `x` falls in the window where limit formulas replace the integrals.
    pub fn in_limit_window(&self, x: f64) -> bool {
        let nu = self.law.nu();
        (x + nu).abs() < LIMIT_WINDOW * nu.max(1.0)
    }

    /// `E[h(Z, y)]`, computed once per distinct `y`.
    pub fn expected_h(&self, y: &[f64]) -> Result<f64> {
        self.check_arity(y)?;
        memoized(&self.expected, y, || {
            self.law
                .expectation_with_slope(|x| self.h.value(x, y), |x| self.h.dx(x, y), &self.tight_spec())
        })
    }

    /// Tolerances for the per-`y` integrals. Errors in these are divided by
    /// `2|x + nu|` near the edge, and they are memoized, so they are computed
    /// tighter than the rest.
    fn tight_spec(&self) -> QuadratureSpec {
        QuadratureSpec {
            abs_tol: 1e-2 * self.spec.abs_tol,
            rel_tol: 1e-2 * self.spec.rel_tol,
            ..self.spec
        }
    }

    /// Number of distinct `y` for which `E[h(Z, y)]` has been computed.
    pub fn memo_len(&self) -> usize {
        self.expected.lock().map(|m| m.len()).unwrap_or(0)
    }

    /// `∫_{-nu}^∞ ∂h/∂x (1 - F)`, which equals `E h - h(-nu)`.
    fn edge_gap(&self, y: &[f64]) -> Result<f64> {
        memoized(&self.edge_gap, y, || {
            let nu = self.law.nu();
            let k = self.law.shape();
            let c = self.cutoff;
            let body = self.law.integrate_offset(
                |s| self.h.dx(s - nu, y) * ln_regularized_gamma(k, 0.5 * s).1.exp(),
                c + nu,
                &self.tight_spec(),
            )?;
            let tail_area = 2.0 * (c + nu) * self.law.ln_density_p_offset(c + nu).exp() - c * self.law.survival(c);
            Ok(body + self.h.dx(c, y) * tail_area)
        })
    }

    /// `(∫_{-nu}^x ∂h/∂x F, ∫_x^∞ ∂h/∂x (1 - F) / p(x))` for `x > -nu`.
    fn right_integrals(&self, t: f64, y: &[f64]) -> Result<(f64, f64)> {
        let nu = self.law.nu();
        let k = self.law.shape();
        let i1 = self.law.integrate_offset(
            |s| self.h.dx(s - nu, y) * ln_regularized_gamma(k, 0.5 * s).0.exp(),
            t,
            &self.spec,
        )?;
        let ln_px = self.law.ln_density_p_offset(t);
        let upper = (self.cutoff + nu).max(t) + TAIL_PAD;
        let i2 = integrate(
            |s| self.h.dx(s - nu, y) * (ln_regularized_gamma(k, 0.5 * s).1 - ln_px).exp(),
            t,
            upper,
            &self.spec,
        )?
        .value;
        Ok((i1, i2))
    }

    /// `(∫_x^{-nu} ∂h/∂x (F̃(x) - F̃(w)) / q(x) dw, ∫_x^{-nu} ∂h/∂x)` for `x < -nu`.
    fn left_integrals(&self, t: f64, y: &[f64]) -> Result<(f64, f64)> {
        let nu = self.law.nu();
        let x = -nu - t;
        let ratio = self.law.tail_ratio(x)?;
        let ln_fx = self.law.ln_tail_ftilde(x)?;
        let k = self.law.shape();
        let kt = self.law.integrate_offset(
            |s| {
                let ln_fw = crate::special::ln_reversed_incomplete_gamma(k, 0.5 * s);
                -self.h.dx(-nu - s, y) * ratio * (ln_fw - ln_fx).exp_m1()
            },
            t,
            &self.spec,
        )?;
        let kd = integrate(|s| self.h.dx(-nu - s, y), 0.0, t, &self.spec)?.value;
        Ok((kt, kd))
    }

    /// Value at `x = -nu`: `(h(-nu, y) - E h) / nu`.
    pub fn limit_value(&self, y: &[f64]) -> Result<f64> {
        let nu = self.law.nu();
        Ok((self.h.value(-nu, y) - self.expected_h(y)?) / nu)
    }

    /// Derivative at `x = -nu`.
    pub fn limit_derivative(&self, y: &[f64]) -> Result<f64> {
        let nu = self.law.nu();
        let centered = self.h.value(-nu, y) - self.expected_h(y)?;
        Ok(self.h.dx(-nu, y) / (2.0 + nu) + centered / (nu * (2.0 + nu)))
    }

    /// `f_h(x, y)`.
    pub fn evaluate_fh(&self, x: f64, y: &[f64]) -> Result<f64> {
        self.check_arity(y)?;
        if self.in_limit_window(x) {
            return self.limit_value(y);
        }
        Ok(self.value_and_direct_derivative(x, y)?.0)
    }

    /// `∂f_h/∂x(x, y)` from the equation itself.
    pub fn evaluate_dfh_dx(&self, x: f64, y: &[f64]) -> Result<f64> {
        self.check_arity(y)?;
        if self.in_limit_window(x) {
            return self.limit_derivative(y);
        }
        let f = self.evaluate_fh(x, y)?;
        let centered = self.h.value(x, y) - self.expected_h(y)?;
        Ok((x * f + centered) / (2.0 * (x + self.law.nu())))
    }

    /// `(f_h, ∂f_h/∂x)` outside the limit window, the derivative taken from
    /// the integral representation rather than from the equation.
    pub fn value_and_direct_derivative(&self, x: f64, y: &[f64]) -> Result<(f64, f64)> {
        self.check_arity(y)?;
        let nu = self.law.nu();
        if self.in_limit_window(x) {
            return Err(Error::Domain {
                what: "limit window",
                value: x,
            });
        }
        if x > -nu {
            let t = x + nu;
            let (i1, i2_scaled) = self.right_integrals(t, y)?;
            let (_, ln_q) = ln_regularized_gamma(self.law.shape(), 0.5 * t);
            let ln_px = self.law.ln_density_p_offset(t);
            let cdf = self.law.cdf(x);
            let f = -((ln_q - ln_px).exp() * i1 + cdf * i2_scaled) / (2.0 * t);
            let i2 = i2_scaled * ln_px.exp();
            let df = (i1 - i2 + x * f) / (2.0 * t);
            Ok((f, df))
        } else {
            let t = -(x + nu);
            let (kt, kd) = self.left_integrals(t, y)?;
            let j = self.edge_gap(y)?;
            let ratio = self.law.tail_ratio(x)?;
            let f = -(kt + ratio * j) / (2.0 * t);
            let df = -(x * f - kd - j) / (2.0 * t);
            Ok((f, df))
        }
    }

    /// `max_x |2(x+nu) ∂f/∂x - x f - (h - E h)|` over `grid`, with the
    /// derivative from the integral representation.
    pub fn stein_residual(&self, grid: &[f64], y: &[f64]) -> Result<f64> {
        let nu = self.law.nu();
        let eh = self.expected_h(y)?;
        let mut worst: f64 = 0.0;
        for &x in grid {
            let (f, df) = self.value_and_direct_derivative(x, y)?;
            let r = (2.0 * (x + nu) * df - x * f - (self.h.value(x, y) - eh)).abs();
            worst = worst.max(r);
        }
        Ok(worst)
    }
}

/// `points` offsets per branch, log-spaced in `[1e-4, span]` on each side of `-nu`.
pub fn two_sided_grid(nu: f64, points: usize, span: f64) -> Vec<f64> {
    let lo = 1e-4f64.ln();
    let hi = span.ln();
    let mut grid = Vec::with_capacity(2 * points);
    for i in 0..points {
        let s = (lo + (hi - lo) * i as f64 / (points - 1).max(1) as f64).exp();
        grid.push(-nu - s);
        grid.push(-nu + s);
    }
    grid.sort_by(f64::total_cmp);
    grid
}
