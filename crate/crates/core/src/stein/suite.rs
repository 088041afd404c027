//! Test functions `h(x, y)` with their derivatives and declared sup norms.

use std::fmt;
use std::sync::Arc;

type ValueFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
type MixedFn = Arc<dyn Fn(f64, &[f64], usize) -> f64 + Send + Sync>;
type SupFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type MixedSupFn = Arc<dyn Fn(&[f64], usize) -> f64 + Send + Sync>;

/// Evaluator bundle for `h`, `∂h/∂x` and `∂²h/∂x∂y_j`.
///
/// Sup norms are taken over `x` for a fixed `y` and must be declared by the
/// constructor; nothing here estimates them.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    arity: usize,
    value: ValueFn,
    dx: ValueFn,
    dxdy: MixedFn,
    sup_dx: SupFn,
    sup_dxdy: MixedSupFn,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .finish_non_exhaustive()
    }
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        value: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        dx: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        dxdy: impl Fn(f64, &[f64], usize) -> f64 + Send + Sync + 'static,
        sup_dx: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        sup_dxdy: impl Fn(&[f64], usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            arity,
            value: Arc::new(value),
            dx: Arc::new(dx),
            dxdy: Arc::new(dxdy),
            sup_dx: Arc::new(sup_dx),
            sup_dxdy: Arc::new(sup_dxdy),
        }
    }

    /// A function of `x` alone, extended constantly in `y`.
    pub fn univariate(
        name: impl Into<String>,
        arity: usize,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dx: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sup_dx: f64,
    ) -> Self {
        Self::new(
            name,
            arity,
            move |x, _| value(x),
            move |x, _| dx(x),
            |_, _, _| 0.0,
            move |_| sup_dx,
            |_, _| 0.0,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn value(&self, x: f64, y: &[f64]) -> f64 {
        (self.value)(x, y)
    }

    pub fn dx(&self, x: f64, y: &[f64]) -> f64 {
        (self.dx)(x, y)
    }

    pub fn dxdy(&self, x: f64, y: &[f64], j: usize) -> f64 {
        (self.dxdy)(x, y, j)
    }

    /// Declared `sup_x |∂h/∂x(x, y)|`.
    pub fn sup_dx(&self, y: &[f64]) -> f64 {
        (self.sup_dx)(y)
    }

    /// Declared `sup_x |∂²h/∂x∂y_j(x, y)|`.
    pub fn sup_dxdy(&self, y: &[f64], j: usize) -> f64 {
        (self.sup_dxdy)(y, j)
    }

    /// `a·h1 + b·h2`; sup norms combine by the triangle inequality.
    pub fn linear_combination(a: f64, h1: &Self, b: f64, h2: &Self) -> Self {
        let arity = h1.arity.max(h2.arity);
        let name = format!("{a}*{} + {b}*{}", h1.name, h2.name);
        let (v1, v2) = (h1.value.clone(), h2.value.clone());
        let (d1, d2) = (h1.dx.clone(), h2.dx.clone());
        let (m1, m2) = (h1.dxdy.clone(), h2.dxdy.clone());
        let (s1, s2) = (h1.sup_dx.clone(), h2.sup_dx.clone());
        let (t1, t2) = (h1.sup_dxdy.clone(), h2.sup_dxdy.clone());
        Self::new(
            name,
            arity,
            move |x, y| a * v1(x, y) + b * v2(x, y),
            move |x, y| a * d1(x, y) + b * d2(x, y),
            move |x, y, j| a * m1(x, y, j) + b * m2(x, y, j),
            move |y| a.abs() * s1(y) + b.abs() * s2(y),
            move |y, j| a.abs() * t1(y, j) + b.abs() * t2(y, j),
        )
    }
}

/// `h(x, y) = x`.
pub fn identity() -> TestFunction {
    TestFunction::univariate("x", 1, |x| x, |_| 1.0, 1.0)
}

/// `h(x, y) = c`.
pub fn constant(c: f64) -> TestFunction {
    TestFunction::univariate(format!("{c}"), 1, move |_| c, |_| 0.0, 0.0)
}

/// `h(x, y) = x·y_1`.
pub fn x_times_y1() -> TestFunction {
    TestFunction::new(
        "x*y1",
        1,
        |x, y| x * y[0],
        |_, y| y[0],
        |_, _, j| if j == 0 { 1.0 } else { 0.0 },
        |y| y[0].abs(),
        |_, j| if j == 0 { 1.0 } else { 0.0 },
    )
}

/// `h(x, y) = sin x`.
pub fn sine() -> TestFunction {
    TestFunction::univariate("sin(x)", 1, f64::sin, f64::cos, 1.0)
}

/// `h(x, y) = tanh(x) / (1 + y_1²)`.
pub fn damped_tanh() -> TestFunction {
    TestFunction::new(
        "tanh(x)/(1+y1^2)",
        1,
        |x, y| x.tanh() / (1.0 + y[0] * y[0]),
        |x, y| {
            let s = 1.0 / x.cosh();
            s * s / (1.0 + y[0] * y[0])
        },
        |x, y, j| {
            if j != 0 {
                return 0.0;
            }
            let s = 1.0 / x.cosh();
            let d = 1.0 + y[0] * y[0];
            -2.0 * y[0] * s * s / (d * d)
        },
        |y| 1.0 / (1.0 + y[0] * y[0]),
        |y, j| {
            if j != 0 {
                return 0.0;
            }
            let d = 1.0 + y[0] * y[0];
            2.0 * y[0].abs() / (d * d)
        },
    )
}

/// `h(x, y) = exp(-x²)`.
pub fn gaussian_bump() -> TestFunction {
    TestFunction::univariate(
        "exp(-x^2)",
        1,
        |x| (-x * x).exp(),
        |x| -2.0 * x * (-x * x).exp(),
        (2.0f64).sqrt() * (-0.5f64).exp(),
    )
}

/// `h(x, y) = x·cos(y_1)`.
pub fn x_cos_y1() -> TestFunction {
    TestFunction::new(
        "x*cos(y1)",
        1,
        |x, y| x * y[0].cos(),
        |_, y| y[0].cos(),
        |_, y, j| if j == 0 { -y[0].sin() } else { 0.0 },
        |y| y[0].cos().abs(),
        |y, j| if j == 0 { y[0].sin().abs() } else { 0.0 },
    )
}

/// The standard certification suite.
pub fn standard_suite() -> Vec<TestFunction> {
    vec![identity(), x_times_y1(), sine(), damped_tanh(), gaussian_bump()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_dx(h: &TestFunction, x: f64, y: &[f64]) -> f64 {
        let e = 1e-6;
        (h.value(x + e, y) - h.value(x - e, y)) / (2.0 * e)
    }

    fn fd_dxdy(h: &TestFunction, x: f64, y: &[f64], j: usize) -> f64 {
        let e = 1e-5;
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[j] += e;
        ym[j] -= e;
        (h.dx(x, &yp) - h.dx(x, &ym)) / (2.0 * e)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut all = standard_suite();
        all.push(x_cos_y1());
        for h in &all {
            for &x in &[-3.0, -0.4, 0.0, 0.9, 2.5] {
                for &y in &[-1.2, 0.0, 0.5, 2.0] {
                    let y = [y];
                    assert!((h.dx(x, &y) - fd_dx(h, x, &y)).abs() < 1e-7, "{}", h.name());
                    assert!((h.dxdy(x, &y, 0) - fd_dxdy(h, x, &y, 0)).abs() < 1e-6, "{}", h.name());
                    assert!(h.dx(x, &y).abs() <= h.sup_dx(&y) + 1e-15);
                    assert!(h.dxdy(x, &y, 0).abs() <= h.sup_dxdy(&y, 0) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn bump_sup_is_attained() {
        let h = gaussian_bump();
        let x = 0.5f64.sqrt();
        assert!((h.dx(-x, &[0.0]) - h.sup_dx(&[0.0])).abs() < 1e-15);
    }

    #[test]
    fn combination_is_linear() {
        let h = TestFunction::linear_combination(2.0, &sine(), -3.0, &x_times_y1());
        let y = [0.7];
        assert!((h.value(1.1, &y) - (2.0 * 1.1f64.sin() - 3.0 * 1.1 * 0.7)).abs() < 1e-15);
        assert!((h.sup_dx(&y) - (2.0 + 3.0 * 0.7)).abs() < 1e-15);
    }
}
