//! Quick invariant checks across every module, for the `selftest` command.

use serde::Serialize;

use crate::bounds::{dw_from_d2, smoothing_in};
use crate::chaos::{
    covariance, cross_malliavin, gamma_discrepancy, mc_gamma_discrepancy, product_formula_check, ChaosElement, Kernel1,
    Kernel2,
};
use crate::distance::{w1_empirical_1d, w1_empirical_2d, SampleBatch, W1Method};
use crate::error::Result;
use crate::experiments::{build_example1, build_example1_reduced, build_example2, example1_discrepancy, fit_rate};
use crate::gamma_law::GammaNu;
use crate::hilbert::{g_function, h_function, orthonormal_frame};
use crate::quadrature::QuadratureSpec;
use crate::stein::{bound_r, bound_s, suite, two_sided_grid, SteinEvaluator};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

struct Recorder(Vec<Check>);

impl Recorder {
    fn check(&mut self, module: &'static str, name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) {
        let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        self.0.push(Check {
            module,
            name,
            pass,
            detail,
        });
    }
}

/// Run every check. Monte Carlo parts use `seed`.
pub fn run(seed: u64) -> SelftestReport {
    let spec = QuadratureSpec::default();
    let mut r = Recorder(Vec::new());

    r.check("gamma_law", "moments", || {
        let mut worst: f64 = 0.0;
        for nu in [0.5, 1.0, 5.5] {
            let l = GammaNu::new(nu)?;
            worst = worst.max((l.expectation(|_| 1.0, &spec)? - 1.0).abs());
            worst = worst.max((l.expectation(|x| x * x, &spec)? - 2.0 * nu).abs());
        }
        Ok((worst < 1e-6, format!("max error {worst:.2e}")))
    });
    r.check("gamma_law", "identity", || {
        let mut worst: f64 = 0.0;
        for nu in [0.5, 2.0] {
            let l = GammaNu::new(nu)?;
            for x in two_sided_grid(nu, 20, 30.0) {
                worst = worst.max(l.identity_residual(x, &spec)?);
            }
        }
        Ok((worst < 1e-8, format!("max residual {worst:.2e}")))
    });

    r.check("stein_solver", "residual", || {
        let mut worst: f64 = 0.0;
        for nu in [0.5, 2.0] {
            let grid = two_sided_grid(nu, 20, 30.0);
            for h in suite::standard_suite() {
                let ev = SteinEvaluator::new(GammaNu::new(nu)?, h, spec);
                worst = worst.max(ev.stein_residual(&grid, &[0.5])?);
            }
        }
        Ok((worst < 1e-6, format!("max residual {worst:.2e}")))
    });
    r.check("stein_solver", "edge limits", || {
        let l = GammaNu::new(1.0)?;
        let s = bound_s(l, -1.0 + 1e-4)?;
        let rr = bound_r(l, -1.0 - 1e-4)?;
        let ok = (s - 4.0 / 3.0).abs() < 1e-2 && (rr - 4.0 / 3.0).abs() < 1e-2;
        Ok((ok, format!("S {s:.4} R {rr:.4}")))
    });

    r.check("hilbert_space", "frame", || {
        let mut fs: Vec<_> = (1..=6).map(h_function).collect();
        fs.extend((1..=6).map(|i| g_function(i, 1.0)));
        let frame = orthonormal_frame(&fs);
        let err = (frame.reconstructed_gram() - crate::hilbert::gram(&fs)).abs().max();
        Ok((
            frame.rank() == 11 && err < 1e-12,
            format!("rank {} reconstruction {err:.1e}", frame.rank()),
        ))
    });

    r.check("chaos", "closed forms", || {
        let (u3, g) = build_example1(3)?;
        let disc = gamma_discrepancy(&u3, 1.0);
        let cross = cross_malliavin(&u3, &g.into())?;
        let mc = mc_gamma_discrepancy(&u3, 1.0, 200_000, seed);
        let ok = (disc - 10.0).abs() < 1e-12 && (cross - 2.0).abs() < 1e-12 && mc.z_score(disc) < 4.0;
        Ok((ok, format!("disc {disc} cross {cross} mc z {:.2}", mc.z_score(disc))))
    });
    r.check("chaos", "product formula", || {
        let (u3, _) = build_example1(3)?;
        let f: ChaosElement = u3.into();
        let g: ChaosElement = Kernel1::basis(1, 3).into();
        let e: ChaosElement = Kernel2::basis_square(0, 1).into();
        let d1 = product_formula_check(&f, &g, 200, seed)?;
        let d2 = product_formula_check(&e, &e, 200, seed)?;
        Ok((d1 < 1e-10 && d2 < 1e-10, format!("max deviation {:.1e}", d1.max(d2))))
    });

    r.check("bounds", "smoothing", || {
        let i1 = smoothing_in(1)?;
        let dw = dw_from_d2(1, 0.01)?;
        let ok = (i1 - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-10 && (dw - 0.37948).abs() < 1e-3;
        Ok((ok, format!("I_1 {i1:.10} dw {dw:.5}")))
    });

    r.check("distance_mc", "examples", || {
        let a = SampleBatch::from_values(&[1.0, 2.0, 3.0], None)?;
        let b = SampleBatch::from_values(&[2.0, 3.0, 5.0], None)?;
        let p = SampleBatch::from_pairs(&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], None)?;
        let q = SampleBatch::from_pairs(&[1.0, 2.0, 0.0], &[1.0, 0.0, 2.0], None)?;
        let d1 = w1_empirical_1d(&a, &b)?;
        let d2 = w1_empirical_2d(&p, &q, W1Method::Exact)?;
        let ok = (d1 - 4.0 / 3.0).abs() < 1e-12 && (d2 - (2f64.sqrt() + 2.0) / 3.0).abs() < 1e-12;
        Ok((ok, format!("1d {d1:.6} 2d {d2:.6}")))
    });

    r.check("experiments", "example 1", || {
        let ns: Vec<usize> = vec![10, 30, 100, 300, 1000];
        let mut worst: f64 = 0.0;
        let mut disc = vec![];
        for &n in &ns {
            let (u, _) = build_example1_reduced(n)?;
            let d = gamma_discrepancy(&u, 1.0);
            worst = worst.max((d / example1_discrepancy(n) - 1.0).abs());
            disc.push(d);
        }
        let slope = fit_rate(&ns, &disc)?.slope;
        Ok((
            worst < 1e-14 && (slope + 1.0).abs() < 0.1,
            format!("rel err {worst:.1e} slope {slope:.3}"),
        ))
    });
    r.check("experiments", "example 2", || {
        let ex = build_example2(3, 1.0)?;
        let c = covariance(&ex.u, &ex.v)?;
        Ok((
            (c - 1.0).abs() < 1e-12 && ex.rank_deficit() == 1,
            format!("E[UV] {c} rank {}", ex.rank),
        ))
    });

    SelftestReport { checks: r.0 }
}

#[cfg(test)]
mod tests {
    #[test]
    fn selftest_passes() {
        let report = super::run(1);
        let failed: Vec<_> = report.failures().collect();
        assert!(failed.is_empty(), "{failed:?}");
        assert!(report.all_passed());
    }
}
