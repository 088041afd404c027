//! Computable upper bounds on the second Wasserstein distance between a
//! chaos vector and the product of a centered Gamma law with the law of the
//! remaining components, and the smoothing constants linking it to `d_W`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::chaos::{cross_malliavin, gamma_discrepancy, ChaosVector, Kernel2};
use crate::error::{Error, Result};
use crate::gamma_law::GammaNu;
use crate::stein::uniform_constant;

/// Parts of a chaos bound. `total = constant·(√discrepancy + Σ√cross) + marginal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub discrepancy: f64,
    pub cross_terms: Vec<f64>,
    pub marginal_d2: f64,
    pub constant: f64,
    pub total: f64,
}

impl BoundReport {
    /// Assemble a report from its parts.
    pub fn assemble(discrepancy: f64, cross_terms: Vec<f64>, marginal_d2: f64, constant: f64) -> Self {
        let root_sum = discrepancy.sqrt() + cross_terms.iter().map(|c| c.sqrt()).sum::<f64>();
        Self {
            discrepancy,
            cross_terms,
            marginal_d2,
            constant,
            total: constant * root_sum + marginal_d2,
        }
    }

    /// Sum of the cross terms.
    pub fn cross_total(&self) -> f64 {
        self.cross_terms.iter().sum()
    }
}

/// `uniform_constant(ν)`, memoized per `ν` for the process lifetime.
pub fn cached_constant(nu: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let law = GammaNu::new(nu)?;
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&c) = cache.lock().expect("constant cache poisoned").get(&nu.to_bits()) {
        return Ok(c);
    }
    let c = uniform_constant(law);
    cache.lock().expect("constant cache poisoned").insert(nu.to_bits(), c);
    Ok(c)
}

/// Chaos bound with the uniform solution constant for `ν`.
pub fn d2_bound_chaos(x: &Kernel2, ys: &ChaosVector, nu: f64, marginal_d2: f64) -> Result<BoundReport> {
    let c = cached_constant(nu)?;
    d2_bound_chaos_with_constant(x, ys, nu, marginal_d2, c)
}

/// Chaos bound with a caller-chosen constant.
pub fn d2_bound_chaos_with_constant(
    x: &Kernel2,
    ys: &ChaosVector,
    nu: f64,
    marginal_d2: f64,
    constant: f64,
) -> Result<BoundReport> {
    GammaNu::new(nu)?;
    if !(marginal_d2 >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "marginal_d2",
            value: marginal_d2,
        });
    }
    if !ys.is_empty() && ys.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: ys.dim(),
        });
    }
    let cross = ys
        .elements()
        .iter()
        .map(|y| cross_malliavin(x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::assemble(
        gamma_discrepancy(x, nu),
        cross,
        marginal_d2,
        constant,
    ))
}

/// Mean norm of a standard `n`-dimensional Gaussian vector.
pub fn smoothing_in(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter { name: "n", value: 0.0 });
    }
    let n = n as f64;
    Ok(std::f64::consts::SQRT_2 * (ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0)).exp())
}

/// `d_W` bound implied by a `d2` bound in dimension `n`.
pub fn dw_from_d2(n: usize, d2_value: f64) -> Result<f64> {
    if !(d2_value >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "d2_value",
            value: d2_value,
        });
    }
    let i_n = smoothing_in(n)?;
    Ok((32.0 * i_n / std::f64::consts::PI.sqrt()).sqrt() * d2_value.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::{ChaosElement, Kernel1};
    use proptest::prelude::*;

    #[test]
    fn exact_gamma_on_disjoint_coordinates() {
        let x = Kernel2::basis_square(0, 2);
        let ys = ChaosVector::new(vec![Kernel2::basis_square(1, 2).into()]).unwrap();
        let r = d2_bound_chaos(&x, &ys, 1.0, 0.0).unwrap();
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = Kernel2::basis_square(0, 2);
        let ys = ChaosVector::new(vec![Kernel1::basis(0, 3).into()]).unwrap();
        assert!(d2_bound_chaos_with_constant(&x, &ys, 1.0, 0.0, 1.0).is_err());
        let ys = ChaosVector::new(vec![]).unwrap();
        assert!(d2_bound_chaos_with_constant(&x, &ys, 1.0, -1.0, 1.0).is_err());
        assert!(d2_bound_chaos_with_constant(&x, &ys, 0.0, 0.0, 1.0).is_err());
        assert!(smoothing_in(0).is_err());
        assert!(dw_from_d2(1, -0.1).is_err());
    }

    #[test]
    fn smoothing_constants() {
        let pi = std::f64::consts::PI;
        assert!((smoothing_in(1).unwrap() - (2.0 / pi).sqrt()).abs() < 1e-14);
        assert!((smoothing_in(2).unwrap() - (pi / 2.0).sqrt()).abs() < 1e-14);
        for n in 1..20 {
            assert!(smoothing_in(n + 1).unwrap() > smoothing_in(n).unwrap());
        }
        assert_eq!(dw_from_d2(1, 0.0).unwrap(), 0.0);
        assert!((dw_from_d2(1, 0.01).unwrap() - 0.37948).abs() < 1e-3);
    }

    #[test]
    fn report_round_trips_through_json() {
        let r = BoundReport::assemble(0.25, vec![0.04, 0.01], 0.1, 2.0);
        assert!((r.total - (2.0 * (0.5 + 0.2 + 0.1) + 0.1)).abs() < 1e-15);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<BoundReport>(&s).unwrap(), r);
    }

    proptest! {
        #[test]
        fn totals_grow_with_components(v in prop::collection::vec(-1.0f64..1.0, 9), w in prop::collection::vec(-1.0f64..1.0, 3)) {
            let x = Kernel2::new(nalgebra::DMatrix::from_row_slice(3, 3, &v)).unwrap();
            let y1: ChaosElement = Kernel2::basis_square(2, 3).into();
            let y2: ChaosElement = Kernel1::new(nalgebra::DVector::from_vec(w)).into();
            let one = ChaosVector::new(vec![y1.clone()]).unwrap();
            let two = ChaosVector::new(vec![y1, y2]).unwrap();
            let a = d2_bound_chaos_with_constant(&x, &one, 1.0, 0.0, 1.5).unwrap();
            let b = d2_bound_chaos_with_constant(&x, &two, 1.0, 0.0, 1.5).unwrap();
            prop_assert!(b.total >= a.total);
            prop_assert!(a.cross_terms.iter().all(|&c| c >= 0.0));
        }

        #[test]
        fn dw_is_monotone(n in 1usize..30, d in 0.0f64..10.0) {
            prop_assert!(dw_from_d2(n + 1, d).unwrap() >= dw_from_d2(n, d).unwrap());
            prop_assert!(dw_from_d2(n, d + 0.1).unwrap() > dw_from_d2(n, d).unwrap());
        }
    }
}
