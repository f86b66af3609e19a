//! The explicit constructions: the bounded-mean-motion skew product built
//! from the triangular sequence, the three deviation examples, and finite
//! Anosov-Katok stages.

pub mod ak;
pub mod alpha;
pub mod beta;
pub mod witness;

use serde::{Deserialize, Serialize};

use crate::circle::{CirclePoint, DenjoySystem};
use crate::error::{invalid, Result};
use crate::numerics::harmonic;
use crate::torus::{make_skew_product, SkewState, State, TorusMap};
use beta::{tent, window, BetaFunction};

/// `((sqrt 5 - 1)/2, sqrt 2 - 1)`: `{1, rho1, rho2}` is rationally independent.
pub fn default_rho() -> [f64; 2] {
    [(5f64.sqrt() - 1.0) / 2.0, 2f64.sqrt() - 1.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleVariant {
    /// Bounded mean motion, not semi-conjugate to the rotation.
    BoundedDrift,
    /// Deviations unbounded along `e2`, bounded on every orbit's future limit.
    ExA,
    /// Deviations bounded on each orbit, unbounded over all points.
    ExB,
    /// One-sided: deviations bounded below, unbounded above.
    ExC,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExampleParams {
    pub gap_mass: f64,
    pub n_trunc: i64,
    /// Number of nested families for `ExB`.
    pub k_max: u32,
    /// Largest admissible window `2^(k_max^2)` for `ExB`.
    pub window_limit: u64,
}

impl Default for ExampleParams {
    fn default() -> Self {
        ExampleParams {
            gap_mass: 0.5,
            n_trunc: crate::circle::DEFAULT_TRUNCATION,
            k_max: 4,
            window_limit: 1 << 16,
        }
    }
}

pub fn build_example(
    variant: ExampleVariant,
    rho: [f64; 2],
    params: &ExampleParams,
) -> Result<TorusMap> {
    let (beta, families) = match variant {
        ExampleVariant::BoundedDrift => (BetaFunction::BoundedDrift, 0),
        ExampleVariant::ExA => (BetaFunction::ExampleA, 0),
        ExampleVariant::ExC => (BetaFunction::ExampleC, 0),
        ExampleVariant::ExB => {
            let k = params.k_max;
            if k == 0 {
                return Err(invalid("k_max", "must be at least 1"));
            }
            match window(k) {
                Some(w) if w <= params.window_limit => {}
                _ => {
                    return Err(invalid(
                        "k_max",
                        format!(
                            "window 2^({k}^2) exceeds the limit {}; orbits would need that many steps to leave the support",
                            params.window_limit
                        ),
                    ))
                }
            }
            (BetaFunction::ExampleB { k_max: k }, k)
        }
    };
    let base = DenjoySystem::with_truncation(rho[0], params.gap_mass, families, params.n_trunc)?;
    crate::circle::check_irrational(rho[1])?;
    make_skew_product(base, rho[1], beta)
}

/// Peak of the wandering interval `I_n` at fiber height `y`.
pub fn peak(index: i64, y: f64) -> State {
    State::Skew(SkewState::new(CirclePoint::gap(index, 0.5), y))
}

/// Peak of the nested interval `I^k_n`.
pub fn subfamily_peak(k: u32, index: i64, y: f64) -> State {
    State::Skew(SkewState::new(
        CirclePoint::Gap {
            family: k,
            index,
            t: 0.5,
        },
        y,
    ))
}

/// Closed form of the fiber deviation of the bounded-mean-motion map from a
/// point of `I_m` at position `t`: `tent(t) (S_{m+n-1} - S_{m-1})`.
pub fn bounded_drift_window_sum(m: i64, n: i64, t: f64) -> f64 {
    tent(t) * (alpha::partial_sum(m + n - 1) - alpha::partial_sum(m - 1))
}

/// Range `sup_n D_e2 - inf_n D_e2` along the orbit of the peak of `I^k_0`,
/// by direct summation: `(2/k) H_{2^(k^2)}`.
pub fn exb_orbit_range_oracle(k: u32) -> Option<f64> {
    Some(2.0 * harmonic(window(k)?) / k as f64)
}

/// Measured range of `D_e2` over `n in [-W, W + 1]` along the orbit of the
/// peak of `I^k_0`, where `W = 2^(k^2)`.
pub fn exb_orbit_range(map: &TorusMap, k: u32) -> Result<f64> {
    let sk = map
        .as_skew()
        .ok_or_else(|| invalid("map", "needs a skew product"))?;
    let w = window(k).ok_or_else(|| invalid("k", "window overflows"))? as i64;
    let rho = [sk.base.rho1(), sk.rho2];
    let z = subfamily_peak(k, 0, 0.0);
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for (backward, len) in [(false, w + 1), (true, w)] {
        let sign = if backward { -1 } else { 1 };
        for (i, s) in map.orbit(&z, backward)?.take(len as usize).enumerate() {
            let d = map.deviation(&z, &s?, sign * (i as i64 + 1), rho)[1];
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    Ok(hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_infeasible_window_and_rational_rho() {
        let p = ExampleParams {
            k_max: 5,
            ..Default::default()
        };
        assert!(build_example(ExampleVariant::ExB, default_rho(), &p).is_err());
        assert!(build_example(
            ExampleVariant::BoundedDrift,
            [0.5, 0.3],
            &ExampleParams::default()
        )
        .is_err());
        assert!(build_example(
            ExampleVariant::BoundedDrift,
            [default_rho()[0], 0.25],
            &ExampleParams::default()
        )
        .is_err());
    }

    #[test]
    fn exb_range_oracle_values() {
        assert!((exb_orbit_range_oracle(1).unwrap() - 3.0).abs() < 1e-15);
        let r3 = exb_orbit_range_oracle(3).unwrap();
        assert!((r3 - 2.0 * harmonic(512) / 3.0).abs() < 1e-15);
        assert!((r3 - 4.544).abs() < 1e-3);
    }
}
