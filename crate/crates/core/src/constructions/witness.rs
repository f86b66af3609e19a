//! Finite-horizon search for orbits that separate a gap endpoint from the
//! gap interior by half a fiber turn, which no semi-conjugacy to the
//! rotation can allow.

use serde::{Deserialize, Serialize};

use crate::circle::CirclePoint;
use crate::error::{invalid, Result};
use crate::numerics::circle_distance;
use crate::torus::{SkewState, State, TorusMap};

/// Orbit of `(x_k, 0)`, `x_k` the peak of `I_k`, that comes within `delta`
/// of `(b_{k+n}, n rho2 + 1/2)`, `b_{k+n}` the right endpoint of `I_{k+n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessRecord {
    pub delta: f64,
    pub k: i64,
    pub n: i64,
    /// Embedded length of `I_k`.
    pub gap_length: f64,
    /// Circular distance of the fiber coordinate from `n rho2 + 1/2`.
    pub fiber_distance: f64,
    /// Embedded distance between `x_{k+n}` and `b_{k+n}`.
    pub base_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case", deny_unknown_fields)]
pub enum WitnessOutcome {
    Found(WitnessRecord),
    /// Nothing within the horizon; not a proof that no witness exists.
    NotFound {
        delta: f64,
        k: i64,
        horizon: i64,
    },
}

fn distances(map: &TorusMap, k: i64, n: i64, state: &State) -> Result<(f64, f64)> {
    let sk = map
        .as_skew()
        .ok_or_else(|| invalid("map", "needs a skew product"))?;
    let State::Skew(st) = state else {
        return Err(invalid("state", "needs a skew state"));
    };
    let mut phase = st.y;
    phase.sub_product(n as f64, sk.rho2);
    phase.add(-0.5);
    let fiber = circle_distance(phase.value());
    let x = sk.base.embed(&st.base).x;
    let b = sk.base.embed(&CirclePoint::gap(k + n, 1.0)).x;
    Ok((fiber, circle_distance(b - x)))
}

/// Searches `n <= horizon` for the smallest `k >= 0` with `|I_k| < delta`.
pub fn nonsemiconjugacy_witness(
    map: &TorusMap,
    delta: f64,
    horizon: i64,
) -> Result<WitnessOutcome> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(invalid("delta", "must be positive"));
    }
    let sk = map
        .as_skew()
        .ok_or_else(|| invalid("map", "needs a skew product"))?;
    let k = (0..)
        .find(|&k| sk.base.gap_length(k) < delta)
        .expect("gap lengths tend to zero");
    let start = State::Skew(SkewState::new(CirclePoint::gap(k, 0.5), 0.0));
    for (i, s) in map
        .orbit(&start, false)?
        .take(horizon.max(0) as usize)
        .enumerate()
    {
        let n = i as i64 + 1;
        let s = s?;
        let (fiber, base) = distances(map, k, n, &s)?;
        if fiber < delta / 2.0 && base < delta / 2.0 {
            return Ok(WitnessOutcome::Found(WitnessRecord {
                delta,
                k,
                n,
                gap_length: sk.base.gap_length(k),
                fiber_distance: fiber,
                base_distance: base,
            }));
        }
    }
    Ok(WitnessOutcome::NotFound { delta, k, horizon })
}

impl WitnessRecord {
    /// Recomputes the distances by iterating from scratch.
    pub fn replay(&self, map: &TorusMap) -> Result<WitnessRecord> {
        let start = State::Skew(SkewState::new(CirclePoint::gap(self.k, 0.5), 0.0));
        let end = map.iterate_to(&start, self.n)?;
        let (fiber, base) = distances(map, self.k, self.n, &end)?;
        Ok(WitnessRecord {
            fiber_distance: fiber,
            base_distance: base,
            ..self.clone()
        })
    }
}
