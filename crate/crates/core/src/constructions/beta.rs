//! Fiber increments supported on the wandering intervals.

use serde::{Deserialize, Serialize};

use super::alpha::{alpha_triangular, block_of};
use crate::circle::{subfamily_span, CirclePoint, DenjoySystem};

/// Tent profile on `[0, 1]` with peak 1 at `t = 1/2`.
#[inline]
pub fn tent(t: f64) -> f64 {
    (1.0 - (2.0 * t - 1.0).abs()).max(0.0)
}

/// Largest admissible window cap: `2^(k^2)` must fit the configured limit.
pub fn window(k: u32) -> Option<u64> {
    1u64.checked_shl(k.checked_mul(k)?)
}

/// Fiber increment `beta`, zero on base points and at gap endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaFunction {
    Zero,
    /// `alpha_n * tent` on `I_n`.
    BoundedDrift,
    /// `tent / |n|` on `I_n` for `n <= -1`.
    ExampleA,
    /// `tent / (k |n|)` on `I^k_n` for `1 <= |n| <= 2^(k^2)`, `k <= k_max`.
    ExampleB {
        k_max: u32,
    },
    /// `tent / n` on `I_n` for `n >= 1`.
    ExampleC,
}

impl BetaFunction {
    pub fn eval(&self, p: &CirclePoint) -> f64 {
        let CirclePoint::Gap { family, index, t } = *p else {
            return 0.0;
        };
        match self {
            BetaFunction::Zero => 0.0,
            BetaFunction::BoundedDrift => {
                let s = DenjoySystem::relative_position(p).map_or(0.0, |r| r.1);
                alpha_triangular(index) * tent(s)
            }
            BetaFunction::ExampleA => {
                if index <= -1 {
                    let s = DenjoySystem::relative_position(p).map_or(0.0, |r| r.1);
                    tent(s) / index.unsigned_abs() as f64
                } else {
                    0.0
                }
            }
            BetaFunction::ExampleC => {
                if index >= 1 {
                    let s = DenjoySystem::relative_position(p).map_or(0.0, |r| r.1);
                    tent(s) / index as f64
                } else {
                    0.0
                }
            }
            BetaFunction::ExampleB { k_max } => {
                let Some((k, tk)) = resolve_family(family, t, *k_max) else {
                    return 0.0;
                };
                let n = index.unsigned_abs();
                match window(k) {
                    Some(w) if n >= 1 && n <= w => tent(tk) / (k as f64 * n as f64),
                    _ => 0.0,
                }
            }
        }
    }

    /// `sup_{x in I_n} |beta(x)|`.
    pub fn amplitude(&self, n: i64) -> f64 {
        match self {
            BetaFunction::Zero => 0.0,
            BetaFunction::BoundedDrift => alpha_triangular(n).abs(),
            BetaFunction::ExampleA => {
                if n <= -1 {
                    1.0 / n.unsigned_abs() as f64
                } else {
                    0.0
                }
            }
            BetaFunction::ExampleC => {
                if n >= 1 {
                    1.0 / n as f64
                } else {
                    0.0
                }
            }
            BetaFunction::ExampleB { k_max } => {
                let m = n.unsigned_abs();
                if m == 0 {
                    return 0.0;
                }
                (1..=*k_max)
                    .find(|&k| window(k).is_some_and(|w| m <= w))
                    .map_or(0.0, |k| 1.0 / (k as f64 * m as f64))
            }
        }
    }

    /// `sup_{|m| > n} amplitude(m)`.
    pub fn amplitude_tail(&self, n: i64) -> f64 {
        let n = n.max(0);
        match self {
            BetaFunction::Zero => 0.0,
            BetaFunction::BoundedDrift => 1.0 / block_of(n + 1).0 as f64,
            _ => 1.0 / (n + 1) as f64,
        }
    }

    /// Steepest slope of `beta` on `I_n` in the embedded coordinate.
    pub fn slope(&self, sys: &DenjoySystem, n: i64) -> f64 {
        let width = match self {
            BetaFunction::ExampleB { k_max } => {
                let m = n.unsigned_abs();
                let k = (1..=*k_max).find(|&k| window(k).is_some_and(|w| m <= w));
                match k {
                    Some(k) => {
                        let (a, b) = subfamily_span(k);
                        b - a
                    }
                    None => return 0.0,
                }
            }
            _ => 1.0,
        };
        2.0 * self.amplitude(n) / (width * sys.gap_length(n))
    }

    /// `sup |beta|` over the whole circle.
    pub fn sup(&self) -> f64 {
        match self {
            BetaFunction::Zero => 0.0,
            _ => 1.0,
        }
    }

    /// Modulus of continuity `sup_{|x - x'| <= d} |beta(x) - beta(x')|` in the
    /// embedded coordinate, bounded above.
    pub fn modulus(&self, sys: &DenjoySystem, d: f64) -> f64 {
        let n_max = sys.truncation();
        let mut best: f64 = 0.0;
        for n in -n_max..=n_max {
            let a = self.amplitude(n);
            if a > 0.0 {
                best = best.max(a.min(self.slope(sys, n) * d));
            }
        }
        // Two adjacent gaps can each contribute a full amplitude beyond the table.
        best.max(2.0 * self.amplitude_tail(n_max))
    }
}

/// Maps a gap point to its `(k, t_k)` coordinates in the nested family `I^k`.
fn resolve_family(family: u32, t: f64, k_max: u32) -> Option<(u32, f64)> {
    if family >= 1 {
        return (family <= k_max).then_some((family, t));
    }
    (1..=k_max).find_map(|k| {
        let (a, b) = subfamily_span(k);
        (t >= a && t <= b).then(|| (k, (t - a) / (b - a)))
    })
}
