//! Finite-horizon probes of epsilon-Lyapunov stability and sensitivity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::CirclePoint;
use crate::error::{invalid, Result};
use crate::numerics::{circle_distance, norm, torus_distance};
use crate::torus::{SkewState, State, TorusMap};

/// Bounds on the largest `eps` such that `d(z, z') < eps` implies
/// `d(f(z), f(z')) < 1/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonF {
    pub certified_lower: f64,
    pub empirical_upper: f64,
    pub lipschitz: Option<f64>,
    pub method: String,
}

/// Base expansion bound of the symbolic Denjoy map in the embedded
/// coordinate: the largest ratio `l_{n+1} / l_n = (3/2)^2`.
pub const DENJOY_EXPANSION: f64 = 2.25;

/// Torus point `z` displaced by `offset` in lift coordinates.
pub fn displaced(map: &TorusMap, z: &State, offset: [f64; 2]) -> State {
    match (map, z) {
        (TorusMap::Skew(sk), State::Skew(st)) => {
            let x = sk.base.embed(&st.base).x + offset[0];
            let cell = x.floor();
            State::Skew(SkewState {
                base: sk.base.unembed(x - cell),
                base_winding: st.base_winding + cell as i64,
                y: {
                    let mut y = st.y;
                    y.add(offset[1]);
                    y
                },
            })
        }
        (_, State::Plane(p)) => {
            let mut q = *p;
            q.coords[0].add(offset[0]);
            q.coords[1].add(offset[1]);
            State::Plane(q)
        }
        _ => *z,
    }
}

/// Torus distance between two states, through the lift difference.
pub fn state_distance(map: &TorusMap, a: &State, b: &State) -> f64 {
    let d = map.lift_difference(a, b);
    torus_distance([d[0].value(), d[1].value()])
}

fn skew_image_bound(map: &TorusMap, d: f64) -> f64 {
    let sk = map.as_skew().expect("skew");
    let dx = (DENJOY_EXPANSION * d).min(0.5);
    let dy = (d + sk.beta.modulus(&sk.base, d)).min(0.5);
    norm([dx, dy])
}

/// Certified lower bound from Lipschitz data and a randomized upper bound.
pub fn epsilon_f(map: &TorusMap, seed: u64, trials: usize) -> Result<EpsilonF> {
    let (certified_lower, lipschitz, method) = match map.lipschitz() {
        Some(l) => (
            (0.5 / l).min(0.5),
            Some(l),
            "certified: 1/(2 Lip) clipped at 1/2".to_string(),
        ),
        None => {
            let (mut lo, mut hi) = (0.0, 0.5);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if skew_image_bound(map, mid) < 0.5 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (
                lo,
                None,
                "certified: base expansion 9/4 and fiber modulus 1 + modulus(beta), solved by bisection"
                    .to_string(),
            )
        }
    };
    let empirical_upper = empirical_separation(map, seed, trials)?;
    Ok(EpsilonF {
        certified_lower,
        empirical_upper,
        lipschitz,
        method: format!("{method}; empirical: random pairs with bisection along the offset"),
    })
}

/// Smallest `t <= 1/2` found with `d(f(z), f(z + t u)) >= 1/2`.
fn empirical_separation(map: &TorusMap, seed: u64, trials: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::with_capacity(trials);
    for i in 0..trials {
        let z = map.state_at([rng.random::<f64>(), rng.random::<f64>()]);
        let angle = if i < 4 {
            std::f64::consts::FRAC_PI_4 * i as f64
        } else {
            rng.random::<f64>() * std::f64::consts::TAU
        };
        starts.push((z, [angle.cos(), angle.sin()]));
    }
    let found = starts
        .par_iter()
        .map(|(z, u)| -> Result<Option<f64>> {
            let fz = map.step(z)?;
            let image = |t: f64| -> Result<f64> {
                let w = displaced(map, z, [t * u[0], t * u[1]]);
                Ok(state_distance(map, &fz, &map.step(&w)?))
            };
            if image(0.5)? < 0.5 {
                return Ok(None);
            }
            // Coarse scan for the first crossing, then bisection.
            let mut hi = 0.5;
            for s in 1..=64 {
                let t = 0.5 * s as f64 / 64.0;
                if image(t)? >= 0.5 {
                    hi = t;
                    break;
                }
            }
            let mut lo = hi - 0.5 / 64.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if image(mid)? >= 0.5 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(Some(hi))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(found.into_iter().flatten().fold(0.5, f64::min))
}

/// Neighbor whose orbit separated from the probed orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationWitness {
    pub neighbor: State,
    pub n: i64,
    pub spread: f64,
}

impl SeparationWitness {
    /// Distance after re-iterating both orbits from scratch.
    pub fn replay(&self, map: &TorusMap, z: &State) -> Result<f64> {
        let a = map.iterate_to(z, self.n)?;
        let b = map.iterate_to(&self.neighbor, self.n)?;
        Ok(state_distance(map, &a, &b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Verdict {
    /// No separation within the horizon; not a certificate of stability.
    StableAtHorizon,
    Unstable(SeparationWitness),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityVerdict {
    pub z: State,
    pub delta: f64,
    pub eps: f64,
    pub n_max: i64,
    pub samples: usize,
    pub max_spread: f64,
    /// Steps at which lift and torus distance agreed while below 1/2.
    pub lift_distance_steps: u64,
    pub verdict: Verdict,
}

impl StabilityVerdict {
    pub fn is_unstable(&self) -> bool {
        matches!(self.verdict, Verdict::Unstable(_))
    }
}

/// Ball samples: axis points, `3/4` on the circle of radius `delta`, the
/// rest inside, and for skew products the gap peaks within `delta`.
pub fn ball_samples(map: &TorusMap, z: &State, delta: f64, count: usize, seed: u64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets: Vec<[f64; 2]> = vec![[delta, 0.0], [0.0, delta], [-delta, 0.0], [0.0, -delta]];
    let on_sphere = count * 3 / 4;
    for i in 0..count {
        let a = rng.random::<f64>() * std::f64::consts::TAU;
        let r = if i < on_sphere {
            delta
        } else {
            delta * rng.random::<f64>().sqrt()
        };
        let mut o = [r * a.cos(), r * a.sin()];
        while norm(o) > delta {
            o = [o[0] * (1.0 - f64::EPSILON), o[1] * (1.0 - f64::EPSILON)];
        }
        offsets.push(o);
    }
    let mut out: Vec<State> = offsets.iter().map(|o| displaced(map, z, *o)).collect();
    if let (TorusMap::Skew(sk), State::Skew(st)) = (map, z) {
        let x0 = sk.base.embed(&st.base).x;
        let n = sk.base.truncation();
        for index in -n..=n {
            let peak = CirclePoint::gap(index, 0.5);
            if circle_distance(sk.base.embed(&peak).x - x0) < delta {
                out.push(State::Skew(SkewState {
                    base: peak,
                    base_winding: st.base_winding,
                    y: st.y,
                }));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeParams {
    pub delta: f64,
    pub eps: f64,
    pub n_max: i64,
    pub sample_count: usize,
    pub seed: u64,
}

/// Iterates `z` and samples of `B_delta(z)`; unstable on the first spread
/// of at least `eps`.
pub fn lyapunov_probe(map: &TorusMap, z: &State, p: &ProbeParams) -> Result<StabilityVerdict> {
    if !(p.delta > 0.0 && p.eps > 0.0) {
        return Err(invalid("delta/eps", "must be positive"));
    }
    let samples = ball_samples(map, z, p.delta, p.sample_count, p.seed);
    let mut states = samples.clone();
    let mut center = *z;
    let mut max_spread: f64 = 0.0;
    let mut lift_steps = 0u64;
    let mut witness = None;
    for n in 0..=p.n_max {
        if n > 0 {
            center = map.step(&center)?;
            states = states
                .par_iter()
                .map(|s| map.step(s))
                .collect::<Result<Vec<_>>>()?;
        }
        let spreads: Vec<(f64, bool)> = states
            .par_iter()
            .map(|s| {
                let d = map.lift_difference(&center, s);
                let lift = [d[0].value(), d[1].value()];
                let torus = torus_distance(lift);
                let agree = norm(lift) >= 0.5 || norm(lift) == torus;
                (torus, agree)
            })
            .collect();
        for (i, (spread, agree)) in spreads.iter().enumerate() {
            if *agree && *spread < 0.5 {
                lift_steps += 1;
            }
            max_spread = max_spread.max(*spread);
            if *spread >= p.eps && witness.is_none() {
                witness = Some(SeparationWitness {
                    neighbor: samples[i],
                    n,
                    spread: *spread,
                });
            }
        }
        if witness.is_some() {
            break;
        }
    }
    Ok(StabilityVerdict {
        z: *z,
        delta: p.delta,
        eps: p.eps,
        n_max: p.n_max,
        samples: samples.len(),
        max_spread,
        lift_distance_steps: lift_steps,
        verdict: match witness {
            Some(w) => Verdict::Unstable(w),
            None => Verdict::StableAtHorizon,
        },
    })
}

/// Declared recurrence property; never computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonWandering {
    Declared,
    #[default]
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationEntry {
    pub z: State,
    pub smallest_separating_delta: Option<f64>,
    pub witness: Option<SeparationWitness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationReport {
    pub eps: f64,
    pub n_max: i64,
    pub deltas: Vec<f64>,
    pub entries: Vec<SeparationEntry>,
    pub fraction_separated: f64,
    pub non_wandering: NonWandering,
    pub interpretation: Option<String>,
}

/// Probes every grid point over the delta ladder (smallest first).
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_scan(
    map: &TorusMap,
    grid: &[State],
    deltas: &[f64],
    eps: f64,
    n_max: i64,
    sample_count: usize,
    seed: u64,
    non_wandering: NonWandering,
) -> Result<SeparationReport> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid("eps", "must be positive"));
    }
    let mut ladder = deltas.to_vec();
    ladder.sort_by(f64::total_cmp);
    let entries = grid
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            for &delta in &ladder {
                let v = lyapunov_probe(
                    map,
                    z,
                    &ProbeParams {
                        delta,
                        eps,
                        n_max,
                        sample_count,
                        seed: seed.wrapping_add(i as u64),
                    },
                )?;
                if let Verdict::Unstable(w) = v.verdict {
                    return Ok(SeparationEntry {
                        z: *z,
                        smallest_separating_delta: Some(delta),
                        witness: Some(w),
                    });
                }
            }
            Ok(SeparationEntry {
                z: *z,
                smallest_separating_delta: None,
                witness: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let separated = entries
        .iter()
        .filter(|e| e.smallest_separating_delta.is_some())
        .count();
    let fraction_separated = if entries.is_empty() {
        0.0
    } else {
        separated as f64 / entries.len() as f64
    };
    let interpretation = (non_wandering == NonWandering::Declared).then(|| {
        "map declared non-wandering: without bounded mean motion such a map has sensitive dependence on initial conditions with some separation constant; separated points are finite-horizon evidence of it".to_string()
    });
    Ok(SeparationReport {
        eps,
        n_max,
        deltas: ladder,
        entries,
        fraction_separated,
        non_wandering,
        interpretation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_example, default_rho, ExampleParams, ExampleVariant};
    use crate::pl::{Axis, BumpFunction};
    use crate::rational::{from_f64, ratio};
    use crate::torus::{make_composite, make_rigid, make_shear};
    use num_bigint::BigInt;

    #[test]
    fn rigid_epsilon_f_is_one_half() {
        let e = epsilon_f(&make_rigid([0.3, 0.7]), 1, 32).unwrap();
        assert_eq!(e.certified_lower, 0.5);
        assert!((e.empirical_upper - 0.5).abs() < 1e-9);
        let c = make_composite(vec![make_rigid([0.1, 0.2]), make_rigid([0.3, 0.1])]).unwrap();
        assert_eq!(epsilon_f(&c, 2, 8).unwrap().certified_lower, 0.5);
    }

    #[test]
    fn shear_epsilon_f_against_grid() {
        // Slope 15/4 gives operator norm exactly 4.
        let psi = BumpFunction::trapezoid(BigInt::from(1), ratio(1, 4), from_f64(0.9375).unwrap())
            .unwrap();
        let f = make_shear(Axis::Y, psi);
        let e = epsilon_f(&f, 3, 64).unwrap();
        assert!((f.lipschitz().unwrap() - 4.0).abs() < 1e-12);
        assert!(e.certified_lower >= 0.125 - 1e-15);
        assert!(e.certified_lower <= e.empirical_upper + 1e-9);
        let eps = e.certified_lower * 0.999;
        for i in 0..40 {
            for j in 0..40 {
                let z = [i as f64 / 40.0, j as f64 / 40.0];
                for u in [[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [0.8, -0.6]] {
                    let w = [z[0] + eps * u[0], z[1] + eps * u[1]];
                    let (a, b) = (f.eval(z), f.eval(w));
                    assert!(torus_distance([b[0] - a[0], b[1] - a[1]]) < 0.5);
                }
            }
        }
    }

    #[test]
    fn skew_certified_bound_is_positive() {
        let f = build_example(
            ExampleVariant::ExA,
            default_rho(),
            &ExampleParams::default(),
        )
        .unwrap();
        let e = epsilon_f(&f, 4, 16).unwrap();
        assert!(e.certified_lower > 0.0 && e.certified_lower <= e.empirical_upper + 1e-9);
    }

    #[test]
    fn rigid_probe_spread_is_delta() {
        let f = make_rigid([0.3, 0.7]);
        let z = f.state_at([0.25, 0.5]);
        let p = ProbeParams {
            delta: 0.01,
            eps: 0.02,
            n_max: 200,
            sample_count: 32,
            seed: 5,
        };
        let v = lyapunov_probe(&f, &z, &p).unwrap();
        assert_eq!(v.verdict, Verdict::StableAtHorizon);
        assert_eq!(v.max_spread, 0.01);
        let big = lyapunov_probe(
            &f,
            &z,
            &ProbeParams {
                delta: 0.02,
                eps: 0.5,
                ..p
            },
        )
        .unwrap();
        assert!(big.max_spread >= v.max_spread);
    }

    #[test]
    fn example_a_minimal_point_is_unstable() {
        let f = build_example(
            ExampleVariant::ExA,
            default_rho(),
            &ExampleParams::default(),
        )
        .unwrap();
        let z = State::Skew(SkewState::new(CirclePoint::gap(-40, 1.0), 0.2));
        let p = ProbeParams {
            delta: 0.05,
            eps: 0.25,
            n_max: 1000,
            sample_count: 16,
            seed: 9,
        };
        let v = lyapunov_probe(&f, &z, &p).unwrap();
        let Verdict::Unstable(w) = &v.verdict else {
            panic!("expected separation")
        };
        assert!(w.spread >= 0.25);
        assert!((w.replay(&f, &z).unwrap() - w.spread).abs() < 1e-9);
    }

    #[test]
    fn scan_on_rigid_separates_nothing() {
        let f = make_rigid([0.3, 0.7]);
        let grid: Vec<State> = (0..4).map(|i| f.state_at([i as f64 / 4.0, 0.1])).collect();
        let r = sensitivity_scan(
            &f,
            &grid,
            &[0.01, 0.02],
            0.1,
            50,
            8,
            1,
            NonWandering::Declared,
        )
        .unwrap();
        assert_eq!(r.fraction_separated, 0.0);
        assert!(r.interpretation.is_some());
    }
}
