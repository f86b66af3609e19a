//! Rotation vectors and finite-horizon rotation-set estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::CirclePoint;
use crate::error::{invalid, Result};
use crate::numerics::{norm, Compensated};
use crate::torus::{SkewState, State, TorusMap};

/// `(F^n(z) - z) / n`.
pub fn rotation_vector(map: &TorusMap, z: &State, n: i64) -> Result<[f64; 2]> {
    if n < 1 {
        return Err(invalid("n", "must be at least 1"));
    }
    let end = map.iterate_to(z, n)?;
    Ok(average(map, z, &end, n))
}

fn average(map: &TorusMap, z: &State, end: &State, n: i64) -> [f64; 2] {
    let d: [Compensated; 2] = map.lift_difference(z, end);
    [d[0].value() / n as f64, d[1].value() / n as f64]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationSample {
    pub sample: usize,
    pub z: State,
    pub n: i64,
    pub rho: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationSetEstimate {
    pub schedule: Vec<i64>,
    pub points: Vec<RotationSample>,
    /// Counter-clockwise hull vertices starting from the lexicographically
    /// smallest point.
    pub hull: Vec<[f64; 2]>,
    pub diameter: f64,
    /// Hull diameter of the estimates at each schedule entry alone.
    pub diameter_by_horizon: Vec<f64>,
}

impl RotationSetEstimate {
    /// Whether `p` lies in the hull, up to `tol` in distance.
    pub fn hull_contains(&self, p: [f64; 2], tol: f64) -> bool {
        hull_contains(&self.hull, p, tol)
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn turns_left(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let scale = norm([a[0] - o[0], a[1] - o[1]]) * norm([b[0] - o[0], b[1] - o[1]]);
    cross(o, a, b) > 1e-12 * scale
}

/// Monotone-chain hull; near-collinear points (sine below `1e-12`) are dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && !turns_left(lower[lower.len() - 2], lower[lower.len() - 1], p) {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && !turns_left(upper[upper.len() - 2], upper[upper.len() - 1], p) {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Largest distance between two hull vertices.
pub fn diameter(hull: &[[f64; 2]]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            best = best.max(norm([a[0] - b[0], a[1] - b[1]]));
        }
    }
    best
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm([p[0] - a[0] - t * ab[0], p[1] - a[1] - t * ab[1]])
}

pub fn hull_contains(hull: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => norm([p[0] - hull[0][0], p[1] - hull[0][1]]) <= tol,
        2 => segment_distance(p, hull[0], hull[1]) <= tol,
        m => {
            let inside = (0..m).all(|i| cross(hull[i], hull[(i + 1) % m], p) >= 0.0);
            inside || (0..m).any(|i| segment_distance(p, hull[i], hull[(i + 1) % m]) <= tol)
        }
    }
}

/// Estimates `(F^n(z) - z)/n` for every grid point and schedule entry.
pub fn rotation_set_hull(
    map: &TorusMap,
    grid: &[State],
    schedule: &[i64],
) -> Result<RotationSetEstimate> {
    if grid.is_empty() {
        return Err(invalid("grid", "must not be empty"));
    }
    if schedule.is_empty() || schedule[0] < 1 || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(
            "schedule",
            "must be positive and strictly increasing",
        ));
    }
    let n_last = *schedule.last().expect("nonempty");
    let per_sample = grid
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let mut out = Vec::with_capacity(schedule.len());
            let mut next = 0;
            for (step, s) in map.orbit(z, false)?.take(n_last as usize).enumerate() {
                let n = step as i64 + 1;
                if n == schedule[next] {
                    out.push(RotationSample {
                        sample: i,
                        z: *z,
                        n,
                        rho: average(map, z, &s?, n),
                    });
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<RotationSample> = per_sample.into_iter().flatten().collect();
    let all: Vec<[f64; 2]> = points.iter().map(|p| p.rho).collect();
    let hull = convex_hull(&all);
    let diameter_by_horizon = schedule
        .iter()
        .map(|&n| {
            let pts: Vec<[f64; 2]> = points.iter().filter(|p| p.n == n).map(|p| p.rho).collect();
            diameter(&convex_hull(&pts))
        })
        .collect();
    Ok(RotationSetEstimate {
        schedule: schedule.to_vec(),
        diameter: diameter(&hull),
        hull,
        points,
        diameter_by_horizon,
    })
}

/// Rotation set on a subset, estimated from samples of that subset.
pub fn rotation_set_on(
    map: &TorusMap,
    subset_samples: &[State],
    schedule: &[i64],
) -> Result<RotationSetEstimate> {
    rotation_set_hull(map, subset_samples, schedule)
}

/// `side x side` uniform grid; for skew products also the peaks of
/// `I_n`, `|n| <= extra`, and base points of the minimal set.
pub fn default_grid(map: &TorusMap, side: usize, extra: i64) -> Vec<State> {
    let mut out: Vec<State> = (0..side * side)
        .map(|i| {
            let x = (i % side) as f64 / side as f64;
            let y = (i / side) as f64 / side as f64;
            map.state_at([x, y])
        })
        .collect();
    if map.is_skew() {
        for n in -extra..=extra {
            out.push(State::Skew(SkewState::new(CirclePoint::gap(n, 0.5), 0.0)));
        }
        for i in 0..side {
            out.push(State::Skew(SkewState::new(
                CirclePoint::base(i as f64 / side as f64 + 0.5 / side as f64),
                0.0,
            )));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_example, default_rho, ExampleParams, ExampleVariant};
    use crate::pl::{Axis, BumpFunction, Shear};
    use crate::rational::{int, ratio, RationalVector};
    use crate::torus::{make_conjugated, make_rational_rigid, make_rigid};
    use num_bigint::BigInt;

    #[test]
    fn hull_of_square_with_interior_and_collinear_points() {
        let pts = [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.5, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
        ];
        let h = convex_hull(&pts);
        assert_eq!(h, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert!((diameter(&h) - 2f64.sqrt()).abs() < 1e-15);
        for p in pts {
            assert!(hull_contains(&h, p, 0.0));
        }
        assert!(!hull_contains(&h, [1.5, 0.5], 1e-9));
    }

    #[test]
    fn rigid_rotation_vector_and_hull() {
        let rho = [2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0];
        let f = make_rigid(rho);
        let z = f.state_at([0.3, 0.9]);
        for n in [1, 7, 1000] {
            let r = rotation_vector(&f, &z, n).unwrap();
            assert!((r[0] - rho[0]).abs() < 1e-15 && (r[1] - rho[1]).abs() < 1e-15);
        }
        let est = rotation_set_hull(&f, &default_grid(&f, 4, 0), &[10, 100]).unwrap();
        assert!(est.diameter <= 1e-12);
        assert!(est.points.iter().all(|p| est.hull_contains(p.rho, 1e-12)));
    }

    #[test]
    fn conjugated_rational_rotation_is_exact_at_period() {
        let psi = BumpFunction::trapezoid(BigInt::from(6), ratio(1, 3), int(2)).unwrap();
        let alpha = RationalVector::from_i64(145, 96, 288);
        let f =
            make_conjugated(vec![Shear::new(Axis::Y, psi)], make_rational_rigid(&alpha)).unwrap();
        let a = alpha.to_f64();
        let samples: Vec<State> = (0..5).map(|i| f.state_at([0.1 * i as f64, 0.37])).collect();
        let est = rotation_set_on(&f, &samples, &[288, 576]).unwrap();
        for p in &est.points {
            assert!((p.rho[0] - a[0]).abs() < 1e-12 && (p.rho[1] - a[1]).abs() < 1e-12);
        }
        assert!(est.diameter < 1e-12);
    }

    #[test]
    fn bounded_drift_on_minimal_set() {
        let f = build_example(
            ExampleVariant::BoundedDrift,
            default_rho(),
            &ExampleParams::default(),
        )
        .unwrap();
        let rho = default_rho();
        let z = State::Skew(SkewState::new(CirclePoint::base(0.2), 0.4));
        let r = rotation_vector(&f, &z, 10_000).unwrap();
        assert!((r[0] - rho[0]).abs() < 1e-4 && (r[1] - rho[1]).abs() < 1e-4);
    }

    #[test]
    fn schedule_validation() {
        let f = make_rigid([0.1, 0.2]);
        let g = default_grid(&f, 2, 0);
        assert!(rotation_set_hull(&f, &g, &[10, 5]).is_err());
        assert!(rotation_set_hull(&f, &[], &[10]).is_err());
    }
}
