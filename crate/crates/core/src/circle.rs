//! Symbolic Denjoy counterexamples on the circle, their metric embedding into
//! `[0, 1)`, and rotation numbers of circle lifts.
//!
//! A Denjoy system is a rigid rotation by `rho1` on base angles, blown up
//! along the orbit of angle 0: the point of angle `n * rho1` is replaced by a
//! wandering interval `I_n` of length `l_n = c (|n| + 2)^-2`. Points are kept
//! in symbolic coordinates, so orbits are exact integer arithmetic.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// Default truncation for embedding sums.
pub const DEFAULT_TRUNCATION: i64 = 1000;

/// `sum_{n in Z} (|n| + 2)^-2 = pi^2 / 3 - 9 / 4`.
pub const GAP_PROFILE_SUM: f64 = std::f64::consts::PI * std::f64::consts::PI / 3.0 - 2.25;

/// Angle in turns stored as a 64-bit fixed-point fraction of a full turn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(pub u64);

impl Angle {
    pub const ZERO: Angle = Angle(0);

    /// Nearest fixed-point angle to `x mod 1`.
    pub fn from_turns(x: f64) -> Angle {
        let r = x.rem_euclid(1.0);
        let scaled = (r * TWO_POW_64).round();
        if scaled >= TWO_POW_64 {
            Angle(0)
        } else {
            Angle(scaled as u64)
        }
    }

    pub fn to_turns(self) -> f64 {
        let v = self.0 as f64 / TWO_POW_64;
        if v >= 1.0 {
            1.0 - f64::EPSILON / 2.0
        } else {
            v
        }
    }

    /// `self + k * rho` reduced mod 1, with the number of full turns crossed.
    pub fn advance(self, rho: Angle, k: i64) -> (Angle, i64) {
        let total = self.0 as i128 + (k as i128) * (rho.0 as i128);
        let modulus = 1i128 << 64;
        let winding = total.div_euclid(modulus);
        (Angle(total.rem_euclid(modulus) as u64), winding as i64)
    }
}

/// Point of a Denjoy system in symbolic coordinates.
///
/// `Gap { family: 0, .. }` is a point of the wandering interval `I_index` at
/// affine position `t`. Families `k >= 1` address the nested sub-intervals
/// `I^k` used by the windowed construction; `t` is then relative to `I^k`.
/// Gap endpoints (`t` in {0, 1}) lie on the minimal set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CirclePoint {
    Base { theta: Angle },
    Gap { family: u32, index: i64, t: f64 },
}

impl CirclePoint {
    pub fn base(theta: f64) -> Self {
        CirclePoint::Base {
            theta: Angle::from_turns(theta),
        }
    }

    pub fn gap(index: i64, t: f64) -> Self {
        CirclePoint::Gap {
            family: 0,
            index,
            t,
        }
    }

    /// True for points of the minimal set: base points and gap endpoints.
    pub fn on_minimal_set(&self) -> bool {
        match *self {
            CirclePoint::Base { .. } => true,
            CirclePoint::Gap { family, t, .. } => family == 0 && (t == 0.0 || t == 1.0),
        }
    }
}

/// Relative span `(a_k, b_k)` of the nested sub-interval `I^k` inside a gap.
pub fn subfamily_span(k: u32) -> (f64, f64) {
    let a = 1.0 - 2f64.powi(1 - k as i32);
    let b = 1.0 - 2f64.powi(-(k as i32));
    (a, b)
}

/// Rejects values within 1e-12 of a rational with denominator at most 10^4.
pub fn check_irrational(rho: f64) -> Result<()> {
    if !rho.is_finite() {
        return Err(invalid("rho", "must be finite"));
    }
    for q in 1..=10_000i64 {
        let p = (rho * q as f64).round();
        if (rho - p / q as f64).abs() < 1e-12 {
            return Err(Error::RationalRotation {
                value: rho,
                p: p as i64,
                q,
            });
        }
    }
    Ok(())
}

#[derive(Debug)]
struct GapTable {
    /// Gap angles in increasing order, with their orbit indices.
    angles: Vec<Angle>,
    indices: Vec<i64>,
    /// `prefix[i]` is the total length of the first `i` gaps in angle order.
    prefix: Vec<f64>,
    /// Embedded left endpoints.
    starts: Vec<f64>,
    lengths: Vec<f64>,
    base_scale: f64,
}

/// Position of a point on the embedded circle with a certified error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedded {
    pub x: f64,
    pub err: f64,
}

/// A Denjoy counterexample in symbolic form.
#[derive(Clone, Debug)]
pub struct DenjoySystem {
    rho1: f64,
    rho_angle: Angle,
    gap_mass: f64,
    scale: f64,
    subfamilies: u32,
    truncation: i64,
    table: Arc<GapTable>,
}

impl DenjoySystem {
    /// Builds the system with gap profile `l_n = c (|n|+2)^-2`, `sum l_n = gap_mass`.
    ///
    /// `subfamilies` is the number of nested sub-gap families (0 for the
    /// single-gap systems).
    pub fn new(rho1: f64, gap_mass: f64, subfamilies: u32) -> Result<Self> {
        Self::with_truncation(rho1, gap_mass, subfamilies, DEFAULT_TRUNCATION)
    }

    pub fn with_truncation(
        rho1: f64,
        gap_mass: f64,
        subfamilies: u32,
        truncation: i64,
    ) -> Result<Self> {
        check_irrational(rho1)?;
        if !(gap_mass > 0.0 && gap_mass < 1.0) {
            return Err(invalid("gap_mass", format!("{gap_mass} is not in (0, 1)")));
        }
        if truncation < 1 {
            return Err(invalid("n_trunc", "must be at least 1"));
        }
        if subfamilies > 30 {
            return Err(invalid("families", "at most 30 nested families"));
        }
        let rho1 = rho1.rem_euclid(1.0);
        let rho_angle = Angle::from_turns(rho1);
        let scale = gap_mass / GAP_PROFILE_SUM;
        let table = Arc::new(build_table(rho_angle, scale, truncation));
        Ok(DenjoySystem {
            rho1,
            rho_angle,
            gap_mass,
            scale,
            subfamilies,
            truncation,
            table,
        })
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    /// The rotation actually applied to base angles (fixed-point).
    pub fn rho_angle(&self) -> Angle {
        self.rho_angle
    }

    pub fn gap_mass(&self) -> f64 {
        self.gap_mass
    }

    /// Normalizing constant `c` of the gap profile.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn subfamilies(&self) -> u32 {
        self.subfamilies
    }

    pub fn truncation(&self) -> i64 {
        self.truncation
    }

    pub fn gap_length(&self, n: i64) -> f64 {
        let m = n.unsigned_abs() as f64 + 2.0;
        self.scale / (m * m)
    }

    /// Base angle `n * rho1 mod 1` of the gap `I_n`.
    pub fn gap_angle(&self, n: i64) -> Angle {
        Angle(0).advance(self.rho_angle, n).0
    }

    /// Certified bound on `sum_{|n| > n_trunc} l_n`.
    pub fn tail_bound(&self, n_trunc: i64) -> f64 {
        2.0 * self.scale / (n_trunc as f64 + 2.0)
    }

    pub fn validate(&self, p: &CirclePoint) -> Result<()> {
        match *p {
            CirclePoint::Base { .. } => Ok(()),
            CirclePoint::Gap { family, t, .. } => {
                if !(0.0..=1.0).contains(&t) {
                    return Err(invalid("t", format!("{t} is not in [0, 1]")));
                }
                if family > self.subfamilies {
                    return Err(invalid(
                        "family",
                        format!("{family} exceeds the {} sub-gap families", self.subfamilies),
                    ));
                }
                Ok(())
            }
        }
    }

    /// `k`-fold image of `p` (preimage for negative `k`), exact.
    pub fn step(&self, p: &CirclePoint, k: i64) -> CirclePoint {
        self.step_with_winding(p, k).0
    }

    /// `k`-fold image together with the number of turns made by its lift.
    pub fn step_with_winding(&self, p: &CirclePoint, k: i64) -> (CirclePoint, i64) {
        match *p {
            CirclePoint::Base { theta } => {
                let (theta, w) = theta.advance(self.rho_angle, k);
                (CirclePoint::Base { theta }, w)
            }
            CirclePoint::Gap { family, index, t } => {
                let (_, w) = self.gap_angle(index).advance(self.rho_angle, k);
                (
                    CirclePoint::Gap {
                        family,
                        index: index + k,
                        t,
                    },
                    w,
                )
            }
        }
    }

    /// Base angle of the point (the angle the gap was blown up from).
    pub fn angle_of(&self, p: &CirclePoint) -> Angle {
        match *p {
            CirclePoint::Base { theta } => theta,
            CirclePoint::Gap { index, .. } => self.gap_angle(index),
        }
    }

    /// Relative position of a gap point inside its family-0 gap.
    pub fn relative_position(p: &CirclePoint) -> Option<(i64, f64)> {
        match *p {
            CirclePoint::Base { .. } => None,
            CirclePoint::Gap { family, index, t } => {
                if family == 0 {
                    Some((index, t))
                } else {
                    let (a, b) = subfamily_span(family);
                    Some((index, a + t * (b - a)))
                }
            }
        }
    }

    /// Embedding with the system's own truncation (table lookup).
    pub fn embed(&self, p: &CirclePoint) -> Embedded {
        let table = &self.table;
        let theta = self.angle_of(p);
        let before = table.angles.partition_point(|a| *a < theta);
        let mut x = table.base_scale * theta.to_turns() + table.prefix[before];
        if let Some((index, s)) = Self::relative_position(p) {
            x += s * self.gap_length(index);
        }
        Embedded {
            x,
            err: self.tail_bound(self.truncation),
        }
    }

    /// Embedding with an explicit truncation, summing gaps directly.
    pub fn embed_truncated(&self, p: &CirclePoint, n_trunc: i64) -> Result<Embedded> {
        if n_trunc < 1 {
            return Err(invalid("n_trunc", "must be at least 1"));
        }
        let theta = self.angle_of(p);
        let own = match *p {
            CirclePoint::Gap { index, .. } => Some(index),
            CirclePoint::Base { .. } => None,
        };
        let mut total = 0.0;
        let mut preceding = 0.0;
        for m in -n_trunc..=n_trunc {
            let l = self.gap_length(m);
            total += l;
            if Some(m) != own && self.gap_angle(m) < theta {
                preceding += l;
            }
        }
        let mut x = (1.0 - total) * theta.to_turns() + preceding;
        if let Some((index, s)) = Self::relative_position(p) {
            x += s * self.gap_length(index);
        }
        Ok(Embedded {
            x,
            err: self.tail_bound(n_trunc),
        })
    }

    /// Inverse of [`DenjoySystem::embed`] on `[0, 1)`; gap points come back in family 0.
    pub fn unembed(&self, x: f64) -> CirclePoint {
        let table = &self.table;
        let x = x.rem_euclid(1.0);
        let after = table.starts.partition_point(|s| *s <= x);
        if after > 0 {
            let i = after - 1;
            let rel = (x - table.starts[i]) / table.lengths[i];
            if rel <= 1.0 {
                return CirclePoint::Gap {
                    family: 0,
                    index: table.indices[i],
                    t: rel.clamp(0.0, 1.0),
                };
            }
        }
        let raw = Angle::from_turns(((x - table.prefix[after]) / table.base_scale).max(0.0));
        let mut theta = raw.0;
        if after > 0 {
            theta = theta.max(table.angles[after - 1].0.saturating_add(1));
        }
        if let Some(next) = table.angles.get(after) {
            theta = theta.min(next.0.saturating_sub(1));
        }
        CirclePoint::Base {
            theta: Angle(theta),
        }
    }
}

fn build_table(rho: Angle, scale: f64, truncation: i64) -> GapTable {
    let mut gaps: Vec<(Angle, i64)> = (-truncation..=truncation)
        .map(|n| (Angle(0).advance(rho, n).0, n))
        .collect();
    gaps.sort();
    let length = |n: i64| {
        let m = n.unsigned_abs() as f64 + 2.0;
        scale / (m * m)
    };
    // Smallest terms first for the total.
    let mut by_size: Vec<f64> = gaps.iter().map(|&(_, n)| length(n)).collect();
    by_size.sort_by(f64::total_cmp);
    let total: f64 = by_size.iter().sum();
    let base_scale = 1.0 - total;
    let mut prefix = Vec::with_capacity(gaps.len() + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for &(_, n) in &gaps {
        acc += length(n);
        prefix.push(acc);
    }
    let starts = gaps
        .iter()
        .enumerate()
        .map(|(i, &(a, _))| base_scale * a.to_turns() + prefix[i])
        .collect();
    GapTable {
        angles: gaps.iter().map(|g| g.0).collect(),
        indices: gaps.iter().map(|g| g.1).collect(),
        prefix,
        starts,
        lengths: gaps.iter().map(|&(_, n)| length(n)).collect(),
        base_scale,
    }
}

/// A monotone degree-one lift of a circle homeomorphism.
pub trait CircleLift {
    fn eval(&self, x: f64) -> f64;
    fn eval_inverse(&self, x: f64) -> f64;

    /// `n`-fold iterate (inverse for negative `n`).
    fn iterate(&self, x: f64, n: i64) -> f64 {
        let mut y = x;
        if n >= 0 {
            for _ in 0..n {
                y = self.eval(y);
            }
        } else {
            for _ in 0..n.unsigned_abs() {
                y = self.eval_inverse(y);
            }
        }
        y
    }
}

/// `x -> x + rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidLift {
    pub rho: f64,
}

impl CircleLift for RigidLift {
    fn eval(&self, x: f64) -> f64 {
        x + self.rho
    }
    fn eval_inverse(&self, x: f64) -> f64 {
        x - self.rho
    }
    fn iterate(&self, x: f64, n: i64) -> f64 {
        let mut acc = crate::numerics::Compensated::new(x);
        acc.sub_product(-(n as f64), self.rho);
        acc.value()
    }
}

/// Lift of the Denjoy map through the embedding; iterates run symbolically.
#[derive(Clone, Debug)]
pub struct EmbeddedDenjoyLift<'a> {
    pub system: &'a DenjoySystem,
}

impl CircleLift for EmbeddedDenjoyLift<'_> {
    fn eval(&self, x: f64) -> f64 {
        self.iterate(x, 1)
    }
    fn eval_inverse(&self, x: f64) -> f64 {
        self.iterate(x, -1)
    }
    fn iterate(&self, x: f64, n: i64) -> f64 {
        let cell = x.floor();
        let p = self.system.unembed(x - cell);
        let (q, w) = self.system.step_with_winding(&p, n);
        cell + w as f64 + self.system.embed(&q).x
    }
}

/// Rotation number estimate `(F^n(x0) - x0) / n` with error bound `1/n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationNumberEstimate {
    pub estimate: f64,
    pub err_bound: f64,
}

/// Estimates the rotation number after checking monotonicity and degree one
/// on 64 samples of `[x0, x0 + 1)`.
pub fn rotation_number<L: CircleLift + ?Sized>(
    lift: &L,
    x0: f64,
    n: i64,
) -> Result<RotationNumberEstimate> {
    if n < 1 {
        return Err(invalid("n", "must be at least 1"));
    }
    let samples = 64;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..samples {
        let x = x0 + i as f64 / samples as f64;
        let y = lift.eval(x);
        if y.is_nan() || y <= prev || (lift.eval(x + 1.0) - y - 1.0).abs() > 1e-9 {
            return Err(Error::NotMonotone { x });
        }
        prev = y;
    }
    let xn = lift.iterate(x0, n);
    Ok(RotationNumberEstimate {
        estimate: (xn - x0) / n as f64,
        err_bound: 1.0 / n as f64,
    })
}

/// Rotation number of the base in symbolic coordinates: exact.
pub fn symbolic_rotation_number(sys: &DenjoySystem, p: &CirclePoint, n: i64) -> f64 {
    let (q, w) = sys.step_with_winding(p, n);
    let start = sys.angle_of(p).0 as i128;
    let end = sys.angle_of(&q).0 as i128 + ((w as i128) << 64);
    let per_step = (end - start) / n as i128;
    Angle(per_step as u64).to_turns()
}
