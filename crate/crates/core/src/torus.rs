//! Lifts of torus homeomorphisms homotopic to the identity.
//!
//! Plane maps (rigid rotations, axis shears and their compositions or
//! conjugations) act on [`LiftPoint`]s whose coordinates are compensated
//! sums. Skew products over a symbolic Denjoy base act on [`SkewState`]s.

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::circle::{CirclePoint, DenjoySystem};
use crate::constructions::beta::BetaFunction;
use crate::error::{invalid, Error, Result};
use crate::numerics::{norm, Compensated};
use crate::pl::{Axis, Shear};
use crate::rational::{self, RationalVector};

const WINDING_LIMIT: f64 = 4_611_686_018_427_387_904.0; // 2^62

/// Point of `R^2` with compensated coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftPoint {
    pub coords: [Compensated; 2],
}

impl LiftPoint {
    pub fn new(z: [f64; 2]) -> Self {
        LiftPoint {
            coords: [Compensated::new(z[0]), Compensated::new(z[1])],
        }
    }

    pub fn value(&self) -> [f64; 2] {
        [self.coords[0].value(), self.coords[1].value()]
    }
}

/// State of a skew product: symbolic base point, base winding, unreduced fiber.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkewState {
    pub base: CirclePoint,
    pub base_winding: i64,
    pub y: Compensated,
}

impl SkewState {
    pub fn new(base: CirclePoint, y: f64) -> Self {
        SkewState {
            base,
            base_winding: 0,
            y: Compensated::new(y),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum State {
    Plane(LiftPoint),
    Skew(SkewState),
}

/// Rigid translation; `exact` optionally records the same vector as a rational.
#[derive(Clone, Debug, PartialEq)]
pub struct Rigid {
    pub rho: [f64; 2],
    pub exact: Option<RationalVector>,
}

/// `(x, y) -> (g(x), y + rho2 + beta(x))` over a symbolic Denjoy base `g`.
#[derive(Clone, Debug)]
pub struct SkewProduct {
    pub base: DenjoySystem,
    pub rho2: f64,
    pub beta: BetaFunction,
}

/// A lift of a torus homeomorphism homotopic to the identity.
///
/// `Composite(fs)` is `fs[0] ∘ fs[1] ∘ ...` and `Conjugated { h, core }` is
/// `H ∘ core ∘ H^-1` with `H = h[0] ∘ h[1] ∘ ...`.
#[derive(Clone, Debug)]
pub enum TorusMap {
    Rigid(Rigid),
    Shear(Shear),
    Skew(SkewProduct),
    Composite(Vec<TorusMap>),
    Conjugated { h: Vec<Shear>, core: Box<TorusMap> },
}

pub fn make_rigid(rho: [f64; 2]) -> TorusMap {
    TorusMap::Rigid(Rigid { rho, exact: None })
}

/// Rigid rotation by a rational vector, iterated with exact phase bookkeeping.
pub fn make_rational_rigid(alpha: &RationalVector) -> TorusMap {
    TorusMap::Rigid(Rigid {
        rho: alpha.to_f64(),
        exact: Some(alpha.clone()),
    })
}

pub fn make_shear(axis: Axis, psi: crate::pl::BumpFunction) -> TorusMap {
    TorusMap::Shear(Shear::new(axis, psi))
}

pub fn make_skew_product(base: DenjoySystem, rho2: f64, beta: BetaFunction) -> Result<TorusMap> {
    if !rho2.is_finite() {
        return Err(invalid("rho2", "must be finite"));
    }
    if let BetaFunction::ExampleB { k_max } = beta {
        if base.subfamilies() < k_max {
            return Err(invalid(
                "families",
                format!(
                    "base has {} sub-gap families, beta needs {k_max}",
                    base.subfamilies()
                ),
            ));
        }
    }
    let n = base.truncation();
    for index in -n..=n {
        if !beta.eval(&CirclePoint::gap(index, 0.5)).is_finite() {
            return Err(Error::NonFiniteBeta { index });
        }
    }
    Ok(TorusMap::Skew(SkewProduct { base, rho2, beta }))
}

/// Composition `fs[0] ∘ fs[1] ∘ ...` of plane maps.
pub fn make_composite(factors: Vec<TorusMap>) -> Result<TorusMap> {
    if factors.iter().any(TorusMap::is_skew) {
        return Err(invalid("factors", "skew products cannot be composed"));
    }
    Ok(TorusMap::Composite(factors))
}

/// `H ∘ core ∘ H^-1` for a plane map `core`.
pub fn make_conjugated(h: Vec<Shear>, core: TorusMap) -> Result<TorusMap> {
    if core.is_skew() {
        return Err(invalid("core", "conjugation core must be a plane map"));
    }
    Ok(TorusMap::Conjugated {
        h,
        core: Box::new(core),
    })
}

/// Supremum of `|F(z) - z|`, exact or a certified upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementSup {
    pub value: f64,
    pub exact: bool,
}

/// Orbit segment including the start state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<State>,
}

fn apply_h(h: &[Shear], z: [f64; 2]) -> [f64; 2] {
    h.iter().rev().fold(z, |w, s| s.apply(w))
}

fn apply_h_inverse(h: &[Shear], z: [f64; 2]) -> [f64; 2] {
    h.iter().fold(z, |w, s| s.apply_inverse(w))
}

impl TorusMap {
    pub fn is_skew(&self) -> bool {
        matches!(self, TorusMap::Skew(_))
    }

    pub fn as_skew(&self) -> Option<&SkewProduct> {
        match self {
            TorusMap::Skew(s) => Some(s),
            _ => None,
        }
    }

    /// Rotation vector the map is built around, when there is one.
    pub fn reference_rotation(&self) -> Option<[f64; 2]> {
        match self {
            TorusMap::Rigid(r) => Some(r.rho),
            TorusMap::Skew(s) => Some([s.base.rho1(), s.rho2]),
            TorusMap::Conjugated { core, .. } => core.reference_rotation(),
            TorusMap::Shear(_) => Some([0.0, 0.0]),
            TorusMap::Composite(fs) => {
                if fs.len() == 1 {
                    fs[0].reference_rotation()
                } else {
                    None
                }
            }
        }
    }

    /// State for the torus point with lift coordinates `z`.
    pub fn state_at(&self, z: [f64; 2]) -> State {
        match self {
            TorusMap::Skew(s) => {
                let cell = z[0].floor();
                State::Skew(SkewState {
                    base: s.base.unembed(z[0] - cell),
                    base_winding: cell as i64,
                    y: Compensated::new(z[1]),
                })
            }
            _ => State::Plane(LiftPoint::new(z)),
        }
    }

    /// Lift coordinates in `R^2` (skew base through the embedding).
    pub fn lift_coords(&self, s: &State) -> [f64; 2] {
        match (self, s) {
            (TorusMap::Skew(sk), State::Skew(st)) => [
                st.base_winding as f64 + sk.base.embed(&st.base).x,
                st.y.value(),
            ],
            (_, State::Plane(p)) => p.value(),
            (_, State::Skew(st)) => [st.base_winding as f64, st.y.value()],
        }
    }

    /// `b - a` in lift coordinates, keeping compensation where available.
    pub fn lift_difference(&self, a: &State, b: &State) -> [Compensated; 2] {
        match (self, a, b) {
            (_, State::Plane(pa), State::Plane(pb)) => [
                pb.coords[0].difference(&pa.coords[0]),
                pb.coords[1].difference(&pa.coords[1]),
            ],
            (TorusMap::Skew(sk), State::Skew(sa), State::Skew(sb)) => {
                let mut dx = Compensated::new((sb.base_winding - sa.base_winding) as f64);
                dx.add(sk.base.embed(&sb.base).x);
                dx.add(-sk.base.embed(&sa.base).x);
                [dx, sb.y.difference(&sa.y)]
            }
            _ => {
                let (ca, cb) = (self.lift_coords(a), self.lift_coords(b));
                [
                    Compensated::new(cb[0] - ca[0]),
                    Compensated::new(cb[1] - ca[1]),
                ]
            }
        }
    }

    /// `D = F^n(z) - z - n rho` from the states at times 0 and `n`.
    pub fn deviation(&self, start: &State, end: &State, n: i64, rho: [f64; 2]) -> [f64; 2] {
        let mut d = self.lift_difference(start, end);
        d[0].sub_product(n as f64, rho[0]);
        d[1].sub_product(n as f64, rho[1]);
        [d[0].value(), d[1].value()]
    }

    /// `F(z) - z` for a plane map at a point of `R^2`.
    pub fn plane_displacement(&self, z: [f64; 2]) -> [f64; 2] {
        match self {
            TorusMap::Rigid(r) => r.rho,
            TorusMap::Shear(s) => s.displacement(z),
            TorusMap::Composite(fs) => {
                let mut cur = z;
                let mut total = [0.0; 2];
                for f in fs.iter().rev() {
                    let d = f.plane_displacement(cur);
                    for i in 0..2 {
                        cur[i] += d[i];
                        total[i] += d[i];
                    }
                }
                total
            }
            TorusMap::Conjugated { h, core } => {
                let w = apply_h_inverse(h, z);
                let dw = core.plane_displacement(w);
                let v = apply_h(h, [w[0] + dw[0], w[1] + dw[1]]);
                [v[0] - z[0], v[1] - z[1]]
            }
            TorusMap::Skew(_) => panic!("plane_displacement called on a skew product"),
        }
    }

    /// `F^-1(z) - z` for a plane map.
    pub fn plane_inverse_displacement(&self, z: [f64; 2]) -> [f64; 2] {
        match self {
            TorusMap::Rigid(r) => [-r.rho[0], -r.rho[1]],
            TorusMap::Shear(s) => {
                let d = s.displacement(z);
                [-d[0], -d[1]]
            }
            TorusMap::Composite(fs) => {
                let mut cur = z;
                let mut total = [0.0; 2];
                for f in fs {
                    let d = f.plane_inverse_displacement(cur);
                    for i in 0..2 {
                        cur[i] += d[i];
                        total[i] += d[i];
                    }
                }
                total
            }
            TorusMap::Conjugated { h, core } => {
                let w = apply_h_inverse(h, z);
                let dw = core.plane_inverse_displacement(w);
                let v = apply_h(h, [w[0] + dw[0], w[1] + dw[1]]);
                [v[0] - z[0], v[1] - z[1]]
            }
            TorusMap::Skew(_) => panic!("plane_inverse_displacement called on a skew product"),
        }
    }

    /// `F(z)` for a plane map.
    pub fn eval(&self, z: [f64; 2]) -> [f64; 2] {
        let d = self.plane_displacement(z);
        [z[0] + d[0], z[1] + d[1]]
    }

    pub fn eval_inverse(&self, z: [f64; 2]) -> [f64; 2] {
        let d = self.plane_inverse_displacement(z);
        [z[0] + d[0], z[1] + d[1]]
    }

    fn check_state(&self, s: &State) -> Result<()> {
        match (self.is_skew(), s) {
            (true, State::Skew(_)) | (false, State::Plane(_)) => Ok(()),
            (true, _) => Err(Error::StateMismatch("skew product needs a skew state")),
            (false, _) => Err(Error::StateMismatch("plane map needs a plane lift point")),
        }
    }

    /// One step forward (`backward = false`) or backward.
    pub fn step_dir(&self, s: &State, backward: bool) -> Result<State> {
        self.check_state(s)?;
        match (self, s) {
            (TorusMap::Skew(sk), State::Skew(st)) => {
                let mut next = *st;
                if backward {
                    let (b, w) = sk.base.step_with_winding(&st.base, -1);
                    next.base = b;
                    next.base_winding = st.base_winding + w;
                    next.y.add(-sk.rho2);
                    next.y.add(-sk.beta.eval(&b));
                } else {
                    let (b, w) = sk.base.step_with_winding(&st.base, 1);
                    next.base = b;
                    next.base_winding = st.base_winding + w;
                    next.y.add(sk.rho2);
                    next.y.add(sk.beta.eval(&st.base));
                }
                if (next.base_winding as f64).abs() > WINDING_LIMIT {
                    return Err(Error::WindingOverflow { steps: 1 });
                }
                Ok(State::Skew(next))
            }
            (_, State::Plane(p)) => {
                let (c0, f0) = p.coords[0].split_cell();
                let (c1, f1) = p.coords[1].split_cell();
                if c0.abs() > WINDING_LIMIT || c1.abs() > WINDING_LIMIT {
                    return Err(Error::WindingOverflow { steps: 1 });
                }
                let d = if backward {
                    self.plane_inverse_displacement([f0, f1])
                } else {
                    self.plane_displacement([f0, f1])
                };
                let mut next = *p;
                next.coords[0].add(d[0]);
                next.coords[1].add(d[1]);
                Ok(State::Plane(next))
            }
            _ => unreachable!("checked above"),
        }
    }

    pub fn step(&self, s: &State) -> Result<State> {
        self.step_dir(s, false)
    }

    pub fn step_inverse(&self, s: &State) -> Result<State> {
        self.step_dir(s, true)
    }

    /// Forward (or backward) orbit, not including the start state.
    pub fn orbit(&self, start: &State, backward: bool) -> Result<Orbit<'_>> {
        self.check_state(start)?;
        let conj = match (self, start) {
            (TorusMap::Conjugated { h, core }, State::Plane(p)) => {
                ConjugateCursor::new(h, core, p, backward)
            }
            _ => None,
        };
        Ok(Orbit {
            map: self,
            current: *start,
            steps: 0,
            backward,
            conj,
        })
    }

    /// Trajectory of length `|n| + 1`; negative `n` runs the inverse.
    pub fn iterate(&self, start: &State, n: i64) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(n.unsigned_abs() as usize + 1);
        states.push(*start);
        for s in self.orbit(start, n < 0)?.take(n.unsigned_abs() as usize) {
            states.push(s?);
        }
        Ok(Trajectory { states })
    }

    /// State after `n` steps without storing the trajectory.
    pub fn iterate_to(&self, start: &State, n: i64) -> Result<State> {
        if n == 0 {
            self.check_state(start)?;
            return Ok(*start);
        }
        if let (TorusMap::Conjugated { h, core }, State::Plane(p)) = (self, start) {
            if let Some(c) = ConjugateCursor::new(h, core, p, n < 0) {
                return c.at(n.unsigned_abs() as i64);
            }
        }
        let mut last = *start;
        for s in self.orbit(start, n < 0)?.take(n.unsigned_abs() as usize) {
            last = s?;
        }
        Ok(last)
    }

    /// Upper bound on the Lipschitz constant of the lift; `None` for skew products.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            TorusMap::Rigid(_) => Some(1.0),
            TorusMap::Shear(s) => Some(s.lipschitz()),
            TorusMap::Composite(fs) => fs.iter().map(TorusMap::lipschitz).product(),
            TorusMap::Conjugated { h, core } => {
                let lh: f64 = h.iter().map(Shear::lipschitz).product();
                core.lipschitz().map(|c| c * lh * lh)
            }
            TorusMap::Skew(_) => None,
        }
    }

    /// Same as [`TorusMap::lipschitz`] for the inverse map.
    pub fn inverse_lipschitz(&self) -> Option<f64> {
        self.lipschitz()
    }

    /// `sup |F(z) - z|`: exact for rigid maps, shears and compositions whose
    /// shears all move one axis; a certified bound otherwise.
    pub fn displacement_sup(&self) -> DisplacementSup {
        match self {
            TorusMap::Rigid(r) => DisplacementSup {
                value: norm(r.rho),
                exact: true,
            },
            TorusMap::Shear(s) => DisplacementSup {
                value: rational::to_f64(&s.psi.sup_abs()),
                exact: true,
            },
            TorusMap::Composite(fs) => {
                if let Some(v) = self.single_axis_sup(fs) {
                    return DisplacementSup {
                        value: v,
                        exact: true,
                    };
                }
                let per = self.coordinate_sup_bound();
                DisplacementSup {
                    value: norm(per),
                    exact: false,
                }
            }
            TorusMap::Conjugated { h, .. } if h.is_empty() => match self {
                TorusMap::Conjugated { core, .. } => core.displacement_sup(),
                _ => unreachable!(),
            },
            TorusMap::Conjugated { .. } => DisplacementSup {
                value: norm(self.coordinate_sup_bound()),
                exact: false,
            },
            TorusMap::Skew(sk) => {
                let base = sk.base.rho1() + sk.base.gap_mass();
                let fiber = sk.rho2.abs() + sk.beta.sup();
                DisplacementSup {
                    value: base.hypot(fiber),
                    exact: false,
                }
            }
        }
    }

    /// Per-coordinate bound on `|F(z) - z|`.
    fn coordinate_sup_bound(&self) -> [f64; 2] {
        match self {
            TorusMap::Rigid(r) => [r.rho[0].abs(), r.rho[1].abs()],
            TorusMap::Shear(s) => {
                let mut out = [0.0; 2];
                out[s.axis.moved()] = rational::to_f64(&s.psi.sup_abs());
                out
            }
            TorusMap::Composite(fs) => fs.iter().fold([0.0; 2], |acc, f| {
                let b = f.coordinate_sup_bound();
                [acc[0] + b[0], acc[1] + b[1]]
            }),
            TorusMap::Conjugated { h, core } => {
                // F - id = rho + dispH(w + rho) - dispH(w); dispH_i ranges over [lo_i, hi_i].
                let mut hi = [0.0; 2];
                let mut lo = [0.0; 2];
                for s in h {
                    let i = s.axis.moved();
                    hi[i] += rational::to_f64(&s.psi.max_value()).max(0.0);
                    lo[i] += rational::to_f64(&s.psi.min_value()).min(0.0);
                }
                let c = core.coordinate_sup_bound();
                [c[0] + hi[0] - lo[0], c[1] + hi[1] - lo[1]]
            }
            TorusMap::Skew(_) => [f64::INFINITY; 2],
        }
    }

    /// Exact sup for compositions of rigid maps and shears moving one axis.
    fn single_axis_sup(&self, fs: &[TorusMap]) -> Option<f64> {
        let mut axis: Option<Axis> = None;
        for f in fs {
            match f {
                TorusMap::Rigid(_) => {}
                TorusMap::Shear(s) => {
                    if axis.is_some_and(|a| a != s.axis) {
                        return None;
                    }
                    axis = Some(s.axis);
                }
                _ => return None,
            }
        }
        let Some(axis) = axis else {
            return Some(norm(self.coordinate_sup_bound()));
        };
        let read = axis.read();
        // Shift of the read coordinate accumulated before each factor acts.
        let mut shift = 0.0;
        let mut candidates = Vec::new();
        for f in fs.iter().rev() {
            match f {
                TorusMap::Rigid(r) => shift += r.rho[read],
                TorusMap::Shear(s) => {
                    let bp = s.psi.breakpoints_f64(2_000_000)?;
                    candidates.extend(bp.into_iter().map(|b| (b - shift).rem_euclid(1.0)));
                }
                _ => unreachable!(),
            }
        }
        let mut best: f64 = 0.0;
        for r in candidates {
            let mut z = [0.0; 2];
            z[read] = r;
            best = best.max(norm(self.plane_displacement(z)));
        }
        Some(best)
    }
}

/// Iterates `H ∘ R ∘ H^-1` as `H(w0 + k rho)` so that rounding does not
/// accumulate along the orbit.
#[derive(Clone, Debug)]
struct ConjugateCursor<'a> {
    h: &'a [Shear],
    cell: [f64; 2],
    w0: [f64; 2],
    phase: Phase,
    sign: i64,
}

#[derive(Clone, Debug)]
enum Phase {
    Exact { num: [i128; 2], den: i128 },
    Big(RationalVector),
    Float { rho: [f64; 2] },
}

impl<'a> ConjugateCursor<'a> {
    fn new(h: &'a [Shear], core: &TorusMap, start: &LiftPoint, backward: bool) -> Option<Self> {
        let TorusMap::Rigid(r) = core else {
            return None;
        };
        let (c0, f0) = start.coords[0].split_cell();
        let (c1, f1) = start.coords[1].split_cell();
        let phase = match &r.exact {
            Some(a) => match (a.num[0].to_i128(), a.num[1].to_i128(), a.den.to_i128()) {
                (Some(p0), Some(p1), Some(q))
                    if p0.unsigned_abs() < 1 << 62 && p1.unsigned_abs() < 1 << 62 =>
                {
                    Phase::Exact {
                        num: [p0, p1],
                        den: q,
                    }
                }
                _ => Phase::Big(a.clone()),
            },
            None => Phase::Float { rho: r.rho },
        };
        Some(ConjugateCursor {
            h,
            cell: [c0, c1],
            w0: apply_h_inverse(h, [f0, f1]),
            phase,
            sign: if backward { -1 } else { 1 },
        })
    }

    fn at(&self, k: i64) -> Result<State> {
        let k = self.sign * k;
        let mut ints = [0.0; 2];
        let mut w = self.w0;
        match &self.phase {
            Phase::Exact { num, den } => {
                for i in 0..2 {
                    let t = num[i] * k as i128;
                    let (d, r) = (t.div_euclid(*den), t.rem_euclid(*den));
                    ints[i] = d as f64;
                    w[i] += r as f64 / *den as f64;
                }
            }
            Phase::Big(a) => {
                let (m, fr) = a.multiple(&num_bigint::BigInt::from(k));
                for i in 0..2 {
                    ints[i] = m[i].to_f64().unwrap_or(f64::INFINITY);
                    w[i] += rational::to_f64(&fr[i]);
                }
            }
            Phase::Float { rho } => {
                for i in 0..2 {
                    let mut c = Compensated::new(0.0);
                    c.sub_product(-(k as f64), rho[i]);
                    let (cell, frac) = c.split_cell();
                    ints[i] = cell;
                    w[i] += frac;
                }
            }
        }
        if ints[0].abs() > WINDING_LIMIT || ints[1].abs() > WINDING_LIMIT {
            return Err(Error::WindingOverflow { steps: k });
        }
        let z = apply_h(self.h, w);
        let mut p = LiftPoint::default();
        for i in 0..2 {
            p.coords[i] = Compensated::new(self.cell[i]);
            p.coords[i].add(ints[i]);
            p.coords[i].add(z[i]);
        }
        Ok(State::Plane(p))
    }
}

/// Lazy orbit; yields the states after 1, 2, ... steps.
pub struct Orbit<'a> {
    map: &'a TorusMap,
    current: State,
    steps: i64,
    backward: bool,
    conj: Option<ConjugateCursor<'a>>,
}

impl Iterator for Orbit<'_> {
    type Item = Result<State>;

    fn next(&mut self) -> Option<Self::Item> {
        self.steps += 1;
        let next = match &self.conj {
            Some(c) => c.at(self.steps),
            None => self.map.step_dir(&self.current, self.backward),
        };
        match next {
            Ok(s) => {
                self.current = s;
                Some(Ok(s))
            }
            Err(Error::WindingOverflow { .. }) => {
                Some(Err(Error::WindingOverflow { steps: self.steps }))
            }
            Err(e) => Some(Err(e)),
        }
    }
}
