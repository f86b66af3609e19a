//! Periodic piecewise-linear bump functions and the axis shears built from them.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rational::{self, Q};

/// Continuous PL function of period `1/q` vanishing at 0.
///
/// Nodes are given in period-relative coordinates `u = frac(q x)` as
/// `(u, value)` with `u` running from 0 to 1 and value 0 at both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BumpText", into = "BumpText")]
pub struct BumpFunction {
    period_den: BigInt,
    nodes: Vec<(Q, Q)>,
    period_den_f64: f64,
    nodes_f64: Vec<(f64, f64)>,
}

/// Text form with exact rationals written as `n/d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpText {
    pub period_den: String,
    pub nodes: Vec<[String; 2]>,
}

impl From<BumpFunction> for BumpText {
    fn from(b: BumpFunction) -> Self {
        BumpText {
            period_den: b.period_den.to_string(),
            nodes: b
                .nodes
                .iter()
                .map(|(u, v)| [rational::format(u), rational::format(v)])
                .collect(),
        }
    }
}

impl TryFrom<BumpText> for BumpFunction {
    type Error = Error;
    fn try_from(t: BumpText) -> Result<Self> {
        let q = rational::parse_int(&t.period_den)?;
        let nodes = t
            .nodes
            .iter()
            .map(|[u, v]| Ok((rational::parse(u)?, rational::parse(v)?)))
            .collect::<Result<Vec<_>>>()?;
        BumpFunction::new(q, nodes)
    }
}

impl BumpFunction {
    pub fn new(period_den: BigInt, nodes: Vec<(Q, Q)>) -> Result<Self> {
        if !period_den.is_positive() {
            return Err(invalid("period_den", "must be a positive integer"));
        }
        if nodes.len() < 2 {
            return Err(invalid("nodes", "need at least the two end nodes"));
        }
        let first = &nodes[0];
        let last = &nodes[nodes.len() - 1];
        if !first.0.is_zero() || !first.1.is_zero() || !last.0.is_one() || !last.1.is_zero() {
            return Err(invalid(
                "nodes",
                "must start at (0, 0) and end at (1, 0) in period-relative coordinates",
            ));
        }
        if nodes.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(invalid("nodes", "positions must be strictly increasing"));
        }
        let period_den_f64 = period_den.to_f64().unwrap_or(f64::INFINITY);
        let nodes_f64 = nodes
            .iter()
            .map(|(u, v)| (rational::to_f64(u), rational::to_f64(v)))
            .collect();
        Ok(BumpFunction {
            period_den,
            nodes,
            period_den_f64,
            nodes_f64,
        })
    }

    /// Builds from double-precision nodes, taken as exact binary rationals.
    pub fn from_f64(period_den: u64, nodes: &[(f64, f64)]) -> Result<Self> {
        let nodes = nodes
            .iter()
            .map(|&(u, v)| Ok((rational::from_f64(u)?, rational::from_f64(v)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(BigInt::from(period_den), nodes)
    }

    pub fn zero() -> Self {
        Self::new(
            BigInt::one(),
            vec![(Q::zero(), Q::zero()), (Q::one(), Q::zero())],
        )
        .expect("valid")
    }

    /// Trapezoid: ramps over `[0, a]` and `[1 - a, 1]`, plateau `height` on `[a, 1 - a]`.
    pub fn trapezoid(period_den: BigInt, a: Q, height: Q) -> Result<Self> {
        let half = rational::ratio(1, 2);
        if !a.is_positive() || a >= half {
            return Err(invalid("ramp", "ramp fraction must lie in (0, 1/2)"));
        }
        let b = Q::one() - &a;
        Self::new(
            period_den,
            vec![
                (Q::zero(), Q::zero()),
                (a, height.clone()),
                (b, height),
                (Q::one(), Q::zero()),
            ],
        )
    }

    pub fn period_den(&self) -> &BigInt {
        &self.period_den
    }

    pub fn nodes(&self) -> &[(Q, Q)] {
        &self.nodes
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x * self.period_den_f64).rem_euclid(1.0);
        let nodes = &self.nodes_f64;
        let i = nodes
            .partition_point(|n| n.0 <= u)
            .clamp(1, nodes.len() - 1);
        let (u0, v0) = nodes[i - 1];
        let (u1, v1) = nodes[i];
        v0 + (u - u0) * (v1 - v0) / (u1 - u0)
    }

    pub fn eval_exact(&self, x: &Q) -> Q {
        let u = rational::frac(&(x * rational::big(&self.period_den)));
        let i = self
            .nodes
            .partition_point(|n| n.0 <= u)
            .clamp(1, self.nodes.len() - 1);
        let (u0, v0) = &self.nodes[i - 1];
        let (u1, v1) = &self.nodes[i];
        v0 + (&u - u0) * (v1 - v0) / (u1 - u0)
    }

    pub fn max_value(&self) -> Q {
        self.nodes
            .iter()
            .map(|n| n.1.clone())
            .max()
            .expect("nonempty")
    }

    pub fn min_value(&self) -> Q {
        self.nodes
            .iter()
            .map(|n| n.1.clone())
            .min()
            .expect("nonempty")
    }

    /// `max |psi|`, attained at a node.
    pub fn sup_abs(&self) -> Q {
        self.nodes
            .iter()
            .map(|n| n.1.abs())
            .max()
            .expect("nonempty")
    }

    /// Exact Lipschitz constant: steepest slope in absolute coordinates.
    pub fn lipschitz(&self) -> Q {
        self.nodes
            .windows(2)
            .map(|w| ((&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0)).abs())
            .max()
            .expect("nonempty")
            * rational::big(&self.period_den)
    }

    /// First maximal run of nodes at the maximum value, as an absolute
    /// interval inside `(0, 1/q)` with that value.
    pub fn plateau(&self) -> Option<(Q, Q, Q)> {
        let m = self.max_value();
        if !m.is_positive() {
            return None;
        }
        let start = self.nodes.iter().position(|n| n.1 == m)?;
        let mut end = start;
        while end + 1 < self.nodes.len() && self.nodes[end + 1].1 == m {
            end += 1;
        }
        let q = rational::big(&self.period_den);
        Some((&self.nodes[start].0 / &q, &self.nodes[end].0 / &q, m))
    }

    /// Absolute positions of all breakpoints in `[0, 1)`; `None` past `limit`.
    pub fn breakpoints_f64(&self, limit: usize) -> Option<Vec<f64>> {
        let q = self.period_den.to_usize()?;
        let per = self.nodes.len() - 1;
        if q.checked_mul(per)? > limit {
            return None;
        }
        let mut out = Vec::with_capacity(q * per);
        for j in 0..q {
            for (u, _) in &self.nodes_f64[..per] {
                out.push((j as f64 + u) / q as f64);
            }
        }
        Some(out)
    }

    /// Same nodes with every value multiplied by `s`.
    pub fn scaled(&self, s: &Q) -> Self {
        let nodes = self.nodes.iter().map(|(u, v)| (u.clone(), v * s)).collect();
        Self::new(self.period_den.clone(), nodes).expect("scaling keeps the node layout valid")
    }
}

/// Displaced coordinate of a shear.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// `(x, y) -> (x + psi(y), y)`.
    #[serde(rename = "x")]
    X,
    /// `(x, y) -> (x, y + psi(x))`.
    #[serde(rename = "y")]
    Y,
}

impl Axis {
    /// Index of the displaced coordinate.
    pub fn moved(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }

    /// Index of the coordinate read by the bump function.
    pub fn read(self) -> usize {
        1 - self.moved()
    }
}

/// Axis shear `(x, y) -> (x, y + psi(x))` or its transpose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shear {
    pub axis: Axis,
    pub psi: BumpFunction,
}

impl Shear {
    pub fn new(axis: Axis, psi: BumpFunction) -> Self {
        Shear { axis, psi }
    }

    pub fn displacement(&self, z: [f64; 2]) -> [f64; 2] {
        let mut d = [0.0; 2];
        d[self.axis.moved()] = self.psi.eval(z[self.axis.read()]);
        d
    }

    pub fn apply(&self, z: [f64; 2]) -> [f64; 2] {
        let mut out = z;
        out[self.axis.moved()] += self.psi.eval(z[self.axis.read()]);
        out
    }

    pub fn apply_inverse(&self, z: [f64; 2]) -> [f64; 2] {
        let mut out = z;
        out[self.axis.moved()] -= self.psi.eval(z[self.axis.read()]);
        out
    }

    pub fn apply_exact(&self, z: &mut [Q; 2]) {
        let v = self.psi.eval_exact(&z[self.axis.read()]);
        z[self.axis.moved()] += v;
    }

    pub fn apply_inverse_exact(&self, z: &mut [Q; 2]) {
        let v = self.psi.eval_exact(&z[self.axis.read()]);
        z[self.axis.moved()] -= v;
    }

    /// Operator norm of `[[1, 0], [L, 1]]`, the exact Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        let l = rational::to_f64(&self.psi.lipschitz());
        (l + (l * l + 4.0).sqrt()) / 2.0
    }
}
