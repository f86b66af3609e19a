//! Finite stages of an Anosov-Katok induction producing `f_n = h_n ∘ R_{alpha_n} ∘ h_n^-1`
//! with rational `alpha_n`, verified in exact rational arithmetic.
//!
//! `h_n` is the composition `G_1 ∘ ... ∘ G_n` of axis shears. Odd stages add a
//! fiber shear `(x, y + psi(x))` and perturb the first coordinate of `alpha`;
//! even stages add the transposed shear and perturb the second coordinate.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deviations::{unbounded_criterion_check, CriterionVerdict, ScalarSeries};
use crate::error::{Error, Result};
use crate::numerics::{circle_distance, norm};
use crate::pl::{Axis, BumpFunction, Shear};
use crate::rational::{
    self, big, int, ratio, sqrt_upper, to_f64, RationalVector, RationalVectorText, Q,
};
use crate::torus::{make_conjugated, make_rational_rigid, LiftPoint, State, TorusMap};

/// The seven stage conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `h_n(0) = 0`.
    OriginFixed,
    /// `|alpha_n - alpha_{n-1}| < 2^-n`.
    AlphaStep,
    /// `d_hom(f_n, f_{n-1}) < 2^-n`.
    HomeoDistance,
    /// `|(F_n^k(z) - z)/k - alpha_j| < 2^-j` for `K_j <= k < 2 K_j`.
    AverageWindow,
    /// `|D_e1(f_n, alpha_n, k_j, 0)| > j` for even `j`.
    FirstDeviation,
    /// `|D_e2| > j (|D_e1| + 1)` at `k_j`, `z = 0`, for odd `j`.
    DeviationRatio,
    /// `q_j + 1` orbit points of `f_n` are `1/j`-dense.
    Covering,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::OriginFixed => "origin_fixed",
            Condition::AlphaStep => "alpha_step",
            Condition::HomeoDistance => "homeo_distance",
            Condition::AverageWindow => "average_window",
            Condition::FirstDeviation => "first_deviation",
            Condition::DeviationRatio => "deviation_ratio",
            Condition::Covering => "covering",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Not yet meaningful at this stage.
    Void,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionEntry {
    pub condition: Condition,
    pub j: Option<u32>,
    pub status: Status,
    /// Amount by which the inequality holds (negative on failure).
    pub margin: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionReport {
    pub stage: u32,
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.status != Status::Fail)
    }

    pub fn first_failure(&self) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.status == Status::Fail)
    }

    pub fn entry(&self, condition: Condition, j: Option<u32>) -> Option<&ConditionEntry> {
        self.entries
            .iter()
            .find(|e| e.condition == condition && e.j == j)
    }

    pub fn of(&self, condition: Condition) -> impl Iterator<Item = &ConditionEntry> {
        self.entries
            .iter()
            .filter(move |e| e.condition == condition)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AkSearchParams {
    /// Largest multiplier `q` tried before giving up.
    pub q_cap: u64,
    /// Factor applied to the plateau height; 0 removes the shear.
    pub plateau_scale: f64,
    /// Side of the test grid of the covering check.
    pub covering_grid: usize,
    /// Side of the grid of orbit starts of the covering check.
    pub covering_starts: usize,
    /// Longest orbit prefix used by the covering check.
    pub orbit_cap: usize,
    /// Side of the diagnostic grid of the average-window check.
    pub average_grid: usize,
}

impl Default for AkSearchParams {
    fn default() -> Self {
        AkSearchParams {
            q_cap: 1 << 62,
            plateau_scale: 1.0,
            covering_grid: 20,
            covering_starts: 3,
            orbit_cap: 4096,
            average_grid: 3,
        }
    }
}

/// One stage: `alpha_0..alpha_n`, the shears of `h_n`, `k_1..k_n`, `K_1..K_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AkStageText", into = "AkStageText")]
pub struct AkStage {
    pub n: u32,
    pub alphas: Vec<RationalVector>,
    pub shears: Vec<Shear>,
    pub k_list: Vec<BigInt>,
    pub big_k_list: Vec<BigInt>,
    pub report: ConditionReport,
}

/// Text form; rationals and integers as decimal strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AkStageText {
    pub n: u32,
    pub alphas: Vec<RationalVectorText>,
    pub shears: Vec<Shear>,
    pub k_list: Vec<String>,
    pub big_k_list: Vec<String>,
    pub report: ConditionReport,
}

impl From<AkStage> for AkStageText {
    fn from(s: AkStage) -> Self {
        AkStageText {
            n: s.n,
            alphas: s.alphas.iter().map(RationalVectorText::from).collect(),
            shears: s.shears,
            k_list: s.k_list.iter().map(BigInt::to_string).collect(),
            big_k_list: s.big_k_list.iter().map(BigInt::to_string).collect(),
            report: s.report,
        }
    }
}

impl TryFrom<AkStageText> for AkStage {
    type Error = Error;
    fn try_from(t: AkStageText) -> Result<Self> {
        let n = t.n as usize;
        if t.alphas.len() != n + 1
            || t.shears.len() != n
            || t.k_list.len() != n
            || t.big_k_list.len() != n
        {
            return Err(Error::StageFormat(format!(
                "stage {n} needs {} alphas and {n} shears, k and K values",
                n + 1
            )));
        }
        Ok(AkStage {
            n: t.n,
            alphas: t
                .alphas
                .iter()
                .map(RationalVector::try_from)
                .collect::<Result<_>>()?,
            shears: t.shears,
            k_list: t
                .k_list
                .iter()
                .map(|s| rational::parse_int(s))
                .collect::<Result<_>>()?,
            big_k_list: t
                .big_k_list
                .iter()
                .map(|s| rational::parse_int(s))
                .collect::<Result<_>>()?,
            report: t.report,
        })
    }
}

fn apply_h_exact(shears: &[Shear], p: [Q; 2]) -> [Q; 2] {
    let mut z = p;
    for s in shears.iter().rev() {
        s.apply_exact(&mut z);
    }
    z
}

fn apply_h_inverse_f64(shears: &[Shear], z: [f64; 2]) -> [f64; 2] {
    shears.iter().fold(z, |w, s| s.apply_inverse(w))
}

fn apply_h_f64(shears: &[Shear], z: [f64; 2]) -> [f64; 2] {
    shears.iter().rev().fold(z, |w, s| s.apply(w))
}

fn pow2_inv(n: u32) -> Q {
    Q::new(BigInt::one(), BigInt::one() << n as usize)
}

/// `(C^1, C^2)`: bounds on `|pi_i(H^±1(z) - z)|`, sums of shear maxima.
pub fn coordinate_constants(shears: &[Shear]) -> [Q; 2] {
    let mut c = [Q::zero(), Q::zero()];
    for s in shears {
        c[s.axis.moved()] += s.psi.sup_abs();
    }
    c
}

/// Squared bound on `|H(u) - H(u')|` when `|u - u'| <= delta` componentwise,
/// pushing the difference through each shear's exact Lipschitz constant.
pub fn propagated_bound_sq(shears: &[Shear], delta: [Q; 2]) -> Q {
    let mut d = delta;
    for s in shears.iter().rev() {
        let l = s.psi.lipschitz();
        let add = &l * &d[s.axis.read()];
        d[s.axis.moved()] += add;
    }
    &d[0] * &d[0] + &d[1] * &d[1]
}

/// `ceil(8 (C^1 + C^2) 2^j) + 1`.
fn window_start(c: &[Q; 2], j: u32) -> BigInt {
    let v = (&c[0] + &c[1]) * int(8) * big(&(BigInt::one() << j as usize));
    v.ceil().to_integer() + BigInt::one()
}

fn frac_vec(p: &[Q; 2]) -> [Q; 2] {
    [rational::frac(&p[0]), rational::frac(&p[1])]
}

impl AkStage {
    /// Stage 0: `alpha_0 = (3/6, 2/6)`, `h_0 = id`.
    pub fn initial() -> AkStage {
        let mut s = AkStage {
            n: 0,
            alphas: vec![RationalVector::from_i64(3, 2, 6)],
            shears: Vec::new(),
            k_list: Vec::new(),
            big_k_list: Vec::new(),
            report: ConditionReport {
                stage: 0,
                entries: Vec::new(),
            },
        };
        s.report = ak_verify(&s, &AkSearchParams::default());
        s
    }

    pub fn alpha(&self) -> &RationalVector {
        self.alphas.last().expect("alpha_0 always present")
    }

    /// `q_n`, the shared denominator of `alpha_n`.
    pub fn q(&self) -> &BigInt {
        &self.alpha().den
    }

    /// `f_n` as a conjugated rational rotation.
    pub fn torus_map(&self) -> TorusMap {
        make_conjugated(self.shears.clone(), make_rational_rigid(self.alpha()))
            .expect("rigid core is a plane map")
    }

    /// `H_n` evaluated exactly.
    pub fn h_exact(&self, p: [Q; 2]) -> [Q; 2] {
        apply_h_exact(&self.shears, p)
    }

    /// `D(f_n, alpha_n, k, 0) = H_n(k alpha_n mod 1) - (k alpha_n mod 1)`, exact.
    pub fn deviation_at_origin(&self, k: &BigInt) -> [Q; 2] {
        let (_, fr) = self.alpha().multiple(k);
        let h = self.h_exact(fr.clone());
        [&h[0] - &fr[0], &h[1] - &fr[1]]
    }

    /// `F_n^k(z) - z` as an exact integer part plus a double remainder,
    /// evaluated as `H(H^-1(z) + k alpha_n)` so that huge `k` stay exact.
    pub fn displacement_after(&self, z: [f64; 2], k: &BigInt) -> ([BigInt; 2], [f64; 2]) {
        let w = apply_h_inverse_f64(&self.shears, z);
        let (m, fr) = self.alpha().multiple(k);
        let v = apply_h_f64(&self.shears, [w[0] + to_f64(&fr[0]), w[1] + to_f64(&fr[1])]);
        (m, [v[0] - z[0], v[1] - z[1]])
    }

    /// `|F_n^{q_n}(z) - z - (p_n, p'_n)|`, evaluated exactly as
    /// `H(H^-1(z) + q_n alpha_n)` from the rational value of `z`. Double
    /// evaluation of `H` loses every digit once shear slopes pass `1/ulp`.
    pub fn period_residual(&self, z: [f64; 2]) -> f64 {
        let (Ok(x), Ok(y)) = (rational::from_f64(z[0]), rational::from_f64(z[1])) else {
            return f64::INFINITY;
        };
        let mut w = [x.clone(), y.clone()];
        for s in &self.shears {
            s.apply_inverse_exact(&mut w);
        }
        let a = self.alpha();
        let (m, fr) = a.multiple(&a.den);
        let shifted = [&w[0] + big(&m[0]) + &fr[0], &w[1] + big(&m[1]) + &fr[1]];
        let v = self.h_exact(shifted);
        let r = [
            to_f64(&(&v[0] - &x - big(&a.num[0]))),
            to_f64(&(&v[1] - &y - big(&a.num[1]))),
        ];
        norm(r)
    }

    /// Bound on `d_hom(f_j, f_{j-1})` for `1 <= j <= n`.
    pub fn homeo_bound(&self, j: u32) -> f64 {
        sqrt_upper(&self.homeo_bound_sq(j))
    }

    fn homeo_bound_sq(&self, j: u32) -> Q {
        let j = j as usize;
        let d = self.alphas[j].abs_diff(&self.alphas[j - 1]);
        propagated_bound_sq(&self.shears[..j], d)
    }

    /// `2 (C^1_j + C^2_j) / K_j`: bound on `|(F_j^k(z) - z)/k - alpha_j|` for `k >= K_j`.
    fn own_window_bound(&self, j: u32) -> Q {
        let c = coordinate_constants(&self.shears[..j as usize]);
        (&c[0] + &c[1]) * int(2) / big(&self.big_k_list[j as usize - 1])
    }

    /// Exact deviations at `z = 0` for `k_1..k_n` as `(D_e1, D_e2)` series.
    pub fn origin_series(&self) -> Result<(ScalarSeries, ScalarSeries)> {
        let mut times = Vec::new();
        let mut u = Vec::new();
        let mut w = Vec::new();
        for k in &self.k_list {
            let t = k
                .to_i64()
                .ok_or_else(|| Error::StageFormat(format!("k = {k} exceeds 64 bits")))?;
            let d = self.deviation_at_origin(k);
            times.push(t);
            w.push(to_f64(&d[0]));
            u.push(to_f64(&d[1]));
        }
        let z0 = State::Plane(LiftPoint::new([0.0, 0.0]));
        Ok((
            ScalarSeries {
                z0,
                v: [0.0, 1.0],
                times: times.clone(),
                values: u,
            },
            ScalarSeries {
                z0,
                v: [1.0, 0.0],
                times,
                values: w,
            },
        ))
    }

    /// Unbounded-deviation criterion at `z = 0` with `u = e2`, `w = e1`:
    /// ratio checks over `k_1..k_j` for odd `j`, magnitude checks for even `j`.
    pub fn unboundedness_check(&self) -> Result<UnboundednessCheck> {
        let (u, w) = self.origin_series()?;
        let mut ratio_checks = Vec::new();
        let mut magnitude_checks = Vec::new();
        for j in 1..=self.n {
            let len = j as usize;
            if j % 2 == 1 {
                let pu = ScalarSeries {
                    times: u.times[..len].to_vec(),
                    values: u.values[..len].to_vec(),
                    ..u.clone()
                };
                let pw = ScalarSeries {
                    times: w.times[..len].to_vec(),
                    values: w.values[..len].to_vec(),
                    ..w.clone()
                };
                ratio_checks.push((j, unbounded_criterion_check(&pu, &pw, j as f64, 0.0)?));
            } else {
                magnitude_checks.push((
                    j,
                    w.values[len - 1].abs(),
                    w.values[len - 1].abs() > j as f64,
                ));
            }
        }
        let holds = ratio_checks.iter().all(|(_, v)| v.ratio_exceeded)
            && magnitude_checks.iter().all(|m| m.2);
        Ok(UnboundednessCheck {
            stage: self.n,
            ratio_checks,
            magnitude_checks,
            holds,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnboundednessCheck {
    pub stage: u32,
    /// `(j, verdict)` with ratio threshold `j`, odd `j`.
    pub ratio_checks: Vec<(u32, CriterionVerdict)>,
    /// `(j, |D_e1(k_j)|, > j)`, even `j`.
    pub magnitude_checks: Vec<(u32, f64, bool)>,
    pub holds: bool,
}

fn entry(
    condition: Condition,
    j: Option<u32>,
    margin: Option<f64>,
    pass: bool,
    detail: String,
) -> ConditionEntry {
    ConditionEntry {
        condition,
        j,
        status: if pass { Status::Pass } else { Status::Fail },
        margin,
        detail,
    }
}

fn void(condition: Condition) -> ConditionEntry {
    ConditionEntry {
        condition,
        j: None,
        status: Status::Void,
        margin: None,
        detail: "void at this stage".into(),
    }
}

/// All conditions except covering.
fn verify_cheap(stage: &AkStage, params: &AkSearchParams) -> Vec<ConditionEntry> {
    let mut out = Vec::new();
    let n = stage.n;
    let origin = stage.h_exact([Q::zero(), Q::zero()]);
    out.push(entry(
        Condition::OriginFixed,
        None,
        Some(0.0),
        origin[0].is_zero() && origin[1].is_zero(),
        format!(
            "H(0) = ({}, {})",
            rational::format(&origin[0]),
            rational::format(&origin[1])
        ),
    ));
    if n == 0 {
        for c in [
            Condition::AlphaStep,
            Condition::HomeoDistance,
            Condition::AverageWindow,
            Condition::FirstDeviation,
            Condition::DeviationRatio,
            Condition::Covering,
        ] {
            out.push(void(c));
        }
        return out;
    }
    let bound = pow2_inv(n);

    let step_sq = stage.alphas[n as usize].dist_sq(&stage.alphas[n as usize - 1]);
    out.push(entry(
        Condition::AlphaStep,
        None,
        Some(to_f64(&bound) - sqrt_upper(&step_sq)),
        step_sq < &bound * &bound,
        format!("|alpha_n - alpha_(n-1)|^2 = {}", rational::format(&step_sq)),
    ));

    let e_sq = stage.homeo_bound_sq(n);
    out.push(entry(
        Condition::HomeoDistance,
        None,
        Some(to_f64(&bound) - sqrt_upper(&e_sq)),
        e_sq < &bound * &bound,
        format!(
            "propagated shear bound {:.6e} on both f_n - f_(n-1) and the inverses",
            sqrt_upper(&e_sq)
        ),
    ));

    let g = params.average_grid.max(1);
    for j in 1..=n {
        let later = (j + 1..=n)
            .map(|i| stage.homeo_bound(i))
            .fold(0.0, |a, b| a + b);
        let own = to_f64(&stage.own_window_bound(j));
        let total = own + later;
        let target = to_f64(&pow2_inv(j));
        let kj = &stage.big_k_list[j as usize - 1];
        let alpha_j = stage.alphas[j as usize].components();
        let mut grid_max: f64 = 0.0;
        for k in [kj.clone(), kj * 2 - 1] {
            let kq = big(&k);
            let a_n = stage.alpha().components();
            for i in 0..g * g {
                let w = [
                    ratio((i % g) as i64, g as i64),
                    ratio((i / g) as i64, g as i64),
                ];
                let start = stage.h_exact(w.clone());
                let end = stage.h_exact([&w[0] + &a_n[0] * &kq, &w[1] + &a_n[1] * &kq]);
                let avg = [
                    to_f64(&((&end[0] - &start[0]) / &kq - &alpha_j[0])),
                    to_f64(&((&end[1] - &start[1]) / &kq - &alpha_j[1])),
                ];
                grid_max = grid_max.max(norm(avg));
            }
        }
        out.push(entry(
            Condition::AverageWindow,
            Some(j),
            Some(target - total),
            total < target && grid_max <= total,
            format!(
                "certified bound {own:.3e} + {later:.3e} with K_j = {kj}; grid maximum {grid_max:.3e}"
            ),
        ));
    }

    for j in 1..=n {
        let k = &stage.k_list[j as usize - 1];
        let d = stage.deviation_at_origin(k);
        let (d1, d2) = (d[0].abs(), d[1].abs());
        let jq = int(j as i64);
        if j % 2 == 0 {
            let m = &d1 - &jq;
            out.push(entry(
                Condition::FirstDeviation,
                Some(j),
                Some(to_f64(&m)),
                m.is_positive(),
                format!("|D_e1(k_j = {k})| = {:.6}", to_f64(&d1)),
            ));
        } else {
            let m = &d2 - &jq * (&d1 + Q::one());
            out.push(entry(
                Condition::DeviationRatio,
                Some(j),
                Some(to_f64(&m)),
                m.is_positive(),
                format!(
                    "|D_e2(k_j = {k})| = {:.6}, |D_e1| = {:.6}",
                    to_f64(&d2),
                    to_f64(&d1)
                ),
            ));
        }
    }
    out
}

/// Exact orbit points `H(w + k alpha_n mod 1)`, `0 <= k < len`, as doubles.
fn orbit_points(stage: &AkStage, w: &[Q; 2], len: usize) -> Vec<[f64; 2]> {
    let a = stage.alpha().components();
    let mut p = w.clone();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let h = stage.h_exact(p.clone());
        out.push([to_f64(&h[0]), to_f64(&h[1])]);
        p = frac_vec(&[&p[0] + &a[0], &p[1] + &a[1]]);
    }
    out
}

fn covering_radius(points: &[[f64; 2]], grid: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..grid * grid {
        let g = [
            (i % grid) as f64 / grid as f64,
            (i / grid) as f64 / grid as f64,
        ];
        let best = points
            .iter()
            .map(|p| {
                let dx = circle_distance(p[0] - g[0]);
                let dy = circle_distance(p[1] - g[1]);
                dx * dx + dy * dy
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best.sqrt());
    }
    worst
}

fn verify_covering(stage: &AkStage, params: &AkSearchParams) -> Vec<ConditionEntry> {
    let n = stage.n;
    if n == 0 {
        return Vec::new();
    }
    let s = params.covering_starts.max(1);
    let grid = params.covering_grid.max(2);
    let pad = std::f64::consts::FRAC_1_SQRT_2 / grid as f64;
    let lens: Vec<usize> = (1..=n)
        .map(|j| {
            let qj = &stage.alphas[j as usize].den;
            (qj + BigInt::one())
                .to_usize()
                .map_or(params.orbit_cap, |v| v.min(params.orbit_cap))
        })
        .collect();
    let longest = lens.iter().copied().max().unwrap_or(1);
    let starts: Vec<[Q; 2]> = (0..s * s)
        .map(|i| {
            [
                Q::new(BigInt::from(2 * (i % s) + 1), BigInt::from(2 * s)),
                Q::new(BigInt::from(2 * (i / s) + 1), BigInt::from(2 * s)),
            ]
        })
        .collect();
    let radii: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|w| {
            let pts = orbit_points(stage, w, longest);
            (2..=n)
                .map(|j| covering_radius(&pts[..lens[j as usize - 1]], grid))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let diag = std::f64::consts::FRAC_1_SQRT_2;
    out.push(entry(
        Condition::Covering,
        Some(1),
        Some(1.0 - diag),
        true,
        "radius 1 exceeds the torus diameter".into(),
    ));
    for j in 2..=n {
        let measured = radii.iter().map(|r| r[j as usize - 2]).fold(0.0, f64::max);
        let margin = 1.0 / j as f64 - pad - measured;
        out.push(entry(
            Condition::Covering,
            Some(j),
            Some(margin),
            margin > 0.0,
            format!(
                "{} orbit points from {} starts; grid {grid}x{grid}; worst distance {measured:.4} plus padding {pad:.4}",
                lens[j as usize - 1],
                s * s
            ),
        ));
    }
    out
}

/// Full condition report for a constructed stage.
pub fn ak_verify(stage: &AkStage, params: &AkSearchParams) -> ConditionReport {
    let mut entries = verify_cheap(stage, params);
    entries.extend(verify_covering(stage, params));
    ConditionReport {
        stage: stage.n,
        entries,
    }
}

/// Constructs stage `n + 1` by doubling `q` from `8 q_n` until every condition
/// passes and `d_hom(f_{n+1}, f_n)` uses at most half of its allowance.
pub fn ak_advance(stage: &AkStage, params: &AkSearchParams) -> Result<AkStage> {
    let n = stage.n;
    let next = n + 1;
    let qn = stage.q().clone();
    let c = coordinate_constants(&stage.shears);
    let n1 = int(next as i64);
    let axis = if n.is_multiple_of(2) {
        Axis::Y
    } else {
        Axis::X
    };
    let threshold = match axis {
        Axis::Y => &n1 * (int(2) * &c[0] + Q::one()) + &c[1] + Q::one(),
        Axis::X => &n1 + &c[0] + Q::one(),
    };
    let height = threshold * rational::from_f64(params.plateau_scale)?;
    let psi = BumpFunction::trapezoid(qn.clone(), ratio(1, 3), height)?;
    let mut shears = stage.shears.clone();
    shears.push(Shear::new(axis, psi));
    let big_k = window_start(&coordinate_constants(&shears), next);
    let budget = pow2_inv(next) / int(2);

    let a = stage.alpha();
    let mut q: BigInt = &qn * 8;
    let mut last_failure = String::from("none attempted");
    while q <= BigInt::from(params.q_cap) {
        let den = &q * &qn;
        let num: [BigInt; 2] = match axis {
            Axis::Y => [&a.num[0] * &q + 1, &a.num[1] * &q],
            Axis::X => [&a.num[0] * &q, &a.num[1] * &q + 1],
        };
        let alpha = RationalVector::new(num[0].clone(), num[1].clone(), den);
        let mut alphas = stage.alphas.clone();
        alphas.push(alpha);
        let mut k_list = stage.k_list.clone();
        k_list.push(q.div_floor(&BigInt::from(2)));
        let mut big_k_list = stage.big_k_list.clone();
        big_k_list.push(big_k.clone());
        let mut cand = AkStage {
            n: next,
            alphas,
            shears: shears.clone(),
            k_list,
            big_k_list,
            report: ConditionReport {
                stage: next,
                entries: Vec::new(),
            },
        };
        let cheap = verify_cheap(&cand, params);
        let within_budget = cand.homeo_bound_sq(next) <= &budget * &budget;
        match cheap.iter().find(|e| e.status == Status::Fail) {
            Some(f) => last_failure = f.condition.name().to_string(),
            None if !within_budget => last_failure = "homeo_distance_budget".to_string(),
            None => {
                let covering = verify_covering(&cand, params);
                match covering.iter().find(|e| e.status == Status::Fail) {
                    Some(f) => last_failure = f.condition.name().to_string(),
                    None => {
                        let mut entries = cheap;
                        entries.extend(covering);
                        cand.report = ConditionReport {
                            stage: next,
                            entries,
                        };
                        return Ok(cand);
                    }
                }
            }
        }
        q *= 2;
    }
    Err(Error::StageFailure {
        stage: next as usize,
        condition: last_failure,
        q_cap: params.q_cap,
    })
}

/// Stages `0..=n`.
pub fn ak_stages(n: u32, params: &AkSearchParams) -> Result<Vec<AkStage>> {
    let mut out = vec![AkStage::initial()];
    for _ in 0..n {
        let next = ak_advance(out.last().expect("nonempty"), params)?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn stages() -> &'static Vec<AkStage> {
        static S: OnceLock<Vec<AkStage>> = OnceLock::new();
        S.get_or_init(|| ak_stages(2, &AkSearchParams::default()).unwrap())
    }

    #[test]
    fn stage_zero_is_void() {
        let s = AkStage::initial();
        assert_eq!(s.q(), &BigInt::from(6));
        assert_eq!(s.report.entries[0].status, Status::Pass);
        assert!(s.report.entries[1..]
            .iter()
            .all(|e| e.status == Status::Void));
        assert!(s.report.all_pass());
    }

    #[test]
    fn stage_one_values() {
        let s = &stages()[1];
        assert_eq!(s.q(), &BigInt::from(288));
        assert_eq!(s.alpha(), &RationalVector::from_i64(145, 96, 288));
        assert_eq!(s.k_list[0], BigInt::from(24));
        assert!(s.report.all_pass(), "{:#?}", s.report);
        let d = s.deviation_at_origin(&s.k_list[0]);
        assert_eq!(d[0], Q::zero());
        assert_eq!(d[1], int(2));
    }

    #[test]
    fn stage_two_passes_and_periodic() {
        let s = &stages()[2];
        assert!(s.report.all_pass(), "{:#?}", s.report);
        for z in [[0.1, 0.2], [0.77, 0.31]] {
            assert!(s.period_residual(z) < 1e-9);
        }
        let e = s.report.entry(Condition::FirstDeviation, Some(2)).unwrap();
        assert!(e.margin.unwrap() > 0.0);
        assert!(s.unboundedness_check().unwrap().holds);
    }

    #[test]
    fn constants_and_propagation() {
        let s = &stages()[2];
        let c = coordinate_constants(&s.shears);
        assert_eq!(c[1], int(2));
        assert_eq!(c[0], int(3));
        let zero = propagated_bound_sq(&s.shears, [Q::zero(), Q::zero()]);
        assert!(zero.is_zero());
    }

    #[test]
    fn text_round_trip() {
        let s = &stages()[2];
        let json = serde_json::to_string(s).unwrap();
        let back: AkStage = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, s);
        let bad = json.replacen("\"n\":2", "\"n\":3", 1);
        assert!(serde_json::from_str::<AkStage>(&bad).is_err());
    }

    #[test]
    fn zeroed_plateau_fails_ratio() {
        let params = AkSearchParams {
            plateau_scale: 0.0,
            q_cap: 1 << 12,
            ..Default::default()
        };
        match ak_advance(&AkStage::initial(), &params) {
            Err(Error::StageFailure {
                condition, stage, ..
            }) => {
                assert_eq!(stage, 1);
                assert_eq!(condition, "deviation_ratio");
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
