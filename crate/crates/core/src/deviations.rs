//! Deviations `D(n, z) = F^n(z) - z - n rho` and their analyses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{dot, norm, torus_distance};
use crate::torus::{State, TorusMap};

/// `D(n, z0)` at the listed times, with the lift position `F^n(z0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationSeries {
    pub map_id: String,
    pub rho: [f64; 2],
    pub z0: State,
    pub times: Vec<i64>,
    pub lift: Vec<[f64; 2]>,
    pub values: Vec<[f64; 2]>,
}

impl DeviationSeries {
    pub fn at(&self, n: i64) -> Option<[f64; 2]> {
        self.times.binary_search(&n).ok().map(|i| self.values[i])
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|d| norm(*d)).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Dense series for `0 <= n <= n_max`, optionally also `-n_max <= n < 0`.
pub fn deviation_series(
    map: &TorusMap,
    rho: [f64; 2],
    z: &State,
    n_max: i64,
    include_negative: bool,
    map_id: &str,
) -> Result<DeviationSeries> {
    if n_max < 1 {
        return Err(invalid("n_max", "must be at least 1"));
    }
    let mut neg = Vec::new();
    if include_negative {
        for (i, s) in map.orbit(z, true)?.take(n_max as usize).enumerate() {
            let s = s?;
            let n = -(i as i64 + 1);
            neg.push((n, map.lift_coords(&s), map.deviation(z, &s, n, rho)));
        }
        neg.reverse();
    }
    let cap = neg.len() + n_max as usize + 1;
    let mut times = Vec::with_capacity(cap);
    let mut lift = Vec::with_capacity(cap);
    let mut values = Vec::with_capacity(cap);
    for (n, l, d) in neg {
        times.push(n);
        lift.push(l);
        values.push(d);
    }
    times.push(0);
    lift.push(map.lift_coords(z));
    values.push([0.0, 0.0]);
    for (i, s) in map.orbit(z, false)?.take(n_max as usize).enumerate() {
        let s = s?;
        let n = i as i64 + 1;
        times.push(n);
        lift.push(map.lift_coords(&s));
        values.push(map.deviation(z, &s, n, rho));
    }
    Ok(DeviationSeries {
        map_id: map_id.to_string(),
        rho,
        z0: *z,
        times,
        lift,
        values,
    })
}

/// Series evaluated only at selected times.
pub fn sparse_series(
    map: &TorusMap,
    rho: [f64; 2],
    z: &State,
    times: &[i64],
    map_id: &str,
) -> Result<DeviationSeries> {
    let mut sorted = times.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut lift = Vec::with_capacity(sorted.len());
    let mut values = Vec::with_capacity(sorted.len());
    for &n in &sorted {
        let s = map.iterate_to(z, n)?;
        lift.push(map.lift_coords(&s));
        values.push(map.deviation(z, &s, n, rho));
    }
    Ok(DeviationSeries {
        map_id: map_id.to_string(),
        rho,
        z0: *z,
        times: sorted,
        lift,
        values,
    })
}

/// Scalar series `D_v(n, z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSeries {
    pub z0: State,
    pub v: [f64; 2],
    pub times: Vec<i64>,
    pub values: Vec<f64>,
}

fn check_unit(v: [f64; 2]) -> Result<()> {
    if (norm(v) - 1.0).abs() > 1e-12 {
        return Err(invalid("v", format!("{v:?} is not a unit vector")));
    }
    Ok(())
}

/// Projection `<D(n, z), v>` of a stored series.
pub fn directional_deviation(series: &DeviationSeries, v: [f64; 2]) -> Result<ScalarSeries> {
    check_unit(v)?;
    Ok(ScalarSeries {
        z0: series.z0,
        v,
        times: series.times.clone(),
        values: series.values.iter().map(|d| dot(*d, v)).collect(),
    })
}

/// Hypothesis `rho(F) ⊆ lambda v + v^⊥`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionalConstraint {
    pub v: [f64; 2],
    pub lambda: f64,
}

impl DirectionalConstraint {
    pub fn new(v: [f64; 2], lambda: f64) -> Result<Self> {
        check_unit(v)?;
        Ok(DirectionalConstraint { v, lambda })
    }

    /// The point `lambda v + s v^⊥` of the constraint line.
    pub fn reference(&self, s: f64) -> [f64; 2] {
        let perp = [-self.v[1], self.v[0]];
        [
            self.lambda * self.v[0] + s * perp[0],
            self.lambda * self.v[1] + s * perp[1],
        ]
    }
}

/// The four directions `e1`, `e2`, `(e1 + e2)/√2`, `(e1 - e2)/√2`.
pub fn standard_directions() -> [[f64; 2]; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[1.0, 0.0], [0.0, 1.0], [h, h], [h, -h]]
}

/// Sample index and time at which an extreme is attained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremeWitness {
    pub sample: usize,
    pub z: State,
    pub n: i64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionStat {
    pub v: [f64; 2],
    pub sup: ExtremeWitness,
    pub inf: ExtremeWitness,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    pub t_stat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Verdict {
    /// `max |D| <= threshold` over all samples and times.
    Bounded {
        threshold: f64,
        observed: f64,
    },
    /// Running max grows; which regressor gave the significant fit.
    Growing {
        regressor: String,
        fit: TrendFit,
    },
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundednessReport {
    pub n_max: i64,
    pub sample_count: usize,
    pub directions: Vec<DirectionStat>,
    pub max_norm: ExtremeWitness,
    pub checkpoints: Vec<i64>,
    pub running_max: Vec<f64>,
    pub log_fit: TrendFit,
    pub linear_fit: TrendFit,
    pub verdict: Verdict,
    /// Interpretation attached to the verdict.
    pub note: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub bound: f64,
    pub t_threshold: f64,
    pub checkpoints: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            bound: 2.0,
            t_threshold: 5.0,
            checkpoints: 64,
        }
    }
}

/// Roughly geometric integer times in `[1, n_max]`, always ending at `n_max`.
pub fn log_checkpoints(n_max: i64, count: usize) -> Vec<i64> {
    let mut out: Vec<i64> = (0..count.max(2))
        .map(|i| {
            let f = i as f64 / (count.max(2) - 1) as f64;
            ((n_max as f64).powf(f)).round() as i64
        })
        .map(|n| n.clamp(1, n_max))
        .collect();
    out.dedup();
    out
}

/// Least squares `y = a + b x` with the t-statistic of `b`.
pub fn fit_line(x: &[f64], y: &[f64]) -> TrendFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 || n < 3.0 {
        return TrendFit {
            slope: 0.0,
            intercept: my,
            t_stat: 0.0,
        };
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - a - b * xi;
            r * r
        })
        .sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let t = if se > 0.0 {
        b / se
    } else if b > 0.0 {
        f64::INFINITY
    } else if b < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    TrendFit {
        slope: b,
        intercept: a,
        t_stat: t,
    }
}

struct SampleStats {
    sup: [(f64, i64); 4],
    inf: [(f64, i64); 4],
    max_norm: (f64, i64),
    running: Vec<f64>,
}

fn sample_stats(
    map: &TorusMap,
    rho: [f64; 2],
    z: &State,
    n_max: i64,
    checkpoints: &[i64],
) -> Result<SampleStats> {
    let dirs = standard_directions();
    let mut st = SampleStats {
        sup: [(0.0, 0); 4],
        inf: [(0.0, 0); 4],
        max_norm: (0.0, 0),
        running: Vec::with_capacity(checkpoints.len()),
    };
    let mut next_cp = 0;
    for (i, s) in map.orbit(z, false)?.take(n_max as usize).enumerate() {
        let n = i as i64 + 1;
        let d = map.deviation(z, &s?, n, rho);
        for (j, v) in dirs.iter().enumerate() {
            let p = dot(d, *v);
            if p > st.sup[j].0 {
                st.sup[j] = (p, n);
            }
            if p < st.inf[j].0 {
                st.inf[j] = (p, n);
            }
        }
        let m = norm(d);
        if m > st.max_norm.0 {
            st.max_norm = (m, n);
        }
        while next_cp < checkpoints.len() && checkpoints[next_cp] == n {
            st.running.push(st.max_norm.0);
            next_cp += 1;
        }
    }
    Ok(st)
}

/// Extremes of `D_v` over samples and `1 <= n <= n_max`, with a verdict.
pub fn classify_mean_motion(
    map: &TorusMap,
    rho: [f64; 2],
    samples: &[State],
    n_max: i64,
    cfg: &ClassifyConfig,
) -> Result<BoundednessReport> {
    if samples.is_empty() {
        return Err(invalid("samples", "must not be empty"));
    }
    if n_max < 1 {
        return Err(invalid("n_max", "must be at least 1"));
    }
    let checkpoints = log_checkpoints(n_max, cfg.checkpoints);
    let stats = samples
        .par_iter()
        .map(|z| sample_stats(map, rho, z, n_max, &checkpoints))
        .collect::<Result<Vec<_>>>()?;

    let witness = |sample: usize, (value, n): (f64, i64)| ExtremeWitness {
        sample,
        z: samples[sample],
        n,
        value,
    };
    let dirs = standard_directions();
    let mut directions = Vec::new();
    for (j, v) in dirs.iter().enumerate() {
        let mut sup = witness(0, stats[0].sup[j]);
        let mut inf = witness(0, stats[0].inf[j]);
        for (i, s) in stats.iter().enumerate().skip(1) {
            if s.sup[j].0 > sup.value {
                sup = witness(i, s.sup[j]);
            }
            if s.inf[j].0 < inf.value {
                inf = witness(i, s.inf[j]);
            }
        }
        directions.push(DirectionStat { v: *v, sup, inf });
    }
    let mut max_norm = witness(0, stats[0].max_norm);
    for (i, s) in stats.iter().enumerate().skip(1) {
        if s.max_norm.0 > max_norm.value {
            max_norm = witness(i, s.max_norm);
        }
    }
    let running_max: Vec<f64> = (0..checkpoints.len())
        .map(|c| stats.iter().map(|s| s.running[c]).fold(0.0, f64::max))
        .collect();
    let xs_log: Vec<f64> = checkpoints.iter().map(|&n| (n as f64).ln()).collect();
    let xs_lin: Vec<f64> = checkpoints.iter().map(|&n| n as f64).collect();
    let log_fit = fit_line(&xs_log, &running_max);
    let linear_fit = fit_line(&xs_lin, &running_max);

    let verdict = if max_norm.value <= cfg.bound {
        Verdict::Bounded {
            threshold: cfg.bound,
            observed: max_norm.value,
        }
    } else if log_fit.slope > 0.0 && log_fit.t_stat > cfg.t_threshold {
        Verdict::Growing {
            regressor: "ln n".into(),
            fit: log_fit,
        }
    } else if linear_fit.slope > 0.0 && linear_fit.t_stat > cfg.t_threshold {
        Verdict::Growing {
            regressor: "n".into(),
            fit: linear_fit,
        }
    } else {
        Verdict::Inconclusive
    };
    let note = match verdict {
        Verdict::Bounded { .. } => format!(
            "deviations bounded by {} on the sampled horizon; consistent with bounded mean motion; for minimal or area-preserving irrational pseudo-rotations this is equivalent to semi-conjugacy to the rotation, otherwise it is not",
            cfg.bound
        ),
        Verdict::Growing { .. } => {
            "running max of |D| grows with the horizon; evidence against bounded mean motion".into()
        }
        Verdict::Inconclusive => "neither bounded by the threshold nor significantly growing".into(),
    };
    Ok(BoundednessReport {
        n_max,
        sample_count: samples.len(),
        directions,
        max_norm,
        checkpoints,
        running_max,
        log_fit,
        linear_fit,
        verdict,
        note,
    })
}

impl BoundednessReport {
    /// Largest discrepancy between reported extremes and a fresh evaluation.
    pub fn replay_error(&self, map: &TorusMap, rho: [f64; 2]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for d in &self.directions {
            for w in [&d.sup, &d.inf] {
                if w.n == 0 {
                    continue;
                }
                let end = map.iterate_to(&w.z, w.n)?;
                let value = dot(map.deviation(&w.z, &end, w.n, rho), d.v);
                worst = worst.max((value - w.value).abs());
            }
        }
        Ok(worst)
    }
}

/// Candidates whose forward deviations stay below `eps` (`z_minus`) or
/// above `-eps` (`z_plus`) along `v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiBoundedResult {
    pub horizon: i64,
    pub eps: f64,
    pub z_minus: Option<usize>,
    pub z_plus: Option<usize>,
    pub qualifies_minus: Vec<bool>,
    pub qualifies_plus: Vec<bool>,
}

impl SemiBoundedResult {
    /// Finite-horizon failure: no candidate for one of the roles.
    pub fn not_found(&self) -> bool {
        self.z_minus.is_none() || self.z_plus.is_none()
    }
}

pub fn semi_bounded_search(
    map: &TorusMap,
    rho: [f64; 2],
    v: [f64; 2],
    eps: f64,
    candidates: &[State],
    horizon: i64,
) -> Result<SemiBoundedResult> {
    check_unit(v)?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid("eps", "must be positive"));
    }
    let ranges = candidates
        .par_iter()
        .map(|z| {
            let (mut lo, mut hi) = (0.0f64, 0.0f64);
            for (i, s) in map
                .orbit(z, false)?
                .take(horizon.max(0) as usize)
                .enumerate()
            {
                let p = dot(map.deviation(z, &s?, i as i64 + 1, rho), v);
                lo = lo.min(p);
                hi = hi.max(p);
            }
            Ok((lo, hi))
        })
        .collect::<Result<Vec<_>>>()?;
    let qualifies_minus: Vec<bool> = ranges.iter().map(|r| r.1 < eps).collect();
    let qualifies_plus: Vec<bool> = ranges.iter().map(|r| r.0 > -eps).collect();
    Ok(SemiBoundedResult {
        horizon,
        eps,
        z_minus: qualifies_minus.iter().position(|&q| q),
        z_plus: qualifies_plus.iter().position(|&q| q),
        qualifies_minus,
        qualifies_plus,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionCluster {
    pub direction: [f64; 2],
    pub weight: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticDirectionSet {
    pub r: f64,
    pub eps: f64,
    pub n_max: i64,
    pub clusters: Vec<DirectionCluster>,
    pub diagnostic: Option<String>,
}

impl AsymptoticDirectionSet {
    /// Every cluster of `self` lies within `tol` radians of one in `other` and back.
    pub fn matches(&self, other: &AsymptoticDirectionSet, tol: f64) -> bool {
        let close = |a: &DirectionCluster, b: &DirectionCluster| {
            dot(a.direction, b.direction).clamp(-1.0, 1.0).acos() <= tol
        };
        self.clusters.len() == other.clusters.len()
            && self
                .clusters
                .iter()
                .all(|a| other.clusters.iter().any(|b| close(a, b)))
            && other
                .clusters
                .iter()
                .all(|b| self.clusters.iter().any(|a| close(a, b)))
    }
}

/// Single-linkage clustering of the unit vectors `D/|D|` with `|D| > r`.
pub fn asymptotic_directions(
    map: &TorusMap,
    rho: [f64; 2],
    z: &State,
    r: f64,
    eps: f64,
    n_max: i64,
) -> Result<AsymptoticDirectionSet> {
    if !(r > 0.0 && eps > 0.0) {
        return Err(invalid("r/eps", "must be positive"));
    }
    let mut angles = Vec::new();
    for (i, s) in map.orbit(z, false)?.take(n_max.max(0) as usize).enumerate() {
        let d = map.deviation(z, &s?, i as i64 + 1, rho);
        if norm(d) > r {
            angles.push(d[1].atan2(d[0]));
        }
    }
    let clusters = cluster_angles(&mut angles, eps);
    let diagnostic = angles
        .is_empty()
        .then(|| format!("no deviation exceeded r = {r} within {n_max} steps"));
    Ok(AsymptoticDirectionSet {
        r,
        eps,
        n_max,
        clusters,
        diagnostic,
    })
}

fn cluster_angles(angles: &mut [f64], eps: f64) -> Vec<DirectionCluster> {
    if angles.is_empty() {
        return Vec::new();
    }
    angles.sort_by(f64::total_cmp);
    let total = angles.len();
    let mut groups: Vec<Vec<f64>> = vec![vec![angles[0]]];
    for w in angles.windows(2) {
        if w[1] - w[0] > eps {
            groups.push(Vec::new());
        }
        groups.last_mut().expect("nonempty").push(w[1]);
    }
    let tau = std::f64::consts::TAU;
    if groups.len() > 1 && angles[0] + tau - angles[total - 1] <= eps {
        let last = groups.pop().expect("nonempty");
        groups[0].extend(last);
    } else if groups.len() == 1 && angles[0] + tau - angles[total - 1] <= eps {
        // One cluster wrapping the full circle; nothing to merge.
    }
    groups
        .into_iter()
        .map(|g| {
            let s = g
                .iter()
                .fold([0.0, 0.0], |acc, a| [acc[0] + a.cos(), acc[1] + a.sin()]);
            let m = norm(s);
            DirectionCluster {
                direction: if m > 0.0 {
                    [s[0] / m, s[1] / m]
                } else {
                    [1.0, 0.0]
                },
                weight: g.len() as f64 / total as f64,
                count: g.len(),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionVerdict {
    pub holds: bool,
    pub norms_exceeded: bool,
    pub ratio_exceeded: bool,
    pub max_u: f64,
    pub max_w: f64,
    pub max_ratio: f64,
    pub ratio_time: i64,
}

/// Finite-horizon check of `sup |D_u| = sup |D_w| = ∞` and
/// `limsup |D_u| / (|D_w| + 1) = ∞`, against the given thresholds.
pub fn unbounded_criterion_check(
    series_u: &ScalarSeries,
    series_w: &ScalarSeries,
    ratio_threshold: f64,
    norm_threshold: f64,
) -> Result<CriterionVerdict> {
    if series_u.times != series_w.times || series_u.z0 != series_w.z0 {
        return Err(Error::HorizonMismatch(format!(
            "{} vs {} times",
            series_u.times.len(),
            series_w.times.len()
        )));
    }
    let max_u = series_u.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let max_w = series_w.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let (mut max_ratio, mut ratio_time) = (0.0f64, 0i64);
    for ((&n, u), w) in series_u
        .times
        .iter()
        .zip(&series_u.values)
        .zip(&series_w.values)
    {
        let r = u.abs() / (w.abs() + 1.0);
        if r > max_ratio {
            max_ratio = r;
            ratio_time = n;
        }
    }
    let norms_exceeded = max_u > norm_threshold && max_w > norm_threshold;
    let ratio_exceeded = max_ratio > ratio_threshold;
    Ok(CriterionVerdict {
        holds: norms_exceeded && ratio_exceeded,
        norms_exceeded,
        ratio_exceeded,
        max_u,
        max_w,
        max_ratio,
        ratio_time,
    })
}

/// `(max - min)` of `D_v` over the series: the largest `|D_v(n, f^k z)|`
/// over restarts along the orbit, bounded by `2C` when `|D_v| <= C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitClosureCheck {
    pub c: f64,
    pub max_restart: f64,
    pub holds: bool,
}

pub fn orbit_closure_check(series: &ScalarSeries) -> OrbitClosureCheck {
    let c = series.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let hi = series.values.iter().cloned().fold(f64::MIN, f64::max);
    let lo = series.values.iter().cloned().fold(f64::MAX, f64::min);
    let max_restart = hi - lo;
    OrbitClosureCheck {
        c,
        max_restart,
        holds: max_restart <= 2.0 * c,
    }
}

/// Lower bound transported from a witness orbit to a nearby orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationCheck {
    pub sample: usize,
    pub approach_time: i64,
    pub approach_distance: f64,
    pub guaranteed: f64,
    pub observed: f64,
}

/// If `|D_v(n*, w)| = R` and `d(f^j z, w) < delta`, then
/// `max(|D_v(j, z)|, |D_v(j + n*, z)|) >= (R - (Λ^n* + 1) delta) / 2`.
#[allow(clippy::too_many_arguments)]
pub fn propagation_surrogate(
    map: &TorusMap,
    rho: [f64; 2],
    v: [f64; 2],
    witness: &State,
    n_star: i64,
    samples: &[State],
    delta: f64,
    approach_horizon: i64,
) -> Result<Vec<PropagationCheck>> {
    check_unit(v)?;
    let lip = map
        .lipschitz()
        .ok_or_else(|| invalid("map", "needs a Lipschitz bound"))?;
    let end = map.iterate_to(witness, n_star)?;
    let r = dot(map.deviation(witness, &end, n_star, rho), v).abs();
    let modulus = (lip.powi(n_star as i32) + 1.0) * delta;
    let wc = map.lift_coords(witness);
    samples
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let mut found = None;
            let mut s = *z;
            for j in 0..=approach_horizon {
                let c = map.lift_coords(&s);
                let d = torus_distance([c[0] - wc[0], c[1] - wc[1]]);
                if d < delta {
                    found = Some((j, d));
                    break;
                }
                s = map.step(&s)?;
            }
            let Some((j, d)) = found else {
                return Ok(None);
            };
            let mut observed: f64 = 0.0;
            for n in [j, j + n_star] {
                let e = map.iterate_to(z, n)?;
                observed = observed.max(dot(map.deviation(z, &e, n, rho), v).abs());
            }
            Ok(Some(PropagationCheck {
                sample: i,
                approach_time: j,
                approach_distance: d,
                guaranteed: (r - modulus) / 2.0,
                observed,
            }))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}
