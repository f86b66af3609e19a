//! Executes analysis sections against a built map and writes artifacts.

use std::path::Path;

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use torlab_core::constructions::ak::{ak_advance, UnboundednessCheck};
use torlab_core::constructions::witness::{nonsemiconjugacy_witness, WitnessOutcome};
use torlab_core::deviations::{classify_mean_motion, deviation_series};
use torlab_core::rotation_set::rotation_set_hull;
use torlab_core::stability::{epsilon_f, lyapunov_probe, sensitivity_scan, ProbeParams};
use torlab_core::torus::DisplacementSup;
use torlab_core::{AkStage, CirclePoint, SkewState, State, TorusMap};

use crate::config::{
    config_error, load_stage, AkSpec, ClassifySpec, DeviationsSpec, ExperimentConfig, OrbitSpec,
    RotsetSpec, SampleSpec, StabilitySpec, WitnessSpec,
};
use crate::output::{fmt_f64, Artifacts};

/// A completed analysis whose verdict is a failure; mapped to exit status 2.
#[derive(Debug)]
pub struct AnalysisFailure(pub String);

impl std::fmt::Display for AnalysisFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "analysis failure: {}", self.0)
    }
}

impl std::error::Error for AnalysisFailure {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Section {
    Build,
    Orbit,
    Deviations,
    Rotset,
    Classify,
    Witness,
    Ak,
    Stability,
}

pub struct Run<'a> {
    pub config: &'a ExperimentConfig,
    pub map: TorusMap,
    pub seed: Option<u64>,
    pub base_dir: &'a Path,
    pub out: Artifacts,
    pub failures: Vec<String>,
}

impl Run<'_> {
    fn map_id(&self) -> String {
        self.config
            .metadata
            .label
            .clone()
            .unwrap_or_else(|| map_kind(&self.map).to_string())
    }

    fn seed(&self, what: &str) -> anyhow::Result<u64> {
        self.seed
            .ok_or_else(|| config_error(format!("{what} is randomized and needs a seed")))
    }

    fn rho(&self, given: Option<[f64; 2]>) -> anyhow::Result<[f64; 2]> {
        given
            .or_else(|| self.map.reference_rotation())
            .ok_or_else(|| {
                config_error("the map has no reference rotation; set `rho` in the analysis section")
            })
    }

    fn samples(&self, spec: &SampleSpec) -> anyhow::Result<Vec<State>> {
        let s = spec.grid_side;
        let mut out: Vec<State> = (0..s * s)
            .map(|i| {
                self.map
                    .state_at([(i % s) as f64 / s as f64, (i / s) as f64 / s as f64])
            })
            .collect();
        if spec.gap_peaks > 0 || spec.base_points > 0 {
            if !self.map.is_skew() {
                return Err(config_error(
                    "gap_peaks and base_points need a skew-product map",
                ));
            }
            if spec.gap_peaks > 0 {
                for n in -spec.gap_peaks..=spec.gap_peaks {
                    out.push(State::Skew(SkewState::new(CirclePoint::gap(n, 0.5), 0.0)));
                }
            }
            let b = spec.base_points;
            for i in 0..b {
                let theta = (i as f64 + 0.5) / b as f64;
                out.push(State::Skew(SkewState::new(CirclePoint::base(theta), 0.0)));
            }
        }
        if spec.random > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed("random sampling")?);
            for _ in 0..spec.random {
                let z = [rng.random::<f64>(), rng.random::<f64>()];
                out.push(self.map.state_at(z));
            }
        }
        for p in &spec.points {
            out.push(p.state(&self.map)?);
        }
        if out.is_empty() {
            return Err(config_error("sample set is empty"));
        }
        Ok(out)
    }
}

pub fn map_kind(map: &TorusMap) -> &'static str {
    match map {
        TorusMap::Rigid(_) => "rigid",
        TorusMap::Shear(_) => "shear",
        TorusMap::Skew(_) => "skew_product",
        TorusMap::Composite(_) => "composite",
        TorusMap::Conjugated { .. } => "conjugated",
    }
}

#[derive(Serialize)]
struct MapSummary {
    kind: &'static str,
    reference_rotation: Option<[f64; 2]>,
    lipschitz: Option<f64>,
    inverse_lipschitz: Option<f64>,
    displacement_sup: DisplacementSup,
}

fn build(cx: &mut Run) -> anyhow::Result<()> {
    let summary = MapSummary {
        kind: map_kind(&cx.map),
        reference_rotation: cx.map.reference_rotation(),
        lipschitz: cx.map.lipschitz(),
        inverse_lipschitz: cx.map.inverse_lipschitz(),
        displacement_sup: cx.map.displacement_sup(),
    };
    cx.out.json("map.json", &summary)
}

fn orbit(cx: &mut Run, spec: &OrbitSpec) -> anyhow::Result<()> {
    if spec.n < 0 {
        return Err(config_error("orbit.n must be nonnegative"));
    }
    let z = spec.start.state(&cx.map)?;
    let sign = if spec.backward { -1 } else { 1 };
    let mut rows = vec![row_lift(0, cx.map.lift_coords(&z))];
    for (i, s) in cx
        .map
        .orbit(&z, spec.backward)?
        .take(spec.n as usize)
        .enumerate()
    {
        rows.push(row_lift(sign * (i as i64 + 1), cx.map.lift_coords(&s?)));
    }
    cx.out.csv("orbit.csv", &["n", "lift_x", "lift_y"], &rows)
}

fn row_lift(n: i64, l: [f64; 2]) -> Vec<String> {
    vec![n.to_string(), fmt_f64(l[0]), fmt_f64(l[1])]
}

#[derive(Serialize)]
struct DeviationSummary<'a> {
    map_id: &'a str,
    rho: [f64; 2],
    z0: State,
    n_max: i64,
    include_negative: bool,
    max_norm: f64,
}

fn deviations(cx: &mut Run, spec: &DeviationsSpec) -> anyhow::Result<()> {
    let z = spec.start.state(&cx.map)?;
    let rho = cx.rho(spec.rho)?;
    let id = cx.map_id();
    let series = deviation_series(&cx.map, rho, &z, spec.n_max, spec.include_negative, &id)?;
    cx.out.deviation_csv("deviations.csv", &series)?;
    cx.out.json(
        "deviations.json",
        &DeviationSummary {
            map_id: &id,
            rho,
            z0: z,
            n_max: spec.n_max,
            include_negative: spec.include_negative,
            max_norm: series.max_norm(),
        },
    )
}

fn rotset(cx: &mut Run, spec: &RotsetSpec) -> anyhow::Result<()> {
    let grid = cx.samples(&spec.samples)?;
    let est = rotation_set_hull(&cx.map, &grid, &spec.schedule)?;
    cx.out.rotation_csv("rotset", &est)?;
    cx.out.json("rotset.json", &est)
}

fn classify(cx: &mut Run, spec: &ClassifySpec) -> anyhow::Result<()> {
    let samples = cx.samples(&spec.samples)?;
    let rho = cx.rho(spec.rho)?;
    let report = classify_mean_motion(&cx.map, rho, &samples, spec.n_max, &spec.thresholds)?;
    let rows: Vec<Vec<String>> = report
        .checkpoints
        .iter()
        .zip(&report.running_max)
        .map(|(n, m)| vec![n.to_string(), fmt_f64(*m)])
        .collect();
    cx.out
        .csv("classify_running_max.csv", &["n", "running_max"], &rows)?;
    cx.out.json("classify.json", &report)
}

fn witness(cx: &mut Run, spec: &WitnessSpec) -> anyhow::Result<()> {
    let outcome = nonsemiconjugacy_witness(&cx.map, spec.delta, spec.horizon)?;
    cx.out.json("witness.json", &outcome)?;
    if let WitnessOutcome::NotFound { horizon, .. } = outcome {
        cx.failures
            .push(format!("no witness within {horizon} iterations"));
    }
    Ok(())
}

#[derive(Serialize)]
struct StageSummary {
    n: u32,
    q: String,
    all_pass: bool,
    first_failure: Option<String>,
    unboundedness: Option<UnboundednessCheck>,
}

#[derive(Serialize)]
struct AkSummary {
    stages: Vec<StageSummary>,
    failure: Option<String>,
}

fn ak(cx: &mut Run, spec: &AkSpec) -> anyhow::Result<()> {
    let mut stage = match &spec.resume_from {
        Some(p) => load_stage(&cx.base_dir.join(p))?,
        None => AkStage::initial(),
    };
    let mut summary = AkSummary {
        stages: Vec::new(),
        failure: None,
    };
    loop {
        cx.out.json(&format!("ak/stage_{}.json", stage.n), &stage)?;
        cx.out
            .json(&format!("ak/report_{}.json", stage.n), &stage.report)?;
        summary.stages.push(StageSummary {
            n: stage.n,
            q: stage.q().to_string(),
            all_pass: stage.report.all_pass(),
            first_failure: stage
                .report
                .first_failure()
                .map(|e| e.condition.name().to_string()),
            unboundedness: stage.unboundedness_check().ok(),
        });
        if stage.n >= spec.stages {
            break;
        }
        match ak_advance(&stage, &spec.search) {
            Ok(next) => stage = next,
            Err(e @ torlab_core::Error::StageFailure { .. }) => {
                summary.failure = Some(e.to_string());
                cx.failures.push(e.to_string());
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    cx.out.json("ak/summary.json", &summary)
}

fn stability(cx: &mut Run, spec: &StabilitySpec) -> anyhow::Result<()> {
    let seed = cx.seed("the stability analysis")?;
    let eps_f = epsilon_f(&cx.map, seed, spec.epsilon_trials)?;
    cx.out.json("epsilon_f.json", &eps_f)?;
    let eps = spec.eps.unwrap_or(eps_f.empirical_upper);
    let z = spec.start.state(&cx.map)?;
    let params = ProbeParams {
        delta: spec.delta,
        eps,
        n_max: spec.n_max,
        sample_count: spec.sample_count,
        seed,
    };
    let verdict = lyapunov_probe(&cx.map, &z, &params)?;
    cx.out.json("probe.json", &verdict)?;
    if !spec.deltas.is_empty() {
        let grid = cx.samples(&spec.scan_samples)?;
        let report = sensitivity_scan(
            &cx.map,
            &grid,
            &spec.deltas,
            eps,
            spec.n_max,
            spec.sample_count,
            seed,
            cx.config.metadata.non_wandering,
        )?;
        cx.out.json("scan.json", &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RunRecord<'a> {
    config: &'a ExperimentConfig,
    seed: Option<u64>,
    artifacts: Vec<String>,
    failures: &'a [String],
}

/// Runs one section (its config entry or defaults) or, with `None`, every
/// section present in the config.
pub fn execute(
    config: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    only: Option<Section>,
) -> anyhow::Result<()> {
    let map =
        config
            .map
            .build(base_dir)
            .map_err(|e| match e.downcast_ref::<torlab_core::Error>() {
                Some(torlab_core::Error::StageFailure { .. }) => {
                    AnalysisFailure(format!("map construction: {e}")).into()
                }
                _ => config_error(format!("at `map`: {e:#}")),
            })?;
    let mut cx = Run {
        config,
        map,
        seed,
        base_dir,
        out: Artifacts::new(out_dir)?,
        failures: Vec::new(),
    };
    let a = &config.analysis;
    let want = |s: Section, present: bool| only.map_or(present, |o| o == s);
    if want(Section::Build, a.build.is_some()) {
        build(&mut cx).context("build")?;
    }
    if want(Section::Orbit, a.orbit.is_some()) {
        orbit(&mut cx, &a.orbit.clone().unwrap_or_default()).context("orbit")?;
    }
    if want(Section::Deviations, a.deviations.is_some()) {
        deviations(&mut cx, &a.deviations.clone().unwrap_or_default()).context("deviations")?;
    }
    if want(Section::Rotset, a.rotset.is_some()) {
        rotset(&mut cx, &a.rotset.clone().unwrap_or_default()).context("rotset")?;
    }
    if want(Section::Classify, a.classify.is_some()) {
        classify(&mut cx, &a.classify.clone().unwrap_or_default()).context("classify")?;
    }
    if want(Section::Witness, a.witness.is_some()) {
        witness(&mut cx, &a.witness.clone().unwrap_or_default()).context("witness")?;
    }
    if want(Section::Ak, a.ak.is_some()) {
        ak(&mut cx, &a.ak.clone().unwrap_or_default()).context("ak")?;
    }
    if want(Section::Stability, a.stability.is_some()) {
        stability(&mut cx, &a.stability.clone().unwrap_or_default()).context("stability")?;
    }
    let dir = cx.out.dir().to_path_buf();
    let artifacts = cx
        .out
        .written()
        .iter()
        .map(|p| {
            p.strip_prefix(&dir)
                .unwrap_or(p)
                .to_string_lossy()
                .replace('\\', "/")
        })
        .collect();
    let failures = std::mem::take(&mut cx.failures);
    cx.out.json(
        "run.json",
        &RunRecord {
            config,
            seed,
            artifacts,
            failures: &failures,
        },
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(AnalysisFailure(failures.join("; ")).into())
    }
}
