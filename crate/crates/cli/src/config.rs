//! Experiment configuration: a map spec, analysis sections and output metadata.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use torlab_core::constructions::ak::ak_stages;
use torlab_core::constructions::{build_example, default_rho, peak, subfamily_peak};
use torlab_core::deviations::ClassifyConfig;
use torlab_core::rational::{self, RationalVectorText};
use torlab_core::stability::NonWandering;
use torlab_core::torus::{
    make_composite, make_conjugated, make_rational_rigid, make_rigid, make_shear,
};
use torlab_core::{
    AkSearchParams, AkStage, Axis, BumpFunction, CirclePoint, ExampleParams, ExampleVariant,
    RationalVector, Shear, SkewState, State, TorusMap,
};

/// Error in the configuration itself; mapped to exit status 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    /// Output directory; `--out` overrides it.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Seed for every randomized step; `--seed` overrides it.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub metadata: Metadata,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default)]
    pub non_wandering: NonWandering,
    #[serde(default)]
    pub label: Option<String>,
}

/// Trapezoid bump `psi` of period `1/period_den`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShearSpec {
    pub axis: Axis,
    pub period_den: u64,
    /// Ramp fraction in `(0, 1/2)`, as `n/d`.
    pub ramp: String,
    /// Plateau height, as `n/d`.
    pub height: String,
}

impl ShearSpec {
    fn build(&self) -> anyhow::Result<Shear> {
        let psi = BumpFunction::trapezoid(
            self.period_den.into(),
            rational::parse(&self.ramp)?,
            rational::parse(&self.height)?,
        )?;
        Ok(Shear::new(self.axis, psi))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Rigid {
        rho: [f64; 2],
    },
    RationalRigid {
        alpha: RationalVectorText,
    },
    Shear(ShearSpec),
    Composite {
        factors: Vec<MapSpec>,
    },
    Conjugated {
        h: Vec<ShearSpec>,
        core: Box<MapSpec>,
    },
    Example {
        variant: ExampleVariant,
        #[serde(default)]
        rho: Option<[f64; 2]>,
        #[serde(default)]
        params: ExampleParams,
    },
    /// Stage `stage` of the Anosov-Katok induction, constructed from stage 0.
    AkStage {
        stage: u32,
        #[serde(default)]
        search: AkSearchParams,
    },
    /// A stage previously written by the `ak` analysis.
    AkStageFile {
        path: PathBuf,
    },
}

impl MapSpec {
    pub fn build(&self, base_dir: &Path) -> anyhow::Result<TorusMap> {
        Ok(match self {
            MapSpec::Rigid { rho } => make_rigid(*rho),
            MapSpec::RationalRigid { alpha } => {
                make_rational_rigid(&RationalVector::try_from(alpha)?)
            }
            MapSpec::Shear(s) => {
                let sh = s.build()?;
                make_shear(sh.axis, sh.psi)
            }
            MapSpec::Composite { factors } => make_composite(
                factors
                    .iter()
                    .map(|f| f.build(base_dir))
                    .collect::<anyhow::Result<_>>()?,
            )?,
            MapSpec::Conjugated { h, core } => make_conjugated(
                h.iter()
                    .map(ShearSpec::build)
                    .collect::<anyhow::Result<_>>()?,
                core.build(base_dir)?,
            )?,
            MapSpec::Example {
                variant,
                rho,
                params,
            } => build_example(*variant, rho.unwrap_or_else(default_rho), params)?,
            MapSpec::AkStage { stage, search } => ak_stages(*stage, search)?
                .pop()
                .expect("stage list is nonempty")
                .torus_map(),
            MapSpec::AkStageFile { path } => load_stage(&base_dir.join(path))?.torus_map(),
        })
    }

    /// Replaces the rotation vector of rigid and example maps.
    pub fn set_rho(&mut self, new: [f64; 2]) -> anyhow::Result<()> {
        match self {
            MapSpec::Rigid { rho } => *rho = new,
            MapSpec::Example { rho, .. } => *rho = Some(new),
            _ => return Err(config_error("--rho applies only to rigid and example maps")),
        }
        Ok(())
    }
}

pub fn load_stage(path: &Path) -> anyhow::Result<AkStage> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_json(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Start point of an orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    /// Torus point with lift coordinates `z`.
    Point { z: [f64; 2] },
    /// Peak of the wandering interval `I_index` (of nested family `family` when nonzero).
    Peak {
        index: i64,
        #[serde(default)]
        family: u32,
        #[serde(default)]
        y: f64,
    },
    /// Point of the Denjoy minimal set at symbolic angle `theta`.
    Base {
        theta: f64,
        #[serde(default)]
        y: f64,
    },
    /// Full symbolic state.
    State { state: State },
}

impl Default for StartSpec {
    fn default() -> Self {
        StartSpec::Point { z: [0.0, 0.0] }
    }
}

impl StartSpec {
    pub fn state(&self, map: &TorusMap) -> anyhow::Result<State> {
        let skew_only = || config_error("symbolic start points need a skew-product map");
        Ok(match self {
            StartSpec::Point { z } => map.state_at(*z),
            StartSpec::Peak { index, family, y } => {
                if !map.is_skew() {
                    return Err(skew_only());
                }
                if *family == 0 {
                    peak(*index, *y)
                } else {
                    subfamily_peak(*family, *index, *y)
                }
            }
            StartSpec::Base { theta, y } => {
                if !map.is_skew() {
                    return Err(skew_only());
                }
                State::Skew(SkewState::new(CirclePoint::base(*theta), *y))
            }
            StartSpec::State { state } => *state,
        })
    }
}

/// Sample set: uniform grid, gap peaks and minimal-set points for skew
/// products, seeded uniform points, and explicit points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSpec {
    pub grid_side: usize,
    /// Peaks of `I_n`, `|n| <= gap_peaks`; none when 0 (skew products only).
    pub gap_peaks: i64,
    /// Evenly spaced minimal-set points (skew products only).
    pub base_points: usize,
    /// Uniform random points; needs a seed.
    pub random: usize,
    pub points: Vec<StartSpec>,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            grid_side: 8,
            gap_peaks: 0,
            base_points: 0,
            random: 0,
            points: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitSpec {
    pub start: StartSpec,
    pub n: i64,
    pub backward: bool,
}

impl Default for OrbitSpec {
    fn default() -> Self {
        OrbitSpec {
            start: StartSpec::default(),
            n: 1000,
            backward: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviationsSpec {
    pub start: StartSpec,
    pub n_max: i64,
    pub include_negative: bool,
    /// Reference rotation; defaults to the map's own.
    pub rho: Option<[f64; 2]>,
}

impl Default for DeviationsSpec {
    fn default() -> Self {
        DeviationsSpec {
            start: StartSpec::default(),
            n_max: 1000,
            include_negative: false,
            rho: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotsetSpec {
    pub samples: SampleSpec,
    pub schedule: Vec<i64>,
}

impl Default for RotsetSpec {
    fn default() -> Self {
        RotsetSpec {
            samples: SampleSpec::default(),
            schedule: vec![100, 1000],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySpec {
    pub samples: SampleSpec,
    pub n_max: i64,
    pub rho: Option<[f64; 2]>,
    pub thresholds: ClassifyConfig,
}

impl Default for ClassifySpec {
    fn default() -> Self {
        ClassifySpec {
            samples: SampleSpec::default(),
            n_max: 10_000,
            rho: None,
            thresholds: ClassifyConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessSpec {
    pub delta: f64,
    pub horizon: i64,
}

impl Default for WitnessSpec {
    fn default() -> Self {
        WitnessSpec {
            delta: 0.01,
            horizon: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AkSpec {
    /// Last stage to construct.
    pub stages: u32,
    pub search: AkSearchParams,
    /// Stage file to continue from instead of stage 0.
    pub resume_from: Option<PathBuf>,
}

impl Default for AkSpec {
    fn default() -> Self {
        AkSpec {
            stages: 3,
            search: AkSearchParams::default(),
            resume_from: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySpec {
    /// Random pairs tried by the empirical `epsilon_f` search.
    pub epsilon_trials: usize,
    /// Probed point of the single-point probe.
    pub start: StartSpec,
    pub delta: f64,
    /// Separation threshold; defaults to the empirical `epsilon_f` estimate.
    pub eps: Option<f64>,
    pub n_max: i64,
    pub sample_count: usize,
    /// Grid and delta ladder of the scan; the scan is skipped when `deltas` is empty.
    pub scan_samples: SampleSpec,
    pub deltas: Vec<f64>,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        StabilitySpec {
            epsilon_trials: 64,
            start: StartSpec::default(),
            delta: 0.01,
            eps: None,
            n_max: 1000,
            sample_count: 32,
            scan_samples: SampleSpec::default(),
            deltas: Vec::new(),
        }
    }
}

/// Analysis sections; a missing section is skipped by `run` and defaulted
/// by the matching subcommand.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default)]
    pub build: Option<BuildSpec>,
    #[serde(default)]
    pub orbit: Option<OrbitSpec>,
    #[serde(default)]
    pub deviations: Option<DeviationsSpec>,
    #[serde(default)]
    pub rotset: Option<RotsetSpec>,
    #[serde(default)]
    pub classify: Option<ClassifySpec>,
    #[serde(default)]
    pub witness: Option<WitnessSpec>,
    #[serde(default)]
    pub ak: Option<AkSpec>,
    #[serde(default)]
    pub stability: Option<StabilitySpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildSpec {}

/// Parses JSON, reporting the path of the first offending field.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> anyhow::Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    match serde_path_to_error::deserialize(de) {
        Ok(v) => Ok(v),
        Err(e) => {
            let path = e.path().to_string();
            bail!(ConfigError(format!("at `{path}`: {}", e.into_inner())))
        }
    }
}

pub fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text)
}
