//! Computational toolkit for torus homeomorphisms homotopic to the identity.
//!
//! The crate builds lifts of such maps (rigid rotations, piecewise-linear
//! shears and their conjugations, skew products over symbolic Denjoy
//! circle maps), iterates them with compensated arithmetic, and measures
//! rotation vectors, rotation sets, deviations from constant rotation and
//! sensitivity indicators. The `constructions` module assembles the explicit
//! examples, including finite stages of an Anosov-Katok induction verified in
//! exact rational arithmetic.

pub mod circle;
pub mod constructions;
pub mod deviations;
pub mod error;
pub mod numerics;
pub mod pl;
pub mod rational;
pub mod rotation_set;
pub mod stability;
pub mod torus;

pub use circle::{Angle, CircleLift, CirclePoint, DenjoySystem, Embedded};
pub use constructions::ak::{AkSearchParams, AkStage, ConditionReport};
pub use constructions::beta::BetaFunction;
pub use constructions::{build_example, ExampleParams, ExampleVariant};
pub use deviations::{BoundednessReport, DeviationSeries};
pub use error::{Error, Result};
pub use numerics::Compensated;
pub use pl::{Axis, BumpFunction, Shear};
pub use rational::RationalVector;
pub use rotation_set::RotationSetEstimate;
pub use stability::{EpsilonF, SeparationReport, StabilityVerdict};
pub use torus::{LiftPoint, SkewState, State, TorusMap, Trajectory};
