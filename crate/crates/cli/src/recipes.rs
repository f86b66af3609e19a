//! Bundled experiment configurations.

use crate::config::{config_error, parse_json, ExperimentConfig};

pub const SCHEMA: &str = include_str!("../../../schema/experiment.schema.json");

/// `(name, description, config)`.
pub const RECIPES: &[(&str, &str, &str)] = &[
    (
        "rigid-rotset",
        "rigid rotation: rotation set collapses to one point",
        include_str!("../recipes/rigid-rotset.json"),
    ),
    (
        "bounded-classify",
        "bounded mean motion without semi-conjugacy: deviations and classification",
        include_str!("../recipes/bounded-classify.json"),
    ),
    (
        "bounded-witness",
        "bounded mean motion without semi-conjugacy: separation witness",
        include_str!("../recipes/bounded-witness.json"),
    ),
    (
        "exa-deviations",
        "one-sided harmonic fiber drift: deviations from a deep gap, growing classification",
        include_str!("../recipes/exa-deviations.json"),
    ),
    (
        "exa-stability",
        "one-sided harmonic fiber drift: sensitivity on the minimal set",
        include_str!("../recipes/exa-stability.json"),
    ),
    (
        "exb-deviations",
        "windowed harmonic drift: two-sided deviations along one orbit",
        include_str!("../recipes/exb-deviations.json"),
    ),
    (
        "exc-classify",
        "one-sided windowed drift: classification",
        include_str!("../recipes/exc-classify.json"),
    ),
    (
        "ak-stages",
        "Anosov-Katok stages with full condition reports",
        include_str!("../recipes/ak-stages.json"),
    ),
    (
        "ak-stability",
        "stage-3 Anosov-Katok map: epsilon_f and a probe at the origin",
        include_str!("../recipes/ak-stability.json"),
    ),
];

pub fn load(name: &str) -> anyhow::Result<ExperimentConfig> {
    let (_, _, text) = RECIPES.iter().find(|(n, _, _)| *n == name).ok_or_else(|| {
        let names: Vec<&str> = RECIPES.iter().map(|r| r.0).collect();
        config_error(format!(
            "unknown recipe {name}; available: {}",
            names.join(", ")
        ))
    })?;
    parse_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_recipe_parses() {
        for (name, _, _) in RECIPES {
            load(name).unwrap_or_else(|e| panic!("{name}: {e:#}"));
        }
        assert!(load("missing").is_err());
    }
}
