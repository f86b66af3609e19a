use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use torlab_core::constructions::witness::WitnessOutcome;
use torlab_core::{
    AkStage, BoundednessReport, ConditionReport, EpsilonF, RotationSetEstimate, SeparationReport,
    StabilityVerdict,
};

const RECIPES: &[&str] = &[
    "rigid-rotset",
    "bounded-classify",
    "bounded-witness",
    "exa-deviations",
    "exa-stability",
    "exb-deviations",
    "exc-classify",
    "ak-stages",
    "ak-stability",
];

fn torlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn schema_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schema/experiment.schema.json")
}

fn recipe_text(name: &str) -> String {
    std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("recipes/{name}.json")),
    )
    .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn recipe_listing_names_every_recipe() {
    let out = torlab(&["recipe"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for r in RECIPES {
        assert!(text.contains(r), "{r} missing from listing");
    }
}

#[test]
fn recipes_and_configs_follow_the_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(schema_root()).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    for r in RECIPES {
        let v: serde_json::Value = serde_json::from_str(&recipe_text(r)).unwrap();
        let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{r}: {errors:?}");
    }
    let bad: serde_json::Value =
        serde_json::json!({"map": {"kind": "rigid", "rho": [0.1, 0.2], "extra": 1}});
    assert!(!validator.is_valid(&bad));
    let printed = torlab(&["schema"]);
    assert!(printed.status.success());
    let shipped: serde_json::Value = serde_json::from_slice(&printed.stdout).unwrap();
    assert_eq!(shipped, schema);
}

#[test]
fn rigid_rotset_with_rho_override_collapses() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let status = torlab(&[
        "recipe",
        "rigid-rotset",
        "--rho",
        "0.414,0.732",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let est: RotationSetEstimate = read(&out.join("rotset.json"));
    assert_eq!(est.hull.len(), 1);
    assert!(est.diameter <= 1e-12);
    assert!((est.hull[0][0] - 0.414).abs() < 1e-12 && (est.hull[0][1] - 0.732).abs() < 1e-12);
    let vertices = std::fs::read_to_string(out.join("rotset_vertices.csv")).unwrap();
    assert_eq!(vertices.lines().next().unwrap(), "vertex,rho_x,rho_y");
    assert_eq!(vertices.lines().count(), 2);
}

#[test]
fn bounded_drift_classify_is_bounded_by_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let status = torlab(&["recipe", "bounded-classify", "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let report: BoundednessReport = read(&out.join("classify.json"));
    match report.verdict {
        torlab_core::deviations::Verdict::Bounded {
            threshold,
            observed,
        } => {
            assert_eq!(threshold, 2.0);
            assert!(observed <= 2.0 + 1e-9);
        }
        other => panic!("expected bounded, got {other:?}"),
    }
    let csv = std::fs::read_to_string(out.join("deviations.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "n,lift_x,lift_y,dev_x,dev_y");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 5);
    assert!(first[1].contains('e'));
}

#[test]
fn ak_stages_pass_and_resume_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let status = torlab(&[
        "recipe",
        "ak-stages",
        "--stages",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    for n in 0..=3 {
        let stage: AkStage = read(&out.join(format!("ak/stage_{n}.json")));
        let report: ConditionReport = read(&out.join(format!("ak/report_{n}.json")));
        assert_eq!(stage.n, n);
        assert!(report.all_pass(), "stage {n}: {report:?}");
        assert_eq!(stage.report, report);
    }
    let cfg = r#"{"map": {"kind": "ak_stage_file", "path": "o/ak/stage_2.json"},
        "analysis": {"ak": {"stages": 3, "resume_from": "o/ak/stage_2.json"}}}"#;
    let path = write_config(tmp.path(), "resume.json", cfg);
    let out2 = tmp.path().join("r");
    let status = torlab(&[
        "ak",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert_eq!(
        std::fs::read(out.join("ak/stage_3.json")).unwrap(),
        std::fs::read(out2.join("ak/stage_3.json")).unwrap()
    );
}

#[test]
fn stage_failure_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"map": {"kind": "rigid", "rho": [0.5, 0.25]},
        "analysis": {"ak": {"stages": 1, "search": {"q_cap": 4096, "plateau_scale": 0.0}}}}"#;
    let path = write_config(tmp.path(), "c.json", cfg);
    let out = tmp.path().join("o");
    let o = torlab(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("deviation_ratio"), "{err}");
    let summary: serde_json::Value = read(&out.join("ak/summary.json"));
    assert!(summary["failure"]
        .as_str()
        .unwrap()
        .contains("deviation_ratio"));
}

#[test]
fn config_errors_exit_with_one_and_name_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            r#"{"map": {"kind": "rigid", "rho": [0.1, 0.2]}, "analysis": {"orbit": {"n": 5, "bogus": 1}}}"#,
            "analysis.orbit",
        ),
        (r#"{"map": {"kind": "nope"}}"#, "map"),
        (
            r#"{"map": {"kind": "example", "variant": "ex_b", "params": {"k_max": 9}}}"#,
            "k_max",
        ),
        (
            r#"{"map": {"kind": "rigid", "rho": [0.1, 0.2]}, "analysis": {"stability": {}}}"#,
            "seed",
        ),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let path = write_config(tmp.path(), &format!("c{i}.json"), text);
        let out = tmp.path().join(format!("o{i}"));
        let o = torlab(&[
            "run",
            "--config",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(1), "case {i}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "case {i}: {err}");
    }
    let o = torlab(&["orbit"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn subcommands_use_defaults_for_missing_sections() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(
        tmp.path(),
        "c.json",
        r#"{"map": {"kind": "shear", "axis": "y", "period_den": 1, "ramp": "1/4", "height": "15/16"}, "seed": 3}"#,
    );
    let out = tmp.path().join("o");
    for cmd in ["build", "orbit", "deviations", "rotset", "stability"] {
        let o = torlab(&[
            cmd,
            "--config",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            o.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let eps: EpsilonF = read(&out.join("epsilon_f.json"));
    assert!((eps.certified_lower - 0.125).abs() < 1e-12);
    let orbit = std::fs::read_to_string(out.join("orbit.csv")).unwrap();
    assert_eq!(orbit.lines().count(), 1002);
    let map: serde_json::Value = read(&out.join("map.json"));
    assert_eq!(map["kind"], "shear");
    assert_eq!(map["lipschitz"], 4.0);
}

#[test]
fn reports_reparse_into_their_types() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("w");
    assert!(
        torlab(&["recipe", "bounded-witness", "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let w: WitnessOutcome = read(&out.join("witness.json"));
    assert!(matches!(w, WitnessOutcome::Found(_)));
    let out = tmp.path().join("s");
    assert!(
        torlab(&["recipe", "exa-stability", "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let _: EpsilonF = read(&out.join("epsilon_f.json"));
    let probe: StabilityVerdict = read(&out.join("probe.json"));
    assert!(probe.is_unstable());
    let scan: SeparationReport = read(&out.join("scan.json"));
    assert_eq!(scan.fraction_separated, 1.0);
    let run: serde_json::Value = read(&out.join("run.json"));
    assert_eq!(run["artifacts"].as_array().unwrap().len(), 3);
}

#[test]
fn same_seed_reproduces_and_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = torlab(&[
            "recipe",
            "exa-stability",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        let record: serde_json::Value = read(&out.join("run.json"));
        assert_eq!(record["seed"].as_u64(), Some(seed.parse().unwrap()));
        std::fs::read(out.join("probe.json")).unwrap()
    };
    assert_eq!(run("5", "a"), run("5", "b"));
    run("6", "c");
}
