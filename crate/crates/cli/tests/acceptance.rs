//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torlab_core::circle::{rotation_number, symbolic_rotation_number, EmbeddedDenjoyLift};
use torlab_core::constructions::ak::{ak_advance, ak_stages, AkSearchParams, AkStage};
use torlab_core::constructions::witness::{nonsemiconjugacy_witness, WitnessOutcome};
use torlab_core::constructions::{
    alpha, bounded_drift_window_sum, build_example, default_rho, exb_orbit_range,
    exb_orbit_range_oracle, peak, ExampleParams, ExampleVariant,
};
use torlab_core::deviations::{
    classify_mean_motion, deviation_series, directional_deviation, orbit_closure_check,
    ClassifyConfig,
};
use torlab_core::pl::{Axis, BumpFunction};
use torlab_core::rational::{from_f64, ratio};
use torlab_core::rotation_set::{default_grid, rotation_set_hull};
use torlab_core::stability::{
    epsilon_f, lyapunov_probe, sensitivity_scan, NonWandering, ProbeParams, Verdict,
};
use torlab_core::torus::{make_composite, make_rigid, make_shear};
use torlab_core::{CirclePoint, DenjoySystem, Error, SkewState, State, TorusMap};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

fn rigid_rho() -> [f64; 2] {
    [2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0]
}

fn example(v: ExampleVariant) -> TorusMap {
    build_example(v, default_rho(), &ExampleParams::default()).unwrap()
}

fn c1_rigid() -> Outcome {
    let map = make_rigid(rigid_rho());
    let t = Instant::now();
    let s = deviation_series(
        &map,
        rigid_rho(),
        &map.state_at([0.0, 0.0]),
        1_000_000,
        false,
        "rigid",
    )
    .map_err(e)?;
    let grid = default_grid(&map, 8, 0);
    let est = rotation_set_hull(&map, &grid, &[100, 1000]).map_err(e)?;
    let elapsed = t.elapsed().as_secs_f64();
    ensure(s.max_norm() <= 1e-9, || {
        format!("max |D| = {:e}", s.max_norm())
    })?;
    ensure(est.diameter <= 1e-12, || {
        format!("hull diameter {:e}", est.diameter)
    })?;
    ensure(elapsed < 1.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!(
        "max |D| = {:.1e} over 1e6 steps, hull diameter {:.1e}, {elapsed:.2} s",
        s.max_norm(),
        est.diameter
    ))
}

fn c2_base_rotation() -> Outcome {
    let sys = DenjoySystem::new(default_rho()[0], 0.5, 0).map_err(e)?;
    let exact = sys.rho_angle().to_turns();
    let points: Vec<CirclePoint> = (-20..=20)
        .map(|n| CirclePoint::gap(n, 0.5))
        .chain((0..20).map(|i| CirclePoint::base(i as f64 / 20.0)))
        .collect();
    for p in &points {
        let r = symbolic_rotation_number(&sys, p, 1_000_000);
        ensure(r == exact, || format!("symbolic {r} != {exact}"))?;
    }
    let n = 10_000;
    let est = rotation_number(&EmbeddedDenjoyLift { system: &sys }, 0.1, n).map_err(e)?;
    ensure((est.estimate - sys.rho1()).abs() <= 1.0 / n as f64, || {
        format!("embedded estimate {} vs {}", est.estimate, sys.rho1())
    })?;
    let mut worst: f64 = 0.0;
    for p in &points {
        let x0 = sys.embed(p).x;
        for k in (1..=100_000).step_by(37) {
            let (q, w) = sys.step_with_winding(p, k);
            let d = w as f64 + sys.embed(&q).x - x0 - k as f64 * sys.rho1();
            worst = worst.max(d.abs());
        }
    }
    ensure(worst <= 1.0, || format!("base deviation {worst}"))?;
    Ok(format!(
        "symbolic rotation number exact, embedded error {:.1e}, max |D_base| = {worst:.3}",
        (est.estimate - sys.rho1()).abs()
    ))
}

fn c3_bounded_drift() -> Outcome {
    let map = example(ExampleVariant::BoundedDrift);
    let rho = map.reference_rotation().ok_or("no reference rotation")?;
    let samples = default_grid(&map, 10, 50);
    ensure(samples.len() >= 200, || {
        format!("{} samples", samples.len())
    })?;
    let n_max = 100_000;
    let report =
        classify_mean_motion(&map, rho, &samples, n_max, &ClassifyConfig::default()).map_err(e)?;
    let e2 = report
        .directions
        .iter()
        .find(|d| d.v == [0.0, 1.0])
        .ok_or("no e2 direction")?;
    let max_e2 = e2.sup.value.max(-e2.inf.value);
    ensure(max_e2 <= 2.0 + 1e-9, || format!("max |D_e2| = {max_e2}"))?;
    ensure(max_e2 >= 0.999, || {
        format!("max |D_e2| = {max_e2} below 0.999")
    })?;
    let s = deviation_series(&map, rho, &peak(0, 0.0), n_max, false, "bounded_drift").map_err(e)?;
    let mut worst: f64 = 0.0;
    for (n, d) in s.times.iter().zip(&s.values).skip(1) {
        worst = worst.max((d[1] - bounded_drift_window_sum(0, *n, 0.5)).abs());
        worst = worst.max((d[1] - alpha::partial_sum(n - 1)).abs());
    }
    ensure(worst <= 1e-12, || format!("window-sum residual {worst:e}"))?;
    let est = rotation_set_hull(&map, &samples, &[n_max]).map_err(e)?;
    ensure(est.diameter <= 6e-5, || {
        format!("hull diameter {:e}", est.diameter)
    })?;
    Ok(format!(
        "{} samples to n = 1e5, max |D_e2| = {max_e2:.6}, window-sum residual {worst:.1e}, hull diameter {:.1e}",
        samples.len(),
        est.diameter
    ))
}

fn c4_witness() -> Outcome {
    let map = example(ExampleVariant::BoundedDrift);
    let delta = 0.01;
    let WitnessOutcome::Found(w) = nonsemiconjugacy_witness(&map, delta, 1_000_000).map_err(e)?
    else {
        return Err("no witness within the horizon".into());
    };
    ensure(
        w.fiber_distance < delta / 2.0 && w.base_distance < delta / 2.0,
        || format!("{w:?}"),
    )?;
    let r = w.replay(&map).map_err(e)?;
    let err = (r.fiber_distance - w.fiber_distance)
        .abs()
        .max((r.base_distance - w.base_distance).abs());
    ensure(err <= 1e-9, || format!("replay differs by {err:e}"))?;
    Ok(format!(
        "k = {}, n = {}, fiber {:.1e}, base {:.1e}, replay error {err:.1e}",
        w.k, w.n, w.fiber_distance, w.base_distance
    ))
}

fn harmonic_oracle(m: u64) -> f64 {
    let mut s = 0.0f64;
    for j in (1..=m).rev() {
        s += 1.0 / j as f64;
    }
    s
}

fn c5_ex_a() -> Outcome {
    let map = example(ExampleVariant::ExA);
    let rho = map.reference_rotation().ok_or("no reference rotation")?;
    ensure(
        (harmonic_oracle(100) - 5.187377517639621).abs() <= 1e-12,
        || "harmonic oracle drifted".into(),
    )?;
    let mut summary = Vec::new();
    for m in [10i64, 100, 1000] {
        let tail = 200;
        let s = deviation_series(&map, rho, &peak(-m, 0.0), m + tail, false, "ex_a").map_err(e)?;
        let terminal = s.values.last().unwrap()[1];
        let h = harmonic_oracle(m as u64);
        ensure((terminal - h).abs() <= 1e-9, || {
            format!("m = {m}: {terminal} vs H_m = {h}")
        })?;
        for d in &s.values[(m + 1) as usize..] {
            ensure((d[1] - terminal).abs() <= 1e-9, || {
                format!("m = {m}: series not constant after the support")
            })?;
        }
        let starts: Vec<State> = (1..=m).map(|j| peak(-j, 0.0)).collect();
        let report = classify_mean_motion(&map, rho, &starts, m + 1, &ClassifyConfig::default())
            .map_err(e)?;
        let running = report.max_norm.value;
        let floor = (m as f64).ln() - 1.0;
        ensure(running >= floor, || {
            format!("m = {m}: running max {running} < {floor}")
        })?;
        summary.push(format!("H_{m} = {terminal:.6}"));
    }
    Ok(summary.join(", "))
}

fn c6_ex_b() -> Outcome {
    let params = ExampleParams {
        k_max: 4,
        ..Default::default()
    };
    let map = build_example(ExampleVariant::ExB, default_rho(), &params).map_err(e)?;
    let mut prev = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for k in 1..=4 {
        let got = exb_orbit_range(&map, k).map_err(e)?;
        let want = exb_orbit_range_oracle(k).ok_or("oracle overflow")?;
        ensure((got - want).abs() <= 1e-9, || {
            format!("k = {k}: {got} vs {want}")
        })?;
        ensure(got.is_finite() && got > prev, || {
            format!("k = {k}: not increasing")
        })?;
        prev = got;
        out.push(format!("{got:.4}"));
    }
    Ok(format!("orbit ranges k = 1..4: {}", out.join(", ")))
}

fn c7_ak() -> Outcome {
    let params = AkSearchParams::default();
    let stages = ak_stages(4, &params).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for st in &stages[1..] {
        ensure(st.report.all_pass(), || {
            format!("stage {}: {:?}", st.n, st.report.first_failure())
        })?;
        for _ in 0..100 {
            let z = [rng.random::<f64>(), rng.random::<f64>()];
            worst = worst.max(st.period_residual(z));
        }
        let u = st.unboundedness_check().map_err(e)?;
        ensure(u.holds, || {
            format!("stage {}: unboundedness check fails {u:?}", st.n)
        })?;
    }
    ensure(worst <= 1e-6, || format!("period residual {worst:e}"))?;

    let s1 = &stages[1];
    let map = s1.torus_map();
    let q: i64 = s1.q().try_into().map_err(|_| "q_1 too large")?;
    let (p, _) = s1.alpha().multiple(s1.q());
    let p: [i64; 2] = [
        (&p[0]).try_into().map_err(|_| "p too large")?,
        (&p[1]).try_into().map_err(|_| "p too large")?,
    ];
    let mut iter_worst: f64 = 0.0;
    for _ in 0..20 {
        let z = [rng.random::<f64>(), rng.random::<f64>()];
        let end = map.lift_coords(&map.iterate_to(&map.state_at(z), q).map_err(e)?);
        for i in 0..2 {
            iter_worst = iter_worst.max((end[i] - z[i] - p[i] as f64).abs());
        }
    }
    ensure(iter_worst <= 1e-6, || {
        format!("iterated residual at stage 1: {iter_worst:e}")
    })?;

    let control = AkSearchParams {
        plateau_scale: 0.0,
        q_cap: 1 << 12,
        ..Default::default()
    };
    match ak_advance(&AkStage::initial(), &control) {
        Err(Error::StageFailure { condition, .. }) if condition == "deviation_ratio" => {}
        other => return Err(format!("negative control: {other:?}")),
    }
    Ok(format!(
        "stages 1-4 pass, period residual {worst:.1e}, iterated residual {iter_worst:.1e}, control fails on deviation_ratio"
    ))
}

fn cocycle_maps() -> Vec<(&'static str, TorusMap)> {
    let shear = |axis, h: f64| {
        make_shear(
            axis,
            BumpFunction::trapezoid(1.into(), ratio(1, 4), from_f64(h).unwrap()).unwrap(),
        )
    };
    vec![
        ("rigid", make_rigid(rigid_rho())),
        ("bounded_drift", example(ExampleVariant::BoundedDrift)),
        ("ex_a", example(ExampleVariant::ExA)),
        ("ex_c", example(ExampleVariant::ExC)),
        (
            "sheared",
            make_composite(vec![
                make_rigid(rigid_rho()),
                shear(Axis::Y, 0.3),
                shear(Axis::X, 0.2),
            ])
            .unwrap(),
        ),
    ]
}

fn c8_cocycle() -> Outcome {
    let maps = cocycle_maps();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let horizon = 10_000i64;
    let mut worst: f64 = 0.0;
    let mut closure_worst: f64 = 0.0;
    for t in 0..100 {
        let (name, map) = &maps[t % maps.len()];
        let rho = map.reference_rotation().unwrap_or([0.0, 0.0]);
        let z = if t % 2 == 0 && map.is_skew() {
            peak(rng.random_range(-30..30), rng.random::<f64>())
        } else {
            map.state_at([rng.random::<f64>(), rng.random::<f64>()])
        };
        let k = rng.random_range(0..horizon);
        let n = rng.random_range(1..=horizon - k);
        let s = deviation_series(map, rho, &z, n + k, false, name).map_err(e)?;
        let w = map.iterate_to(&z, k).map_err(e)?;
        let end = map.iterate_to(&w, n).map_err(e)?;
        let d_restart = map.deviation(&w, &end, n, rho);
        let (dk, dnk) = (s.at(k).unwrap(), s.at(n + k).unwrap());
        for i in 0..2 {
            worst = worst.max((dnk[i] - dk[i] - d_restart[i]).abs());
        }
        for v in [[1.0, 0.0], [0.0, 1.0]] {
            let series = directional_deviation(&s, v).map_err(e)?;
            let check = orbit_closure_check(&series);
            ensure(check.holds, || {
                format!("{name}: orbit closure check fails {check:?}")
            })?;
            let restart = d_restart[0] * v[0] + d_restart[1] * v[1];
            closure_worst = closure_worst.max(restart.abs() - 2.0 * check.c);
        }
    }
    ensure(worst <= 1e-10, || format!("cocycle residual {worst:e}"))?;
    ensure(closure_worst <= 1e-10, || {
        format!("restart exceeds 2C by {closure_worst:e}")
    })?;
    Ok(format!(
        "100 cases, cocycle residual {worst:.1e}, restarts within 2C"
    ))
}

fn c9_stability() -> Outcome {
    let rigid = make_rigid(rigid_rho());
    let eps = epsilon_f(&rigid, 9, 64).map_err(e)?;
    ensure((eps.certified_lower - 0.5).abs() <= 1e-9, || {
        format!("{eps:?}")
    })?;
    ensure((eps.empirical_upper - 0.5).abs() <= 1e-9, || {
        format!("{eps:?}")
    })?;
    let delta = 0.01;
    let probe = lyapunov_probe(
        &rigid,
        &rigid.state_at([0.3, 0.7]),
        &ProbeParams {
            delta,
            eps: 0.25,
            n_max: 2000,
            sample_count: 32,
            seed: 9,
        },
    )
    .map_err(e)?;
    ensure(probe.max_spread == delta, || {
        format!("rigid spread {}", probe.max_spread)
    })?;
    ensure(matches!(probe.verdict, Verdict::StableAtHorizon), || {
        "rigid unstable".into()
    })?;

    let map = example(ExampleVariant::ExA);
    let grid: Vec<State> = (0..8)
        .map(|i| {
            State::Skew(SkewState::new(
                CirclePoint::base(i as f64 / 8.0 + 0.01),
                0.2,
            ))
        })
        .chain((-3..=3).map(|n| State::Skew(SkewState::new(CirclePoint::gap(n, 1.0), 0.2))))
        .collect();
    for z in &grid {
        let State::Skew(st) = z else { unreachable!() };
        ensure(st.base.on_minimal_set(), || {
            format!("{z:?} off the minimal set")
        })?;
    }
    let report = sensitivity_scan(
        &map,
        &grid,
        &[0.05],
        0.25,
        2000,
        16,
        9,
        NonWandering::Declared,
    )
    .map_err(e)?;
    ensure(report.fraction_separated == 1.0, || {
        format!("fraction separated {}", report.fraction_separated)
    })?;
    let mut replay_worst: f64 = 0.0;
    for entry in &report.entries {
        let w = entry.witness.as_ref().ok_or("missing witness")?;
        let d = w.replay(&map, &entry.z).map_err(e)?;
        replay_worst = replay_worst.max((d - w.spread).abs());
    }
    ensure(replay_worst <= 1e-9, || {
        format!("replay error {replay_worst:e}")
    })?;
    Ok(format!(
        "rigid epsilon_f = 0.5, spread = delta; ex_a {} minimal-set points all separate, replay error {replay_worst:.1e}",
        grid.len()
    ))
}

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

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(e)?;
    let mut total = 0;
    for r in RECIPES {
        let mut dirs = Vec::new();
        for (i, threads) in [None, None, Some("1")].into_iter().enumerate() {
            let out = tmp.path().join(format!("{r}-{i}"));
            let mut cmd = Command::new(env!("CARGO_BIN_EXE_torlab"));
            cmd.args(["recipe", r, "--out", out.to_str().unwrap()]);
            if let Some(t) = threads {
                cmd.args(["--threads", t]);
            }
            let o = cmd.output().map_err(e)?;
            ensure(o.status.success(), || {
                format!("{r}: {}", String::from_utf8_lossy(&o.stderr))
            })?;
            dirs.push(out);
        }
        let listing = files(&dirs[0]);
        for other in &dirs[1..] {
            ensure(files(other) == listing, || format!("{r}: file sets differ"))?;
            for f in &listing {
                let a = std::fs::read(dirs[0].join(f)).map_err(e)?;
                let b = std::fs::read(other.join(f)).map_err(e)?;
                ensure(a == b, || format!("{r}: {} differs", f.display()))?;
            }
        }
        total += listing.len();
    }
    Ok(format!(
        "{} recipes, {total} files byte-identical across repeated and single-threaded runs",
        RECIPES.len()
    ))
}

fn main() {
    let criteria: [Check; 10] = [
        ("rigid rotation has zero deviation", c1_rigid),
        ("Denjoy base rotation number", c2_base_rotation),
        ("bounded mean motion example", c3_bounded_drift),
        ("non-semi-conjugacy witness", c4_witness),
        ("harmonic drift example", c5_ex_a),
        ("nested-family example", c6_ex_b),
        ("Anosov-Katok stages", c7_ak),
        ("cocycle identity and orbit closure", c8_cocycle),
        ("stability probes", c9_stability),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2}: PASS  {title} ({detail}) [{secs:.1} s]",
                i + 1
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "criterion {:>2}: FAIL  {title} ({why}) [{secs:.1} s]",
                    i + 1
                );
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
