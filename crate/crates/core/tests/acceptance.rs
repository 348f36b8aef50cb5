//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs with `cargo test --test acceptance`.

#![allow(clippy::needless_range_loop)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scaled_consensus::attracting_law::{
    corollary_compare, measure_scalar_settling, settling_bounds_state_dependent,
    settling_bounds_state_independent, AlParams, OddRatio, ScalarOdeOptions,
};
use scaled_consensus::config::{self, PreparedScenario};
use scaled_consensus::graph::{
    self, find_detail_balance, mirror_laplacian, DetailBalance, WeightedGraph,
};
use scaled_consensus::protocol::{ProtocolKind, ProtocolSpec};
use scaled_consensus::report::RunReport;
use scaled_consensus::scales::{builtin_setting, ScaleSetting};
use scaled_consensus::simulator::{lyapunov_series, simulate, Trajectory};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const EXAMPLE1: [[f64; 6]; 6] = [
    [0.0, 1.0, 1.0, 1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0, 1.0, 1.0],
    [1.0, 1.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0, 1.0, 0.0, 1.0],
    [0.0, 0.0, 1.0, 0.0, 1.0, 0.0],
];

const EXAMPLE2: [[f64; 6]; 6] = [
    [0.0, 0.2, 0.2, 0.0, 0.0, 0.0],
    [0.4, 0.0, 0.2, 0.0, 0.0, 0.0],
    [1.0, 0.5, 0.0, 2.0, 0.0, 0.0],
    [0.0, 0.0, 2.0, 0.0, 0.8, 0.4],
    [0.0, 0.0, 0.0, 0.4, 0.0, 0.4],
    [0.0, 0.0, 0.0, 0.4, 0.8, 0.0],
];

const EXAMPLE2_BALANCE: [f64; 6] = [10.0, 5.0, 2.0, 2.0, 4.0, 2.0];

fn rows(m: &[[f64; 6]; 6]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

fn law(rho: f64) -> AlParams {
    AlParams::new(
        rho,
        1.0,
        1.0,
        OddRatio::new(1, 3).unwrap(),
        OddRatio::new(5, 3).unwrap(),
    )
    .unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Run {
    prepared: PreparedScenario,
    traj: Trajectory,
    report: RunReport,
}

/// All bundled scenarios, simulated once and shared by several criteria.
fn runs() -> &'static [Run] {
    static RUNS: OnceLock<Vec<Run>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let mut cfgs = config::bundled_example("example1");
        cfgs.extend(config::bundled_example("example2"));
        std::thread::scope(|scope| {
            let handles: Vec<_> = cfgs
                .iter()
                .map(|cfg| {
                    scope.spawn(move || {
                        let prepared = cfg.prepare().expect("bundled scenario prepares");
                        let traj = simulate(&prepared.scenario).expect("bundled scenario runs");
                        let report = RunReport::new(&prepared, &traj);
                        Run {
                            prepared,
                            traj,
                            report,
                        }
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    })
}

fn run(name: &str) -> &'static Run {
    runs()
        .iter()
        .find(|r| r.prepared.scenario.name == name)
        .unwrap_or_else(|| panic!("no bundled scenario {name}"))
}

/// Parses the `law T_lower T_upper` table printed by `bounds`.
fn cli_bounds(lambda2: &str) -> Result<Vec<(String, f64, f64)>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_scaled-consensus"))
        .args([
            "bounds",
            "--rho",
            "2",
            "--kappa1",
            "1",
            "--kappa2",
            "1",
            "--gamma1",
            "1/3",
            "--gamma2",
            "5/3",
            "--lambda2",
            lambda2,
            "--agents",
            "6",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("bounds exited with {}", out.status)
    })?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    Ok(stdout
        .lines()
        .filter_map(|line| {
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                [name @ ("gal" | "double-power"), lo, hi] => {
                    Some((name.to_string(), lo.parse().ok()?, hi.parse().ok()?))
                }
                _ => None,
            }
        })
        .collect())
}

fn ac1_bounds() -> Outcome {
    let reference = [
        ("1", [("gal", 0.82, 1.96), ("double-power", 1.35, 4.05)]),
        (
            "0.9383",
            [("gal", 0.87, 2.09), ("double-power", 1.43, 4.32)],
        ),
    ];
    let mut detail = Vec::new();
    for (lambda2, expected) in reference {
        let table = cli_bounds(lambda2)?;
        for (name, lo, hi) in expected {
            let (_, got_lo, got_hi) = table
                .iter()
                .find(|(n, ..)| n == name)
                .ok_or_else(|| format!("no {name} row for lambda2 = {lambda2}"))?;
            ensure(
                (got_lo - lo).abs() <= 0.01 && (got_hi - hi).abs() <= 0.01,
                || format!("lambda2 = {lambda2} {name}: ({got_lo}, {got_hi}) vs ({lo}, {hi})"),
            )?;
            detail.push(format!("{name}@{lambda2}=({got_lo:.4},{got_hi:.4})"));
        }
    }
    Ok(detail.join(" "))
}

fn ac2_spectral() -> Outcome {
    let g1 = WeightedGraph::undirected(&rows(&EXAMPLE1)).map_err(|e| e.to_string())?;
    let l1 = graph::algebraic_connectivity(&graph::laplacian(&g1)).map_err(|e| e.to_string())?;
    ensure((l1 - 1.0).abs() <= 1e-9, || {
        format!("example 1 lambda2 = {l1}")
    })?;

    let g2 = WeightedGraph::directed(&rows(&EXAMPLE2)).map_err(|e| e.to_string())?;
    let db = DetailBalance::with_params(&g2, EXAMPLE2_BALANCE.to_vec());
    ensure(db.valid, || "p = [10,5,2,2,4,2] rejected".into())?;
    let l2 = graph::algebraic_connectivity(&mirror_laplacian(&g2, &db).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure((l2 - 0.9383).abs() <= 5e-4, || {
        format!("example 2 mirror lambda2 = {l2}")
    })?;
    Ok(format!("lambda2 = {l1:.12}, mirror lambda2 = {l2:.6}"))
}

fn ac3_detail_balance() -> Outcome {
    let g = WeightedGraph::directed(&rows(&EXAMPLE2)).map_err(|e| e.to_string())?;
    let db = find_detail_balance(&g);
    ensure(db.valid, || "not reported as detail-balanced".into())?;
    let scale = db.p[0] / EXAMPLE2_BALANCE[0];
    for (i, (&p, &want)) in db.p.iter().zip(&EXAMPLE2_BALANCE).enumerate() {
        ensure(((p / scale) - want).abs() <= 1e-9 * want, || {
            format!("p[{i}] = {p} is not proportional to {want}")
        })?;
    }
    let mut worst: f64 = 0.0;
    for i in 0..6 {
        for j in 0..6 {
            let (a, b) = (db.p[i] * EXAMPLE2[i][j], db.p[j] * EXAMPLE2[j][i]);
            let r = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max(if a == b { 0.0 } else { r });
        }
    }
    ensure(worst <= 1e-9, || format!("edge residual {worst:e}"))?;
    Ok(format!("p = {:?}, max edge residual {worst:e}", db.p))
}

fn ac4_scalar_oracle() -> Outcome {
    let x0s = [0.1, 0.5, 1.0, 10.0, 100.0, 1e6]
        .iter()
        .flat_map(|&x| [x, -x]);
    let mut count = 0;
    for rho in [2.0, 0.0] {
        let p = law(rho);
        let opts = ScalarOdeOptions::for_params(&p);
        let slack = 2.0 * opts.base_step;
        let uniform = settling_bounds_state_independent(&p);
        for x0 in x0s.clone() {
            let t = measure_scalar_settling(&p, x0, &opts).time;
            let b = settling_bounds_state_dependent(&p, x0);
            ensure(b.contains(t, slack), || {
                format!(
                    "rho = {rho}, x0 = {x0}: T = {t} outside [{}, {}]",
                    b.lower, b.upper
                )
            })?;
            if x0.abs() == 1e6 {
                ensure(t <= uniform.upper + slack, || {
                    format!("rho = {rho}, x0 = {x0}: T = {t} > {}", uniform.upper)
                })?;
            }
            count += 1;
        }
    }
    Ok(format!("{count} initial states inside their intervals"))
}

fn ac5_network_containment() -> Outcome {
    let mut detail = Vec::new();
    for r in runs() {
        let rep = &r.report;
        let t = rep
            .measured
            .ok_or_else(|| format!("{} did not settle", rep.name))?;
        let upper = rep
            .bounds
            .ok_or_else(|| format!("{} has no bound", rep.name))?
            .upper;
        ensure(t <= upper + rep.record_stride, || {
            format!("{}: settled at {t} > {upper} + stride", rep.name)
        })?;
    }
    for setting in ["example1_c1", "example1_c2", "example2_c3", "example2_c4"] {
        let gal = run(&format!("{setting}_gal")).report.measured.unwrap();
        let dp = run(&format!("{setting}_dp")).report.measured.unwrap();
        ensure(gal < dp, || {
            format!("{setting}: gal {gal} not before dp {dp}")
        })?;
        detail.push(format!("{setting} {gal:.3}<{dp:.3}"));
    }
    Ok(detail.join(", "))
}

fn ac6_lyapunov() -> Outcome {
    let mut checked = 0;
    for r in runs() {
        let s = &r.prepared.scenario;
        let series = lyapunov_series(s, &r.traj);
        if let Some(k) = series.first_increase_outside_band(&r.traj.spread, r.traj.epsilon, 1e-9) {
            return Err(format!(
                "{}: V rose from {:e} to {:e} at t = {}",
                s.name,
                series.values[k],
                series.values[k + 1],
                series.times[k]
            ));
        }
        checked += series.values.len();
    }
    Ok(format!("{checked} samples over {} runs", runs().len()))
}

fn max_pairwise(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

fn ac7_scaled_vs_raw() -> Outcome {
    let mut detail = Vec::new();
    for name in [
        "example1_c2_gal",
        "example1_c2_dp",
        "example2_c4_gal",
        "example2_c4_dp",
    ] {
        let traj = &run(name).traj;
        let ts = traj
            .settling_time
            .ok_or_else(|| format!("{name} did not settle"))?;
        let (mut worst_g, mut least_x) = (0.0f64, f64::INFINITY);
        for k in (0..traj.len()).filter(|&k| traj.times[k] >= ts) {
            worst_g = worst_g.max(max_pairwise(&traj.scaled_states[k]));
            least_x = least_x.min(max_pairwise(&traj.states[k]));
        }
        ensure(worst_g <= 1e-3, || {
            format!("{name}: scaled spread {worst_g:e} after settling")
        })?;
        ensure(least_x > 0.1, || {
            format!("{name}: raw spread {least_x} after settling")
        })?;
        detail.push(format!("{name} g<={worst_g:.1e} x>={least_x:.2}"));
    }
    Ok(detail.join(", "))
}

fn ac8_sign_groups() -> Outcome {
    let c3 = run("example2_c3_gal").traj.states.last().unwrap().clone();
    let signs: Vec<f64> = c3.iter().map(|v| v.signum()).collect();
    let pattern = [1.0, -1.0, -1.0, -1.0, 1.0, 1.0];
    let flipped = pattern.map(|s: f64| -s);
    ensure(signs == pattern || signs == flipped, || {
        format!("C3 final signs {signs:?}")
    })?;
    let mut detail = vec![format!("C3 signs {signs:?}")];
    for name in ["example2_c4_gal", "example2_c4_dp"] {
        let x = run(name).traj.states.last().unwrap();
        ensure(x[1] * x[4] < 0.0, || {
            format!("{name}: x2 = {}, x5 = {}", x[1], x[4])
        })?;
        detail.push(format!("{name} x2 = {:.3}, x5 = {:.3}", x[1], x[4]));
    }
    Ok(detail.join("; "))
}

/// `(lower, upper)` of the state-independent bounds, written out directly.
fn closed_form_bounds(rho: f64, k1: f64, k2: f64, g1: f64, g2: f64) -> (f64, f64) {
    if rho > 0.0 {
        (
            (1.0 + (rho + k2) / k1).ln() / ((rho + k2) * (1.0 - g1)),
            (1.0 + rho / k2).ln() / (rho * (g2 - 1.0)) + (1.0 + rho / k1).ln() / (rho * (1.0 - g1)),
        )
    } else {
        (
            (1.0 + k2 / k1).ln() / (k2 * (1.0 - g1)),
            1.0 / (k1 * (1.0 - g1)) + 1.0 / (k2 * (g2 - 1.0)),
        )
    }
}

fn ac9_bound_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c011);
    let odd = |rng: &mut ChaCha8Rng, lo: u32, hi: u32| 2 * rng.gen_range(lo..hi) + 1;
    for i in 0..100 {
        let p = odd(&mut rng, 1, 10);
        let q = odd(&mut rng, 0, (p - 1) / 2);
        let n = odd(&mut rng, 0, 10);
        let m = odd(&mut rng, n.div_ceil(2), 20);
        // (0, 10]: map [0, 1) to (0, 1].
        let rho = 10.0 * (1.0 - rng.gen::<f64>());
        let k1 = rng.gen_range(0.05..10.0);
        let k2 = rng.gen_range(0.05..10.0);
        let gal = AlParams::new(
            rho,
            k1,
            k2,
            OddRatio::new(q, p).unwrap(),
            OddRatio::new(m, n).unwrap(),
        )
        .map_err(|e| format!("set {i}: {e}"))?;
        let (g1, g2) = (q as f64 / p as f64, m as f64 / n as f64);
        let (gl, gu) = closed_form_bounds(rho, k1, k2, g1, g2);
        let (dl, du) = closed_form_bounds(0.0, k1, k2, g1, g2);
        ensure(gl < dl && gu < du, || {
            format!("set {i} (rho={rho}, {q}/{p}, {m}/{n}): ({gl},{gu}) vs ({dl},{du})")
        })?;
        let lib = settling_bounds_state_independent(&gal);
        ensure(
            (lib.lower - gl).abs() <= 1e-12 * gl && (lib.upper - gu).abs() <= 1e-12 * gu,
            || {
                format!(
                    "set {i}: library bounds ({}, {}) vs ({gl}, {gu})",
                    lib.lower, lib.upper
                )
            },
        )?;
        ensure(corollary_compare(&gal), || {
            format!("set {i}: corollary_compare false")
        })?;
    }
    Ok("100 parameter sets".into())
}

fn ac10_derivatives() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1ff);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for setting in ScaleSetting::ALL {
        for agent in 1..=6 {
            let g = builtin_setting(setting.name(), agent).map_err(|e| e.to_string())?;
            for _ in 0..1000 {
                let x: f64 = rng.gen_range(-20.0..20.0);
                let t: f64 = rng.gen_range(0.0..5.0);
                let hx = 1e-5 * x.abs().max(1.0);
                let ht = 1e-5;
                let fx = (g.eval(x + hx, t) - g.eval(x - hx, t)) / (2.0 * hx);
                let ft = (g.eval(x, t + ht) - g.eval(x, t - ht)) / (2.0 * ht);
                for (what, an, fd) in [("dx", g.d_dx(x, t), fx), ("dt", g.d_dt(x, t), ft)] {
                    let err = (an - fd).abs() / an.abs().max(1.0);
                    worst = worst.max(err);
                    ensure(err <= 1e-5, || {
                        format!(
                            "{}:{agent} {what} at x={x}, t={t}: {an} vs {fd}",
                            setting.name()
                        )
                    })?;
                }
                count += 1;
            }
        }
    }
    Ok(format!("{count} points, worst relative error {worst:.1e}"))
}

fn bit_identical(a: &Trajectory, b: &Trajectory) -> bool {
    let same = |x: &[f64], y: &[f64]| {
        x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits())
    };
    a.len() == b.len()
        && same(&a.times, &b.times)
        && a.states.iter().zip(&b.states).all(|(x, y)| same(x, y))
        && a.scaled_states
            .iter()
            .zip(&b.scaled_states)
            .all(|(x, y)| same(x, y))
        && same(&a.lyapunov, &b.lyapunov)
}

fn ac11_reductions() -> Outcome {
    let mut compared = 0;
    for r in runs() {
        let s = &r.prepared.scenario;
        let spec = &s.protocol;
        if spec.kind() == ProtocolKind::Gal {
            let mut signed = s.clone();
            signed.protocol = ProtocolSpec::new(
                ProtocolKind::SignedGal,
                *spec.params(),
                spec.weights().clone(),
            )
            .map_err(|e| e.to_string())?;
            let traj = simulate(&signed).map_err(|e| e.to_string())?;
            ensure(bit_identical(&traj, &r.traj), || {
                format!("{}: signed protocol differs from gal", s.name)
            })?;
            compared += 1;
        }
        if spec.kind() == ProtocolKind::DoublePower {
            let mut gal0 = s.clone();
            gal0.protocol = ProtocolSpec::new(
                ProtocolKind::Gal,
                spec.params().with_rho(0.0).unwrap(),
                spec.weights().clone(),
            )
            .map_err(|e| e.to_string())?;
            let traj = simulate(&gal0).map_err(|e| e.to_string())?;
            ensure(bit_identical(&traj, &r.traj), || {
                format!("{}: gal with rho = 0 differs from double-power", s.name)
            })?;
            compared += 1;
        }
    }
    Ok(format!("{compared} trajectory pairs bit-identical"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("AC1 bound reproduction", ac1_bounds),
        ("AC2 spectral reproduction", ac2_spectral),
        ("AC3 detail balance", ac3_detail_balance),
        ("AC4 scalar oracle containment", ac4_scalar_oracle),
        ("AC5 network settling containment", ac5_network_containment),
        ("AC6 Lyapunov monotonicity", ac6_lyapunov),
        ("AC7 scaled vs raw consensus", ac7_scaled_vs_raw),
        ("AC8 sign groups", ac8_sign_groups),
        ("AC9 GAL bounds below double-power", ac9_bound_ordering),
        ("AC10 scale derivative consistency", ac10_derivatives),
        ("AC11 protocol reductions", ac11_reductions),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name} ({secs:.2} s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name} ({secs:.2} s): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
