use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scaled_consensus::attracting_law::{
    measure_scalar_settling, settling_bounds_state_dependent, settling_bounds_state_independent,
    transformed_params, AlParams, OddRatio, ScalarOdeOptions,
};
use scaled_consensus::config::{self, RunOverrides, ScenarioConfig};
use scaled_consensus::plot::scaled_states_svg;
use scaled_consensus::report::RunReport;
use scaled_consensus::simulator::simulate;

/// Usage or parse error.
const EXIT_USAGE: u8 = 1;
/// Numerical failure or bound containment failure.
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser)]
#[command(
    name = "scaled-consensus",
    version,
    about = "Finite/fixed-time scaled consensus: settling bounds, simulations and example reproduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print state-independent settling-time bounds for the GAL and
    /// double-power laws.
    Bounds {
        #[command(flatten)]
        law: LawArgs,
        /// Algebraic connectivity of the (mirror) graph.
        #[arg(long)]
        lambda2: Option<f64>,
        /// Number of agents.
        #[arg(long, default_value_t = 6)]
        agents: usize,
    },
    /// Run one scenario file (or bundled scenario name).
    Simulate {
        /// Path to a TOML scenario, or a bundled name such as `example1_c1_gal`.
        config: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run every bundled scenario of `example1` or `example2`.
    Reproduce {
        #[arg(value_parser = ["example1", "example2"])]
        which: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Integrate the scalar attracting law and compare measured settling
    /// times with the closed-form bounds.
    AlOde {
        #[command(flatten)]
        law: LawArgs,
        /// Initial states, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_values_t = [0.1, -0.1, 0.5, -0.5, 1.0, -1.0, 10.0, -10.0, 100.0, -100.0, 1e6, -1e6]
        )]
        x0: Vec<f64>,
    },
}

#[derive(Args)]
struct LawArgs {
    #[arg(long, default_value_t = 2.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa1: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa2: f64,
    /// q/p with q < p, both odd.
    #[arg(long, default_value = "1/3")]
    gamma1: String,
    /// m/n with n < m, both odd.
    #[arg(long, default_value = "5/3")]
    gamma2: String,
}

impl LawArgs {
    fn params(&self) -> Result<AlParams, String> {
        let g1: OddRatio = self.gamma1.parse().map_err(|e| format!("--gamma1: {e}"))?;
        let g2: OddRatio = self.gamma2.parse().map_err(|e| format!("--gamma2: {e}"))?;
        AlParams::new(self.rho, self.kappa1, self.kappa2, g1, g2).map_err(|e| e.to_string())
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for CSV, SVG and report files.
    #[arg(long, short = 'o', default_value = ".")]
    out_dir: PathBuf,
    /// Override the consensus band on the scaled disagreement.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Override the RK4 step.
    #[arg(long)]
    step: Option<f64>,
    /// Override the simulated time span in seconds.
    #[arg(long)]
    horizon: Option<f64>,
    /// Skip the SVG chart.
    #[arg(long)]
    csv_only: bool,
}

impl OutputArgs {
    fn overrides(&self) -> RunOverrides {
        RunOverrides {
            epsilon: self.epsilon,
            step: self.step,
            horizon: self.horizon,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Bounds {
            law,
            lambda2,
            agents,
        } => cmd_bounds(&law, lambda2, agents),
        Command::Simulate { config, out } => cmd_simulate(&config, &out),
        Command::Reproduce { which, out } => cmd_reproduce(&which, &out),
        Command::AlOde { law, x0 } => cmd_al_ode(&law, &x0),
    }
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn cmd_bounds(law: &LawArgs, lambda2: Option<f64>, agents: usize) -> ExitCode {
    let params = match law.params() {
        Ok(p) => p,
        Err(e) => return usage_error(e),
    };
    println!(
        "rho = {}, kappa1 = {}, kappa2 = {}, gamma1 = {}, gamma2 = {}",
        params.rho(),
        params.kappa1(),
        params.kappa2(),
        params.gamma1(),
        params.gamma2()
    );
    let effective = match lambda2 {
        Some(l2) => match transformed_params(&params, l2, agents) {
            Ok(t) => {
                println!("lambda2 = {l2}, agents = {agents}");
                println!(
                    "rho' = {:.6}, kappa1' = {:.6}, kappa2' = {:.6}",
                    t.rho(),
                    t.kappa1(),
                    t.kappa2()
                );
                t
            }
            Err(e) => return usage_error(e),
        },
        None => params,
    };
    let dp = effective.with_rho(0.0).expect("rho = 0 is admissible");
    println!("{:<14} {:>9} {:>9}", "law", "T_lower", "T_upper");
    for (name, p) in [("gal", effective), ("double-power", dp)] {
        let b = settling_bounds_state_independent(&p);
        println!("{name:<14} {:>9.4} {:>9.4}", b.lower, b.upper);
    }
    ExitCode::SUCCESS
}

struct RunOutcome {
    report: RunReport,
    traj: Option<scaled_consensus::Trajectory>,
}

fn run_config(cfg: &ScenarioConfig, out: &OutputArgs) -> Result<RunOutcome, (u8, String)> {
    let mut cfg = cfg.clone();
    cfg.apply(&out.overrides());
    let prepared = cfg.prepare().map_err(|e| (EXIT_USAGE, e.to_string()))?;
    let traj =
        simulate(&prepared.scenario).map_err(|e| (EXIT_NUMERICAL, format!("{}: {e}", cfg.name)))?;
    let mut report = RunReport::new(&prepared, &traj);

    fs::create_dir_all(&out.out_dir).map_err(|e| (EXIT_USAGE, e.to_string()))?;
    let csv_name = prepared
        .output
        .clone()
        .unwrap_or_else(|| format!("{}.csv", cfg.name));
    let csv_path = out.out_dir.join(csv_name);
    let write = |path: &Path, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| {
        let mut buf = Vec::new();
        f(&mut buf)
            .and_then(|_| fs::write(path, buf))
            .map_err(|e| (EXIT_USAGE, format!("cannot write {}: {e}", path.display())))
    };
    write(&csv_path, &|b| traj.write_csv(b))?;
    report.csv_path = Some(csv_path);
    if !out.csv_only {
        let svg_path = out.out_dir.join(format!("{}.svg", cfg.name));
        let svg = scaled_states_svg(&traj, &cfg.name);
        write(&svg_path, &|b| {
            b.extend_from_slice(svg.as_bytes());
            Ok(())
        })?;
        report.svg_path = Some(svg_path);
    }
    let report_path = out.out_dir.join(format!("{}.report.txt", cfg.name));
    let text = format!("{report}\n");
    write(&report_path, &|b| {
        b.extend_from_slice(text.as_bytes());
        Ok(())
    })?;
    Ok(RunOutcome {
        report,
        traj: Some(traj),
    })
}

fn cmd_simulate(path: &str, out: &OutputArgs) -> ExitCode {
    let cfg = match ScenarioConfig::load(path) {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    match run_config(&cfg, out) {
        Ok(outcome) => {
            println!("{}", outcome.report);
            if outcome.report.verdict.is_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NUMERICAL)
            }
        }
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn cmd_reproduce(which: &str, out: &OutputArgs) -> ExitCode {
    let configs = config::bundled_example(which);
    let results: Vec<Result<RunOutcome, (u8, String)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| scope.spawn(move || run_config(cfg, out)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err((EXIT_NUMERICAL, "run panicked".into())))
            })
            .collect()
    });

    let mut code = 0u8;
    let mut reports = Vec::new();
    for r in results {
        match r {
            Ok(outcome) => {
                println!("{}\n", outcome.report);
                if !outcome.report.verdict.is_pass() {
                    code = code.max(EXIT_NUMERICAL);
                }
                reports.push(outcome);
            }
            Err((c, msg)) => {
                eprintln!("error: {msg}");
                code = code.max(c);
            }
        }
    }

    println!("{}", RunReport::summary_header());
    for o in &reports {
        println!("{}", o.report.summary_row());
    }

    // Within each scale setting the GAL run should settle before the
    // double-power run.
    for o in reports.iter().filter(|o| o.report.name.ends_with("_gal")) {
        let stem = o.report.name.trim_end_matches("_gal");
        if let Some(dp) = reports
            .iter()
            .find(|d| d.report.name == format!("{stem}_dp"))
        {
            match (o.report.measured, dp.report.measured) {
                (Some(a), Some(b)) => {
                    let ok = a < b;
                    println!(
                        "{stem}: gal {a:.4} s vs double-power {b:.4} s -> {}",
                        if ok {
                            "gal faster"
                        } else {
                            "ORDERING VIOLATED"
                        }
                    );
                }
                _ => println!("{stem}: ordering not checked (a run did not settle)"),
            }
        }
    }
    if which == "example2" {
        print_sign_groups(&reports);
    }
    ExitCode::from(code)
}

fn print_sign_groups(reports: &[RunOutcome]) {
    for o in reports {
        let Some(traj) = &o.traj else { continue };
        let Some(last) = traj.states.last() else {
            continue;
        };
        let pos: Vec<String> = (0..last.len())
            .filter(|&i| last[i] > 0.0)
            .map(|i| (i + 1).to_string())
            .collect();
        let neg: Vec<String> = (0..last.len())
            .filter(|&i| last[i] < 0.0)
            .map(|i| (i + 1).to_string())
            .collect();
        println!(
            "{}: final x > 0 for agents {{{}}}, x < 0 for agents {{{}}}",
            o.report.name,
            pos.join(","),
            neg.join(",")
        );
    }
}

fn cmd_al_ode(law: &LawArgs, x0s: &[f64]) -> ExitCode {
    let params = match law.params() {
        Ok(p) => p,
        Err(e) => return usage_error(e),
    };
    let opts = ScalarOdeOptions::for_params(&params);
    let slack = 2.0 * opts.base_step;
    let uniform = settling_bounds_state_independent(&params);
    println!(
        "state-independent bounds: [{:.6}, {:.6}]  (slack {:e})",
        uniform.lower, uniform.upper, slack
    );
    println!(
        "{:>12} {:>12} {:>12} {:>12}  check",
        "x0", "measured", "T_lower", "T_upper"
    );
    let mut flagged = false;
    for &x0 in x0s {
        let measured = measure_scalar_settling(&params, x0, &opts).time;
        let b = settling_bounds_state_dependent(&params, x0);
        let inside = b.contains(measured, slack) && measured <= uniform.upper + slack;
        flagged |= !inside;
        println!(
            "{x0:>12e} {measured:>12.6} {:>12.6} {:>12.6}  {}",
            b.lower,
            b.upper,
            if inside { "ok" } else { "OUT OF INTERVAL" }
        );
    }
    if flagged {
        ExitCode::from(EXIT_NUMERICAL)
    } else {
        ExitCode::SUCCESS
    }
}
