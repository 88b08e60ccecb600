//! Command-line driver: scenario checking, flow runs, the continuity
//! march, and the oracle verification suites.

use anyhow::Context;
use clap::{Parser, Subcommand};
use maflow::continuity;
use maflow::flow::{run, Termination};
use maflow::report::{build_report, write_report};
use maflow::scenario::{check_hypotheses, Scenario};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "maflow", version, about = "Monge-Ampère-type flow laboratory on flat complex tori")]
struct Cli {
    /// Worker threads for field operations (0 = one per core). Results are
    /// bit-identical regardless of the thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate scenario hypotheses: cone condition, invariant c, ψ ≥ c,
    /// background ratio ≤ ψ, admissibility of u = 0.
    Check {
        scenario: PathBuf,
        /// Also require ψ ≥ c for exit code 0.
        #[arg(long)]
        require_psi_geq_c: bool,
        /// Also require χⁿ/(χ^{n-α}∧ω^α) ≤ ψ for exit code 0.
        #[arg(long)]
        require_ratio_leq_psi: bool,
    },
    /// Integrate the flow; writes diagnostics.csv, report.json and
    /// snapshots under --out.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Skip the cone-condition gate.
        #[arg(long)]
        skip_cone_check: bool,
        /// Deterministic seed recorded in outputs (reserved for randomized
        /// test data; the solver itself is deterministic).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// March the method of continuity to s = 1 with per-node checkpoints.
    Continuity {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Resume from a checkpoint manifest.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        skip_cone_check: bool,
    },
    /// Run the oracle verification suites and print a pass/fail table.
    Verify {
        #[arg(long, default_value_t = 1234)]
        seed: u64,
        /// Random instances per algebra suite.
        #[arg(long, default_value_t = 10_000)]
        cases: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Scenario/config problems exit 2, runtime failures 1.
            if e.downcast_ref::<maflow::Error>()
                .map(|me| {
                    matches!(
                        me,
                        maflow::Error::Scenario(_)
                            | maflow::Error::InvalidGrid(_)
                            | maflow::Error::Toml(_)
                    )
                })
                .unwrap_or(false)
            {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Check { scenario, require_psi_geq_c, require_ratio_leq_psi } => {
            let sc = Scenario::from_path(&scenario)?;
            let built = sc.build()?;
            let rep = check_hypotheses(&built.data, &built.u_lower)?;
            println!("cone condition      : {}", verdict(rep.cone.satisfied));
            println!("  margin            : {:.6e}", rep.cone.margin);
            println!("  chi' positive     : {}", rep.cone.positive);
            println!("invariant c         : {:.12}", rep.invariant_c);
            println!("psi >= c pointwise  : {}", rep.psi_geq_c);
            println!("chi ratio <= psi    : {}", rep.ratio_leq_psi);
            println!(
                "u = 0 admissible    : {} (least eigenvalue {:.6e})",
                rep.admissible_zero, rep.least_eig_zero
            );
            let mut ok = rep.cone.satisfied && rep.admissible_zero;
            if require_psi_geq_c {
                ok &= rep.psi_geq_c;
            }
            if require_ratio_leq_psi {
                ok &= rep.ratio_leq_psi;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }

        Command::Run { scenario, out, skip_cone_check, seed } => {
            let sc = Scenario::from_path(&scenario)?;
            let built = sc.build()?;
            if !skip_cone_check {
                let rep = check_hypotheses(&built.data, &built.u_lower)?;
                if !rep.cone.satisfied {
                    anyhow::bail!(
                        "cone condition violated (margin {:.3e}); rerun with --skip-cone-check to force",
                        rep.cone.margin
                    );
                }
            }
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let mut cfg = built.flow.clone();
            cfg.out_dir = Some(out.clone());
            let _ = seed; // recorded for interface stability; nothing randomized here
            let traj = run(&built.data, &cfg, None)?;
            traj.write_csv(&out.join("diagnostics.csv"))?;
            let report = build_report(&built.data, &traj, &cfg)?;
            write_report(&out.join("report.json"), &report)?;
            println!(
                "termination {:?} at t = {:.6} after {} steps ({} rejected)",
                traj.termination,
                traj.final_state.t,
                traj.accepted_steps,
                traj.rejected_steps
            );
            if let (Some(b), Some(res)) = (report.b, report.residual) {
                println!("b = {b:.10e}, elliptic residual = {res:.3e}");
            }
            if let Some(fit) = &report.decay_fit {
                println!(
                    "oscillation decay: C = {:.4e}, c0 = {:.4}, R² = {:.4}",
                    fit.c, fit.c0, fit.r_squared
                );
            }
            Ok(if traj.termination == Termination::Converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }

        Command::Continuity { scenario, out, resume, skip_cone_check } => {
            let sc = Scenario::from_path(&scenario)?;
            let built = sc.build()?;
            if !skip_cone_check {
                let rep = check_hypotheses(&built.data, &built.u_lower)?;
                if !rep.cone.satisfied {
                    anyhow::bail!(
                        "cone condition violated (margin {:.3e})",
                        rep.cone.margin
                    );
                }
            }
            std::fs::create_dir_all(&out)?;
            let cfg = built.continuity.clone();
            let mut path = match resume {
                Some(manifest) => continuity::load_path(&manifest, &built.data)?,
                None => {
                    let p = continuity::initialize(&built.data, &built.u_lower, &cfg)?;
                    continuity::save_path(&p, &out, built.data.grid())?;
                    p
                }
            };
            println!(
                "continuity: kappa = {:.6}, epsilon = {:.6}, delta = {:.6}, b0 = {:.6e}",
                path.kappa, path.epsilon, path.delta, path.b0
            );
            while !path.completed {
                let done = continuity::advance(&built.data, &cfg, &mut path)?;
                continuity::save_path(&path, &out, built.data.grid())?;
                let node = path.nodes.last().unwrap();
                println!(
                    "  s = {:.6}: b = {:+.8e}, residual = {:.3e}",
                    node.s, node.b, node.residual
                );
                if done {
                    break;
                }
            }
            let node = path.nodes.last().unwrap();
            println!(
                "march complete: {} nodes, final b = {:+.8e}, final residual = {:.3e}",
                path.nodes.len(),
                node.b,
                node.residual
            );
            Ok(if path.completed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }

        Command::Verify { seed, cases } => {
            let results = maflow::verify::run_all(seed, cases);
            let mut all_ok = true;
            println!("{:<28} {:>8} {:>12} {:>10} {:>6}", "suite", "cases", "worst", "tol", "ok");
            for r in &results {
                all_ok &= r.passed;
                println!(
                    "{:<28} {:>8} {:>12.3e} {:>10.1e} {:>6}",
                    r.name,
                    r.cases,
                    r.worst,
                    r.tol,
                    if r.passed { "pass" } else { "FAIL" }
                );
            }
            Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "satisfied"
    } else {
        "violated"
    }
}
