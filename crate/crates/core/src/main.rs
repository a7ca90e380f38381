use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use volterra_tv::harness::{
    add_noise, estimate_rate, make_phantom, run_rate_experiment, ExperimentConfig, PhantomSpec,
};
use volterra_tv::io::{read_rate_table, read_signal, write_json, write_rate_table, write_signal};
use volterra_tv::monotonicity::{check_kernel, CheckOptions};
use volterra_tv::oracle::{extragradient_solve, SplitConfig};
use volterra_tv::{check_optimality, solve_tv_lavrentiev, Error, Grid, Kernel, VolterraOperator};

#[derive(Parser)]
#[command(name = "volterra-tv", version, about = "TV-regularised inversion of Volterra convolution equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Dp,
    Oracle,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a phantom and write clean and noisy data.
    Simulate {
        #[arg(long)]
        kernel: String,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long)]
        n: usize,
        /// Pieces as `start:value` separated by commas, e.g. `0:0.5,0.2:1.5`.
        #[arg(long)]
        phantom: String,
        /// Noise norm; a fraction of ‖f‖₂ with `--relative`.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        relative: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        noisy: PathBuf,
    },
    /// Solve A u + α ∂TV(u) ∋ f and certify the result.
    Solve {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "dp")]
        solver: Solver,
        /// Oracle stopping tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Oracle step size.
        #[arg(long)]
        tau: Option<f64>,
        /// Certificate tolerance; defaults to 1e-8 max(α, ‖f‖∞ T).
        #[arg(long)]
        cert_tol: Option<f64>,
    },
    /// Report analytic and numeric evidence for strict monotonicity.
    CheckKernel {
        #[arg(long)]
        kernel: String,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long = "N", default_value_t = 64)]
        coefficients: usize,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a convergence-rate experiment.
    Rates {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit log(error) against log(δ) for a rate table.
    EstimateRate {
        #[arg(long)]
        table: PathBuf,
    },
}

fn parse_phantom(text: &str) -> Result<PhantomSpec, Error> {
    let pieces = text
        .split(',')
        .map(|piece| {
            let (s, v) = piece
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("phantom piece `{piece}` lacks a `:`")))?;
            let num = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("phantom piece `{piece}`: {e}")))
            };
            Ok((num(s)?, num(v)?))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    PhantomSpec::new(pieces)
}

/// Exit status for a library error: 1 for bad input, 2 for numeric failures.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::SolverFailure { .. }
        | Error::NumericFailure { .. }
        | Error::NonFinite(_)
        | Error::Infeasible { .. }
        | Error::UnsupportedKernel(_) => 2,
        _ => 1,
    }
}

/// Outcome of a command that ran to completion but may report a numeric problem.
enum Outcome {
    Done,
    Failed(String),
}

fn run(command: Command) -> Result<Outcome, Error> {
    match command {
        Command::Simulate {
            kernel,
            horizon,
            n,
            phantom,
            delta,
            relative,
            seed,
            truth,
            clean,
            noisy,
        } => {
            let grid = Grid::new(horizon, n)?;
            let op = VolterraOperator::discretize(&Kernel::parse(&kernel)?, grid)?;
            let u = make_phantom(&parse_phantom(&phantom)?, grid)?;
            let f = op.apply(&u)?;
            let delta = if relative { delta * f.lp_norm(2.0)? } else { delta };
            let fd = add_noise(&f, delta, seed)?;
            if let Some(path) = truth {
                write_signal(&path, &u)?;
            }
            write_signal(&clean, &f)?;
            write_signal(&noisy, &fd)?;
            Ok(Outcome::Done)
        }
        Command::Solve {
            data,
            kernel,
            alpha,
            out,
            certificate,
            trace,
            solver,
            tol,
            max_iter,
            tau,
            cert_tol,
        } => {
            let f = read_signal(&data)?;
            let op = VolterraOperator::discretize(&Kernel::parse(&kernel)?, *f.grid())?;
            let mut cert_tol =
                cert_tol.unwrap_or(1e-8 * alpha.max(f.max_abs() * f.grid().horizon()));
            let mut use_oracle = matches!(solver, Solver::Oracle);
            let mut failure = None;
            let mut solution = None;
            if !use_oracle {
                match solve_tv_lavrentiev(&op, &f, alpha) {
                    Ok((u, t)) => {
                        if let Some(path) = &trace {
                            write_json(path, &t)?;
                        }
                        solution = Some(u);
                    }
                    Err(Error::UnsupportedKernel(msg)) => {
                        eprintln!("{msg}; falling back to the oracle solver");
                        use_oracle = true;
                    }
                    Err(e) => return Err(e),
                }
            }
            if use_oracle {
                let mut cfg = SplitConfig::for_operator(&op);
                if let Some(t) = tol {
                    cfg = cfg.with_tol(t);
                }
                if let Some(m) = max_iter {
                    cfg = cfg.with_max_iter(m);
                }
                if let Some(t) = tau {
                    cfg = cfg.with_tau(t);
                }
                cert_tol = cert_tol.max(100.0 * cfg.tol);
                let result = extragradient_solve(&op, &f, alpha, &cfg, None)?;
                if !result.converged {
                    failure = Some(format!(
                        "oracle did not converge in {} iterations (residual {:e})",
                        result.iterations, result.residual
                    ));
                }
                if let Some(path) = &trace {
                    write_json(
                        path,
                        &serde_json::json!({
                            "iterations": result.iterations,
                            "residual": result.residual,
                            "converged": result.converged,
                        }),
                    )?;
                }
                solution = Some(result.solution);
            }
            let u = solution.expect("one of the solvers ran");
            write_signal(&out, &u)?;
            let cert = check_optimality(&op, &u, &f, alpha, cert_tol)?;
            write_json(&certificate, &cert)?;
            if failure.is_none() && !cert.passed {
                failure = Some("solution failed the optimality certificate".into());
            }
            Ok(failure.map_or(Outcome::Done, Outcome::Failed))
        }
        Command::CheckKernel {
            kernel,
            horizon,
            coefficients,
            n,
            seed,
            out,
        } => {
            let opts = CheckOptions {
                coefficients,
                cells: n,
                seed,
                ..CheckOptions::default()
            };
            let report = check_kernel(&Kernel::parse(&kernel)?, horizon, opts)?;
            write_json(&out, &report)?;
            Ok(Outcome::Done)
        }
        Command::Rates { config, out } => {
            let cfg = ExperimentConfig::from_json_file(&config)?;
            let table = run_rate_experiment(&cfg)?;
            write_rate_table(&out, &table)?;
            let failed: u32 = table.rows.iter().map(|r| r.failures).sum();
            if failed > 0 {
                return Ok(Outcome::Failed(format!("{failed} solves failed")));
            }
            Ok(Outcome::Done)
        }
        Command::EstimateRate { table } => {
            let fit = estimate_rate(&read_rate_table(&table)?)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
