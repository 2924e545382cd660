mod args;
mod bench;
mod error;
mod solve;

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use airyphase::coeff::{builtin, Coefficient};
use airyphase::phase::AiryPhase;
use airyphase::{compute_phase, PhaseParams};
use clap::{CommandFactory, Parser};

use args::{BuildArgs, Cli, CoeffArgs, Command, PhaseCmd};
use error::{usage, CliError, CliResult};

const EXPR_DOMAIN: (f64, f64) = (-5.0, 5.0);

fn main() -> ExitCode {
    env_logger::init();
    let usage_text = usage_for(std::env::args().nth(1).as_deref());
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind::*;
            if matches!(e.kind(), DisplayHelp | DisplayVersion | DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            report(&CliError::Usage(first.to_string()), &usage_text);
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Phase(cmd) => cmd_phase(&cmd),
        Command::Solve(cmd) => solve::cmd_solve(&cmd),
        Command::Bench(cmd) => bench::cmd_bench(&cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e, &usage_text);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Usage of the named subcommand, or of the whole program.
fn usage_for(sub: Option<&str>) -> String {
    let mut cmd = Cli::command();
    match sub.and_then(|s| cmd.find_subcommand_mut(s)) {
        Some(s) => s.render_usage().to_string().replacen("Usage: ", "Usage: airyphase ", 1),
        None => cmd.render_usage().to_string(),
    }
}

fn report(e: &CliError, usage_text: &str) {
    eprintln!("{}", e.to_json(usage_text));
}

pub(crate) fn params(b: &BuildArgs) -> CliResult<PhaseParams> {
    if b.k < 4 || b.k % 2 != 0 {
        return Err(usage(format!("--k must be an even integer >= 4, got {}", b.k)));
    }
    if !(b.eps > 0.0 && b.eps < 1.0) {
        return Err(usage(format!("--eps must lie in (0, 1), got {}", b.eps)));
    }
    if !(b.a0 > 0.0 && b.a0.is_finite()) {
        return Err(usage(format!("--a0 must be positive, got {}", b.a0)));
    }
    Ok(PhaseParams {
        a0: b.a0,
        k: b.k,
        eps: b.eps,
        ..PhaseParams::default()
    })
}

/// Resolves the coefficient and its working domain. Positivity of an
/// expression is checked before anything else so that passing `q` instead
/// of `q0` is reported as such.
pub(crate) fn coefficient(a: &CoeffArgs) -> CliResult<(Coefficient, (f64, f64))> {
    let domain = match a.domain.as_deref() {
        Some(&[lo, hi]) if lo < hi && lo.is_finite() && hi.is_finite() => Some((lo, hi)),
        Some(d) => return Err(usage(format!("--domain needs A < B, got {d:?}"))),
        None => None,
    };
    match (&a.q0, &a.builtin) {
        (Some(src), None) => {
            let d = domain.unwrap_or(EXPR_DOMAIN);
            Ok((Coefficient::from_expr(src, d)?, d))
        }
        (None, Some(name)) => {
            let c = builtin(name)?;
            let d = domain.unwrap_or(c.domain());
            Ok((c, d))
        }
        _ => Err(usage("one of --q0 or --builtin is required")),
    }
}

pub(crate) fn omega(a: &CoeffArgs) -> CliResult<f64> {
    match a.omega {
        Some(w) if w > 0.0 && w.is_finite() => Ok(w),
        Some(w) => Err(usage(format!("--omega must be positive, got {w}"))),
        None => Err(usage("--omega is required")),
    }
}

pub(crate) fn build(a: &CoeffArgs, b: &BuildArgs) -> CliResult<AiryPhase> {
    let (c, domain) = coefficient(a)?;
    let w = omega(a)?;
    let p = params(b)?;
    let start = Instant::now();
    let phase = compute_phase(&c, w, domain, &p)?;
    log::info!(
        "built {} at omega {w} in {:?}: {} pieces, {} newton iterations",
        c.label(),
        start.elapsed(),
        phase.num_pieces(),
        phase.meta().iterations
    );
    Ok(phase)
}

pub(crate) fn write_output(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, bytes)?,
        None => {
            let mut s = io::stdout().lock();
            s.write_all(bytes)?;
            s.flush()?;
        }
    }
    Ok(())
}

fn cmd_phase(cmd: &PhaseCmd) -> CliResult<()> {
    let phase = build(&cmd.coeff, &cmd.build)?;
    let mut json = phase.to_json().map_err(CliError::Numerical)?;
    json.push('\n');
    write_output(cmd.out.as_deref(), json.as_bytes())
}
