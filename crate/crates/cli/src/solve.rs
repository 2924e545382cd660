use std::fs;

use airyphase::phase::AiryPhase;
use airyphase::Error;

use crate::args::SolveCmd;
use crate::error::{usage, CliError, CliResult};
use crate::write_output;

/// Phases below this value are omitted unless `--unrestricted` is given.
const GAMMA_FLOOR: f64 = -100.0;

enum Conditions {
    Ivp { t0: f64, y0: f64, dy0: f64 },
    Bvp { ta: f64, ya: f64, tb: f64, yb: f64 },
}

fn conditions(cmd: &SolveCmd) -> CliResult<Conditions> {
    match (&cmd.ivp, &cmd.bvp) {
        (Some(v), None) => Ok(Conditions::Ivp { t0: v[0], y0: v[1], dy0: v[2] }),
        (None, Some(v)) => Ok(Conditions::Bvp { ta: v[0], ya: v[1], tb: v[2], yb: v[3] }),
        (Some(_), Some(_)) => Err(usage("--ivp and --bvp cannot be combined")),
        (None, None) => Err(usage("one of --ivp or --bvp is required")),
    }
}

fn points(cmd: &SolveCmd) -> CliResult<Vec<f64>> {
    let given = cmd.grid.is_some() as usize + cmd.points.is_some() as usize + !cmd.at.is_empty() as usize;
    if given != 1 {
        return Err(usage("exactly one of --grid, --points or --at is required"));
    }
    if let Some(g) = &cmd.grid {
        let num = |s: &str| s.parse::<f64>().map_err(|_| usage(format!("bad --grid value `{s}`")));
        let (a, b) = (num(&g[0])?, num(&g[1])?);
        let n: usize = g[2]
            .parse()
            .map_err(|_| usage(format!("--grid needs an integer count, got `{}`", g[2])))?;
        return Ok(match n {
            0 => vec![],
            1 => vec![a],
            _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        });
    }
    if let Some(path) = &cmd.points {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        return text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.parse::<f64>().map_err(|_| usage(format!("bad point `{l}` in {}", path.display()))))
            .collect();
    }
    Ok(cmd.at.clone())
}

fn load_phase(cmd: &SolveCmd) -> CliResult<AiryPhase> {
    match &cmd.phase {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            AiryPhase::from_json(&text).map_err(|e| usage(e.to_string()))
        }
        None => crate::build(&cmd.coeff, &cmd.build),
    }
}

pub fn cmd_solve(cmd: &SolveCmd) -> CliResult<()> {
    // cheap flag checks come before any numerical work
    let cond = conditions(cmd)?;
    let mut ts = points(cmd)?;
    let phase = load_phase(cmd)?;
    let rep = match cond {
        Conditions::Ivp { t0, y0, dy0 } => phase.fit_ivp(t0, y0, dy0)?,
        Conditions::Bvp { ta, ya, tb, yb } => phase.fit_bvp(ta, ya, tb, yb)?,
    };

    if !cmd.unrestricted {
        let before = ts.len();
        let mut kept = Vec::with_capacity(before);
        for t in ts {
            if phase.values(t)?.gamma >= GAMMA_FLOOR {
                kept.push(t);
            }
        }
        ts = kept;
        if ts.len() < before {
            eprintln!(
                "note: omitted {} points where the phase is below {GAMMA_FLOOR}; pass --unrestricted to include them",
                before - ts.len()
            );
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    if cmd.scaled {
        w.write_record(["t", "log10_abs_y", "sign_y"])?;
        for (t, v) in ts.iter().zip(phase.eval_solution_scaled(&rep, &ts)?) {
            w.write_record([t.to_string(), v.y.log10_abs().to_string(), v.y.signum().to_string()])?;
        }
    } else {
        w.write_record(["t", "y", "dy"])?;
        for (&t, v) in ts.iter().zip(phase.eval_solution(&rep, &ts)?) {
            if !v.in_range {
                return Err(CliError::Numerical(Error::Range(t)));
            }
            w.write_record([t.to_string(), v.y.to_string(), v.dy.to_string()])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    write_output(cmd.out.as_deref(), &bytes)
}
