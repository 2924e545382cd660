use std::time::{Duration, Instant};

use airyphase::coeff::{builtin, Coefficient};
use airyphase::extend::SolverOptions;
use airyphase::phase::AiryPhase;
use airyphase::reference::{reference_solve, REFERENCE_MAX_PANELS};
use airyphase::{compute_phase, PhaseParams, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::{BenchCmd, Suite};
use crate::error::{kind, usage, CliError, CliResult};
use crate::{params, write_output};

const SAMPLES: usize = 1000;

struct Record {
    coeff: String,
    omega: f64,
    time_ms: Option<f64>,
    n_coeffs: Option<usize>,
    abs_err: Option<f64>,
    rel_err: Option<f64>,
    iters: Option<usize>,
    status: String,
}

impl Record {
    fn fields(&self) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        vec![
            self.coeff.clone(),
            self.omega.to_string(),
            opt(self.time_ms.map(|v| format!("{v:.4}"))),
            opt(self.n_coeffs.map(|v| v.to_string())),
            opt(self.abs_err.map(|v| format!("{v:e}"))),
            opt(self.rel_err.map(|v| format!("{v:e}"))),
            opt(self.iters.map(|v| v.to_string())),
            self.status.clone(),
        ]
    }
}

/// `"8..12"` or `"10"`, both ends inclusive.
fn exponents(s: &str) -> CliResult<Vec<i32>> {
    let bad = || usage(format!("--omegas expects LO..HI exponents, got `{s}`"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let e = s.trim().parse().map_err(|_| bad())?;
            (e, e)
        }
    };
    if lo > hi || lo < 0 || hi > 40 {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn suite(cmd: &BenchCmd) -> Vec<&'static str> {
    match cmd.suite {
        Suite::Ivp if cmd.include_q2 => vec!["airy", "ivp-q1", "ivp-q2-as-printed", "ivp-q3"],
        Suite::Ivp => vec!["airy", "ivp-q1", "ivp-q3"],
        Suite::Bvp => vec!["bvp-q1", "bvp-q2", "bvp-q3"],
    }
}

fn sorted_uniform(rng: &mut ChaCha8Rng, a: f64, b: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = (0..SAMPLES).map(|_| rng.random_range(a..=b)).collect();
    ts.sort_by(f64::total_cmp);
    ts
}

fn reference_opts(p: &PhaseParams) -> SolverOptions {
    let mut o = SolverOptions::new(p.k, p.eps);
    o.max_panels = REFERENCE_MAX_PANELS;
    o
}

/// Errors of y(0) = 1, y'(0) = 0 on the oscillatory side (absolute) and on
/// the restricted nonoscillatory side (relative).
fn ivp_errors(c: &Coefficient, phase: &AiryPhase, p: &PhaseParams, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let w = phase.omega();
    let (a, b) = phase.domain();
    let lo = phase.invert_phase(-100.0).unwrap_or(a);
    let r = phase.fit_ivp(0.0, 1.0, 0.0)?;
    let refsol = reference_solve(c, w, (lo, b), 0.0, 1.0, 0.0, reference_opts(p))?;
    let osc = sorted_uniform(rng, 0.0, b);
    let mut abs_err: f64 = 0.0;
    for (&t, v) in osc.iter().zip(phase.eval_solution(&r, &osc)?) {
        abs_err = abs_err.max((v.y - refsol.eval(t)?[0]).abs());
    }
    let non = sorted_uniform(rng, lo, 0.0);
    let mut rel_err: f64 = 0.0;
    for (&t, v) in non.iter().zip(phase.eval_solution(&r, &non)?) {
        let want = refsol.eval(t)?[0];
        rel_err = rel_err.max(((v.y - want) / want).abs());
    }
    Ok((abs_err, rel_err))
}

/// y(0) = y(3) = 1 against shooting with the reference solver.
fn bvp_error(c: &Coefficient, phase: &AiryPhase, p: &PhaseParams, rng: &mut ChaCha8Rng) -> Result<f64> {
    let w = phase.omega();
    let r = phase.fit_bvp(0.0, 1.0, 3.0, 1.0)?;
    let y1 = reference_solve(c, w, (0.0, 3.0), 0.0, 1.0, 0.0, reference_opts(p))?;
    let y2 = reference_solve(c, w, (0.0, 3.0), 0.0, 0.0, 1.0, reference_opts(p))?;
    let alpha = (1.0 - y1.eval(3.0)?[0]) / y2.eval(3.0)?[0];
    let ts = sorted_uniform(rng, 0.0, 3.0);
    let mut err: f64 = 0.0;
    for (&t, v) in ts.iter().zip(phase.eval_solution(&r, &ts)?) {
        err = err.max((v.y - (y1.eval(t)?[0] + alpha * y2.eval(t)?[0])).abs());
    }
    Ok(err)
}

fn cell(cmd: &BenchCmd, p: &PhaseParams, name: &str, e: i32, rng: &mut ChaCha8Rng) -> Record {
    let omega = 2f64.powi(e);
    let mut rec = Record {
        coeff: name.to_string(),
        omega,
        time_ms: None,
        n_coeffs: None,
        abs_err: None,
        rel_err: None,
        iters: None,
        status: "ok".into(),
    };
    let run = |rec: &mut Record, rng: &mut ChaCha8Rng| -> Result<()> {
        let c = builtin(name)?;
        let domain = c.domain();
        let mut total = Duration::ZERO;
        let mut phase = None;
        for _ in 0..cmd.runs {
            let start = Instant::now();
            let built = compute_phase(&c, omega, domain, p)?;
            total += start.elapsed();
            phase = Some(built);
        }
        let phase = phase.expect("at least one run");
        rec.time_ms = Some(total.as_secs_f64() * 1e3 / cmd.runs as f64);
        rec.n_coeffs = Some(phase.num_coeffs());
        rec.iters = Some(phase.meta().iterations);
        if e <= cmd.ref_cap {
            match cmd.suite {
                Suite::Ivp => {
                    let (a, r) = ivp_errors(&c, &phase, p, rng)?;
                    rec.abs_err = Some(a);
                    rec.rel_err = Some(r);
                }
                Suite::Bvp => rec.abs_err = Some(bvp_error(&c, &phase, p, rng)?),
            }
        }
        Ok(())
    };
    if let Err(err) = run(&mut rec, rng) {
        log::warn!("{name} at 2^{e}: {err}");
        rec.status = format!("{}: {err}", kind(&err));
    }
    rec
}

pub fn cmd_bench(cmd: &BenchCmd) -> CliResult<()> {
    let p = params(&cmd.build)?;
    let es = exponents(&cmd.omegas)?;
    if cmd.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    if cmd.include_q2 && cmd.suite == Suite::Bvp {
        return Err(usage("--include-q2 only applies to the ivp suite"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "coeff",
        "omega",
        "time_ms",
        "n_coeffs",
        "max_abs_err_osc",
        "max_rel_err_nonosc",
        "newton_iters",
        "status",
    ])?;
    let mut failed = 0;
    for name in suite(cmd) {
        for &e in &es {
            // every cell draws from its own stream so rows do not depend
            // on which other cells ran
            let mut rng = ChaCha8Rng::seed_from_u64(cmd.seed);
            rng.set_stream(((e as u64) << 8) ^ name.bytes().fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(b as u64)));
            let rec = cell(cmd, &p, name, e, &mut rng);
            failed += (rec.status != "ok") as usize;
            w.write_record(rec.fields())?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    write_output(cmd.out.as_deref(), &bytes)?;
    if failed > 0 {
        return Err(CliError::CellsFailed(failed));
    }
    Ok(())
}
