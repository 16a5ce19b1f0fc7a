//! The five subcommands.

use std::path::Path;

use lpen::montecarlo::{estimate_weighted, Estimate, SimConfig};
use lpen::penalization::{expect_exact, expect_gamma_two_point};
use lpen::sweep::limit_sweep;
use lpen::verify::run_verify;
use lpen::{ClockSpec, PhiEvaluator};
use serde::Serialize;

use crate::config::{numerics, ExpectOptions, HTableOptions, OutputFormat, PhiOptions, RunConfig, SweepOptions, VerifyOptions};
use crate::output::{num, opt, write_csv, write_json};
use crate::CliError;

/// Seed precedence: command line, then the config document, then the
/// command section.
fn seeded(mc: SimConfig, cfg: &RunConfig, seed: Option<u64>) -> SimConfig {
    SimConfig {
        seed: seed.or(cfg.seed).unwrap_or(mc.seed),
        ..mc
    }
}

pub fn h_table(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let o: HTableOptions = cfg.command()?;
    let hf = numerics(o.quadrature, o.extrapolation).h_function(cfg.model)?;
    let gamma = o.gamma.or(cfg.penalization.map(|p| p.gamma())).unwrap_or(0.0);
    let rows = o
        .grid
        .iter()
        .map(|&x| {
            let v = hf.h_detailed(x)?;
            Ok(vec![num(x), num(v.value), num(hf.h_gamma(gamma, x)?), num(v.err_estimate)])
        })
        .collect::<Result<Vec<_>, lpen::Error>>()?;
    write_csv(out, &["x", "h", "h_gamma", "err_estimate"], &rows)
}

pub fn phi(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let o: PhiOptions = cfg.command()?;
    let p = cfg.penalization()?;
    let hf = numerics(o.quadrature, o.extrapolation).h_function(cfg.model)?;
    let g = p.gamma();
    let at = PhiEvaluator::new(&hf, p)?;
    let up = PhiEvaluator::new(&hf, p.with_gamma(1.0)?)?;
    let down = PhiEvaluator::new(&hf, p.with_gamma(-1.0)?)?;
    let rows = o
        .grid
        .iter()
        .map(|&x| {
            let (v, u, d) = (at.phi(x)?, up.phi(x)?, down.phi(x)?);
            let residual = v - 0.5 * (1.0 + g) * u - 0.5 * (1.0 - g) * d;
            Ok(vec![num(x), num(v), num(u), num(d), num(residual)])
        })
        .collect::<Result<Vec<_>, lpen::Error>>()?;
    write_csv(
        out,
        &["x", "phi_gamma", "phi_plus1", "phi_minus1", "affine_residual"],
        &rows,
    )
}

#[derive(Serialize)]
struct ExpectRecord {
    config: ExpectRunConfig,
    x: f64,
    exact: Option<f64>,
    estimate: Option<Estimate>,
    diagnostics: ExpectDiagnostics,
}

#[derive(Serialize)]
struct ExpectRunConfig {
    model: lpen::ModelSpec,
    penalization: lpen::PenalizationParams,
    clock: ClockSpec,
    mc: Option<SimConfig>,
}

#[derive(Serialize)]
struct ExpectDiagnostics {
    restricted_c: Option<f64>,
    restricted_d: Option<f64>,
    /// `(mc - exact)/std_err`
    z_score: Option<f64>,
}

pub fn expect(cfg: &RunConfig, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let o: ExpectOptions = cfg.command()?;
    let p = cfg.penalization()?;
    o.clock.validate(&p)?;
    let hf = numerics(o.quadrature, o.extrapolation).h_function(cfg.model)?;
    let simulate = o.simulate || matches!(o.clock, ClockSpec::Exponential { .. });
    let mc = seeded(o.mc, cfg, seed);
    let mut records = Vec::new();
    for &x in &o.grid {
        let exact = expect_exact(&hf, &p, &o.clock, x)?;
        let (restricted_c, restricted_d) = match o.clock {
            ClockSpec::TwoPoint { c, d } => {
                let e = expect_gamma_two_point(&hf, &p, x, c, d)?;
                (Some(e.restricted_c), Some(e.restricted_d))
            }
            _ => (None, None),
        };
        let estimate = if simulate {
            Some(estimate_weighted(&cfg.model, &p, &o.clock, x, &mc)?)
        } else {
            None
        };
        let z_score = match (exact, estimate) {
            (Some(v), Some(e)) if e.std_err > 0.0 => Some((e.mean - v) / e.std_err),
            _ => None,
        };
        records.push(ExpectRecord {
            config: ExpectRunConfig {
                model: cfg.model,
                penalization: p,
                clock: o.clock,
                mc: simulate.then_some(mc),
            },
            x,
            exact,
            estimate,
            diagnostics: ExpectDiagnostics {
                restricted_c,
                restricted_d,
                z_score,
            },
        });
    }
    for r in records.iter().filter(|r| r.estimate.is_some_and(|e| !e.reliable)) {
        eprintln!("warning: estimate at x = {} is unreliable (more than 1% of paths truncated)", r.x);
    }
    if o.format == OutputFormat::Json {
        return write_json(out, &records);
    }
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let e = r.estimate;
            vec![
                num(r.x),
                o.clock.name().to_string(),
                opt(r.exact),
                opt(r.diagnostics.restricted_c),
                opt(r.diagnostics.restricted_d),
                opt(e.map(|e| e.mean)),
                opt(e.map(|e| e.std_err)),
                e.map(|e| e.n.to_string()).unwrap_or_default(),
                opt(e.map(|e| e.truncated_fraction)),
                e.map(|e| e.reliable.to_string()).unwrap_or_default(),
                opt(r.diagnostics.z_score),
            ]
        })
        .collect();
    write_csv(
        out,
        &[
            "x",
            "clock",
            "exact",
            "restricted_c",
            "restricted_d",
            "mc_mean",
            "mc_std_err",
            "mc_n",
            "truncated_fraction",
            "reliable",
            "z_score",
        ],
        &rows,
    )
}

pub fn limit_sweep_cmd(cfg: &RunConfig, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let o: SweepOptions = cfg.command()?;
    let p = cfg.penalization()?;
    let hf = numerics(o.quadrature, o.extrapolation).h_function(cfg.model)?;
    let mc = seeded(o.mc, cfg, seed);
    let report = limit_sweep(&hf, &hf, &p, o.x, &o.sweep, &mc)?;
    let mut rows = Vec::new();
    for component in ["restricted_c", "restricted_d", "total"] {
        let part = report.component(component);
        let orders = report.observed_orders(component);
        for (i, r) in part.iter().enumerate() {
            if !r.reliable {
                eprintln!("warning: rung {} is unreliable (more than 1% of paths truncated)", r.parameter);
            }
            let order = if i == 0 { None } else { Some(orders[i - 1]) };
            rows.push(vec![
                report.clock.clone(),
                r.component.clone(),
                num(r.parameter),
                opt(r.d),
                num(r.gamma),
                num(r.normalizer),
                num(r.expectation),
                opt(r.std_err),
                num(r.normalized),
                num(r.target),
                num(r.abs_gap),
                num(r.rel_gap),
                opt(order),
                opt(r.excursion_factor),
                r.reliable.to_string(),
            ]);
        }
    }
    write_csv(
        out,
        &[
            "clock",
            "component",
            "parameter",
            "d",
            "gamma",
            "normalizer",
            "expectation",
            "std_err",
            "normalized",
            "target",
            "abs_gap",
            "rel_gap",
            "observed_order",
            "excursion_factor",
            "reliable",
        ],
        &rows,
    )
}

pub fn verify(cfg: &RunConfig, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let mut o: VerifyOptions = cfg.command()?;
    if let Some(s) = seed.or(cfg.seed) {
        o.seed = s;
    }
    let report = run_verify(&o)?;
    for line in report.summary_lines() {
        eprintln!("{line}");
    }
    write_json(out, &report)?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::VerificationFailed)
    }
}
