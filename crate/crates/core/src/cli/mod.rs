//! Command-line frontend.
//!
//! Every command reads a [`RunConfig`], writes its report as JSON on stdout
//! and maps failures onto fixed exit codes: 0 ok, 2 config, 3 singular
//! point, 4 I/O, 5 truncation, 6 oracle.

pub mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{evolve, fit_cooling_rate, linear_grid, write_trajectory_csv};
use crate::error::{Error, Result};
use crate::model::{cooperativity, dressed_states, regime_flags, DetuningPoint, SystemParams};
use crate::oracle::{relaxation_rate, solve_steady_state, MOTION_TAIL_LIMIT};
use crate::rates::{cooling_result, limits_sideband_doppler, optimum_eit, optimum_interference, rate_breakdown, RatePair};
use crate::sweep::{classify_regions, curve_profile, local_minima, run_sweep, write_csv, SweepMetadata};

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_TRUNCATION: i32 = 5;
pub const EXIT_ORACLE: i32 = 6;

pub const THREADS_ENV: &str = "COOLCAV_THREADS";

/// Largest population of the top cavity Fock level that the oracle report
/// still calls converged.
const CAVITY_TAIL_LIMIT: f64 = 1e-4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidParameter(_) | Error::DimensionGuard { .. } => EXIT_CONFIG,
        Error::PoleAtDetuning { .. }
        | Error::ResonanceSingular { .. }
        | Error::NodeSingular
        | Error::DegenerateOptimum(_) => EXIT_SINGULAR,
        Error::Io { .. } => EXIT_IO,
        Error::TruncationOverflow { .. } => EXIT_TRUNCATION,
        Error::NonConvergence { .. } | Error::TruncationSuspect { .. } | Error::ModeIdentificationAmbiguous { .. } => {
            EXIT_ORACLE
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Rates,
    Sweep,
    Evolve,
    Oracle,
    Limits,
}

/// Terminal streams of a command.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut cfg = RunConfig::parse(&text)?;
    cfg.apply_overrides(overrides)?;
    Ok(cfg)
}

/// Runs one command and returns the process exit code. Errors are reported
/// on `io.err`.
pub fn run(cmd: Command, cfg: &RunConfig, threads: Option<&str>, io: &mut Io) -> i32 {
    let res = match cmd {
        Command::Rates => cmd_rates(cfg, io),
        Command::Sweep => parse_threads(threads).and_then(|t| cmd_sweep(cfg, t, io)),
        Command::Evolve => cmd_evolve(cfg, io),
        Command::Oracle => cmd_oracle(cfg, io),
        Command::Limits => cmd_limits(cfg, io),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            if let Error::TruncationOverflow { level, .. } = e {
                let _ = writeln!(
                    io.err,
                    "hint: raise evolve.truncation above {level} or shorten evolve.t_end"
                );
            }
            exit_code(&e)
        }
    }
}

/// Thread count from the environment value; unset or 0 means all cores.
pub fn parse_threads(value: Option<&str>) -> Result<usize> {
    match value.map(str::trim) {
        None | Some("") => Ok(0),
        Some(v) => v.parse().map_err(|_| Error::Config {
            line: 0,
            message: format!("{THREADS_ENV} must be a non-negative integer, found `{v}`"),
        }),
    }
}

fn io_err(path: &str, e: io::Error) -> Error {
    Error::Io {
        path: path.to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &str, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

/// JSON formatting that prints every float with 17 significant digits.
struct Formatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn write_json<W: Write + ?Sized, T: Serialize + ?Sized>(w: &mut W, value: &T) -> io::Result<()> {
    let fmt = Formatter {
        inner: serde_json::ser::PrettyFormatter::new(),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut *w, fmt);
    value.serialize(&mut ser).map_err(io::Error::other)?;
    writeln!(w)
}

/// Prints the report and mirrors it to `output.json` when configured.
fn emit(cfg: &RunConfig, report: &Value, io: &mut Io) -> Result<()> {
    write_json(io.out, report).map_err(|e| io_err("<stdout>", e))?;
    if let Some(path) = cfg.text("output.json") {
        write_file(path, |w| write_json(w, report))?;
    }
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn result_value<T: Serialize>(r: Result<T>) -> Value {
    match r {
        Ok(v) => to_value(&v),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn warn_geometry(p: &SystemParams, io: &mut Io) -> Vec<&'static str> {
    let mut warnings = Vec::new();
    if p.varphi.sin().abs() < 1e-15 {
        warnings.push("antinode: no cooling channel");
    }
    if p.phi.cos().abs() < 1e-15 {
        warnings.push("motion orthogonal to the cavity axis: no cooling channel");
    }
    for w in &warnings {
        let _ = writeln!(io.err, "warning: {w}");
    }
    warnings
}

pub fn cmd_rates(cfg: &RunConfig, io: &mut Io) -> Result<()> {
    let p = cfg.params()?;
    let d = cfg.point()?;
    let warnings = warn_geometry(&p, io);
    let breakdown = rate_breakdown(&p, &d)?;
    let result = cooling_result(&p, &d)?;
    let flags = regime_flags(&p, &d, result.mean_m);
    let report = json!({
        "params": p,
        "point": d,
        "cooperativity": cooperativity(&p),
        "dressed_states": dressed_states(&p, &d),
        "rates": breakdown,
        "result": result,
        "regime": flags,
        "warnings": warnings,
    });
    emit(cfg, &report, io)
}

pub fn cmd_sweep(cfg: &RunConfig, threads: usize, io: &mut Io) -> Result<()> {
    let grid = cfg.grid()?;
    let profile = cfg.profile()?;
    let Some(csv_path) = cfg.text("output.csv") else {
        return Err(Error::Config {
            line: 0,
            message: "missing required key `output.csv`".into(),
        });
    };
    let meta_path = cfg
        .text("output.meta")
        .map_or_else(|| format!("{csv_path}.json"), str::to_string);
    warn_geometry(&grid.params, io);

    let start = Instant::now();
    let cells = run_sweep(&grid, threads)?;
    let elapsed = start.elapsed().as_secs_f64();
    write_file(csv_path, |w| write_csv(w, &cells))?;
    let meta = SweepMetadata::new(&grid, &cells, elapsed);
    write_file(&meta_path, |w| write_json(w, &meta))?;

    let regions = classify_regions(&cells, grid.delta.n, grid.delta_cav.n)?;
    let mut report = json!({
        "csv": csv_path,
        "metadata": meta_path,
        "cells": cells.len(),
        "singular_cells": meta.singular_cells,
        "cooling_cells": regions.cooling_cells,
        "heating_cells": regions.heating_cells,
        "cooling_regions": regions.cooling_regions,
        "heating_regions": regions.heating_regions,
        "min_mean_m": regions.min_mean_m,
        "max_gamma": regions.max_gamma,
        "wall_clock_seconds": elapsed,
    });

    if let Some((curve, samples)) = profile {
        let points = curve_profile(&grid.params, curve, &samples)?;
        let minima: Vec<_> = local_minima(&points).into_iter().map(|i| points[i]).collect();
        if let Some(path) = cfg.text("output.profile") {
            write_file(path, |w| {
                writeln!(w, "Delta,delta,Gamma,mean_m,steady")?;
                for q in &points {
                    writeln!(
                        w,
                        "{:.16e},{:.16e},{:.16e},{},{}",
                        q.delta_cav,
                        q.delta,
                        q.gamma_cool,
                        q.mean_m.map(|m| format!("{m:.16e}")).unwrap_or_default(),
                        q.steady
                    )?;
                }
                Ok(())
            })?;
        }
        report["profile"] = json!({
            "curve": curve,
            "points": points.len(),
            "local_minima": minima,
        });
    }
    emit(cfg, &report, io)
}

pub fn cmd_evolve(cfg: &RunConfig, io: &mut Io) -> Result<()> {
    let p = cfg.params()?;
    let d = cfg.point()?;
    warn_geometry(&p, io);
    let result = cooling_result(&p, &d)?;
    let rates = RatePair::from(&rate_breakdown(&p, &d)?);
    let s0 = cfg.initial_state(result.mean_m)?;
    let Some(traj_path) = cfg.text("output.trajectory") else {
        return Err(Error::Config {
            line: 0,
            message: "missing required key `output.trajectory`".into(),
        });
    };
    let t_end = match cfg.number("evolve.t_end")? {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => {
            return Err(Error::Config {
                line: 0,
                message: format!("`evolve.t_end` must be positive, found {t}"),
            })
        }
        None if result.gamma_cool != 0.0 => 10.0 / result.gamma_cool.abs(),
        None => {
            return Err(Error::Config {
                line: 0,
                message: "Gamma = 0 at this point: set `evolve.t_end`".into(),
            })
        }
    };
    let n = cfg.integer("evolve.points")?.unwrap_or(201).max(2);
    let traj = evolve(&s0, p.eta, rates, &linear_grid(0.0, t_end, n))?;
    write_file(traj_path, |w| write_trajectory_csv(w, &traj.points))?;

    let verdict = if result.steady {
        "cooling"
    } else if result.gamma_cool < 0.0 {
        "heating"
    } else {
        "no cooling"
    };
    if result.steady {
        if let Some(e) = traj.overflow {
            return Err(e);
        }
    }
    let fit = if result.steady {
        match fit_cooling_rate(&s0, p.eta, rates, result.gamma_cool) {
            Ok((f, _)) => json!({
                "gamma_fit": f.gamma_fit,
                "relative_deviation": relative(f.gamma_fit, result.gamma_cool),
                "baseline": f.baseline,
                "window": f.window,
            }),
            Err(e @ Error::TruncationOverflow { .. }) => return Err(e),
            Err(e) => json!({ "error": e.to_string() }),
        }
    } else {
        Value::Null
    };
    let last = traj.points.last().copied();
    let report = json!({
        "params": p,
        "point": d,
        "verdict": verdict,
        "analytic": result,
        "initial_mean": s0.mean(),
        "truncation": s0.truncation(),
        "t_end": t_end,
        "final": last,
        "fit": fit,
        "overflow": traj.overflow.map(|e| e.to_string()),
        "trajectory": traj_path,
    });
    emit(cfg, &report, io)
}

pub fn cmd_oracle(cfg: &RunConfig, io: &mut Io) -> Result<()> {
    let p = cfg.params()?;
    let d = cfg.point()?;
    let c = cfg.oracle()?;
    warn_geometry(&p, io);
    // the oracle's recoil dissipator plays the role of the diffusion factor
    let analytic_d0 = if c.include_recoil { c.recoil_factor } else { 0.0 };
    let pa = SystemParams { d0: analytic_d0, ..p };
    let analytic = cooling_result(&pa, &d)?;
    let Some(mean_analytic) = analytic.mean_m else {
        return Err(Error::Config {
            line: 0,
            message: format!(
                "no analytic steady state at this point (Gamma = {:e}); the oracle needs a cooling point",
                analytic.gamma_cool
            ),
        });
    };

    let steady = solve_steady_state(&p, &d, &c)?;
    let relax = relaxation_rate(&p, &d, &c);
    let truncation_ok = steady.top_population <= MOTION_TAIL_LIMIT;
    let flags = json!({
        "converged": steady.residual <= c.tol,
        "motion_truncation_ok": truncation_ok,
        "cavity_truncation_ok": steady.cavity_top_population <= CAVITY_TAIL_LIMIT,
        "positive": steady.min_eigenvalue > -1e-10,
        "mode_identified": relax.is_ok(),
    });
    let oracle_gamma = relax.as_ref().ok().map(|r| r.gamma);
    let report = json!({
        "inputs": { "params": p, "point": d, "oracle": c },
        "truncations": { "n_cavity": c.n_cavity, "n_motion": c.n_motion, "hilbert_dim": steady.hilbert_dim },
        "analytic": { "d0": analytic_d0, "mean_m": mean_analytic, "gamma": analytic.gamma_cool },
        "oracle": {
            "mean_m": steady.mean_m,
            "gamma": oracle_gamma,
            "steady_state": steady,
            "relaxation": result_value(relax.clone()),
        },
        "relative_deviation": {
            "mean_m": relative(steady.mean_m, mean_analytic),
            "gamma": oracle_gamma.map(|g| relative(g, analytic.gamma_cool)),
        },
        "flags": flags,
    });
    emit(cfg, &report, io)?;
    if !truncation_ok {
        return Err(Error::TruncationSuspect {
            top_population: steady.top_population,
            mean_m: steady.mean_m,
        });
    }
    relax.map(|_| ())
}

pub fn cmd_limits(cfg: &RunConfig, io: &mut Io) -> Result<()> {
    let p = cfg.params()?;
    let delta_cav = cfg.number("point.delta_cav")?.unwrap_or(0.0);
    warn_geometry(&p, io);
    let full = |d: DetuningPoint| cooling_result(&p, &d).map(|r| r.mean_m);

    let eit = optimum_eit(&p).map(|o| {
        let mut v = to_value(&o);
        v["full_rate_mean_m"] = to_value(&full(DetuningPoint::new(0.0, o.delta_cav)).ok().flatten());
        v
    });
    let interference = optimum_interference(&p).map(|o| {
        let mut v = to_value(&o);
        v["full_rate_mean_m"] = to_value(&full(DetuningPoint::new(o.delta, o.delta_cav)).ok().flatten());
        v
    });
    let free = limits_sideband_doppler(&p, delta_cav);
    let (omega_sw, sideband, doppler) = match &free {
        Ok(l) => (to_value(&l.omega_sw), to_value(&l.sideband), to_value(&l.doppler)),
        Err(e) => {
            let v = json!({ "error": e.to_string() });
            (Value::Null, v.clone(), v)
        }
    };
    let report = json!({
        "params": p,
        "cooperativity": cooperativity(&p),
        "delta_cav": delta_cav,
        "optimum_eit": result_value(eit),
        "optimum_interference": result_value(interference),
        "omega_sw": omega_sw,
        "sideband": sideband,
        "doppler": doppler,
    });
    emit(cfg, &report, io)
}
