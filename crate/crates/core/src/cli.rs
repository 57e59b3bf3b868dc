//! Command-line front end. Exit codes: 0 success, 1 numeric or acceptance
//! failure, 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{MethodName, RunConfig};
use crate::error::{Error, Result};
use crate::field::{band_variance, CholeskySampler, FieldSample, KlBasis, KlSampler, SpectralSampler};
use crate::kernel::{kernel_closed_form_with, ClosedFormOptions, KernelQuadrature, RadialKernelSpec};
use crate::limits::{
    campaign, lattice_in_ball, modulus_statistic, normalizer_audit, write_campaign, CloudOptions, Example,
};
use crate::mercer::{decompose, refinement_study, KernelSource};
use crate::report::{fmt_f64, line_chart, write_csv, Series};
use crate::rkhs::{bernstein_membership, representer, strassen_norm, ProductGrid};

/// Relative fault injected into the closed form by `--perturb-gamma`.
const GAMMA_FAULT: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "mfbm", version, about = "Multiparameter fractional Brownian motion toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Test-only fault injection into the closed-form kernel.
    #[arg(long, global = true, hide = true)]
    perturb_gamma: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Nyström eigensystems of b_m for m <= m0, with a grid-doubling report.
    Eigs,
    /// Closed-form kernel against its quadrature oracle.
    Covcheck,
    /// Field samples by KL, Cholesky or spectral synthesis.
    Simulate,
    /// Strassen norms of representers and membership tests.
    RkhsNorm,
    /// Limit-statistic campaign over a scale schedule.
    Limits,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eigs => "eigs",
            Command::Covcheck => "covcheck",
            Command::Simulate => "simulate",
            Command::RkhsNorm => "rkhs-norm",
            Command::Limits => "limits",
        }
    }
}

/// A completed run either passes or reports a failed check.
enum Outcome {
    Pass,
    Fail(String),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) => 2,
        _ => 1,
    }
}

fn record(command: &str, kind: &str, code: u8, message: &str) {
    let rec = json!({ "command": command, "error": kind, "exit_code": code, "message": message });
    eprintln!("{rec}");
}

pub fn run() -> ExitCode {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let name = cli.command.name();
    match dispatch(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(msg)) => {
            record(name, "check_failed", 1, &msg);
            ExitCode::from(1)
        }
        Err(e) => {
            let code = exit_code(&e);
            record(name, e.kind(), code, &e.to_string());
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    fs::create_dir_all(&cfg.out)?;
    match cli.command {
        Command::Eigs => cmd_eigs(&cfg),
        Command::Covcheck => cmd_covcheck(&cfg, cli.perturb_gamma),
        Command::Simulate => cmd_simulate(&cfg),
        Command::RkhsNorm => cmd_rkhs_norm(&cfg),
        Command::Limits => cmd_limits(&cfg),
    }
}

fn cmd_eigs(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.model()?;
    let g = cfg.grid.nystrom;
    let n0 = cfg.truncation.n0;
    let scheme = cfg.grid.scheme;
    let modes = n0.max(8).min(g / 2);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for m in 0..=cfg.truncation.m0 {
        let source = KernelSource::Radial(RadialKernelSpec::new(p, m)?);
        let es = decompose(source, g, n0, scheme)?;
        es.write_json(&cfg.out.join(format!("eigensystem_m{m}.json")))?;
        if modes == 0 {
            continue;
        }
        for (g0, g1, steps) in refinement_study(source, &[g / 2, g], modes, scheme)? {
            for (n, s) in steps.iter().enumerate() {
                worst = worst.max(*s);
                rows.push(vec![
                    m.to_string(),
                    (n + 1).to_string(),
                    g0.to_string(),
                    g1.to_string(),
                    es.lambdas.get(n).map_or(String::from("nan"), |l| fmt_f64(*l)),
                    fmt_f64(*s),
                ]);
            }
        }
    }
    write_csv(&cfg.out.join("convergence.csv"), &["m", "n", "grid_coarse", "grid_fine", "lambda", "rel_step"], &rows)?;
    println!(
        "eigs: {} eigensystems written to {}, max relative step {:.3e}",
        cfg.truncation.m0 + 1,
        cfg.out.display(),
        worst
    );
    Ok(Outcome::Pass)
}

/// `(N, H, m, r, s, closed form, quadrature, relative residual)`
type CovRow = (usize, f64, usize, f64, f64, f64, f64, f64);

fn cmd_covcheck(cfg: &RunConfig, perturb: bool) -> Result<Outcome> {
    let c = &cfg.covcheck;
    let opts = ClosedFormOptions { gamma_perturbation: if perturb { GAMMA_FAULT } else { 0.0 } };
    let radii: Vec<f64> = (1..=c.radii).map(|i| i as f64 / c.radii as f64).collect();
    let mut jobs = Vec::new();
    for &n in &c.dims {
        for &h in &c.hursts {
            for m in 0..=c.m_max {
                jobs.push((n, h, m));
            }
        }
    }
    let quads: Vec<(usize, KernelQuadrature)> =
        c.dims.iter().map(|&n| Ok((n, KernelQuadrature::new(n, c.nodes)?))).collect::<Result<_>>()?;
    let blocks: Vec<Vec<CovRow>> = jobs
        .par_iter()
        .map(|&(n, h, m)| {
            let spec = RadialKernelSpec::new(crate::kernel::ModelParams::new(n, h)?, m)?;
            let q = &quads.iter().find(|(d, _)| *d == n).expect("quadrature per dimension").1;
            let mut out = Vec::with_capacity(radii.len() * radii.len());
            for &r in &radii {
                for &s in &radii {
                    let a = kernel_closed_form_with(&spec, r, s, opts)?;
                    let b = q.eval(&spec, r, s)?;
                    let res = if b != 0.0 { ((a - b) / b).abs() } else { (a - b).abs() };
                    out.push((n, h, m, r, s, a, b, res));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut worst = (0.0f64, String::new());
    for (n, h, m, r, s, a, b, res) in blocks.into_iter().flatten() {
        if !(res <= worst.0) {
            worst = (res, format!("N={n} H={h} m={m} r={r} s={s}"));
        }
        rows.push(vec![
            n.to_string(),
            fmt_f64(h),
            m.to_string(),
            fmt_f64(r),
            fmt_f64(s),
            fmt_f64(a),
            fmt_f64(b),
            fmt_f64(res),
        ]);
    }
    write_csv(
        &cfg.out.join("covcheck.csv"),
        &["N", "H", "m", "r", "s", "closed_form", "quadrature", "rel_residual"],
        &rows,
    )?;
    println!("covcheck: {} comparisons, max relative residual {:.3e} at {}", rows.len(), worst.0, worst.1);
    if worst.0 > c.tolerance || worst.0.is_nan() {
        return Ok(Outcome::Fail(format!(
            "max relative residual {:.3e} exceeds {:.1e} at {}",
            worst.0, c.tolerance, worst.1
        )));
    }
    Ok(Outcome::Pass)
}

fn sample_points(cfg: &RunConfig, dim: usize) -> Vec<Vec<f64>> {
    if cfg.simulate.points.is_empty() {
        lattice_in_ball(dim, cfg.simulate.step, 1.0)
    } else {
        cfg.simulate.points.clone()
    }
}

/// Values along the first axis, for a line plot of a sample.
fn axis_profile(s: &FieldSample) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = s
        .points
        .iter()
        .zip(&s.values)
        .filter(|(p, _)| p[1..].iter().all(|v| *v == 0.0))
        .map(|(p, v)| (p[0], *v))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

fn write_sample(cfg: &RunConfig, s: &FieldSample, stem: &str) -> Result<()> {
    s.write(&cfg.out, stem)?;
    if cfg.simulate.plot {
        let prof = axis_profile(s);
        if prof.len() >= 2 {
            let svg = line_chart(stem, "x1", &[Series { name: "value", points: prof }], false);
            fs::write(cfg.out.join(format!("{stem}.svg")), svg)?;
        }
    }
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.model()?;
    let sim = &cfg.simulate;
    let pts = sample_points(cfg, p.dim);
    let seed = cfg.seed;
    let mut files = 0;
    match sim.method {
        MethodName::Kl => {
            let basis = KlBasis::build(p, cfg.truncation.m0, cfg.truncation.n0, cfg.grid.nystrom)?;
            let sampler = KlSampler::new(&basis, &pts)?;
            for k in 0..sim.replicas {
                write_sample(cfg, &sampler.sample(seed, k), &format!("sample_kl_r{k}"))?;
                files += 1;
            }
        }
        MethodName::Cholesky => {
            let sampler = CholeskySampler::new(p, &pts)?;
            for k in 0..sim.replicas {
                write_sample(cfg, &sampler.sample(seed, k), &format!("sample_cholesky_r{k}"))?;
                files += 1;
            }
            if sampler.jitter > 0.0 {
                println!("simulate: Cholesky needed diagonal jitter {:.3e}", sampler.jitter);
            }
        }
        MethodName::Spectral => {
            let grid = sim.freq_grid();
            let samplers: Vec<SpectralSampler> = if sim.bands.is_empty() {
                vec![SpectralSampler::full_range(p, grid)?]
            } else {
                sim.bands.iter().map(|b| SpectralSampler::new(p, (b[0], b[1]), grid)).collect::<Result<_>>()?
            };
            for (i, sp) in samplers.iter().enumerate() {
                for k in 0..sim.replicas {
                    let stem = if sim.bands.is_empty() {
                        format!("sample_spectral_r{k}")
                    } else {
                        format!("sample_spectral_b{i}_r{k}")
                    };
                    write_sample(cfg, &sp.sample(&pts, seed, k)?, &stem)?;
                    files += 1;
                }
            }
            band_report(cfg, &samplers, &pts)?;
        }
    }
    println!("simulate: {files} sample(s) of {} points written to {}", pts.len(), cfg.out.display());
    Ok(Outcome::Pass)
}

/// Summed discretized variances of the configured bands against the
/// quadrature over their union `(min a, max b]`.
fn band_report(cfg: &RunConfig, samplers: &[SpectralSampler], pts: &[Vec<f64>]) -> Result<()> {
    let p = cfg.model()?;
    let sim = &cfg.simulate;
    let (a, b) = if sim.bands.is_empty() {
        (0.0, f64::INFINITY)
    } else {
        (
            sim.bands.iter().map(|b| b[0]).fold(f64::INFINITY, f64::min),
            sim.bands.iter().map(|b| b[1]).fold(0.0, f64::max),
        )
    };
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (i, x) in pts.iter().enumerate() {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            continue;
        }
        let sum: f64 = samplers.iter().map(|s| s.discretized_variance(x)).sum();
        let quad = band_variance(&p, r, a, b)?;
        let rel = ((sum - quad) / quad).abs();
        worst = worst.max(rel);
        rows.push(vec![i.to_string(), fmt_f64(r), fmt_f64(sum), fmt_f64(quad), fmt_f64(rel)]);
    }
    write_csv(
        &cfg.out.join("band_variance.csv"),
        &["point", "radius", "discretized_sum", "quadrature", "rel_diff"],
        &rows,
    )?;
    println!("simulate: band variance max relative difference {worst:.3e}");
    Ok(())
}

fn cmd_rkhs_norm(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.model()?;
    let (m0, n0) = (cfg.truncation.m0, cfg.truncation.n0);
    let basis = KlBasis::build(p, m0, n0, cfg.grid.nystrom)?;
    let dim = p.dim;
    let mut header: Vec<String> = (1..=dim).map(|i| format!("y{i}")).collect();
    header.extend(["strassen_norm", "exact_norm", "rel_error"].map(String::from));
    let mut rows = Vec::new();
    for y in cfg.rkhs.points_for(dim) {
        let rep = representer(&y, &basis)?;
        let nrm = strassen_norm(&rep, &basis)?;
        let exact = y.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p.hurst);
        let mut row: Vec<String> = y.iter().map(|v| fmt_f64(*v)).collect();
        row.extend([
            fmt_f64(nrm),
            fmt_f64(exact),
            fmt_f64(if exact > 0.0 { (nrm - exact).abs() / exact } else { nrm }),
        ]);
        rows.push(row);
    }
    let hdr: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    write_csv(&cfg.out.join("rkhs_norms.csv"), &hdr, &rows)?;

    let grid = ProductGrid::for_basis(&basis, cfg.rkhs.n_phi, cfg.rkhs.n_theta)?;
    let pts = grid.points();
    let schedule = doubling_schedule(m0, n0);
    let mut mrows = Vec::new();
    for &alpha in &cfg.rkhs.powers {
        let values: Vec<f64> = pts.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt().powf(alpha)).collect();
        let rep = bernstein_membership(&values, &grid, &basis, &schedule)?;
        let verdict = serde_json::to_value(rep.verdict).map_err(|e| Error::Numeric(e.to_string()))?;
        for (a, b, s) in &rep.partial_sums {
            mrows.push(vec![
                fmt_f64(alpha),
                a.to_string(),
                b.to_string(),
                fmt_f64(*s),
                verdict.as_str().unwrap_or("").to_string(),
            ]);
        }
    }
    write_csv(&cfg.out.join("membership.csv"), &["alpha", "m0", "n0", "partial_sum", "verdict"], &mrows)?;
    println!("rkhs-norm: {} representers, {} membership tests", rows.len(), cfg.rkhs.powers.len());
    Ok(Outcome::Pass)
}

/// Nested truncations `(⌈m0/2^k⌉, ⌈n0/2^k⌉)` ending at `(m0, n0)`.
fn doubling_schedule(m0: usize, n0: usize) -> Vec<(usize, usize)> {
    let mut out = vec![(m0, n0)];
    let (mut m, mut n) = (m0, n0);
    while n > 1 {
        m = m.div_ceil(2);
        n = n.div_ceil(2);
        out.push((m, n));
    }
    out.reverse();
    out.dedup();
    out
}

fn cmd_limits(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.model()?;
    let l = &cfg.limits;
    let basis = KlBasis::build(p, cfg.truncation.m0, cfg.truncation.n0, l.radial_grid)?;
    let grid = ProductGrid::for_basis(&basis, l.n_phi, l.n_theta)?;
    let sampler = SpectralSampler::full_range(p, l.freq_grid())?;
    let field = sampler.realize(cfg.seed, 0);
    let t_max = match l.example {
        Example::GlobalLil => Some(l.schedule.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
        _ => None,
    };
    let opts = CloudOptions { max_members: l.max_members, seed: cfg.seed, t_max };
    let rep = representer(&l.target_point_for(p.dim), &basis)?;
    let nrm = strassen_norm(&rep, &basis)?;
    let target = rep.scaled(l.target_norm / nrm);
    let rows = campaign(l.example, &l.schedule, &field, &basis, &grid, Some(&target), &opts)?;
    let stem = format!("limits_{}", l.example.name());
    write_campaign(&cfg.out, &stem, &rows)?;
    let audit = normalizer_audit(l.example, &l.schedule, p.dim)?;
    let text = serde_json::to_string_pretty(&audit).map_err(|e| Error::Numeric(e.to_string()))?;
    fs::write(cfg.out.join(format!("{stem}_audit.json")), text + "\n")?;
    if l.example == Example::Levy && !l.modulus_scales.is_empty() {
        write_modulus(cfg, &sampler, &cfg.out)?;
    }
    println!("limits: {} rows written to {}", rows.len(), cfg.out.join(format!("{stem}.csv")).display());
    Ok(Outcome::Pass)
}

fn write_modulus(cfg: &RunConfig, sampler: &SpectralSampler, out: &Path) -> Result<()> {
    let p = cfg.model()?;
    let l = &cfg.limits;
    let step = 2.0 / (l.modulus_grid - 1) as f64;
    let pts = lattice_in_ball(p.dim, step, 1.0);
    let sample = sampler.sample(&pts, cfg.seed, 0)?;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &u in &l.modulus_scales {
        let v = modulus_statistic(&sample, u).map_err(|e| match e {
            Error::Resolution(m) => Error::Resolution(format!("scale {u}: {m}")),
            other => other,
        })?;
        rows.push(vec![fmt_f64(u), fmt_f64(v)]);
        series.push((u, v));
    }
    write_csv(&out.join("modulus.csv"), &["u", "statistic"], &rows)?;
    let svg = line_chart("Levy modulus statistic", "u (log2)", &[Series { name: "statistic", points: series }], true);
    fs::write(out.join("modulus.svg"), svg)?;
    Ok(())
}
