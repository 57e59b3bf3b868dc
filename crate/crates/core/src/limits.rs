//! Clouds of normed increments for the local and global functional laws of
//! the iterated logarithm and the functional Lévy modulus, and the
//! statistics used to monitor them at finite scales.
//!
//! The limit statements are asymptotic. Everything here is a finite-scale
//! diagnostic: bounded corridors and trends at fixed seeds.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field::{FieldRealization, FieldSample, KlBasis};
use crate::report::{fmt_f64, line_chart, write_csv, Series};
use crate::rkhs::{fourier_coeffs, strassen_norm, ProductGrid, RkhsFunction};
use crate::rng::RngStream;

const TAG_SUBSAMPLE: u64 = 1 << 61;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    LocalLil,
    GlobalLil,
    Levy,
}

impl Example {
    pub fn name(&self) -> &'static str {
        match self {
            Example::LocalLil => "local_lil",
            Example::GlobalLil => "global_lil",
            Example::Levy => "levy",
        }
    }

    /// Normalizing function `h` at a scale: `log log(1/u)` (local),
    /// `log log t` (global), `N log(1/u)` (Lévy).
    pub fn h(&self, scale: f64, dim: usize) -> Result<f64> {
        let v = match self {
            Example::LocalLil => {
                if !(scale > 0.0 && scale < (-1.0f64).exp()) {
                    return domain(format!("local_lil scale must lie in (0, 1/e), got {scale}"));
                }
                (1.0 / scale).ln().ln()
            }
            Example::GlobalLil => {
                if !(scale > std::f64::consts::E) {
                    return domain(format!("global_lil scale must exceed e, got {scale}"));
                }
                scale.ln().ln()
            }
            Example::Levy => {
                if !(scale > 0.0 && scale < 1.0) {
                    return domain(format!("levy scale must lie in (0, 1), got {scale}"));
                }
                dim as f64 * (1.0 / scale).ln()
            }
        };
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudMember {
    pub y: Vec<f64>,
    pub u: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementCloud {
    pub example: Example,
    pub scale: f64,
    pub h: f64,
    /// `√(2h)·u^H` for the common `u` of the members.
    pub denominator: f64,
    pub members: Vec<CloudMember>,
    /// Number of labels before subsampling.
    pub labels_total: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct CloudOptions {
    /// Labels kept per scale (uniform subsample of the Lévy lattice).
    pub max_members: usize,
    /// Seed of the subsampling.
    pub seed: u64,
    /// Largest `t` of a global_lil schedule; increments at `t` are read from
    /// the unit-ball field at `u = t / t_max`.
    pub t_max: Option<f64>,
}

impl Default for CloudOptions {
    fn default() -> Self {
        Self { max_members: 64, seed: 0, t_max: None }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cartesian lattice of spacing `step` intersected with `{|y| <= radius}`.
pub fn lattice_in_ball(dim: usize, step: f64, radius: f64) -> Vec<Vec<f64>> {
    let k = (radius / step).floor() as i64;
    let mut out = Vec::new();
    let mut idx = vec![-k; dim];
    loop {
        let y: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        if norm(&y) <= radius + 1e-12 {
            out.push(y);
        }
        let mut d = 0;
        loop {
            if d == dim {
                return out;
            }
            idx[d] += 1;
            if idx[d] <= k {
                break;
            }
            idx[d] = -k;
            d += 1;
        }
    }
}

/// Labels `(y, u)` of one scale.
fn labels(example: Example, scale: f64, dim: usize, opts: &CloudOptions) -> Result<(Vec<Vec<f64>>, f64, usize)> {
    match example {
        Example::LocalLil => Ok((vec![vec![0.0; dim]], scale, 1)),
        Example::GlobalLil => {
            let t_max = opts.t_max.unwrap_or(scale);
            if scale > t_max {
                return domain(format!("global_lil scale {scale} exceeds t_max {t_max}"));
            }
            Ok((vec![vec![0.0; dim]], scale / t_max, 1))
        }
        Example::Levy => {
            let all = lattice_in_ball(dim, scale / 2.0, 1.0 - scale);
            let total = all.len();
            if total <= opts.max_members {
                return Ok((all, scale, total));
            }
            let mut rng = RngStream::new(opts.seed, [scale.to_bits(), TAG_SUBSAMPLE, 0]).rng();
            let mut picked: Vec<usize> = sample(&mut rng, total, opts.max_members).into_vec();
            picked.sort_unstable();
            Ok((picked.into_iter().map(|i| all[i].clone()).collect(), scale, total))
        }
    }
}

/// Builds one cloud per scale, evaluating `field` at `y + u x` for every
/// label and every `x` of the shared grid.
pub fn build_cloud(
    example: Example,
    schedule: &[f64],
    field: &dyn FieldRealization,
    grid: &[Vec<f64>],
    opts: &CloudOptions,
) -> Result<Vec<IncrementCloud>> {
    let params = field.params();
    let dim = params.dim;
    let mut out = Vec::with_capacity(schedule.len());
    for &scale in schedule {
        let h = example.h(scale, dim)?;
        let (ys, u, labels_total) = labels(example, scale, dim, opts)?;
        let denominator = (2.0 * h).sqrt() * u.powf(params.hurst);
        if !(denominator > 0.0) {
            return Err(Error::Numeric(format!("non-positive denominator at scale {scale}")));
        }
        let mut members = Vec::with_capacity(ys.len());
        for y in ys {
            let mut pts = Vec::with_capacity(grid.len() + 1);
            pts.push(y.clone());
            for x in grid {
                let p: Vec<f64> = y.iter().zip(x).map(|(a, b)| a + u * b).collect();
                if norm(&p) > 1.0 + 1e-12 {
                    return Err(Error::Coverage(format!(
                        "scale {scale}: point y + u x = {p:?} leaves the sampled ball"
                    )));
                }
                pts.push(p);
            }
            let vals = field.eval_many(&pts)?;
            let base = vals[0];
            let values = vals[1..].iter().map(|v| (v - base) / denominator).collect();
            members.push(CloudMember { y, u, values });
        }
        out.push(IncrementCloud { example, scale, h, denominator, members, labels_total });
    }
    Ok(out)
}

/// Attraction surrogates of one member: RKHS excess `(‖η‖_S - 1)₊` and the
/// sup distance from `η` to its projection onto the ball,
/// `(1 - 1/‖η‖_S)₊ ‖η‖_∞`.
pub fn member_attraction(values: &[f64], grid: &ProductGrid, basis: &KlBasis) -> Result<(f64, f64)> {
    let f = fourier_coeffs(values, grid, basis)?;
    let nrm = strassen_norm(&f, basis)?;
    if nrm <= 1.0 {
        return Ok((0.0, 0.0));
    }
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((nrm - 1.0, (1.0 - 1.0 / nrm) * sup))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Attraction {
    pub excess: f64,
    pub supdist: f64,
    pub median_excess: f64,
}

/// Sup over members of the two attraction surrogates, plus the median excess.
/// The cloud must be evaluated on `grid.points()`.
pub fn attract_stat(cloud: &IncrementCloud, grid: &ProductGrid, basis: &KlBasis) -> Result<Attraction> {
    let mut ex = Vec::with_capacity(cloud.members.len());
    let mut supdist = 0.0f64;
    for m in &cloud.members {
        let (e, d) = member_attraction(&m.values, grid, basis)?;
        ex.push(e);
        supdist = supdist.max(d);
    }
    if ex.is_empty() {
        return Ok(Attraction { excess: 0.0, supdist: 0.0, median_excess: 0.0 });
    }
    let excess = ex.iter().cloned().fold(0.0, f64::max);
    ex.sort_by(f64::total_cmp);
    let k = ex.len();
    let median_excess = if k % 2 == 1 { ex[k / 2] } else { 0.5 * (ex[k / 2 - 1] + ex[k / 2]) };
    Ok(Attraction { excess, supdist, median_excess })
}

/// `inf` over members of `max_grid |η - target|`. The target must lie
/// strictly inside Strassen's ball.
pub fn enter_stat(
    cloud: &IncrementCloud,
    target: &RkhsFunction,
    target_values: &[f64],
    basis: &KlBasis,
) -> Result<f64> {
    let nrm = strassen_norm(target, basis)?;
    if nrm >= 1.0 {
        return domain(format!("target norm {nrm} is not below 1"));
    }
    let mut best = f64::INFINITY;
    for m in &cloud.members {
        if m.values.len() != target_values.len() {
            return domain("target and cloud use different grids");
        }
        let d = m.values.iter().zip(target_values).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        best = best.min(d);
    }
    Ok(best)
}

/// `sup` over members of `‖η‖_∞` on the grid.
pub fn functional_sup(cloud: &IncrementCloud) -> f64 {
    cloud.members.iter().flat_map(|m| m.values.iter()).fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Statistics of one cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CloudStats {
    pub attract: Attraction,
    pub enter: Option<f64>,
    pub functional_sup: f64,
}

/// `sup |ξ(x+y) - ξ(x)| / (√(2N log(1/|y|)) |y|^H)` over pairs of lattice
/// points with `| |y| - u | <= 5% u`. Each pair is normalized by its own
/// offset `|y|`. The sample must sit on a Cartesian lattice.
pub fn modulus_statistic(sample: &FieldSample, u: f64) -> Result<f64> {
    let dim = sample.params.dim;
    let h = sample.params.hurst;
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("offset scale must lie in (0, 1), got {u}"));
    }
    let pts = &sample.points;
    if pts.is_empty() {
        return Err(Error::Resolution("empty sample".into()));
    }
    // lattice spacing: smallest positive coordinate gap
    let mut step = f64::INFINITY;
    for d in 0..dim {
        let mut c: Vec<f64> = pts.iter().map(|p| p[d]).collect();
        c.sort_by(f64::total_cmp);
        for w in c.windows(2) {
            let g = w[1] - w[0];
            if g > 1e-12 {
                step = step.min(g);
            }
        }
    }
    if !step.is_finite() {
        return Err(Error::Resolution("sample is not a lattice".into()));
    }
    let origin: Vec<f64> = (0..dim).map(|d| pts.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min)).collect();
    let key = |p: &[f64]| -> Vec<i64> { p.iter().zip(&origin).map(|(a, o)| ((a - o) / step).round() as i64).collect() };
    let index: HashMap<Vec<i64>, f64> = pts.iter().zip(&sample.values).map(|(p, &v)| (key(p), v)).collect();
    // offsets with |‖y‖ - u| <= 0.05 u; one of each ± pair
    let kmax = ((1.05 * u) / step).ceil() as i64;
    let mut offsets = Vec::new();
    let mut idx = vec![-kmax; dim];
    'outer: loop {
        let len = idx.iter().map(|&i| (i as f64 * step).powi(2)).sum::<f64>().sqrt();
        let first_nonzero = idx.iter().find(|&&i| i != 0).copied().unwrap_or(0);
        if first_nonzero > 0 && (len - u).abs() <= 0.05 * u {
            offsets.push((idx.clone(), len));
        }
        let mut d = 0;
        loop {
            if d == dim {
                break 'outer;
            }
            idx[d] += 1;
            if idx[d] <= kmax {
                break;
            }
            idx[d] = -kmax;
            d += 1;
        }
    }
    let mut best = f64::NEG_INFINITY;
    for (k, v) in &index {
        for (off, len) in &offsets {
            let other: Vec<i64> = k.iter().zip(off).map(|(a, b)| a + b).collect();
            if let Some(w) = index.get(&other) {
                let den = (2.0 * dim as f64 * (1.0 / len).ln()).sqrt() * len.powf(h);
                best = best.max((w - v).abs() / den);
            }
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Resolution(format!("no lattice pairs at offset ≈ {u} (spacing {step})")));
    }
    Ok(best)
}

/// Finite-scale audit of the two conditions on `h`.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub example: Example,
    /// `h` strictly increases along the schedule in the direction of the limit.
    pub h_increasing: bool,
    /// `dF₁` in the variable `s` in which `e^{-a h} dF₁ ∝ s^{p(a)} ds`.
    pub density: &'static str,
    /// `p(a)`, evaluated at `a = 1 ± 0.1`.
    pub exponent_below: f64,
    pub exponent_above: f64,
    /// `∫^∞ s^{p(a)} ds` converges for `a > 1` and diverges for `a < 1`.
    pub dichotomy_holds: bool,
}

/// Symbolic check of the integral dichotomy plus a numerical monotonicity
/// check of `h` on the schedule, ordered towards the limit.
pub fn normalizer_audit(example: Example, schedule: &[f64], dim: usize) -> Result<AuditReport> {
    let mut hs = Vec::with_capacity(schedule.len());
    for &s in schedule {
        hs.push(example.h(s, dim)?);
    }
    // order along the limit: scales shrink for local/Lévy and grow for global
    let mut pairs: Vec<(f64, f64)> = schedule.iter().cloned().zip(hs).collect();
    match example {
        Example::GlobalLil => pairs.sort_by(|a, b| a.0.total_cmp(&b.0)),
        _ => pairs.sort_by(|a, b| b.0.total_cmp(&a.0)),
    }
    let h_increasing = pairs.windows(2).all(|w| w[1].1 > w[0].1);
    let n = dim as f64;
    // s = log(1/u) (local), s = log t (global): e^{-a h} dF₁ ∝ s^{-a} ds
    // s = 1/u (Lévy): F₁ ∝ s^N, e^{-a h} = s^{-aN}, so s^{N(1-a)-1} ds
    let (density, p): (&'static str, Box<dyn Fn(f64) -> f64>) = match example {
        Example::LocalLil => ("du/u", Box::new(|a: f64| -a)),
        Example::GlobalLil => ("dt/t", Box::new(|a: f64| -a)),
        Example::Levy => ("d(u^{-N})", Box::new(move |a: f64| n * (1.0 - a) - 1.0)),
    };
    let below = p(0.9);
    let above = p(1.1);
    Ok(AuditReport {
        example,
        h_increasing,
        density,
        exponent_below: below,
        exponent_above: above,
        dichotomy_holds: above < -1.0 && below > -1.0,
    })
}

/// One row of a campaign table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignRow {
    pub example: Example,
    pub scale: f64,
    pub attract_excess: f64,
    pub attract_supdist: f64,
    pub enter_dist: f64,
    pub functional_sup: f64,
    pub attract_excess_median: f64,
    pub enter_running_min: f64,
    pub members: usize,
}

/// Runs the statistics of every cloud in schedule order.
pub fn campaign(
    example: Example,
    schedule: &[f64],
    field: &dyn FieldRealization,
    basis: &KlBasis,
    grid: &ProductGrid,
    target: Option<&RkhsFunction>,
    opts: &CloudOptions,
) -> Result<Vec<CampaignRow>> {
    let pts = grid.points();
    let clouds = build_cloud(example, schedule, field, &pts, opts)?;
    let target_values = match target {
        Some(t) => Some(t.eval_many(basis, &pts)?),
        None => None,
    };
    let mut rows = Vec::with_capacity(clouds.len());
    let mut running = f64::INFINITY;
    for c in &clouds {
        let a = attract_stat(c, grid, basis)?;
        let enter = match (target, &target_values) {
            (Some(t), Some(v)) => enter_stat(c, t, v, basis)?,
            _ => f64::NAN,
        };
        if enter.is_finite() {
            running = running.min(enter);
        }
        rows.push(CampaignRow {
            example,
            scale: c.scale,
            attract_excess: a.excess,
            attract_supdist: a.supdist,
            enter_dist: enter,
            functional_sup: functional_sup(c),
            attract_excess_median: a.median_excess,
            enter_running_min: if running.is_finite() { running } else { f64::NAN },
            members: c.members.len(),
        });
    }
    Ok(rows)
}

pub fn write_campaign(dir: &Path, stem: &str, rows: &[CampaignRow]) -> Result<()> {
    let header = [
        "example",
        "scale",
        "attract_excess",
        "attract_supdist",
        "enter_dist",
        "functional_sup",
        "attract_excess_median",
        "enter_running_min",
        "members",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.example.name().to_string(),
                fmt_f64(r.scale),
                fmt_f64(r.attract_excess),
                fmt_f64(r.attract_supdist),
                fmt_f64(r.enter_dist),
                fmt_f64(r.functional_sup),
                fmt_f64(r.attract_excess_median),
                fmt_f64(r.enter_running_min),
                r.members.to_string(),
            ]
        })
        .collect();
    write_csv(&dir.join(format!("{stem}.csv")), &header, &body)?;
    let pick = |f: fn(&CampaignRow) -> f64| rows.iter().map(|r| (r.scale, f(r))).collect::<Vec<_>>();
    let series = [
        Series { name: "attract_excess", points: pick(|r| r.attract_excess) },
        Series { name: "attract_supdist", points: pick(|r| r.attract_supdist) },
        Series { name: "enter_dist", points: pick(|r| r.enter_dist) },
        Series { name: "functional_sup", points: pick(|r| r.functional_sup) },
        Series { name: "excess_median", points: pick(|r| r.attract_excess_median) },
    ];
    let title = format!("{} statistics vs scale", rows.first().map_or("campaign", |r| r.example.name()));
    std::fs::write(dir.join(format!("{stem}.svg")), line_chart(&title, "scale (log2)", &series, true))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Method;
    use crate::kernel::ModelParams;
    use approx::assert_relative_eq;

    struct Deterministic<F: Fn(&[f64]) -> f64 + Sync>(ModelParams, F);

    impl<F: Fn(&[f64]) -> f64 + Sync> FieldRealization for Deterministic<F> {
        fn params(&self) -> ModelParams {
            self.0
        }
        fn eval(&self, x: &[f64]) -> Result<f64> {
            Ok((self.1)(x))
        }
    }

    fn p2() -> ModelParams {
        ModelParams::new(2, 0.5).unwrap()
    }

    #[test]
    fn local_lil_normalization() {
        let u = (-(2f64.exp())).exp();
        assert_relative_eq!(Example::LocalLil.h(u, 2).unwrap(), 2.0, epsilon = 1e-12);
        let f = Deterministic(p2(), |x: &[f64]| x[0]);
        let grid = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let c = build_cloud(Example::LocalLil, &[u], &f, &grid, &CloudOptions::default()).unwrap();
        assert_eq!(c[0].members.len(), 1);
        assert_eq!(c[0].members[0].values[0], 0.0);
        assert_relative_eq!(c[0].denominator, 2.0 * u.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(c[0].members[0].values[1], u / (2.0 * u.sqrt()), epsilon = 1e-15);
    }

    #[test]
    fn levy_labels_respect_constraint() {
        let f = Deterministic(p2(), |_: &[f64]| 0.0);
        let opts = CloudOptions { max_members: 10_000, ..Default::default() };
        let c = build_cloud(Example::Levy, &[0.5], &f, &[vec![0.0, 0.0]], &opts).unwrap();
        assert!(!c[0].members.is_empty());
        assert!(c[0].members.iter().all(|m| norm(&m.y) <= 0.5 + 1e-12));
        let small = CloudOptions { max_members: 5, ..Default::default() };
        let c = build_cloud(Example::Levy, &[0.125], &f, &[vec![0.0, 0.0]], &small).unwrap();
        assert_eq!(c[0].members.len(), 5);
        assert!(c[0].labels_total > 5);
    }

    #[test]
    fn coverage_error() {
        let f = Deterministic(p2(), |_: &[f64]| 0.0);
        let opts = CloudOptions { t_max: Some(100.0), ..Default::default() };
        let r = build_cloud(Example::GlobalLil, &[50.0], &f, &[vec![2.5, 0.0]], &opts);
        assert!(matches!(r, Err(Error::Coverage(_))));
    }

    #[test]
    fn modulus_examples() {
        let step = 0.025;
        let pts = lattice_in_ball(2, step, 1.0);
        let mk = |vals: Vec<f64>| FieldSample {
            params: p2(),
            points: pts.clone(),
            values: vals,
            method: Method::Cholesky,
            seed: 0,
            replica: 0,
            truncation: None,
            freq_grid: None,
        };
        let constant = mk(vec![3.0; pts.len()]);
        assert_eq!(modulus_statistic(&constant, 0.1).unwrap(), 0.0);
        let coord = mk(pts.iter().map(|p| p[0]).collect());
        let want = 0.1 / ((4.0 * 10f64.ln()).sqrt() * 0.1f64.sqrt());
        assert_relative_eq!(modulus_statistic(&coord, 0.1).unwrap(), want, max_relative = 1e-12);
        assert_relative_eq!(want, 0.1042, epsilon = 1e-4);
        assert!(matches!(modulus_statistic(&coord, 0.001), Err(Error::Resolution(_))));
    }

    #[test]
    fn audits() {
        let a = normalizer_audit(Example::LocalLil, &[0.05, 0.01, 0.001], 2).unwrap();
        assert!(a.h_increasing && a.dichotomy_holds);
        let g = normalizer_audit(Example::GlobalLil, &[10.0, 100.0, 1000.0], 2).unwrap();
        assert!(g.h_increasing && g.dichotomy_holds);
        let l = normalizer_audit(Example::Levy, &[0.125, 0.0625], 3).unwrap();
        assert!(l.h_increasing && l.dichotomy_holds);
    }

    #[test]
    fn attraction_inside_ball_is_zero() {
        let basis = KlBasis::build(p2(), 2, 4, 16).unwrap();
        let grid = ProductGrid::for_basis(&basis, 8, 0).unwrap();
        let y = [0.3, 0.2];
        let rep = crate::rkhs::representer(&y, &basis).unwrap();
        let nrm = strassen_norm(&rep, &basis).unwrap();
        let f = rep.scaled(0.5 / nrm);
        let vals = f.eval_many(&basis, &grid.points()).unwrap();
        let cloud = IncrementCloud {
            example: Example::Levy,
            scale: 0.5,
            h: 1.0,
            denominator: 1.0,
            members: vec![CloudMember { y: vec![0.0, 0.0], u: 0.5, values: vals.clone() }],
            labels_total: 1,
        };
        let a = attract_stat(&cloud, &grid, &basis).unwrap();
        assert!(a.excess == 0.0 && a.supdist == 0.0);
        assert_eq!(enter_stat(&cloud, &f, &vals, &basis).unwrap(), 0.0);
        assert!(enter_stat(&cloud, &rep.scaled(1.01 / nrm), &vals, &basis).is_err());
        let zero = IncrementCloud {
            members: vec![CloudMember { y: vec![0.0, 0.0], u: 0.5, values: vec![0.0; vals.len()] }],
            ..cloud
        };
        let a = attract_stat(&zero, &grid, &basis).unwrap();
        assert!(a.excess == 0.0 && a.supdist == 0.0);
    }
}
