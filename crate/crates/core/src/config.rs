//! Run configuration read from a TOML file. Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::field::FreqGrid;
use crate::kernel::ModelParams;
use crate::limits::Example;
use crate::mercer::NystromScheme;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub params: ParamsConfig,
    pub truncation: TruncationConfig,
    pub grid: GridConfig,
    pub covcheck: CovcheckConfig,
    pub simulate: SimulateConfig,
    pub rkhs: RkhsConfig,
    pub limits: LimitsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("out"),
            params: ParamsConfig::default(),
            truncation: TruncationConfig::default(),
            grid: GridConfig::default(),
            covcheck: CovcheckConfig::default(),
            simulate: SimulateConfig::default(),
            rkhs: RkhsConfig::default(),
            limits: LimitsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub dim: usize,
    pub hurst: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { dim: 2, hurst: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationConfig {
    pub m0: usize,
    pub n0: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { m0: 4, n0: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Nyström grid size.
    pub nystrom: usize,
    /// Eigs: the refinement report compares `nystrom / 2` with `nystrom`.
    pub scheme: NystromScheme,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nystrom: 128, scheme: NystromScheme::KinkCorrected }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovcheckConfig {
    pub dims: Vec<usize>,
    pub hursts: Vec<f64>,
    pub m_max: usize,
    /// Radii per axis; the grid is `radii × radii` on `(0, 1]`.
    pub radii: usize,
    pub nodes: usize,
    pub tolerance: f64,
}

impl Default for CovcheckConfig {
    fn default() -> Self {
        Self { dims: vec![2, 3], hursts: vec![0.25, 0.5, 0.75], m_max: 8, radii: 16, nodes: 32, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Kl,
    Cholesky,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub method: MethodName,
    /// Explicit points; when empty, the lattice of spacing `step` in the
    /// unit ball is used.
    pub points: Vec<Vec<f64>>,
    pub step: f64,
    pub replicas: u64,
    /// Spectral frequency bands `(a, b]`; empty means the full range.
    pub bands: Vec<[f64; 2]>,
    pub shells: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub directions: Option<usize>,
    pub plot: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            method: MethodName::Kl,
            points: Vec::new(),
            step: 0.125,
            replicas: 1,
            bands: Vec::new(),
            shells: 256,
            k_min: 1e-3,
            k_max: 1e3,
            directions: None,
            plot: true,
        }
    }
}

impl SimulateConfig {
    pub fn freq_grid(&self) -> FreqGrid {
        FreqGrid { shells: self.shells, k_min: self.k_min, k_max: self.k_max, directions: self.directions }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RkhsConfig {
    /// Points `y` whose representers are normed; empty picks three
    /// points of norm 0.5, 0.5 and 1.
    pub points: Vec<Vec<f64>>,
    /// Exponents `α` of `‖x‖^α` tested for membership.
    pub powers: Vec<f64>,
    pub n_phi: usize,
    pub n_theta: usize,
}

impl RkhsConfig {
    pub fn points_for(&self, dim: usize) -> Vec<Vec<f64>> {
        if !self.points.is_empty() {
            return self.points.clone();
        }
        let unit = |i: usize, v: f64| {
            let mut y = vec![0.0; dim];
            y[i] = v;
            y
        };
        let mut mid = unit(0, 0.3);
        if dim > 1 {
            mid[1] = 0.4;
        }
        vec![unit(0, 0.5), mid, unit(dim - 1, 1.0)]
    }
}

impl Default for RkhsConfig {
    fn default() -> Self {
        Self { points: Vec::new(), powers: vec![0.25, 2.0], n_phi: 32, n_theta: 17 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsConfig {
    pub example: Example,
    /// Scales `u` (local_lil, levy) or `t` (global_lil).
    pub schedule: Vec<f64>,
    pub max_members: usize,
    /// Nyström grid of the basis used for the RKHS statistics; its nodes are
    /// the radii of the evaluation grid.
    pub radial_grid: usize,
    pub n_phi: usize,
    pub n_theta: usize,
    /// Enter target: the representer of `target_point` scaled to this norm.
    /// Empty means `(0.3, 0.2, 0, ...)`.
    pub target_point: Vec<f64>,
    pub target_norm: f64,
    /// Levy only: modulus statistic on a lattice with this many points per
    /// axis, at these offsets.
    pub modulus_grid: usize,
    pub modulus_scales: Vec<f64>,
    pub shells: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub directions: Option<usize>,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self {
            example: Example::Levy,
            schedule: (3..=7).map(|k| 0.5f64.powi(k)).collect(),
            max_members: 32,
            radial_grid: 16,
            n_phi: 16,
            n_theta: 9,
            target_point: Vec::new(),
            target_norm: 0.7,
            modulus_grid: 129,
            modulus_scales: (3..=6).map(|k| 0.5f64.powi(k)).collect(),
            shells: 256,
            k_min: 1e-3,
            k_max: 1e3,
            directions: None,
        }
    }
}

impl LimitsConfig {
    pub fn target_point_for(&self, dim: usize) -> Vec<f64> {
        if !self.target_point.is_empty() {
            return self.target_point.clone();
        }
        let mut y = vec![0.0; dim];
        y[0] = 0.3;
        if dim > 1 {
            y[1] = 0.2;
        }
        y
    }

    pub fn freq_grid(&self) -> FreqGrid {
        FreqGrid { shells: self.shells, k_min: self.k_min, k_max: self.k_max, directions: self.directions }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::new(self.params.dim, self.params.hurst).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.model()?;
        let t = &self.truncation;
        if t.n0 == 0 {
            return bad("truncation.n0 must be positive");
        }
        if self.grid.nystrom < t.n0.max(2) {
            return bad(format!("grid.nystrom = {} is below truncation.n0 = {}", self.grid.nystrom, t.n0));
        }
        let c = &self.covcheck;
        if c.dims.iter().any(|&d| d < 2) {
            return bad("covcheck.dims entries must be at least 2");
        }
        if c.hursts.iter().any(|&h| !(h > 0.0 && h < 1.0)) {
            return bad("covcheck.hursts entries must lie in (0, 1)");
        }
        if c.radii == 0 || c.dims.is_empty() || c.hursts.is_empty() {
            return bad("covcheck grid is empty");
        }
        if c.nodes < 2 || !(c.tolerance > 0.0) {
            return bad("covcheck.nodes must be >= 2 and covcheck.tolerance positive");
        }
        let s = &self.simulate;
        if s.points.iter().any(|x| x.len() != p.dim) {
            return bad(format!("simulate.points must have {} coordinates", p.dim));
        }
        if s.points.is_empty() && !(s.step > 0.0 && s.step <= 1.0) {
            return bad("simulate.step must lie in (0, 1]");
        }
        if s.replicas == 0 {
            return bad("simulate.replicas must be positive");
        }
        if s.bands.iter().any(|b| !(b[0] >= 0.0 && b[1] > b[0])) {
            return bad("simulate.bands entries must satisfy 0 <= a < b");
        }
        if !(s.k_min > 0.0 && s.k_max > s.k_min) || s.shells == 0 {
            return bad("simulate frequency grid must satisfy 0 < k_min < k_max and shells > 0");
        }
        let r = &self.rkhs;
        if r.points.iter().any(|x| x.len() != p.dim) {
            return bad(format!("rkhs.points must have {} coordinates", p.dim));
        }
        let l = &self.limits;
        if l.schedule.is_empty() {
            return bad("limits.schedule is empty");
        }
        for &s in &l.schedule {
            l.example.h(s, p.dim).map_err(|e| Error::Config(e.to_string()))?;
        }
        if l.max_members == 0 {
            return bad("limits.max_members must be positive");
        }
        if l.radial_grid < t.n0 {
            return bad(format!("limits.radial_grid = {} is below truncation.n0 = {}", l.radial_grid, t.n0));
        }
        if !l.target_point.is_empty() && l.target_point.len() != p.dim {
            return bad(format!("limits.target_point must have {} coordinates", p.dim));
        }
        if !(l.target_norm >= 0.0 && l.target_norm < 1.0) {
            return bad("limits.target_norm must lie in [0, 1)");
        }
        if l.modulus_grid < 3 {
            return bad("limits.modulus_grid must be at least 3");
        }
        if l.modulus_scales.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
            return bad("limits.modulus_scales entries must lie in (0, 1)");
        }
        if !(l.k_min > 0.0 && l.k_max > l.k_min) || l.shells == 0 {
            return bad("limits frequency grid must satisfy 0 < k_min < k_max and shells > 0");
        }
        Ok(())
    }
}
