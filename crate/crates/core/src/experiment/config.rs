//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{SystemKind, SystemParams};
use crate::geometry::{builtin_metric, Vec3, MAX_CUTOFF_FRACTION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSpec {
    pub name: String,
    /// Family parameters; `None` picks the family default.
    pub params: Option<Vec<f64>>,
    pub box_length: f64,
    /// Normal-ball radius `r`.
    pub cutoff_radius: f64,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self { name: "conformal_bump".into(), params: None, box_length: 2.7, cutoff_radius: 1.2 }
    }
}

impl MetricSpec {
    pub fn default_params(name: &str) -> Vec<f64> {
        match name {
            "conformal_bump" | "conformal_two_bumps" => vec![0.1],
            "diagonal_warp" => vec![0.1],
            _ => vec![],
        }
    }
}

/// Concentration points to sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum XiSampling {
    /// Explicit list.
    Points(Vec<Vec3<f64>>),
    /// `count` evenly spaced points from `from` to `to` inclusive.
    Line { from: Vec3<f64>, to: Vec3<f64>, count: usize },
    /// Tensor lattice with `per_axis` cell-centred points on `[lo, hi]³`.
    Grid { lo: Vec3<f64>, hi: Vec3<f64>, per_axis: usize },
}

impl XiSampling {
    pub fn points(&self) -> Vec<Vec3<f64>> {
        match self {
            XiSampling::Points(p) => p.clone(),
            XiSampling::Line { from, to, count } => (0..*count)
                .map(|k| {
                    let t = if *count > 1 { k as f64 / (*count - 1) as f64 } else { 0.0 };
                    [0, 1, 2].map(|a| from[a] + t * (to[a] - from[a]))
                })
                .collect(),
            XiSampling::Grid { lo, hi, per_axis } => {
                let m = *per_axis;
                let at = |a: usize, c: usize| lo[a] + (hi[a] - lo[a]) * (c as f64 + 0.5) / m as f64;
                let mut out = Vec::with_capacity(m * m * m);
                for i in 0..m {
                    for j in 0..m {
                        for k in 0..m {
                            out.push([at(0, i), at(1, j), at(2, k)]);
                        }
                    }
                }
                out
            }
        }
    }
}

/// Grid size per ε: the smallest even 2·3·5-smooth `n ≥ points_per_width · √λ · L / ε`,
/// clamped to `[min_n, max_n]`, unless `n` fixes it for every ε. The peak decays
/// on the length `ε/√λ`, so `points_per_width` counts grid points across it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Resolution {
    pub points_per_width: f64,
    pub min_n: usize,
    pub max_n: usize,
    pub n: Option<usize>,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { points_per_width: 5.3, min_n: 32, max_n: 192, n: None }
    }
}

impl Resolution {
    pub fn grid_size(&self, box_length: f64, eps: f64, lambda: f64) -> usize {
        if let Some(n) = self.n {
            return n;
        }
        let mut n = ((self.points_per_width * lambda.sqrt() * box_length / eps - 1e-9).ceil() as usize).max(2);
        while !(n % 2 == 0 && is_smooth(n)) {
            n += 1;
        }
        n.clamp(self.min_n, self.max_n)
    }
}

fn is_smooth(mut n: usize) -> bool {
    for p in [2, 3, 5] {
        while n % p == 0 {
            n /= p;
        }
    }
    n == 1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub phi_tol: f64,
    pub phi_max_iter: usize,
    pub inner_tol: f64,
    /// Grid cells of ansatz support per ε below which the ansatz is rejected.
    pub points_per_eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { phi_tol: 1e-9, phi_max_iter: 50, inner_tol: 1e-11, points_per_eps: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchObjectiveSpec {
    AnsatzEnergy,
    ReducedEnergy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpec {
    /// ε levels of the search; `None` uses every configured ε up to 0.2.
    pub eps: Option<Vec<f64>>,
    pub coarse_points: usize,
    pub objective: SearchObjectiveSpec,
    pub max_evals: usize,
    pub max_candidates: usize,
    pub curvature_starts: usize,
    pub flat_tol: f64,
    pub region: Option<(Vec3<f64>, Vec3<f64>)>,
    /// Normal-ball radius during the search; `None` uses 4 × the largest search ε.
    pub cutoff_radius: Option<f64>,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            eps: None,
            coarse_points: 4,
            objective: SearchObjectiveSpec::AnsatzEnergy,
            max_evals: 60,
            max_candidates: 4,
            curvature_starts: 6,
            flat_tol: 1e-8,
            region: None,
            cutoff_radius: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    /// Reuse a cached profile, computing and storing it when missing.
    Use,
    /// Recompute and overwrite the cache.
    Refresh,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    pub a: f64,
    pub q: f64,
    pub omega: f64,
    pub p: f64,
    /// Derived: `a − ω²` (KGM) or 1 (SM). Ignored on input.
    pub lambda: f64,
    pub metric: MetricSpec,
    pub eps: Vec<f64>,
    pub xi: XiSampling,
    pub resolution: Resolution,
    pub tolerances: Tolerances,
    pub search: SearchSpec,
    pub output_dir: PathBuf,
    pub cache: CachePolicy,
    /// Cache directory; `CONCENTRATOR_CACHE` overrides, `<output_dir>/cache` otherwise.
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::Kgm,
            a: 1.0,
            q: 1.0,
            omega: 0.5,
            p: 4.0,
            lambda: 0.75,
            metric: MetricSpec::default(),
            eps: vec![0.3, 0.2, 0.15, 0.1],
            xi: XiSampling::Line { from: [1.35; 3], to: [1.95, 1.35, 1.35], count: 5 },
            resolution: Resolution::default(),
            tolerances: Tolerances::default(),
            search: SearchSpec::default(),
            output_dir: PathBuf::from("concentrator-out"),
            cache: CachePolicy::Use,
            cache_dir: None,
        }
    }
}

pub const CACHE_ENV: &str = "CONCENTRATOR_CACHE";

impl ExperimentConfig {
    pub fn params(&self) -> Result<SystemParams<f64>> {
        SystemParams::new(self.system, self.a, self.q, self.omega, self.p)
    }

    pub fn metric_params(&self) -> Vec<f64> {
        self.metric.params.clone().unwrap_or_else(|| MetricSpec::default_params(&self.metric.name))
    }

    pub fn xi_points(&self) -> Vec<Vec3<f64>> {
        self.xi.points()
    }

    pub fn search_eps(&self) -> Vec<f64> {
        match &self.search.eps {
            Some(e) => e.clone(),
            None => self.eps.iter().copied().filter(|e| *e <= 0.2 + 1e-12).collect(),
        }
    }

    pub fn search_cutoff_radius(&self) -> f64 {
        let largest = self.search_eps().first().copied().unwrap_or(self.metric.cutoff_radius / 4.0);
        self.search.cutoff_radius.unwrap_or((4.0 * largest).min(self.metric.cutoff_radius))
    }

    pub fn grid_size(&self, eps: f64) -> usize {
        self.resolution.grid_size(self.metric.box_length, eps, self.lambda)
    }

    pub fn resolved_cache_dir(&self) -> Option<PathBuf> {
        if self.cache == CachePolicy::Off {
            return None;
        }
        if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
            return Some(PathBuf::from(dir));
        }
        Some(self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache")))
    }

    /// Fills derived fields and checks every invariant.
    pub fn validate(&mut self) -> Result<()> {
        if self.system == SystemKind::Sm && self.a != 1.0 {
            return Err(Error::ValidationError(format!("SM system fixes a = 1, got {}", self.a)));
        }
        let params = self.params()?;
        self.lambda = params.lambda();
        if self.metric.params.is_none() {
            self.metric.params = Some(MetricSpec::default_params(&self.metric.name));
        }
        let chart = builtin_metric::<f64>(&self.metric.name, &self.metric_params(), self.metric.box_length)
            .map_err(|e| Error::ValidationError(format!("metric: {e}")))?;
        let r = self.metric.cutoff_radius;
        let r_max = MAX_CUTOFF_FRACTION * self.metric.box_length;
        if !(r > 0.0 && r <= r_max + 1e-12) {
            return Err(Error::ValidationError(format!("cutoff radius must lie in (0, {r_max}], got {r}")));
        }
        chart.with_cutoff_radius(r).map_err(|e| Error::ValidationError(format!("metric: {e}")))?;
        if self.eps.is_empty() {
            return Err(Error::ValidationError("eps list is empty".into()));
        }
        if self.eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::ValidationError("eps values must be positive".into()));
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::ValidationError("eps list must be strictly decreasing".into()));
        }
        if let Some(e) = self.eps.iter().find(|e| **e > r / 4.0 + 1e-12) {
            return Err(Error::ValidationError(format!("eps = {e} exceeds r/4 = {}", r / 4.0)));
        }
        let xis = self.xi_points();
        if xis.is_empty() {
            return Err(Error::ValidationError("no xi points".into()));
        }
        if xis.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::ValidationError("xi coordinates must be finite".into()));
        }
        let res = &self.resolution;
        if !(res.points_per_width > 0.0) || res.min_n < 4 || res.max_n < res.min_n || res.n.is_some_and(|n| n < 4) {
            return Err(Error::ValidationError("resolution: need points_per_width > 0 and 4 <= min_n <= max_n".into()));
        }
        let t = &self.tolerances;
        if !(t.phi_tol > 0.0 && t.inner_tol > 0.0 && t.points_per_eps > 0.0) || t.phi_max_iter == 0 {
            return Err(Error::ValidationError("tolerances must be positive".into()));
        }
        let se = self.search_eps();
        if se.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::ValidationError("search eps list must be strictly decreasing".into()));
        }
        let rs = self.search_cutoff_radius();
        if !(rs > 0.0 && rs <= r_max + 1e-12) {
            return Err(Error::ValidationError(format!("search cutoff radius must lie in (0, {r_max}], got {rs}")));
        }
        if let Some(e) = se.iter().find(|e| !(**e > 0.0) || **e > rs / 4.0 + 1e-12) {
            return Err(Error::ValidationError(format!("search eps = {e} must lie in (0, r/4] with search r = {rs}")));
        }
        let s = &self.search;
        if s.coarse_points < 2 || s.max_evals < 4 || s.max_candidates == 0 || s.curvature_starts == 0 {
            return Err(Error::ValidationError("search: need coarse_points >= 2, max_evals >= 4".into()));
        }
        if let Some((lo, hi)) = s.region {
            if (0..3).any(|a| !(lo[a] < hi[a])) {
                return Err(Error::ValidationError("search region needs lo < hi on every axis".into()));
            }
        }
        Ok(())
    }

    /// Pretty JSON with every default filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates JSON text.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        Error::ParseError { line: inner.line(), field, message: inner.to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}
