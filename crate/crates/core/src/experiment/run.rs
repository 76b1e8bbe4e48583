//! Pipeline orchestration: profiles → geometry-check → sweep → fit → search.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{CachePolicy, ExperimentConfig, SearchObjectiveSpec};
use super::fmt_f64;
use crate::ansatz::{coupling_coefficient, AnsatzOptions, NormalCoordinates};
use crate::error::{Error, Result};
use crate::field::{GridGeometry, Scheme, SystemParams};
use crate::geometry::{builtin_metric, MetricChart, Vec3};
use crate::radial::ProfileSet;
use crate::reduction::{
    find_concentration_points, fit_expansion, fit_expansion_from_samples, reduced_energy_from, ConcentrationReport,
    ExpansionFit, PhiOptions, ReducedSample, SearchConfig, SearchLevel, SearchObjective,
};

pub const SAMPLES_HEADER: &str = "xi_x,xi_y,xi_z,eps,I_tilde,I_of_W,phi_norm,R_norm,iters,converged,S_g";

pub const CONFIG_FILE: &str = "config.json";
pub const PROFILES_FILE: &str = "profiles.txt";
pub const CONSTANTS_FILE: &str = "constants.json";
pub const GEOMETRY_FILE: &str = "geometry.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const FIT_FILE: &str = "fit.json";
pub const CONCENTRATION_FILE: &str = "concentration.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Profiles,
    GeometryCheck,
    Sweep,
    Fit,
    Search,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Profiles, Stage::GeometryCheck, Stage::Sweep, Stage::Fit, Stage::Search];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Profiles => "profiles",
            Stage::GeometryCheck => "geometry-check",
            Stage::Sweep => "sweep",
            Stage::Fit => "fit",
            Stage::Search => "search",
        }
    }

    /// Artifact written by the stage.
    pub fn artifact(self) -> &'static str {
        match self {
            Stage::Profiles => CONSTANTS_FILE,
            Stage::GeometryCheck => GEOMETRY_FILE,
            Stage::Sweep => SAMPLES_FILE,
            Stage::Fit => FIT_FILE,
            Stage::Search => CONCENTRATION_FILE,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::ValidationError(format!("unknown stage `{s}`; expected one of profiles, geometry-check, sweep, fit, search")))
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Last stage to run.
    pub stage: Stage,
    /// Worker threads for the `(ξ, ε)` jobs; `None` uses one per core.
    pub threads: Option<usize>,
    /// Overrides the configured output directory.
    pub out: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { stage: Stage::Search, threads: None, out: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldEnergyLevel {
    pub eps: f64,
    /// Mean over ξ of `G/ε²` with `G = ε⁻³∫Ψ(W)W²`.
    pub unweighted_over_eps2: f64,
    pub q_weighted_over_eps2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    /// `scalar_curvature`, or `pseudo_curvature` on a flat landscape.
    pub design: String,
    pub fit: ExpansionFit<f64>,
    pub alpha_over_6: f64,
    pub c3_over_alpha_over_6: f64,
    pub c3_below_noise: bool,
    pub finest_eps: f64,
    /// `max_ξ |Ĩ_ε(ξ) − I_ε(W_{ε,ξ})|` at the finest ε.
    pub max_gap: f64,
    pub max_gap_over_eps2: f64,
    pub field_energy: Vec<FieldEnergyLevel>,
    /// `G/ε² ≈ β + dε` fitted over the levels: `[β, d]`, unweighted.
    pub beta_fit: [f64; 2],
    pub beta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrackSummary {
    pub partner_point: Option<Vec3<f64>>,
    pub final_xi: Vec3<f64>,
    pub final_distance: Option<f64>,
    pub final_spacing: f64,
    /// `d_g / h` at the finest level.
    pub grid_cells: Option<f64>,
    pub distances: Vec<(f64, Option<f64>)>,
    pub distances_non_increasing: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchOutput {
    pub report: ConcentrationReport<f64>,
    pub summary: Vec<TrackSummary>,
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub completed: Vec<Stage>,
    pub profiles: Option<ProfileSet<f64>>,
    pub samples: Vec<ReducedSample<f64>>,
    pub fit: Option<FitReport>,
    pub search: Option<SearchOutput>,
}

struct Writer {
    dir: PathBuf,
    completed: Vec<Stage>,
    artifacts: BTreeMap<String, String>,
}

impl Writer {
    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.artifacts.insert(name.to_string(), name.to_string());
        Ok(())
    }

    fn manifest(&self, failure: Option<(Stage, &Error)>) -> Result<()> {
        let m = json!({
            "completed": self.completed.iter().map(|s| s.name()).collect::<Vec<_>>(),
            "failed": failure.map(|(s, e)| json!({"stage": s.name(), "error": e.to_string()})),
            "artifacts": self.artifacts.keys().collect::<Vec<_>>(),
        });
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n").map_err(|e| Error::io(&path, e))
    }
}

fn pretty<S: Serialize>(v: &S) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

/// Runs the pipeline up to `options.stage`, writing artifacts and a manifest of
/// completed stages. On failure the manifest names the failing stage.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RunSummary> {
    let mut config = config.clone();
    if let Some(out) = &options.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut w = Writer { dir: dir.clone(), completed: Vec::new(), artifacts: BTreeMap::new() };
    w.write(CONFIG_FILE, &(config.to_json() + "\n"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::ValidationError(format!("thread pool: {e}")))?;
    let mut summary = RunSummary { out_dir: dir, ..Default::default() };
    let mut state = Pipeline::new(&config)?;
    for stage in Stage::ALL.into_iter().filter(|s| *s <= options.stage) {
        let res = pool.install(|| state.run_stage(stage, &mut w, &mut summary));
        match res {
            Ok(()) => {
                w.completed.push(stage);
                w.manifest(None)?;
            }
            Err(e) => {
                w.manifest(Some((stage, &e)))?;
                return Err(e);
            }
        }
    }
    summary.completed = w.completed.clone();
    Ok(summary)
}

struct Pipeline<'a> {
    config: &'a ExperimentConfig,
    params: SystemParams<f64>,
    chart: Arc<MetricChart<f64>>,
    grids: BTreeMap<usize, Arc<GridGeometry<f64>>>,
    coords: BTreeMap<(usize, usize), Arc<NormalCoordinates<f64>>>,
}

impl<'a> Pipeline<'a> {
    fn new(config: &'a ExperimentConfig) -> Result<Self> {
        let params = config.params()?;
        let chart = builtin_metric(&config.metric.name, &config.metric_params(), config.metric.box_length)?
            .with_cutoff_radius(config.metric.cutoff_radius)?;
        Ok(Self { config, params, chart: Arc::new(chart), grids: BTreeMap::new(), coords: BTreeMap::new() })
    }

    fn grid(&mut self, eps: f64) -> Result<Arc<GridGeometry<f64>>> {
        let n = self.config.grid_size(eps);
        if let Some(g) = self.grids.get(&n) {
            return Ok(g.clone());
        }
        let g = GridGeometry::new(self.chart.clone(), n, Scheme::Spectral)?;
        self.grids.insert(n, g.clone());
        Ok(g)
    }

    fn ansatz_options(&self) -> AnsatzOptions<f64> {
        AnsatzOptions { points_per_eps: self.config.tolerances.points_per_eps }
    }

    fn phi_options(&self) -> PhiOptions<f64> {
        let t = &self.config.tolerances;
        PhiOptions { tol: t.phi_tol, max_iter: t.phi_max_iter, inner_tol: t.inner_tol }
    }

    fn run_stage(&mut self, stage: Stage, w: &mut Writer, summary: &mut RunSummary) -> Result<()> {
        match stage {
            Stage::Profiles => self.profiles(w, summary),
            Stage::GeometryCheck => self.geometry_check(w),
            Stage::Sweep => self.sweep(w, summary),
            Stage::Fit => self.fit(w, summary),
            Stage::Search => self.search(w, summary),
        }
    }

    fn profiles(&mut self, w: &mut Writer, summary: &mut RunSummary) -> Result<()> {
        let (l, p, q) = (self.params.lambda(), self.params.p_exp, self.params.q);
        let set = match (self.config.resolved_cache_dir(), self.config.cache) {
            (Some(dir), CachePolicy::Refresh) => {
                let set = ProfileSet::compute(l, p, q)?;
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                set.write_cache(&dir.join(ProfileSet::<f64>::cache_file_name(l, p, q)))?;
                set
            }
            (dir, _) => ProfileSet::load_or_compute(dir.as_deref(), l, p, q)?,
        };
        w.write(PROFILES_FILE, &set.to_cache_string())?;
        let c = &set.constants;
        let report = json!({
            "system": self.params.kind,
            "lambda": l,
            "p": p,
            "q": q,
            "C": c.c_energy,
            "C_lemma_sign": c.c_energy_lemma_sign,
            "alpha": c.alpha,
            "alpha_over_6": c.alpha / 6.0,
            "beta": {
                "direct": c.beta,
                "gradient": c.beta_gradient,
                "relative_gap": ((c.beta - c.beta_gradient) / c.beta).abs(),
            },
            "field_energy_limits": {
                "unweighted": c.beta,
                "q_weighted": q * c.beta,
                "coupling_coefficient": coupling_coefficient(&self.params),
            },
            "integrals": {"u2": c.mass_u2, "grad_u2": c.grad_u2, "u_p": c.power_p},
            "quadrature": {
                "rule": c.provenance.rule,
                "nodes": c.provenance.nodes,
                "r_max": c.provenance.r_max,
                "node_spacing": c.provenance.node_spacing,
            },
        });
        w.write(CONSTANTS_FILE, &pretty(&report))?;
        summary.profiles = Some(set);
        Ok(())
    }

    fn geometry_check(&mut self, w: &mut Writer) -> Result<()> {
        let chart = self.chart.clone();
        let mut points = Vec::new();
        for xi in self.config.xi_points() {
            let s = chart.scalar_curvature(&xi)?;
            let formula = chart.conformal_scalar_curvature(&xi);
            let v = [0.3, -0.2, 0.25];
            let round_trip = chart.exp_map(&xi, &v).and_then(|x| chart.log_map(&xi, &x)).map(|u| {
                let d = [0, 1, 2].map(|a| u[a] - v[a]);
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            });
            points.push(json!({
                "xi": xi,
                "S_g": s,
                "S_g_formula": formula,
                "formula_relative_gap": formula.map(|f| (f - s).abs() / f.abs().max(1e-300)),
                "exp_log_round_trip": round_trip.ok(),
            }));
        }
        let levels: Vec<_> = self
            .config
            .eps
            .iter()
            .map(|e| {
                let n = self.config.grid_size(*e);
                json!({"eps": e, "n": n, "eps_over_h": e * n as f64 / self.config.metric.box_length})
            })
            .collect();
        let report = json!({
            "metric": chart.name(),
            "params": chart.params(),
            "box_length": self.config.metric.box_length,
            "cutoff_radius": chart.cutoff_radius(),
            "flat": chart.is_flat(),
            "min_eigenvalue": chart.min_eigenvalue(),
            "levels": levels,
            "points": points,
        });
        w.write(GEOMETRY_FILE, &pretty(&report))
    }

    fn profile(summary: &RunSummary) -> Result<&ProfileSet<f64>> {
        summary.profiles.as_ref().ok_or_else(|| Error::MissingStage("profiles".into()))
    }

    fn sweep(&mut self, w: &mut Writer, summary: &mut RunSummary) -> Result<()> {
        let profile = Self::profile(summary)?.ground.clone();
        let xis = self.config.xi_points();
        let (aopt, popt) = (self.ansatz_options(), self.phi_options());
        let mut samples = Vec::new();
        for eps in self.config.eps.clone() {
            let geom = self.grid(eps)?;
            let n = geom.n();
            let missing: Vec<usize> = (0..xis.len()).filter(|k| !self.coords.contains_key(&(n, *k))).collect();
            let fresh: Vec<Result<Arc<NormalCoordinates<f64>>>> =
                missing.par_iter().map(|k| NormalCoordinates::compute(&geom, &xis[*k]).map(Arc::new)).collect();
            for (k, c) in missing.into_iter().zip(fresh) {
                self.coords.insert((n, k), c?);
            }
            let coords: Vec<_> = (0..xis.len()).map(|k| self.coords[&(n, k)].clone()).collect();
            let level: Vec<Result<ReducedSample<f64>>> = coords
                .par_iter()
                .map(|c| reduced_energy_from(c, eps, &self.params, &profile, &aopt, &popt))
                .collect();
            for s in level {
                samples.push(s?);
            }
            // coordinates of a grid no later level uses are dropped
            let later: Vec<usize> = self.config.eps.iter().filter(|e| **e < eps).map(|e| self.config.grid_size(*e)).collect();
            if !later.contains(&n) {
                self.coords.retain(|(m, _), _| *m != n);
            }
        }
        w.write(SAMPLES_FILE, &samples_csv(&samples))?;
        summary.samples = samples;
        Ok(())
    }

    fn fit(&mut self, w: &mut Writer, summary: &mut RunSummary) -> Result<()> {
        if summary.samples.is_empty() {
            return Err(Error::MissingStage("sweep".into()));
        }
        let constants = &Self::profile(summary)?.constants;
        let samples = &summary.samples;
        let (design, fit) = match fit_expansion_from_samples(samples) {
            Ok(f) => ("scalar_curvature", f),
            Err(Error::DegenerateDesign(_)) => {
                // flat landscape: regress against a centred index so c3 measures noise
                let xis = self.config.xi_points();
                let m = xis.len() as f64;
                let pseudo: Vec<f64> = samples
                    .iter()
                    .map(|s| {
                        let k = xis.iter().position(|x| *x == s.xi).unwrap_or(0) as f64;
                        (k - (m - 1.0) / 2.0) / m
                    })
                    .collect();
                ("pseudo_curvature", fit_expansion(samples, &pseudo)?)
            }
            Err(e) => return Err(e),
        };
        let finest = *self.config.eps.last().expect("validated non-empty");
        let max_gap = samples
            .iter()
            .filter(|s| s.eps == finest)
            .map(|s| (s.i_tilde - s.i_of_w).abs())
            .fold(0.0, f64::max);
        let field_energy: Vec<FieldEnergyLevel> = self
            .config
            .eps
            .iter()
            .map(|e| {
                let at: Vec<_> = samples.iter().filter(|s| s.eps == *e).collect();
                let k = at.len() as f64;
                FieldEnergyLevel {
                    eps: *e,
                    unweighted_over_eps2: at.iter().map(|s| s.parts_w.g.unweighted).sum::<f64>() / k / (e * e),
                    q_weighted_over_eps2: at.iter().map(|s| s.parts_w.g.q_weighted).sum::<f64>() / k / (e * e),
                }
            })
            .collect();
        let beta_fit = line_fit(
            &field_energy.iter().map(|f| f.eps).collect::<Vec<_>>(),
            &field_energy.iter().map(|f| f.unweighted_over_eps2).collect::<Vec<_>>(),
        );
        let alpha6 = constants.alpha / 6.0;
        let report = FitReport {
            design: design.into(),
            c3_below_noise: fit.c3_below_noise(),
            c3_over_alpha_over_6: fit.c3 / alpha6,
            fit,
            alpha_over_6: alpha6,
            finest_eps: finest,
            max_gap,
            max_gap_over_eps2: max_gap / (finest * finest),
            field_energy,
            beta_fit,
            beta: constants.beta,
        };
        w.write(FIT_FILE, &pretty(&report))?;
        summary.fit = Some(report);
        Ok(())
    }

    fn search(&mut self, w: &mut Writer, summary: &mut RunSummary) -> Result<()> {
        let profile = Self::profile(summary)?.ground.clone();
        let fit = summary.fit.as_ref().ok_or_else(|| Error::MissingStage("fit".into()))?;
        let c3_sign: i8 = if fit.c3_below_noise || fit.fit.c3 >= 0.0 { 1 } else { -1 };
        self.coords.clear();
        let rs = self.config.search_cutoff_radius();
        let chart = if rs == self.chart.cutoff_radius() {
            self.chart.clone()
        } else {
            Arc::new((*self.chart).clone().with_cutoff_radius(rs)?)
        };
        let mut levels = Vec::new();
        for eps in self.config.search_eps() {
            let geom = if Arc::ptr_eq(&chart, &self.chart) {
                self.grid(eps)?
            } else {
                GridGeometry::new(chart.clone(), self.config.grid_size(eps), Scheme::Spectral)?
            };
            levels.push(SearchLevel { eps, geom });
        }
        let s = &self.config.search;
        let cfg = SearchConfig {
            coarse_points: s.coarse_points,
            objective: match s.objective {
                SearchObjectiveSpec::AnsatzEnergy => SearchObjective::AnsatzEnergy,
                SearchObjectiveSpec::ReducedEnergy => SearchObjective::ReducedEnergy,
            },
            max_evals: s.max_evals,
            max_candidates: s.max_candidates,
            curvature_starts: s.curvature_starts,
            flat_tol: s.flat_tol,
            reduced_at_finest: true,
            region: s.region,
            ansatz: self.ansatz_options(),
            phi: self.phi_options(),
        };
        let report = find_concentration_points(&levels, &self.params, &profile, c3_sign, &cfg)?;
        let summary_rows = report
            .tracks
            .iter()
            .map(|t| {
                let last = t.points.last().expect("tracks are non-empty");
                TrackSummary {
                    partner_point: t.partner_point,
                    final_xi: last.xi,
                    final_distance: last.distance,
                    final_spacing: last.spacing,
                    grid_cells: last.distance.map(|d| d / last.spacing),
                    distances: t.points.iter().map(|p| (p.eps, p.distance)).collect(),
                    distances_non_increasing: t.distances_non_increasing(last.spacing),
                }
            })
            .collect();
        let out = SearchOutput { report, summary: summary_rows };
        w.write(CONCENTRATION_FILE, &pretty(&out))?;
        summary.search = Some(out);
        Ok(())
    }
}

/// Least-squares `y ≈ c + d·x`.
fn line_fit(x: &[f64], y: &[f64]) -> [f64; 2] {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let d = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    [my - d * mx, d]
}

pub fn samples_csv(samples: &[ReducedSample<f64>]) -> String {
    let mut out = String::from(SAMPLES_HEADER);
    out.push('\n');
    for s in samples {
        let cols = [
            fmt_f64(s.xi[0]),
            fmt_f64(s.xi[1]),
            fmt_f64(s.xi[2]),
            fmt_f64(s.eps),
            fmt_f64(s.i_tilde),
            fmt_f64(s.i_of_w),
            fmt_f64(s.phi_norm),
            fmt_f64(s.residual_norm),
            s.iterations.to_string(),
            s.converged.to_string(),
            fmt_f64(s.scalar_curvature),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub(crate) fn require(dir: &Path, name: &str, stage: Stage) -> Result<PathBuf> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingStage(stage.name().into()))
    }
}
