//! Long-format plot tables from a finished experiment directory.

use std::fs;
use std::path::{Path, PathBuf};

use super::fmt_f64;
use super::run::{require, Stage, CONCENTRATION_FILE, SAMPLES_FILE};
use crate::error::{Error, Result};

pub const SCATTER_FILE: &str = "plot_scatter.csv";
pub const SCALING_FILE: &str = "plot_scaling.csv";
pub const SLOPES_FILE: &str = "plot_slopes.csv";
pub const DISTANCES_FILE: &str = "plot_distances.csv";

/// One row of `samples.csv`.
#[derive(Clone, Debug, PartialEq, serde::Deserialize)]
pub struct SampleRow {
    pub xi_x: f64,
    pub xi_y: f64,
    pub xi_z: f64,
    pub eps: f64,
    #[serde(rename = "I_tilde")]
    pub i_tilde: f64,
    #[serde(rename = "I_of_W")]
    pub i_of_w: f64,
    pub phi_norm: f64,
    #[serde(rename = "R_norm")]
    pub r_norm: f64,
    pub iters: usize,
    pub converged: bool,
    #[serde(rename = "S_g")]
    pub s_g: f64,
}

pub fn read_samples(path: &Path) -> Result<Vec<SampleRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    rd.deserialize().map(|r| r.map_err(|e| csv_err(path, e))).collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::ParseError { line, field: path.display().to_string(), message: e.to_string() }
}

/// Fitted log-log exponent of one quantity at one ξ.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeRow {
    pub xi: [f64; 3],
    pub quantity: &'static str,
    pub slope: f64,
}

#[derive(Clone, Debug)]
pub struct PlotData {
    pub files: Vec<PathBuf>,
    pub slopes: Vec<SlopeRow>,
    /// Stages whose tables could not be produced.
    pub skipped: Vec<Stage>,
}

fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    sxy / sxx
}

fn write(dir: &Path, name: &str, text: String, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

/// Writes the scatter, scaling, slope and distance tables. The sweep output is
/// required; the distance table is skipped when the search did not run.
pub fn emit_plot_data(dir: &Path) -> Result<PlotData> {
    let rows = read_samples(&require(dir, SAMPLES_FILE, Stage::Sweep)?)?;
    let mut files = Vec::new();

    let mut scatter = String::from("eps,xi_x,xi_y,xi_z,S_g,I_tilde,I_of_W\n");
    for r in &rows {
        let cols = [r.eps, r.xi_x, r.xi_y, r.xi_z, r.s_g, r.i_tilde, r.i_of_w].map(fmt_f64);
        scatter.push_str(&cols.join(","));
        scatter.push('\n');
    }
    write(dir, SCATTER_FILE, scatter, &mut files)?;

    let mut xis: Vec<[f64; 3]> = Vec::new();
    for r in &rows {
        let x = [r.xi_x, r.xi_y, r.xi_z];
        if !xis.contains(&x) {
            xis.push(x);
        }
    }
    let mut scaling = String::from("xi_x,xi_y,xi_z,quantity,eps,log_eps,log_value\n");
    let mut slopes_csv = String::from("xi_x,xi_y,xi_z,quantity,slope\n");
    let mut slopes = Vec::new();
    for xi in &xis {
        let at: Vec<&SampleRow> = rows.iter().filter(|r| [r.xi_x, r.xi_y, r.xi_z] == *xi).collect();
        for (quantity, get) in [("R_norm", (|r: &SampleRow| r.r_norm) as fn(&SampleRow) -> f64), ("phi_norm", |r| r.phi_norm)] {
            let pts: Vec<(f64, f64)> = at.iter().map(|r| (r.eps, get(r))).filter(|(_, v)| *v > 0.0).collect();
            for (e, v) in &pts {
                let cols = [fmt_f64(xi[0]), fmt_f64(xi[1]), fmt_f64(xi[2]), quantity.into(), fmt_f64(*e), fmt_f64(e.ln()), fmt_f64(v.ln())];
                scaling.push_str(&cols.join(","));
                scaling.push('\n');
            }
            if pts.len() >= 2 {
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                let slope = loglog_slope(&x, &y);
                let cols = [fmt_f64(xi[0]), fmt_f64(xi[1]), fmt_f64(xi[2]), quantity.into(), fmt_f64(slope)];
                slopes_csv.push_str(&cols.join(","));
                slopes_csv.push('\n');
                slopes.push(SlopeRow { xi: *xi, quantity, slope });
            }
        }
    }
    write(dir, SCALING_FILE, scaling, &mut files)?;
    write(dir, SLOPES_FILE, slopes_csv, &mut files)?;

    let mut skipped = Vec::new();
    match require(dir, CONCENTRATION_FILE, Stage::Search) {
        Ok(path) => {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::ParseError {
                line: e.line(),
                field: CONCENTRATION_FILE.into(),
                message: e.to_string(),
            })?;
            let mut table = String::from("track,eps,distance,spacing\n");
            let tracks = v["report"]["tracks"].as_array().cloned().unwrap_or_default();
            for (k, t) in tracks.iter().enumerate() {
                for p in t["points"].as_array().cloned().unwrap_or_default() {
                    let (Some(e), Some(d), Some(h)) = (p["eps"].as_f64(), p["distance"].as_f64(), p["spacing"].as_f64()) else {
                        continue;
                    };
                    table.push_str(&format!("{k},{},{},{}\n", fmt_f64(e), fmt_f64(d), fmt_f64(h)));
                }
            }
            write(dir, DISTANCES_FILE, table, &mut files)?;
        }
        Err(_) => skipped.push(Stage::Search),
    }
    Ok(PlotData { files, slopes, skipped })
}
