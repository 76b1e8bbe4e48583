//! Configuration, orchestration and tabular output of reduction experiments.

mod config;
mod plot;
mod run;

pub use config::{
    parse_config, parse_config_str, CachePolicy, ExperimentConfig, MetricSpec, Resolution, SearchObjectiveSpec, SearchSpec,
    Tolerances, XiSampling, CACHE_ENV,
};
pub use plot::{emit_plot_data, read_samples, PlotData, SampleRow, SlopeRow, DISTANCES_FILE, SCALING_FILE, SCATTER_FILE, SLOPES_FILE};
pub use run::{
    run_experiment, samples_csv, FieldEnergyLevel, FitReport, RunOptions, RunSummary, SearchOutput, Stage, TrackSummary,
    CONCENTRATION_FILE, CONFIG_FILE, CONSTANTS_FILE, FIT_FILE, GEOMETRY_FILE, MANIFEST_FILE, PROFILES_FILE, SAMPLES_FILE,
    SAMPLES_HEADER,
};

/// Shortest decimal string that parses back to `x`.
pub fn fmt_f64(x: f64) -> String {
    ryu::Buffer::new().format(x).to_string()
}
