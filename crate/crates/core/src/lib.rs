//! Numerical lab for concentrating solutions of Klein–Gordon–Maxwell and
//! Schrödinger–Maxwell systems on closed 3-manifolds.

pub mod ansatz;
pub mod error;
pub mod experiment;
pub mod fft3;
pub mod field;
pub mod geometry;
pub mod ode;
pub mod quadrature;
pub mod radial;
pub mod reduction;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{lit, Real};

pub type RadialProfileF64 = radial::RadialProfile<f64>;
pub type ProfileSetF64 = radial::ProfileSet<f64>;
pub type UniversalConstantsF64 = radial::UniversalConstants<f64>;
pub type MetricChartF64 = geometry::MetricChart<f64>;
pub type GridGeometryF64 = field::GridGeometry<f64>;
pub type GridFieldF64 = field::GridField<f64>;
pub type SystemParamsF64 = field::SystemParams<f64>;
pub type NormalCoordinatesF64 = ansatz::NormalCoordinates<f64>;
pub type PeakAnsatzF64 = ansatz::PeakAnsatz<f64>;
pub type PhiSolutionF64 = reduction::PhiSolution<f64>;
pub type ReducedSampleF64 = reduction::ReducedSample<f64>;
pub type ConcentrationReportF64 = reduction::ConcentrationReport<f64>;
pub type ExpansionFitF64 = reduction::ExpansionFit<f64>;
