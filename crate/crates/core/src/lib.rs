//! Isogeometric density-based topology optimization of Reissner-Mindlin
//! shells, with marching-squares extraction and fair B-spline fitting of the
//! resulting boundaries.

pub mod cli_io;
pub mod density_field;
pub mod error;
pub mod fairing;
pub mod linalg;
pub mod mma;
pub mod opt_driver;
pub mod rm_analysis;
pub mod scalar;
pub mod sensitivities;
pub mod shell_geometry;
pub mod splines;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type KnotVector64 = splines::KnotVector<f64>;
pub type NurbsSurface64 = splines::NurbsSurface<f64>;
pub type ShellModel64 = shell_geometry::ShellModel<f64>;
pub type AnalysisModel64 = rm_analysis::AnalysisModel<f64>;
pub type DensityField64 = density_field::DensityField<f64>;
pub type OptProblem64 = opt_driver::OptProblem<f64>;
pub type OptResult64 = opt_driver::OptResult<f64>;
pub type FairCurve64 = fairing::FairCurve<f64>;

pub type KnotVector32 = splines::KnotVector<f32>;
pub type NurbsSurface32 = splines::NurbsSurface<f32>;
pub type ShellModel32 = shell_geometry::ShellModel<f32>;
pub type AnalysisModel32 = rm_analysis::AnalysisModel<f32>;
pub type DensityField32 = density_field::DensityField<f32>;
pub type OptProblem32 = opt_driver::OptProblem<f32>;
pub type OptResult32 = opt_driver::OptResult<f32>;
pub type FairCurve32 = fairing::FairCurve<f32>;
