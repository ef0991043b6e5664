pub mod error;
pub mod fidelity;
pub mod io;
pub mod oracle;
pub mod params;
pub mod reconstruct;
pub mod scalar;
pub mod special;
pub mod spectra;
pub mod spectrum;
pub mod state;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SystemParams64 = params::SystemParams<f64>;
pub type Spectrum64 = spectrum::Spectrum<f64>;
pub type PhononDistribution64 = state::PhononDistribution<f64>;
pub type DensityMatrix64 = state::DensityMatrix<f64>;
pub type MechanicalState64 = state::MechanicalState<f64>;
pub type EmissionModel64 = spectra::EmissionModel<f64>;
pub type SamplePlan64 = reconstruct::SamplePlan<f64>;
pub type ReconstructionResult64 = reconstruct::ReconstructionResult<f64>;
pub type Oracle64 = oracle::Oracle<f64>;
