//! Monte Carlo spectral estimates for the Fröhlich polaron from a
//! stochastic excursion representation.
//!
//! The pipeline is: sample excursions ([`excursion`]), dress them with
//! Gaussian data ([`geometry`]), store the resulting rows ([`ensemble`]),
//! and evaluate spectral functionals on the fixed ensemble ([`spectral`],
//! [`renewal`]). [`fk`] holds an independent path-integral estimator and
//! perturbative reference values.

pub mod ensemble;
pub mod error;
pub mod excursion;
pub mod fk;
pub mod geometry;
pub mod moments;
pub mod quad;
pub mod rng;
pub mod renewal;
pub mod spectral;
pub mod validation;

pub use ensemble::{generate_ensemble, load_ensemble, save_ensemble, DressedSample, Ensemble, EnsembleConfig};
pub use error::{Error, Result};
pub use excursion::{sample_excursion, Excursion, ExcursionSampler, Interval};
pub use spectral::{effective_mass, energy_curve, lambda_hat, solve_e0, solve_ep};
