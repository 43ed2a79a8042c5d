//! The empirical renewal measure.
//!
//! Each Monte Carlo draw samples an excursion, Brownian displacements for
//! its intervals, and the auxiliary coefficients `u`, and keeps only the
//! sufficient statistic `(τ, σ², log w, n)` with
//! `w = exp(α τ) Π 1/|X_i|`. The mean of `w g(τ, σ²)` over draws estimates
//! `μ(g)` for every integrable `g`, so one ensemble serves all momenta and
//! spectral parameters by reweighting.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::excursion::{ExcursionSampler, SamplerCaps};
use crate::geometry::{sigma_squared, DressedExcursion};
use crate::moments::{tilted_sums, Tilt};
use crate::rng::shard_rng;

pub mod file;

pub use file::{load_ensemble, save_ensemble, FORMAT_VERSION};

/// One row of the empirical measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedSample {
    pub tau: f64,
    pub sigma2: f64,
    /// Natural log of the nonnegative density weight.
    pub logw: f64,
    pub n: u32,
}

impl DressedSample {
    pub fn new(tau: f64, sigma2: f64, logw: f64, n: u32) -> Result<Self> {
        let s = Self {
            tau,
            sigma2,
            logw,
            n,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid("tau", format!("must be positive and finite, got {}", self.tau)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2 <= self.tau) {
            return Err(invalid(
                "sigma2",
                format!("need 0 < sigma2 <= tau, got {} with tau {}", self.sigma2, self.tau),
            ));
        }
        if !self.logw.is_finite() {
            return Err(invalid("logw", "must be finite"));
        }
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        Ok(())
    }
}

/// Draws one row of the empirical measure.
pub fn draw_dressed_sample<R: Rng + ?Sized>(rng: &mut R, sampler: &ExcursionSampler) -> Result<DressedSample> {
    let excursion = sampler.sample(rng)?;
    let tau = excursion.tau();
    let n = excursion.n() as u32;
    let (dressed, log_inv_norms) = DressedExcursion::sample(rng, excursion)?;
    let sigma2 = sigma_squared(&dressed)?;
    let sample = DressedSample {
        tau,
        sigma2,
        logw: sampler.alpha() * tau + log_inv_norms,
        n,
    };
    sample.validate().map_err(|e| Error::Numerical(format!("sampled row violates invariants: {e}")))?;
    Ok(sample)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMeta {
    pub version: u32,
    pub alpha: f64,
    pub base_seed: u64,
    pub shards: u64,
    pub samples_per_shard: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    meta: EnsembleMeta,
    rows: Vec<DressedSample>,
}

impl Ensemble {
    pub fn from_parts(meta: EnsembleMeta, rows: Vec<DressedSample>) -> Result<Self> {
        if !(meta.alpha > 0.0 && meta.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive, got {}", meta.alpha)));
        }
        let expected = meta.shards.checked_mul(meta.samples_per_shard);
        if expected != Some(rows.len() as u64) {
            return Err(invalid(
                "rows",
                format!(
                    "{} rows but {} shards x {} per shard",
                    rows.len(),
                    meta.shards,
                    meta.samples_per_shard
                ),
            ));
        }
        if rows.is_empty() {
            return Err(invalid("rows", "ensemble must be nonempty"));
        }
        for r in &rows {
            r.validate()?;
        }
        Ok(Self { meta, rows })
    }

    /// A single-shard ensemble from explicit rows, for synthetic checks.
    pub fn synthetic(alpha: f64, rows: Vec<DressedSample>) -> Result<Self> {
        let meta = EnsembleMeta {
            version: FORMAT_VERSION,
            alpha,
            base_seed: 0,
            shards: 1,
            samples_per_shard: rows.len() as u64,
        };
        Self::from_parts(meta, rows)
    }

    pub fn meta(&self) -> &EnsembleMeta {
        &self.meta
    }

    pub fn alpha(&self) -> f64 {
        self.meta.alpha
    }

    pub fn rows(&self) -> &[DressedSample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Fails unless the ensemble was generated at `alpha`.
    pub fn require_alpha(&self, alpha: f64) -> Result<()> {
        if self.meta.alpha != alpha {
            return Err(Error::AlphaMismatch {
                expected: alpha,
                found: self.meta.alpha,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub alpha: f64,
    pub shards: u64,
    pub samples_per_shard: u64,
    pub base_seed: u64,
    pub caps: SamplerCaps,
}

impl EnsembleConfig {
    pub fn new(alpha: f64, shards: u64, samples_per_shard: u64, base_seed: u64) -> Self {
        Self {
            alpha,
            shards,
            samples_per_shard,
            base_seed,
            caps: SamplerCaps::default(),
        }
    }
}

pub fn generate_ensemble(alpha: f64, shards: u64, samples_per_shard: u64, base_seed: u64) -> Result<Ensemble> {
    generate(&EnsembleConfig::new(alpha, shards, samples_per_shard, base_seed))
}

/// Sharded generation. Shard `k` draws from the stream
/// [`shard_rng`]`(base_seed, k)`; rows are concatenated in shard order.
pub fn generate(config: &EnsembleConfig) -> Result<Ensemble> {
    if config.shards == 0 {
        return Err(invalid("shards", "must be positive"));
    }
    if config.samples_per_shard == 0 {
        return Err(invalid("samples_per_shard", "must be positive"));
    }
    let sampler = ExcursionSampler::with_caps(config.alpha, config.caps)?;
    let per_shard: Vec<Result<Vec<DressedSample>>> = (0..config.shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = shard_rng(config.base_seed, shard);
            (0..config.samples_per_shard)
                .map(|draw| {
                    draw_dressed_sample(&mut rng, &sampler).map_err(|e| Error::Shard {
                        shard,
                        draw,
                        source: Box::new(e),
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity((config.shards * config.samples_per_shard) as usize);
    for shard in per_shard {
        rows.extend(shard?);
    }
    Ensemble::from_parts(
        EnsembleMeta {
            version: FORMAT_VERSION,
            alpha: config.alpha,
            base_seed: config.base_seed,
            shards: config.shards,
            samples_per_shard: config.samples_per_shard,
        },
        rows,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssReport {
    pub ess: f64,
    pub max_share: f64,
}

/// Effective sample size of the weights `exp(logw - P²σ²/2 + λτ)`.
pub fn ess(ensemble: &Ensemble, p: f64, lambda: f64) -> Result<EssReport> {
    ess_of_rows(ensemble.rows(), p, lambda)
}

pub(crate) fn ess_of_rows(rows: &[DressedSample], p: f64, lambda: f64) -> Result<EssReport> {
    if rows.is_empty() {
        return Err(invalid("ensemble", "must be nonempty"));
    }
    let s = tilted_sums(rows, Tilt::new(p, lambda));
    if !(s.s0 > 0.0) || !s.shift.is_finite() {
        return Err(Error::Diagnostic(format!("all weights vanish at P = {p}, lambda = {lambda}")));
    }
    Ok(EssReport {
        ess: s.ess(),
        max_share: s.max_share(),
    })
}
