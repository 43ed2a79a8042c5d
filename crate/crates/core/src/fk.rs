//! Direct path-integral Monte Carlo for `f_P(T) = ⟨Ω, e^{-T H(P)} Ω⟩` and
//! weak-coupling reference values.
//!
//! `f_P(T) = E[cos(P X_T^z) exp(α/2 ∫∫ e^{-|t-s|} / |X_t - X_s| ds dt)]`
//! over three-dimensional Brownian paths. The double integral uses the
//! midpoint rule off the diagonal; diagonal cells carry the exact
//! expectation `∫∫_{cell²} e^{-|t-s|} sqrt(2/(π|t-s|))`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::quad::adaptive_simpson;
use crate::rng::shard_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub t: f64,
    pub steps: usize,
    pub paths: usize,
    pub alpha: f64,
    pub p: f64,
}

impl PathConfig {
    pub fn new(t: f64, steps: usize, paths: usize, alpha: f64, p: f64) -> Result<Self> {
        let c = Self { t, steps, paths, alpha, p };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(invalid("T", format!("must be positive, got {}", self.t)));
        }
        if self.steps < 2 {
            return Err(invalid("steps", format!("must be at least 2, got {}", self.steps)));
        }
        if self.paths < 2 {
            return Err(invalid("paths", format!("must be at least 2, got {}", self.paths)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be nonnegative, got {}", self.alpha)));
        }
        if !(self.p >= 0.0 && self.p.is_finite()) {
            return Err(invalid("P", format!("must be nonnegative, got {}", self.p)));
        }
        Ok(())
    }
}

/// `∫∫_{[0,h]²} e^{-|t-s|} sqrt(2/(π|t-s|)) ds dt`
/// `= 4 sqrt(2/π) ∫₀^{√h} (h - x²) e^{-x²} dx`.
pub fn diagonal_cell(h: f64) -> f64 {
    4.0 * (2.0 / PI).sqrt() * adaptive_simpson(|x| (h - x * x) * (-x * x).exp(), 0.0, h.sqrt(), 1e-15)
}

/// Precomputed per-configuration constants.
struct Kernel {
    h: f64,
    /// `2 h² e^{-l h}` for lag `l`.
    lag_weight: Vec<f64>,
    diagonal_total: f64,
}

impl Kernel {
    fn new(t: f64, steps: usize) -> Self {
        let h = t / steps as f64;
        Self {
            h,
            lag_weight: (0..steps).map(|l| 2.0 * h * h * (-(l as f64) * h).exp()).collect(),
            diagonal_total: steps as f64 * diagonal_cell(h),
        }
    }

    /// Discretized double integral from positions at cell midpoints.
    fn action(&self, mid: &[[f64; 3]]) -> f64 {
        let mut s = self.diagonal_total;
        for i in 0..mid.len() {
            let a = mid[i];
            for (j, b) in mid.iter().enumerate().skip(i + 1) {
                let d = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt();
                s += self.lag_weight[j - i] / d;
            }
        }
        s
    }
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> [f64; 3] {
    [
        sd * rng.sample::<f64, _>(StandardNormal),
        sd * rng.sample::<f64, _>(StandardNormal),
        sd * rng.sample::<f64, _>(StandardNormal),
    ]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Brownian path at `j · h / refine` for `j = 0..=refine·steps`.
fn fine_path<R: Rng + ?Sized>(rng: &mut R, h: f64, steps: usize, refine: usize) -> Vec<[f64; 3]> {
    let dt = h / refine as f64;
    let sd = dt.sqrt();
    let mut x = [0.0; 3];
    let mut out = Vec::with_capacity(refine * steps + 1);
    out.push(x);
    for _ in 0..refine * steps {
        x = add(x, gaussian3(rng, sd));
        out.push(x);
    }
    out
}

/// Running sums for the cosine and sine estimators.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Acc {
    n: usize,
    cos: f64,
    cos2: f64,
    sin: f64,
    sin2: f64,
}

impl Acc {
    fn push(&mut self, phase: f64, weight: f64) {
        let c = phase.cos() * weight;
        let s = phase.sin() * weight;
        self.n += 1;
        self.cos += c;
        self.cos2 += c * c;
        self.sin += s;
        self.sin2 += s * s;
    }

    fn merge(self, o: Self) -> Self {
        Self {
            n: self.n + o.n,
            cos: self.cos + o.cos,
            cos2: self.cos2 + o.cos2,
            sin: self.sin + o.sin,
            sin2: self.sin2 + o.sin2,
        }
    }

    fn finish(&self) -> FkEstimate {
        let n = self.n as f64;
        let se = |s: f64, s2: f64| {
            let m = s / n;
            ((s2 / n - m * m).max(0.0) / (n - 1.0)).sqrt()
        };
        FkEstimate {
            value: self.cos / n,
            stderr: se(self.cos, self.cos2),
            sine_mean: self.sin / n,
            sine_stderr: se(self.sin, self.sin2),
            paths: self.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Mean of the omitted imaginary part `sin(P X_T^z) · weight`.
    pub sine_mean: f64,
    pub sine_stderr: f64,
    pub paths: usize,
}

impl FkEstimate {
    /// Whether the imaginary part is consistent with zero at 4 standard errors.
    pub fn sine_consistent(&self) -> bool {
        self.sine_mean.abs() <= 4.0 * self.sine_stderr
    }
}

fn one_path<R: Rng + ?Sized>(rng: &mut R, config: &PathConfig, kernel: &Kernel, acc: &mut Acc) {
    let path = fine_path(rng, kernel.h, config.steps, 2);
    let mid: Vec<[f64; 3]> = (0..config.steps).map(|k| path[2 * k + 1]).collect();
    let weight = if config.alpha == 0.0 {
        1.0
    } else {
        (0.5 * config.alpha * kernel.action(&mid)).exp()
    };
    acc.push(config.p * path[2 * config.steps][2], weight);
}

pub fn fk_estimate<R: Rng + ?Sized>(rng: &mut R, config: &PathConfig) -> Result<FkEstimate> {
    config.validate()?;
    let kernel = Kernel::new(config.t, config.steps);
    let mut acc = Acc::default();
    for _ in 0..config.paths {
        one_path(rng, config, &kernel, &mut acc);
    }
    Ok(acc.finish())
}

/// Splits `config.paths` over `shards` independent streams derived from
/// `base_seed`, combining shard sums in shard order.
pub fn fk_estimate_sharded(config: &PathConfig, base_seed: u64, shards: u64) -> Result<FkEstimate> {
    config.validate()?;
    if shards == 0 || shards as usize > config.paths {
        return Err(invalid("shards", "must be between 1 and the path count"));
    }
    let kernel = Kernel::new(config.t, config.steps);
    let per = config.paths / shards as usize;
    let extra = config.paths % shards as usize;
    let parts: Vec<Acc> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = shard_rng(base_seed, s);
            let mut acc = Acc::default();
            let count = per + usize::from((s as usize) < extra);
            for _ in 0..count {
                one_path(&mut rng, config, &kernel, &mut acc);
            }
            acc
        })
        .collect();
    Ok(parts.into_iter().fold(Acc::default(), Acc::merge).finish())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepHalving {
    pub coarse: FkEstimate,
    pub fine: FkEstimate,
    /// Mean and standard error of `fine - coarse` path by path.
    pub difference: f64,
    pub difference_stderr: f64,
}

/// Estimates at `steps` and `2·steps` on common Brownian paths.
pub fn fk_step_halving<R: Rng + ?Sized>(rng: &mut R, config: &PathConfig) -> Result<StepHalving> {
    config.validate()?;
    let coarse_k = Kernel::new(config.t, config.steps);
    let fine_k = Kernel::new(config.t, 2 * config.steps);
    let (mut a, mut b) = (Acc::default(), Acc::default());
    let (mut d, mut d2) = (0.0, 0.0);
    for _ in 0..config.paths {
        // Resolution h/4 contains both midpoint sets.
        let path = fine_path(rng, coarse_k.h, config.steps, 4);
        let end = path[4 * config.steps][2] * config.p;
        let mc: Vec<[f64; 3]> = (0..config.steps).map(|k| path[4 * k + 2]).collect();
        let mf: Vec<[f64; 3]> = (0..2 * config.steps).map(|k| path[2 * k + 1]).collect();
        let wc = (0.5 * config.alpha * coarse_k.action(&mc)).exp();
        let wf = (0.5 * config.alpha * fine_k.action(&mf)).exp();
        a.push(end, wc);
        b.push(end, wf);
        let diff = end.cos() * (wf - wc);
        d += diff;
        d2 += diff * diff;
    }
    let n = config.paths as f64;
    let mean = d / n;
    Ok(StepHalving {
        coarse: a.finish(),
        fine: b.finish(),
        difference: mean,
        difference_stderr: ((d2 / n - mean * mean).max(0.0) / (n - 1.0)).sqrt(),
    })
}

/// `∫₀^∞ g(k) dk` via `k = tan θ`.
fn half_line(g: impl Fn(f64) -> f64) -> f64 {
    adaptive_simpson(
        |th| {
            let c = th.cos();
            g(th.tan()) / (c * c)
        },
        0.0,
        FRAC_PI_2,
        1e-13,
    )
}

/// Second-order ground-state energy `-√2 α`.
pub fn perturbative_e0(alpha: f64) -> f64 {
    -SQRT_2 * alpha
}

/// `-∫ |v(k)|² / (k²/2 + 1) d³k` with `|v(k)|² = α / (2π² k²)`, radially.
pub fn perturbative_e0_quadrature(alpha: f64) -> f64 {
    -(2.0 * alpha / PI) * half_line(|k| 1.0 / (0.5 * k * k + 1.0))
}

/// Second-order effective mass `1 + √2 α / 6`.
pub fn perturbative_meff(alpha: f64) -> f64 {
    1.0 + SQRT_2 * alpha / 6.0
}

/// `1 + (2/3) ∫ |v(k)|² k² / (k²/2 + 1)³ d³k`, radially.
pub fn perturbative_meff_quadrature(alpha: f64) -> f64 {
    1.0 + (2.0 / 3.0) * (2.0 * alpha / PI) * half_line(|k| k * k / (0.5 * k * k + 1.0).powi(3))
}
