//! Shifted exponential sums over ensemble rows.
//!
//! Every estimator downstream of the ensemble is a ratio of sums of
//! `exp(a_j) g_j` with `a_j = logw_j - P² σ²_j / 2 + λ τ_j`. The sums are
//! kept relative to a running maximum so that `e^{λτ}` for long excursions
//! never overflows. Reductions run over fixed-size chunks that are combined
//! in index order, which makes every result independent of the thread
//! count.

use rayon::prelude::*;

use crate::ensemble::DressedSample;

const CHUNK: usize = 1 << 14;

/// Number of contiguous batches used for jackknife error bars.
pub const JACKKNIFE_BATCHES: usize = 32;

/// The exponent applied to each row: `logw - p2_half σ² + λ τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tilt {
    pub p2_half: f64,
    pub lambda: f64,
}

impl Tilt {
    pub fn new(p: f64, lambda: f64) -> Self {
        Self {
            p2_half: 0.5 * p * p,
            lambda,
        }
    }

    #[inline]
    pub fn exponent(&self, row: &DressedSample) -> f64 {
        row.logw - self.p2_half * row.sigma2 + self.lambda * row.tau
    }
}

/// Sums of `exp(a_j - shift)` times `1`, `τ_j`, `σ²_j`, and of
/// `exp(2(a_j - shift))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedSums {
    pub count: usize,
    pub shift: f64,
    pub max_exponent: f64,
    pub s0: f64,
    pub s_tau: f64,
    pub s_sigma2: f64,
    pub s_sq: f64,
}

impl TiltedSums {
    pub fn empty() -> Self {
        Self {
            count: 0,
            shift: f64::NEG_INFINITY,
            max_exponent: f64::NEG_INFINITY,
            s0: 0.0,
            s_tau: 0.0,
            s_sigma2: 0.0,
            s_sq: 0.0,
        }
    }

    fn rescaled(&self, shift: f64) -> Self {
        if self.count == 0 || self.shift == shift {
            return Self { shift, ..*self };
        }
        let f = (self.shift - shift).exp();
        Self {
            shift,
            s0: self.s0 * f,
            s_tau: self.s_tau * f,
            s_sigma2: self.s_sigma2 * f,
            s_sq: self.s_sq * f * f,
            ..*self
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let shift = self.shift.max(other.shift);
        let a = self.rescaled(shift);
        let b = other.rescaled(shift);
        Self {
            count: a.count + b.count,
            shift,
            max_exponent: a.max_exponent.max(b.max_exponent),
            s0: a.s0 + b.s0,
            s_tau: a.s_tau + b.s_tau,
            s_sigma2: a.s_sigma2 + b.s_sigma2,
            s_sq: a.s_sq + b.s_sq,
        }
    }

    /// Removes `other` (a sub-collection accumulated separately) from `self`.
    pub fn without(&self, other: &Self) -> Self {
        let o = other.rescaled(self.shift);
        Self {
            count: self.count - other.count,
            s0: self.s0 - o.s0,
            s_tau: self.s_tau - o.s_tau,
            s_sigma2: self.s_sigma2 - o.s_sigma2,
            s_sq: self.s_sq - o.s_sq,
            ..*self
        }
    }

    /// `log((1/N) Σ exp(a_j))`.
    pub fn log_mean(&self) -> f64 {
        self.s0.ln() + self.shift - (self.count as f64).ln()
    }

    /// `(1/N) Σ exp(a_j)` (may overflow to infinity).
    pub fn mean(&self) -> f64 {
        self.log_mean().exp()
    }

    /// Sample standard deviation of `exp(a_j)` divided by `sqrt(N)`.
    pub fn stderr(&self) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return 0.0;
        }
        let m = self.s0 / n;
        let var = ((self.s_sq / n - m * m).max(0.0)) * n / (n - 1.0);
        (var / n).sqrt() * self.shift.exp()
    }

    /// `(Σ ω)² / Σ ω²`.
    pub fn ess(&self) -> f64 {
        self.s0 * self.s0 / self.s_sq
    }

    /// `max ω / Σ ω`.
    pub fn max_share(&self) -> f64 {
        (self.max_exponent - self.shift).exp() / self.s0
    }

    /// Weighted mean of `τ`, the derivative of `log Λ̂` in `λ`.
    pub fn mean_tau(&self) -> f64 {
        self.s_tau / self.s0
    }
}

fn chunk_sums(rows: &[DressedSample], tilt: Tilt) -> TiltedSums {
    if rows.is_empty() {
        return TiltedSums::empty();
    }
    let shift = rows.iter().map(|r| tilt.exponent(r)).fold(f64::NEG_INFINITY, f64::max);
    let mut s = TiltedSums {
        count: rows.len(),
        shift,
        max_exponent: shift,
        s0: 0.0,
        s_tau: 0.0,
        s_sigma2: 0.0,
        s_sq: 0.0,
    };
    for r in rows {
        let w = (tilt.exponent(r) - shift).exp();
        s.s0 += w;
        s.s_tau += w * r.tau;
        s.s_sigma2 += w * r.sigma2;
        s.s_sq += w * w;
    }
    s
}

/// Deterministic parallel reduction over `rows`.
pub fn tilted_sums(rows: &[DressedSample], tilt: Tilt) -> TiltedSums {
    let parts: Vec<TiltedSums> = rows.par_chunks(CHUNK).map(|c| chunk_sums(c, tilt)).collect();
    parts.iter().fold(TiltedSums::empty(), |acc, p| acc.merge(p))
}

/// Bounds of `k` contiguous batches covering `0..n` (sizes differ by at
/// most one).
pub fn batch_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    let k = k.clamp(1, n.max(1));
    (0..k).map(|b| (b * n / k, (b + 1) * n / k)).collect()
}

/// Per-batch sums for `k` contiguous batches.
pub fn batch_sums(rows: &[DressedSample], tilt: Tilt, k: usize) -> Vec<TiltedSums> {
    batch_bounds(rows.len(), k)
        .into_iter()
        .map(|(lo, hi)| tilted_sums(&rows[lo..hi], tilt))
        .collect()
}

pub fn total(batches: &[TiltedSums]) -> TiltedSums {
    batches.iter().fold(TiltedSums::empty(), |acc, b| acc.merge(b))
}

/// Leave-one-batch-out sums: element `b` merges every batch except `b`.
pub fn leave_one_out(batches: &[TiltedSums]) -> Vec<TiltedSums> {
    (0..batches.len())
        .map(|b| {
            batches
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != b)
                .fold(TiltedSums::empty(), |acc, (_, s)| acc.merge(s))
        })
        .collect()
}

/// Jackknife standard error from leave-one-out replicate values.
pub fn jackknife_stderr(replicates: &[f64]) -> f64 {
    let k = replicates.len();
    if k < 2 {
        return 0.0;
    }
    let kf = k as f64;
    let mean = replicates.iter().sum::<f64>() / kf;
    let ss: f64 = replicates.iter().map(|r| (r - mean).powi(2)).sum();
    ((kf - 1.0) / kf * ss).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(tau: f64, sigma2: f64, logw: f64) -> DressedSample {
        DressedSample {
            tau,
            sigma2,
            logw,
            n: 1,
        }
    }

    fn rows(n: usize) -> Vec<DressedSample> {
        (0..n)
            .map(|i| {
                let x = i as f64;
                row(1.0 + (x * 0.37).sin().abs() * 5.0, 0.5 + (x * 0.11).cos().abs() * 0.4, (x * 0.7).sin())
            })
            .collect()
    }

    #[test]
    fn shifted_sums_match_naive() {
        let r = rows(50_000);
        let tilt = Tilt::new(0.8, -0.3);
        let s = tilted_sums(&r, tilt);
        let naive: f64 = r.iter().map(|x| tilt.exponent(x).exp()).sum::<f64>() / r.len() as f64;
        assert!((s.mean() - naive).abs() < 1e-12 * naive);
        let naive_tau: f64 = r.iter().map(|x| tilt.exponent(x).exp() * x.tau).sum::<f64>();
        let naive_0: f64 = r.iter().map(|x| tilt.exponent(x).exp()).sum::<f64>();
        assert!((s.mean_tau() - naive_tau / naive_0).abs() < 1e-12);
    }

    #[test]
    fn survives_large_exponents() {
        let r = vec![row(1000.0, 1.0, 0.0), row(999.0, 1.0, 0.0)];
        let s = tilted_sums(&r, Tilt::new(0.0, 1.0));
        assert!(s.log_mean().is_finite());
        assert!((s.log_mean() - (1000.0 + (1.0 + (-1.0f64).exp()).ln() - 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn batches_partition_rows() {
        assert_eq!(batch_bounds(10, 3), vec![(0, 3), (3, 6), (6, 10)]);
        assert_eq!(batch_bounds(2, 32), vec![(0, 1), (1, 2)]);
        let r = rows(1000);
        let tilt = Tilt::new(0.3, 0.1);
        let b = batch_sums(&r, tilt, JACKKNIFE_BATCHES);
        let t = total(&b);
        let direct = tilted_sums(&r, tilt);
        assert_eq!(t.count, 1000);
        assert!((t.log_mean() - direct.log_mean()).abs() < 1e-13);
        let loo = leave_one_out(&b);
        let removed = direct.without(&b[3]);
        assert!((loo[3].log_mean() - removed.log_mean()).abs() < 1e-12);
    }

    #[test]
    fn jackknife_of_mean_matches_classical_stderr() {
        // For the sample mean with singleton batches, the jackknife equals s/√n.
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 1.3).sin()).collect();
        let n = x.len() as f64;
        let sum: f64 = x.iter().sum();
        let reps: Vec<f64> = x.iter().map(|v| (sum - v) / (n - 1.0)).collect();
        let m = sum / n;
        let s = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((jackknife_stderr(&reps) - s / n.sqrt()).abs() < 1e-12);
    }
}
