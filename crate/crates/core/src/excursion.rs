//! Busy cycles of the birth–death point process.
//!
//! Individuals are born at constant rate `alpha` (independent of the current
//! population) and each living individual dies at rate 1. Starting from an
//! empty population at time 0, one excursion runs from the first birth until
//! the population first returns to zero. Identifying an individual born at
//! `s` and dying at `t` with the interval `(s, t)`, an excursion is a finite
//! collection of intervals whose union is `[s_1, tau]`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1};

use crate::error::{invalid, Cap, Error, Result};

/// Lifetime `(birth, death)` of one individual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub birth: f64,
    pub death: f64,
}

impl Interval {
    pub fn new(birth: f64, death: f64) -> Result<Self> {
        if !(birth >= 0.0 && birth < death && death.is_finite()) {
            return Err(invalid(
                "interval",
                format!("need 0 <= birth < death, got ({birth}, {death})"),
            ));
        }
        Ok(Self { birth, death })
    }

    pub fn len(&self) -> f64 {
        self.death - self.birth
    }

    /// Length of the intersection with `[lo, hi]`.
    pub fn overlap(&self, lo: f64, hi: f64) -> f64 {
        (self.death.min(hi) - self.birth.max(lo)).max(0.0)
    }

    /// Whether the individual is alive at `t` (right-continuous count).
    pub fn alive_at(&self, t: f64) -> bool {
        self.birth <= t && t < self.death
    }
}

/// One busy cycle: intervals sorted by birth (ties by death) and the time
/// `tau` of the last death.
#[derive(Debug, Clone, PartialEq)]
pub struct Excursion {
    intervals: Vec<Interval>,
    tau: f64,
}

impl Excursion {
    /// Builds an excursion from arbitrary intervals, sorting them and
    /// checking every structural invariant.
    pub fn new(mut intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(invalid("intervals", "an excursion has at least one individual"));
        }
        intervals.sort_by(|a, b| {
            a.birth
                .total_cmp(&b.birth)
                .then_with(|| a.death.total_cmp(&b.death))
        });
        let tau = intervals.iter().map(|iv| iv.death).fold(f64::MIN, f64::max);
        let exc = Self { intervals, tau };
        exc.check()?;
        Ok(exc)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.intervals.len()
    }

    pub fn first_birth(&self) -> f64 {
        self.intervals[0].birth
    }

    /// Number of individuals alive at `t`.
    pub fn alive_count(&self, t: f64) -> usize {
        self.intervals.iter().filter(|iv| iv.alive_at(t)).count()
    }

    /// Piecewise-constant alive count as `(time, count)` change points,
    /// starting with `(0, 0)` and ending with `(tau, 0)`.
    pub fn alive_profile(&self) -> Vec<(f64, usize)> {
        let mut events: Vec<(f64, i64)> = Vec::with_capacity(2 * self.n());
        for iv in &self.intervals {
            events.push((iv.birth, 1));
            events.push((iv.death, -1));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut profile = vec![(0.0, 0usize)];
        let mut count = 0i64;
        let mut i = 0;
        while i < events.len() {
            let t = events[i].0;
            while i < events.len() && events[i].0 == t {
                count += events[i].1;
                i += 1;
            }
            profile.push((t, count as usize));
        }
        profile
    }

    /// Verifies the excursion invariants exactly.
    pub fn check(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::Numerical(format!("excursion invariant: {reason}")));
        let first = self.first_birth();
        if !(first > 0.0) {
            return bad(format!("first birth {first} must be positive"));
        }
        for iv in &self.intervals {
            if !(iv.birth >= 0.0 && iv.birth < iv.death) {
                return bad(format!("degenerate interval ({}, {})", iv.birth, iv.death));
            }
            if !(iv.birth < self.tau && iv.death <= self.tau) {
                return bad(format!("interval ({}, {}) escapes tau {}", iv.birth, iv.death, self.tau));
            }
        }
        // Alive count must stay >= 1 on [first birth, tau).
        for (t, count) in self.alive_profile().into_iter().skip(1) {
            if t < self.tau && count == 0 {
                return bad(format!("population hits zero at {t} before tau {}", self.tau));
            }
            if t == self.tau && count != 0 {
                return bad(format!("{count} individuals alive at tau"));
            }
        }
        Ok(())
    }
}

/// Hard caps on a single excursion. A breach is an error, never a
/// truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerCaps {
    pub max_individuals: usize,
    pub max_tau: f64,
}

impl Default for SamplerCaps {
    fn default() -> Self {
        Self {
            max_individuals: 10_000,
            max_tau: 1_000.0,
        }
    }
}

/// Event-driven sampler of excursions at a fixed coupling.
#[derive(Debug, Clone)]
pub struct ExcursionSampler {
    alpha: f64,
    caps: SamplerCaps,
    first_birth: Exp<f64>,
}

impl ExcursionSampler {
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_caps(alpha, SamplerCaps::default())
    }

    pub fn with_caps(alpha: f64, caps: SamplerCaps) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive and finite, got {alpha}")));
        }
        if caps.max_individuals == 0 || !(caps.max_tau > 0.0) {
            return Err(invalid("caps", "caps must be positive"));
        }
        let first_birth = Exp::new(alpha).map_err(|e| invalid("alpha", e.to_string()))?;
        Ok(Self {
            alpha,
            caps,
            first_birth,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn caps(&self) -> SamplerCaps {
        self.caps
    }

    /// Draws one excursion.
    ///
    /// The first birth happens after an `Exp(alpha)` wait. Afterwards the
    /// next event is a birth with rate `alpha` or a death with rate `k` (the
    /// current population), the dying individual chosen uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Excursion> {
        let mut t = self.first_birth.sample(rng);
        let mut births = vec![t];
        let mut deaths = vec![f64::NAN];
        // Indices of living individuals.
        let mut alive: Vec<usize> = vec![0];
        while !alive.is_empty() {
            let k = alive.len() as f64;
            let rate = self.alpha + k;
            let wait: f64 = Exp1.sample(rng);
            t += wait / rate;
            if t > self.caps.max_tau {
                return Err(Error::ResourceLimit {
                    cap: Cap::Horizon,
                    individuals: births.len(),
                    alive: alive.len(),
                    elapsed: t,
                });
            }
            if rng.random::<f64>() * rate < self.alpha {
                if births.len() >= self.caps.max_individuals {
                    return Err(Error::ResourceLimit {
                        cap: Cap::Individuals,
                        individuals: births.len(),
                        alive: alive.len(),
                        elapsed: t,
                    });
                }
                alive.push(births.len());
                births.push(t);
                deaths.push(f64::NAN);
            } else {
                let pick = rng.random_range(0..alive.len());
                let who = alive.swap_remove(pick);
                deaths[who] = t;
            }
        }
        let intervals = births
            .into_iter()
            .zip(deaths)
            .map(|(birth, death)| Interval { birth, death })
            .collect();
        let exc = Excursion::new(intervals)?;
        debug_assert!(exc.tau() == t);
        Ok(exc)
    }
}

/// Convenience wrapper around [`ExcursionSampler`] with default caps.
pub fn sample_excursion<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> Result<Excursion> {
    ExcursionSampler::new(alpha)?.sample(rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionSummary {
    pub count: usize,
    pub mean_n: f64,
    pub max_n: usize,
    pub mean_tau: f64,
    pub max_tau: f64,
    /// `alive_histogram[k]` is the total time spent with exactly `k`
    /// individuals alive, summed over excursions on `[0, tau]`.
    pub alive_histogram: Vec<f64>,
}

pub fn excursion_summary(excursions: &[Excursion]) -> Result<ExcursionSummary> {
    if excursions.is_empty() {
        return Err(invalid("excursions", "cannot summarize an empty sequence"));
    }
    let count = excursions.len();
    let mut sum_n = 0.0;
    let mut sum_tau = 0.0;
    let mut max_n = 0;
    let mut max_tau = 0.0f64;
    let mut hist: Vec<f64> = Vec::new();
    for exc in excursions {
        sum_n += exc.n() as f64;
        sum_tau += exc.tau();
        max_n = max_n.max(exc.n());
        max_tau = max_tau.max(exc.tau());
        let profile = exc.alive_profile();
        for w in profile.windows(2) {
            let (t0, k) = w[0];
            let dt = w[1].0 - t0;
            if hist.len() <= k {
                hist.resize(k + 1, 0.0);
            }
            hist[k] += dt;
        }
    }
    Ok(ExcursionSummary {
        count,
        mean_n: sum_n / count as f64,
        max_n,
        mean_tau: sum_tau / count as f64,
        max_tau,
        alive_histogram: hist,
    })
}
