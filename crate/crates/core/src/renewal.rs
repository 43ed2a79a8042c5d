//! Renewal equation `f = ν ∗ f + z` on a uniform time grid.
//!
//! `ν` is the image of `exp(-P²σ²/2) μ̂` under `τ`, binned with atoms on
//! right bin edges so that `f[0] = 1` exactly, and `z(T) = exp(-P² T / 2)`.

use crate::ensemble::{DressedSample, Ensemble};
use crate::error::{invalid, Error, Result};
use rayon::prelude::*;

use crate::moments::{batch_bounds, jackknife_stderr, tilted_sums, Tilt, JACKKNIFE_BATCHES};

/// Tail mass fraction above which callers should warn.
pub const TAIL_WARN_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalNu {
    pub h: f64,
    pub t_max: f64,
    pub p: f64,
    pub alpha: f64,
    /// `weights[k]` is the mass with `τ ∈ ((k-1)h, kh]`; `weights[0] = 0`.
    pub weights: Vec<f64>,
    /// Mass with `τ` beyond the last bin.
    pub tail_mass: f64,
}

impl EmpiricalNu {
    /// Builds a kernel directly from bin weights (index 0 must be zero).
    pub fn from_weights(h: f64, p: f64, weights: Vec<f64>) -> Result<Self> {
        check_grid(h, h)?;
        if weights.len() < 2 {
            return Err(invalid("weights", "need at least one bin beyond 0"));
        }
        if weights[0] != 0.0 {
            return Err(invalid("weights", "bin 0 must be empty"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights", "must be finite and nonnegative"));
        }
        Ok(Self {
            h,
            t_max: h * (weights.len() - 1) as f64,
            p,
            alpha: f64::NAN,
            weights,
            tail_mass: 0.0,
        })
    }

    pub fn bins(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn binned_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn tail_fraction(&self) -> f64 {
        self.tail_mass / (self.binned_mass() + self.tail_mass)
    }
}

fn check_grid(h: f64, t_max: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("must be positive, got {h}")));
    }
    if !(t_max >= h && t_max.is_finite()) {
        return Err(invalid("T_max", format!("must be at least h = {h}, got {t_max}")));
    }
    Ok(())
}

/// Number of grid steps covering `[0, t_max]`, tolerant of `t_max / h`
/// landing a rounding error above an integer.
fn steps(h: f64, t_max: f64) -> usize {
    let r = t_max / h;
    let k = r.round();
    if (r - k).abs() <= 1e-9 * k.max(1.0) {
        k as usize
    } else {
        r.ceil() as usize
    }
}

/// Bin index `ceil(τ/h)` with the same rounding tolerance as [`steps`].
fn bin_of(tau: f64, h: f64) -> usize {
    steps(h, tau).max(1)
}

pub fn empirical_nu(ensemble: &Ensemble, p: f64, h: f64, t_max: f64) -> Result<EmpiricalNu> {
    check_grid(h, t_max)?;
    if !(p >= 0.0 && p.is_finite()) {
        return Err(invalid("P", format!("must be finite and nonnegative, got {p}")));
    }
    let k_max = steps(h, t_max);
    let n = ensemble.len() as f64;
    let p2_half = 0.5 * p * p;
    let mut weights = vec![0.0; k_max + 1];
    let mut tail: Vec<DressedSample> = Vec::new();
    for r in ensemble.rows() {
        let k = bin_of(r.tau, h);
        if k <= k_max {
            weights[k] += (r.logw - p2_half * r.sigma2).exp() / n;
        } else {
            tail.push(*r);
        }
    }
    let tail_mass = if tail.is_empty() {
        0.0
    } else {
        tilted_sums(&tail, Tilt::new(p, 0.0)).mean() * tail.len() as f64 / n
    };
    Ok(EmpiricalNu {
        h,
        t_max: h * k_max as f64,
        p,
        alpha: ensemble.alpha(),
        weights,
        tail_mass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalSolution {
    pub h: f64,
    pub t_max: f64,
    pub p: f64,
    /// `values[k] ≈ f(kh)`.
    pub values: Vec<f64>,
}

impl RenewalSolution {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| k as f64 * self.h)
    }

    /// Value at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.t_max + 0.5 * self.h) {
            return Err(invalid("T", format!("must lie in [0, {}], got {t}", self.t_max)));
        }
        Ok(self.values[(t / self.h).round() as usize])
    }
}

fn source(p: f64, h: f64, k: usize) -> f64 {
    (-0.5 * p * p * h * k as f64).exp()
}

/// `(ν ∗ g)[k] = Σ_{m=1..k} ν[m] g[k-m]`.
fn convolve(nu: &[f64], g: &[f64]) -> Vec<f64> {
    (0..g.len())
        .map(|k| (1..=k).map(|m| nu[m] * g[k - m]).sum())
        .collect()
}

/// Forward recursion `f[k] = z(kh) + Σ_{m=1..k} ν[m] f[k-m]`.
pub fn solve_renewal(nu: &EmpiricalNu) -> RenewalSolution {
    let kk = nu.bins();
    let mut f = Vec::with_capacity(kk + 1);
    for k in 0..=kk {
        let conv: f64 = (1..=k).map(|m| nu.weights[m] * f[k - m]).sum();
        f.push(source(nu.p, nu.h, k) + conv);
    }
    RenewalSolution {
        h: nu.h,
        t_max: nu.t_max,
        p: nu.p,
        values: f,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalEstimate {
    pub solution: RenewalSolution,
    /// Jackknife standard error of each grid value.
    pub stderr: Vec<f64>,
    pub tail_fraction: f64,
}

/// Renewal solution from the ensemble with leave-one-batch-out error bars.
pub fn renewal_with_errors(ensemble: &Ensemble, p: f64, h: f64, t_max: f64) -> Result<RenewalEstimate> {
    let full = empirical_nu(ensemble, p, h, t_max)?;
    let solution = solve_renewal(&full);
    let rows = ensemble.rows();
    let k = JACKKNIFE_BATCHES.min(rows.len());
    let bounds = batch_bounds(rows.len(), k);
    let n = rows.len() as f64;
    let p2_half = 0.5 * p * p;
    let kk = full.bins();
    let batch_bins: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            let mut w = vec![0.0; kk + 1];
            for r in &rows[lo..hi] {
                let b = bin_of(r.tau, h);
                if b <= kk {
                    w[b] += (r.logw - p2_half * r.sigma2).exp();
                }
            }
            w
        })
        .collect();
    let totals: Vec<f64> = (0..=kk).map(|i| batch_bins.iter().map(|w| w[i]).sum()).collect();
    let replicates: Vec<Vec<f64>> = batch_bins
        .par_iter()
        .zip(&bounds)
        .map(|(w, &(lo, hi))| {
            let kept = n - (hi - lo) as f64;
            let weights: Vec<f64> = totals.iter().zip(w).map(|(t, b)| ((t - b) / kept).max(0.0)).collect();
            let nu = EmpiricalNu { weights, ..full.clone() };
            solve_renewal(&nu).values
        })
        .collect();
    let stderr = (0..=kk)
        .map(|i| {
            let col: Vec<f64> = replicates.iter().map(|r| r[i]).collect();
            jackknife_stderr(&col)
        })
        .collect();
    Ok(RenewalEstimate {
        solution,
        stderr,
        tail_fraction: full.tail_fraction(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSolution {
    pub solution: RenewalSolution,
    /// Upper bound on `f - partial sum` over the grid.
    pub remainder_bound: f64,
}

/// Neumann partial sum `Σ_{n <= n_max} ν^{∗n} ∗ z`.
pub fn series_solution(nu: &EmpiricalNu, n_max: usize) -> SeriesSolution {
    let kk = nu.bins();
    let mut term: Vec<f64> = (0..=kk).map(|k| source(nu.p, nu.h, k)).collect();
    let mut sum = term.clone();
    for _ in 0..n_max.min(kk) {
        term = convolve(&nu.weights, &term);
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
    }
    // f - S_n = ν^{∗(n+1)} ∗ f, and ν^{∗j} vanishes on the grid for j > K.
    let remainder_bound = if n_max >= kk {
        0.0
    } else {
        let f_max = solve_renewal(nu).values.into_iter().fold(0.0, f64::max);
        nu.binned_mass().powi(n_max as i32 + 1) * f_max
    };
    SeriesSolution {
        solution: RenewalSolution {
            h: nu.h,
            t_max: nu.t_max,
            p: nu.p,
            values: sum,
        },
        remainder_bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub value: f64,
    /// Slope of a least-squares line through `e^{T E(P)} f(T)` on the window.
    pub slope: f64,
    /// `|slope| · T_max / value`; the plateau is accepted below 0.05.
    pub drift: f64,
}

pub const PLATEAU_MAX_DRIFT: f64 = 0.05;

/// Large-`T` limit of `e^{T E(P)} f(T)`, read off the last quartile of the grid.
pub fn plateau(solution: &RenewalSolution, ep: f64) -> Result<Plateau> {
    let kk = solution.values.len() - 1;
    let start = 3 * kk / 4;
    if kk - start < 2 {
        return Err(Error::NoPlateau(format!("grid of {kk} steps is too short")));
    }
    let pts: Vec<(f64, f64)> = (start..=kk)
        .map(|k| {
            let t = k as f64 * solution.h;
            (t, (t * ep).exp() * solution.values[k])
        })
        .collect();
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let slope = sxy / sxx;
    let drift = slope.abs() * solution.t_max / ym.abs();
    if !(drift < PLATEAU_MAX_DRIFT) {
        return Err(Error::NoPlateau(format!(
            "drift {drift:.4} exceeds {PLATEAU_MAX_DRIFT} (mean {ym:.6}, slope {slope:.3e}); extend T_max"
        )));
    }
    Ok(Plateau {
        value: ym,
        slope,
        drift,
    })
}

/// `∫₀^∞ e^{λT} f(T) dT` for `λ < E(P)`: end-corrected trapezoid rule on
/// the grid plus the tail `plateau · e^{(λ-E)T_max} / (E - λ)`.
pub fn laplace(solution: &RenewalSolution, lambda: f64, ep: f64) -> Result<f64> {
    if !(lambda < ep) {
        return Err(Error::Domain(format!(
            "lambda {lambda} must lie below the energy {ep}"
        )));
    }
    let kk = solution.values.len() - 1;
    if kk < 2 {
        return Err(invalid("solution", "need at least 3 grid points"));
    }
    let h = solution.h;
    let g: Vec<f64> = solution
        .values
        .iter()
        .enumerate()
        .map(|(k, f)| (lambda * k as f64 * h).exp() * f)
        .collect();
    let mut body = h * (g.iter().sum::<f64>() - 0.5 * (g[0] + g[kk]));
    let d0 = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h);
    let d1 = (3.0 * g[kk] - 4.0 * g[kk - 1] + g[kk - 2]) / (2.0 * h);
    body -= h * h / 12.0 * (d1 - d0);
    let level = plateau(solution, ep)?.value;
    let tail = level * ((lambda - ep) * solution.t_max).exp() / (ep - lambda);
    Ok(body + tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_row() -> Ensemble {
        Ensemble::synthetic(1.0, vec![DressedSample::new(1.0, 0.5, 0.0, 1).unwrap()]).unwrap()
    }

    #[test]
    fn binning_examples() {
        let nu = empirical_nu(&one_row(), 0.0, 0.5, 3.0).unwrap();
        assert_eq!(nu.weights, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let nu = empirical_nu(&one_row(), 2f64.sqrt(), 0.5, 3.0).unwrap();
        assert!((nu.weights[2] - (-0.5f64).exp()).abs() < 1e-15);
        assert!(empirical_nu(&one_row(), 0.0, 0.0, 3.0).is_err());
        assert!(empirical_nu(&one_row(), 0.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn partition_identity() {
        let rows: Vec<_> = (1..200)
            .map(|i| {
                let t = 0.07 * i as f64;
                DressedSample::new(t, 0.4 * t, (i as f64 * 0.3).sin(), 1).unwrap()
            })
            .collect();
        let e = Ensemble::synthetic(1.0, rows).unwrap();
        let nu = empirical_nu(&e, 0.6, 0.01, 5.0).unwrap();
        assert!(nu.tail_mass > 0.0);
        let total = crate::spectral::lambda_hat(&e, 0.6, 0.0).unwrap().value;
        assert!((nu.binned_mass() + nu.tail_mass - total).abs() < 1e-12 * total);
    }

    #[test]
    fn empty_kernel_gives_free_decay() {
        let nu = EmpiricalNu::from_weights(0.1, 0.7, vec![0.0; 51]).unwrap();
        let f = solve_renewal(&nu);
        for (k, v) in f.values.iter().enumerate() {
            assert_eq!(*v, (-0.5 * 0.7 * 0.7 * 0.1 * k as f64).exp());
        }
    }

    #[test]
    fn geometric_renewal() {
        let mut w = vec![0.0; 6];
        w[2] = 0.5;
        let nu = EmpiricalNu::from_weights(0.5, 0.0, w).unwrap();
        let f = solve_renewal(&nu);
        assert_eq!(f.values[0], 1.0);
        assert!((f.at(2.5).unwrap() - 1.75).abs() < 1e-15);
        let s = series_solution(&nu, 2);
        assert!((s.solution.at(2.5).unwrap() - 1.75).abs() < 1e-15);
        let s0 = series_solution(&nu, 0);
        assert!(s0.solution.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn residual_is_zero() {
        let w: Vec<f64> = (0..300).map(|k| if k == 0 { 0.0 } else { 0.004 * (k as f64 * 0.1).cos().abs() }).collect();
        let nu = EmpiricalNu::from_weights(0.02, 0.3, w).unwrap();
        let f = solve_renewal(&nu);
        let conv = convolve(&nu.weights, &f.values);
        for k in 0..f.values.len() {
            let r = f.values[k] - source(0.3, 0.02, k) - conv[k];
            assert!(r.abs() <= 1e-15 * f.values[k]);
            assert!(f.values[k] >= source(0.3, 0.02, k));
        }
    }

    #[test]
    fn plateau_of_pure_exponential() {
        let ep = -0.4;
        let c = 0.8;
        let sol = RenewalSolution {
            h: 0.01,
            t_max: 10.0,
            p: 0.0,
            values: (0..=1000).map(|k| c * (-ep * 0.01 * k as f64).exp()).collect(),
        };
        let pl = plateau(&sol, ep).unwrap();
        assert!((pl.value - c).abs() < 1e-12);
        assert!(pl.drift < 1e-10);
        let growing = RenewalSolution {
            values: (0..=1000).map(|k| (0.05 * k as f64 * 0.01).exp()).collect(),
            ..sol
        };
        assert!(matches!(plateau(&growing, 0.0), Err(Error::NoPlateau(_))));
    }

    /// Single atom `q δ_{mh}` with `q > 1` and `P = 0`: `f[k] = Σ_{j <= k/m} q^j`,
    /// Malthusian rate `E = -ln q / (mh)`, and over one lattice period
    /// `e^{E T} f(T)` averages to `(1/m) / (1 - q^{-1/m})`.
    #[test]
    fn geometric_plateau_matches_hand_computation() {
        let (h, m, q) = (0.01, 50usize, 2.0f64);
        let kk = 4000;
        let mut w = vec![0.0; kk + 1];
        w[m] = q;
        let nu = EmpiricalNu::from_weights(h, 0.0, w).unwrap();
        let f = solve_renewal(&nu);
        let exact = (q.powi((kk / m) as i32 + 1) - 1.0) / (q - 1.0);
        assert!((f.values[kk] - exact).abs() < 1e-12 * exact);

        let e = -q.ln() / (m as f64 * h);
        let limit = (1.0 / m as f64) / (1.0 - q.powf(-1.0 / m as f64));
        let avg = (kk - m..kk).map(|k| (e * k as f64 * h).exp() * f.values[k]).sum::<f64>() / m as f64;
        assert!((avg - limit).abs() < 1e-6, "{avg} vs {limit}");
    }

    #[test]
    fn laplace_of_exponential() {
        let a = 0.7;
        let sol = RenewalSolution {
            h: 0.01,
            t_max: 10.0,
            p: 0.0,
            values: (0..=1000).map(|k| (-a * 0.01 * k as f64).exp()).collect(),
        };
        for &lambda in &[-2.0, -0.5, 0.0, 0.5] {
            let v = laplace(&sol, lambda, a).unwrap();
            assert!((v - 1.0 / (a - lambda)).abs() < 1e-6, "{lambda}: {v}");
        }
        assert!(matches!(laplace(&sol, a, a), Err(Error::Domain(_))));
        // Decay like f(0)/|λ| as λ → -∞ (while |λ| h stays small).
        let scaled: Vec<f64> = [-5.0, -10.0, -20.0, -40.0].iter().map(|&l| laplace(&sol, l, a).unwrap() * -l).collect();
        for w in scaled.windows(2) {
            assert!((w[1] - 1.0).abs() < (w[0] - 1.0).abs());
        }
        assert!((scaled[3] - 1.0).abs() < 0.02);
    }

    #[test]
    fn halving_h_converges_at_first_order() {
        let f_at = |h: f64| {
            let kk = (6.0 / h).round() as usize;
            let w: Vec<f64> = (0..=kk)
                .map(|k| {
                    let t = k as f64 * h;
                    if k == 0 { 0.0 } else { 0.6 * h * (-t).exp() }
                })
                .collect();
            solve_renewal(&EmpiricalNu::from_weights(h, 0.5, w).unwrap()).at(3.0).unwrap()
        };
        let (a, b, c) = (f_at(0.04), f_at(0.02), f_at(0.01));
        let ratio = (a - b) / (b - c);
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn recursion_matches_series(ws in prop::collection::vec(0.0f64..0.02, 40..120), p in 0.0f64..1.5) {
            let mut w = ws;
            w[0] = 0.0;
            let nu = EmpiricalNu::from_weights(0.05, p, w).unwrap();
            let f = solve_renewal(&nu);
            let s = series_solution(&nu, nu.bins());
            prop_assert_eq!(s.remainder_bound, 0.0);
            for (a, b) in f.values.iter().zip(&s.solution.values) {
                prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
            }
            let partial = series_solution(&nu, 3);
            for (a, b) in f.values.iter().zip(&partial.solution.values) {
                prop_assert!(a - b <= partial.remainder_bound * (1.0 + 1e-12) + 1e-15);
                prop_assert!(*b <= a * (1.0 + 1e-12));
            }
        }
    }
}
