//! Spectral quantities from a fixed ensemble.
//!
//! Everything here is a functional of
//! `Λ̂(P, λ) = (1/N) Σ_j exp(logw_j - P² σ²_j / 2 + λ τ_j)`.
//! On a fixed ensemble every summand is strictly increasing in `λ` and
//! strictly decreasing in `P²`, and `(P², λ) ↦ log Λ̂` is convex, so the
//! root problems below are deterministic and well posed. Error bars come
//! from a jackknife over [`JACKKNIFE_BATCHES`] contiguous batches, with
//! roots re-solved on every replicate.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;

use crate::ensemble::{DressedSample, Ensemble};
use crate::error::{invalid, Error, Result};
use crate::moments::{batch_sums, jackknife_stderr, tilted_sums, Tilt, TiltedSums, JACKKNIFE_BATCHES};

/// Default root tolerance in `λ`.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Offset keeping the upper bisection limit strictly inside the domain.
pub const CEILING_OFFSET: f64 = 1e-9;
const MAX_EXPANSIONS: usize = 60;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaEstimate {
    pub value: f64,
    pub stderr: f64,
    pub ess: f64,
    pub max_share: f64,
}

impl LambdaEstimate {
    fn from_sums(s: &TiltedSums) -> Self {
        Self {
            value: s.mean(),
            stderr: s.stderr(),
            ess: s.ess(),
            max_share: s.max_share(),
        }
    }
}

fn check_nonempty(ensemble: &Ensemble) -> Result<()> {
    if ensemble.is_empty() {
        return Err(invalid("ensemble", "must be nonempty"));
    }
    Ok(())
}

fn check_momentum(p: f64) -> Result<()> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(invalid("P", format!("must be finite and nonnegative, got {p}")));
    }
    Ok(())
}

pub fn lambda_hat(ensemble: &Ensemble, p: f64, lambda: f64) -> Result<LambdaEstimate> {
    check_nonempty(ensemble)?;
    check_momentum(p)?;
    let s = tilted_sums(ensemble.rows(), Tilt::new(p, lambda));
    let est = LambdaEstimate::from_sums(&s);
    if !est.value.is_finite() || !est.stderr.is_finite() {
        return Err(Error::Diagnostic(format!(
            "Λ̂({p}, {lambda}) overflows (log value {:.3}); use a smaller lambda",
            s.log_mean()
        )));
    }
    Ok(est)
}

fn log_lambda(rows: &[DressedSample], p: f64, lambda: f64) -> f64 {
    tilted_sums(rows, Tilt::new(p, lambda)).log_mean()
}

/// Bisection for `log Λ̂(P, ·) = 0` on `[lo, hi]`, expanding `lo`
/// downward until `Λ̂(P, lo) < 1`. Requires `Λ̂(P, hi) >= 1`.
fn bisect_root(rows: &[DressedSample], p: f64, mut lo: f64, hi: f64, tol: f64) -> Result<(f64, (f64, f64))> {
    let g = |l: f64| log_lambda(rows, p, l);
    let mut width = hi - lo;
    let mut expansions = 0;
    while g(lo) >= 0.0 {
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::Bracket(format!(
                "Λ̂({p}, {lo}) is still >= 1 after {MAX_EXPANSIONS} expansions"
            )));
        }
        width *= 2.0;
        lo = hi - width;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (a + b);
        let v = g(mid);
        if !v.is_finite() {
            return Err(Error::Diagnostic(format!("non-finite Λ̂({p}, {mid})")));
        }
        if b - a <= tol && v.abs() <= tol {
            return Ok((mid, (a, b)));
        }
        if v >= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
        if mid == a && mid == b {
            break;
        }
    }
    Ok((0.5 * (a + b), (a, b)))
}

/// Roots of `log Λ̂_{-b}(P, ·) = 0` for every leave-one-batch-out
/// replicate, by Newton's method on the convex increasing function
/// `log Λ̂_{-b}` started at the full-sample root.
fn replicate_roots(rows: &[DressedSample], p: f64, start: f64, tol: f64) -> Result<Vec<f64>> {
    let k = JACKKNIFE_BATCHES.min(rows.len());
    if k < 2 {
        return Ok(vec![start; k]);
    }
    let loo = |lambda: f64, b: usize| -> TiltedSums {
        let batches = batch_sums(rows, Tilt::new(p, lambda), k);
        batches
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != b)
            .fold(TiltedSums::empty(), |acc, (_, s)| acc.merge(s))
    };
    let first = batch_sums(rows, Tilt::new(p, start), k);
    (0..k)
        .into_par_iter()
        .map(|b| {
            let mut s = first
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != b)
                .fold(TiltedSums::empty(), |acc, (_, x)| acc.merge(x));
            let mut lambda = start;
            for _ in 0..50 {
                let h = s.log_mean();
                let slope = s.mean_tau();
                let step = h / slope;
                if !step.is_finite() {
                    break;
                }
                lambda -= step;
                if step.abs() <= 1e-3 * tol {
                    return Ok(lambda);
                }
                s = loo(lambda, b);
            }
            // Newton stalled: fall back to bisection on the replicate.
            let bounds = crate::moments::batch_bounds(rows.len(), k);
            let (lo, hi) = bounds[b];
            let kept: Vec<DressedSample> = rows[..lo].iter().chain(&rows[hi..]).copied().collect();
            let mut upper = start + 1.0;
            let mut expansions = 0;
            while log_lambda(&kept, p, upper) < 0.0 {
                upper += 2.0 * (upper - start);
                expansions += 1;
                if expansions > MAX_EXPANSIONS {
                    return Err(Error::Bracket(format!("replicate {b} root above {upper}")));
                }
            }
            bisect_root(&kept, p, start - 1.0, upper, tol).map(|r| r.0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct E0Solution {
    pub value: f64,
    pub stderr: f64,
    pub bracket: (f64, f64),
    pub estimate: LambdaEstimate,
    /// Leave-one-batch-out roots.
    pub replicates: Vec<f64>,
}

/// Ground-state energy at zero momentum: the root of `Λ̂(0, λ) = 1`.
pub fn solve_e0(ensemble: &Ensemble, tol: f64) -> Result<E0Solution> {
    check_nonempty(ensemble)?;
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let rows = ensemble.rows();
    let hi = 0.0;
    if log_lambda(rows, 0.0, hi) < 0.0 {
        return Err(Error::Bracket(
            "Λ̂(0, 0) < 1, so no root below 0; use a larger ensemble".into(),
        ));
    }
    let lo = -SQRT_2 * ensemble.alpha() - 1.0;
    let (value, bracket) = bisect_root(rows, 0.0, lo, hi, tol)?;
    let estimate = LambdaEstimate::from_sums(&tilted_sums(rows, Tilt::new(0.0, value)));
    let replicates = replicate_roots(rows, 0.0, value, tol)?;
    Ok(E0Solution {
        value,
        stderr: jackknife_stderr(&replicates),
        bracket,
        estimate,
        replicates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    /// `Λ̂(P, ·)` crosses 1 strictly below `min(P²/2, E0 + 1)`.
    InteriorRoot,
    /// No such crossing: `P` lies outside the estimated `I₀` and the energy
    /// is reported as the essential-spectrum threshold `E0 + 1`.
    Plateau,
}

impl PointKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointKind::InteriorRoot => "interior-root",
            PointKind::Plateau => "plateau",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyCurvePoint {
    pub p: f64,
    pub energy: f64,
    pub kind: PointKind,
    pub bracket: (f64, f64),
    pub stderr: f64,
    /// `Λ̂` and weight diagnostics at `λ = energy`.
    pub diagnostics: LambdaEstimate,
    /// Leave-one-batch-out energies.
    pub replicates: Vec<f64>,
}

fn solve_ep_inner(ensemble: &Ensemble, p: f64, e0: &E0Solution, tol: f64, errors: bool) -> Result<EnergyCurvePoint> {
    check_nonempty(ensemble)?;
    check_momentum(p)?;
    let rows = ensemble.rows();
    let threshold = e0.value + 1.0;
    if p == 0.0 {
        return Ok(EnergyCurvePoint {
            p,
            energy: e0.value,
            kind: PointKind::InteriorRoot,
            bracket: e0.bracket,
            stderr: e0.stderr,
            diagnostics: e0.estimate,
            replicates: e0.replicates.clone(),
        });
    }
    let ceiling = (0.5 * p * p).min(threshold);
    let hi = ceiling - CEILING_OFFSET;
    let g_hi = log_lambda(rows, p, hi);
    if g_hi.is_nan() {
        return Err(Error::Diagnostic(format!(
            "inconclusive tail: Λ̂({p}, {hi}) is not finite"
        )));
    }
    let plateau = |bracket| -> Result<EnergyCurvePoint> {
        let s = tilted_sums(rows, Tilt::new(p, threshold));
        Ok(EnergyCurvePoint {
            p,
            energy: threshold,
            kind: PointKind::Plateau,
            bracket,
            stderr: e0.stderr,
            diagnostics: LambdaEstimate::from_sums(&s),
            replicates: e0.replicates.iter().map(|r| r + 1.0).collect(),
        })
    };
    if g_hi < 0.0 {
        return plateau((hi, hi));
    }
    let (root, bracket) = bisect_root(rows, p, e0.value - 1.0, hi, tol)?;
    // Roots within 2 stderr(E0) of the threshold are not distinguishable from it.
    if threshold <= 0.5 * p * p && root >= threshold - 2.0 * e0.stderr {
        return plateau(bracket);
    }
    let replicates = if errors {
        replicate_roots(rows, p, root, tol)?
    } else {
        Vec::new()
    };
    Ok(EnergyCurvePoint {
        p,
        energy: root,
        kind: PointKind::InteriorRoot,
        bracket,
        stderr: jackknife_stderr(&replicates),
        diagnostics: LambdaEstimate::from_sums(&tilted_sums(rows, Tilt::new(p, root))),
        replicates,
    })
}

/// Energy at momentum `P`, with the plateau convention outside `I₀`.
pub fn solve_ep(ensemble: &Ensemble, p: f64, e0: &E0Solution, tol: f64) -> Result<EnergyCurvePoint> {
    solve_ep_inner(ensemble, p, e0, tol, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassEstimate {
    pub value: f64,
    pub stderr: f64,
    pub replicates: Vec<f64>,
}

/// `m_eff = Σ ω τ / Σ ω σ²` with `ω = exp(logw + E0 τ)`.
pub fn effective_mass(ensemble: &Ensemble, e0: &E0Solution) -> Result<MassEstimate> {
    check_nonempty(ensemble)?;
    let rows = ensemble.rows();
    let ratio = |s: &TiltedSums| -> Result<f64> {
        let m = s.s_tau / s.s_sigma2;
        if !(s.s_sigma2 > 0.0) || !m.is_finite() {
            return Err(Error::Diagnostic("degenerate σ² moment in effective mass".into()));
        }
        Ok(m)
    };
    let value = ratio(&tilted_sums(rows, Tilt::new(0.0, e0.value)))?;
    let k = e0.replicates.len();
    let replicates: Vec<f64> = if k >= 2 {
        e0.replicates
            .par_iter()
            .enumerate()
            .map(|(b, &lam)| {
                let batches = batch_sums(rows, Tilt::new(0.0, lam), k);
                let s = batches
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| c != b)
                    .fold(TiltedSums::empty(), |acc, (_, x)| acc.merge(x));
                ratio(&s)
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(MassEstimate {
        value,
        stderr: jackknife_stderr(&replicates),
        replicates,
    })
}

/// `⟨Ω, (H(P) - λ)^{-1} Ω⟩ = 1/(P²/2 - λ) · 1/(1 - Λ̂(P, λ))` for
/// `λ` below the energy at `P`.
pub fn resolvent(ensemble: &Ensemble, p: f64, lambda: f64, e0: &E0Solution) -> Result<f64> {
    let point = solve_ep_inner(ensemble, p, e0, DEFAULT_TOL, false)?;
    if !(lambda < point.energy) {
        return Err(Error::Domain(format!(
            "lambda {lambda} must lie below the energy {} at P = {p}",
            point.energy
        )));
    }
    let kinetic = 0.5 * p * p - lambda;
    if !(kinetic > 0.0) {
        return Err(Error::Domain(format!("lambda {lambda} must lie below P²/2")));
    }
    let l = lambda_hat(ensemble, p, lambda)?.value;
    if !(l < 1.0) {
        return Err(Error::Domain(format!(
            "Λ̂({p}, {lambda}) = {l} >= 1; inconsistent with lambda below the energy"
        )));
    }
    Ok(1.0 / kinetic / (1.0 - l))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapEstimate {
    pub value: f64,
    /// Whether the value lies in the physical range `(0, 1]`.
    pub in_range: bool,
}

/// Squared vacuum–ground-state overlap
/// `1 / ((P²/2 - E(P)) · (1/N) Σ ω_j τ_j)` with
/// `ω = exp(logw - P²σ²/2 + E(P) τ)`.
pub fn overlap(ensemble: &Ensemble, point: &EnergyCurvePoint) -> Result<OverlapEstimate> {
    check_nonempty(ensemble)?;
    if point.kind == PointKind::Plateau {
        return Err(Error::Domain(format!(
            "P = {} is a plateau point; there is no ground state to overlap with",
            point.p
        )));
    }
    let s = tilted_sums(ensemble.rows(), Tilt::new(point.p, point.energy));
    let m1 = s.mean() * s.mean_tau();
    let gap = 0.5 * point.p * point.p - point.energy;
    if !(gap > 0.0) || !m1.is_finite() || !(m1 > 0.0) {
        return Err(Error::Domain(format!("overlap undefined at P = {}", point.p)));
    }
    let value = 1.0 / (gap * m1);
    Ok(OverlapEstimate {
        value,
        in_range: value > 0.0 && value <= 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    FiniteLooking,
    HeavyTailed,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::FiniteLooking => "finite-looking",
            Verdict::HeavyTailed => "heavy-tailed",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct I0Probe {
    pub p: f64,
    /// `(1/N) Σ exp(logw + (E0 + 1) τ - P² σ² / 2)`.
    pub estimate: f64,
    pub log_estimate: f64,
    pub ess: f64,
    pub max_share: f64,
    /// Hill estimate of the tail index of the weights, when enough rows.
    pub tail_index: Option<f64>,
    pub verdict: Verdict,
}

/// Minimum row count for the Hill estimator.
const HILL_MIN_ROWS: usize = 20;

/// Hill estimator of the tail index from log-weights, using the
/// `max(10, sqrt N)` largest order statistics.
pub fn hill_tail_index(log_weights: &[f64]) -> Option<f64> {
    let n = log_weights.len();
    if n < HILL_MIN_ROWS {
        return None;
    }
    let mut sorted = log_weights.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((n as f64).sqrt() as usize).clamp(10, n - 1);
    let anchor = sorted[k];
    let xi = sorted[..k].iter().map(|x| x - anchor).sum::<f64>() / k as f64;
    Some(if xi > 0.0 { 1.0 / xi } else { f64::INFINITY })
}

/// Tail diagnostics for `μ̂(exp(-P²σ²/2 + T₁))`, whose finiteness for some
/// `P` is equivalent to boundedness of `I₀`. Never fails on its own; the
/// verdict is descriptive, not a test outcome.
pub fn i0_probe(ensemble: &Ensemble, p: f64, e0: f64) -> Result<I0Probe> {
    check_nonempty(ensemble)?;
    check_momentum(p)?;
    let rows = ensemble.rows();
    let tilt = Tilt::new(p, e0 + 1.0);
    let s = tilted_sums(rows, tilt);
    let logs: Vec<f64> = rows.iter().map(|r| tilt.exponent(r)).collect();
    let tail_index = hill_tail_index(&logs);
    let ess = s.ess();
    let max_share = s.max_share();
    let verdict = match tail_index {
        _ if max_share >= 0.5 => Verdict::HeavyTailed,
        Some(a) if a <= 1.0 => Verdict::HeavyTailed,
        Some(a) if a >= 2.0 && max_share <= 0.05 && ess >= 100.0 => Verdict::FiniteLooking,
        None if max_share <= 0.05 && ess >= 100.0 => Verdict::FiniteLooking,
        _ => Verdict::Inconclusive,
    };
    Ok(I0Probe {
        p,
        estimate: s.mean(),
        log_estimate: s.log_mean(),
        ess,
        max_share,
        tail_index,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveCheck {
    pub passed: bool,
    /// Smallest slack observed (negative means violated).
    pub worst_margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveDiagnostics {
    /// Energies nondecreasing along the grid, strictly between interior roots.
    pub monotone: CurveCheck,
    /// `x ↦ E(√x)` midpoint-concave on consecutive interior-root triples.
    pub concave: CurveCheck,
    /// `E(P) - E0 <= P²/(2 m_eff)` within two jackknife standard errors.
    pub quasi_particle_bound: CurveCheck,
    /// Plateau points appear only as a terminal segment.
    pub plateau_terminal: CurveCheck,
}

impl CurveDiagnostics {
    pub fn all_passed(&self) -> bool {
        self.monotone.passed && self.concave.passed && self.quasi_particle_bound.passed && self.plateau_terminal.passed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyCurve {
    pub e0: E0Solution,
    pub effective_mass: MassEstimate,
    pub points: Vec<EnergyCurvePoint>,
    pub diagnostics: CurveDiagnostics,
}

/// `E(P)` on a sorted nonnegative grid plus the structural diagnostics
/// implied by monotonicity and concavity of `P ↦ E(√P)`.
pub fn energy_curve(ensemble: &Ensemble, grid: &[f64], tol: f64) -> Result<EnergyCurve> {
    if grid.is_empty() {
        return Err(invalid("P_grid", "must be nonempty"));
    }
    for &p in grid {
        check_momentum(p)?;
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("P_grid", "must be sorted ascending"));
    }
    let e0 = solve_e0(ensemble, tol)?;
    let mass = effective_mass(ensemble, &e0)?;
    let points: Vec<EnergyCurvePoint> = grid
        .par_iter()
        .map(|&p| solve_ep(ensemble, p, &e0, tol))
        .collect::<Result<_>>()?;
    let diagnostics = diagnose(&points, &e0, &mass, tol);
    Ok(EnergyCurve {
        e0,
        effective_mass: mass,
        points,
        diagnostics,
    })
}

fn diagnose(points: &[EnergyCurvePoint], e0: &E0Solution, mass: &MassEstimate, tol: f64) -> CurveDiagnostics {
    let slack = 2.0 * tol;

    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let mut margin = b.energy - a.energy + slack;
        let strict = a.kind == PointKind::InteriorRoot && b.kind == PointKind::InteriorRoot && b.p > a.p;
        if strict {
            margin = b.energy - a.energy;
        }
        if margin < worst {
            worst = margin;
            detail = format!("P {} -> {}: {} -> {}", a.p, b.p, a.energy, b.energy);
        }
    }
    let monotone = CurveCheck {
        passed: points.len() < 2 || worst > 0.0 || (worst == 0.0 && detail.is_empty()),
        worst_margin: worst,
        detail,
    };

    let interior: Vec<&EnergyCurvePoint> = points.iter().filter(|p| p.kind == PointKind::InteriorRoot).collect();
    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for w in interior.windows(3) {
        let (x0, x1, x2) = (w[0].p * w[0].p, w[1].p * w[1].p, w[2].p * w[2].p);
        if !(x0 < x1 && x1 < x2) {
            continue;
        }
        let chord = w[0].energy + (x1 - x0) * (w[2].energy - w[0].energy) / (x2 - x0);
        let margin = w[1].energy - chord + slack;
        if margin < worst {
            worst = margin;
            detail = format!("P² {x0}, {x1}, {x2}: E {} vs chord {chord}", w[1].energy);
        }
    }
    let concave = CurveCheck {
        passed: worst >= 0.0,
        worst_margin: worst,
        detail,
    };

    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for pt in points {
        let bound = |e: f64, e0v: f64, m: f64| e - e0v - pt.p * pt.p / (2.0 * m);
        let excess = bound(pt.energy, e0.value, mass.value);
        let k = pt.replicates.len().min(e0.replicates.len()).min(mass.replicates.len());
        let reps: Vec<f64> = (0..k)
            .map(|b| bound(pt.replicates[b], e0.replicates[b], mass.replicates[b]))
            .collect();
        let se = jackknife_stderr(&reps);
        let margin = 2.0 * se + slack - excess;
        if margin < worst {
            worst = margin;
            detail = format!("P {}: E - E0 - P²/2m = {excess:.3e} (stderr {se:.3e})", pt.p);
        }
    }
    let quasi_particle_bound = CurveCheck {
        passed: worst >= 0.0,
        worst_margin: worst,
        detail,
    };

    let first_plateau = points.iter().position(|p| p.kind == PointKind::Plateau);
    let terminal = match first_plateau {
        None => true,
        Some(i) => points[i..].iter().all(|p| p.kind == PointKind::Plateau),
    };
    let plateau_terminal = CurveCheck {
        passed: terminal,
        worst_margin: if terminal { 0.0 } else { -1.0 },
        detail: match first_plateau {
            None => "no plateau points".into(),
            Some(i) => format!("plateau from P = {}", points[i].p),
        },
    };

    CurveDiagnostics {
        monotone,
        concave,
        quasi_particle_bound,
        plateau_terminal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::generate_ensemble;
    use std::sync::OnceLock;

    fn row(tau: f64, sigma2: f64, logw: f64) -> DressedSample {
        DressedSample::new(tau, sigma2, logw, 1).unwrap()
    }

    fn synthetic(rows: Vec<DressedSample>) -> Ensemble {
        Ensemble::synthetic(1.0, rows).unwrap()
    }

    fn alpha_one() -> &'static Ensemble {
        static E: OnceLock<Ensemble> = OnceLock::new();
        E.get_or_init(|| generate_ensemble(1.0, 8, 25_000, 2024).unwrap())
    }

    #[test]
    fn lambda_hat_one_row() {
        let e = synthetic(vec![row(1.0, 0.5, 0.0)]);
        assert!((lambda_hat(&e, 0.0, 0.0).unwrap().value - 1.0).abs() < 1e-15);
        let v = lambda_hat(&e, SQRT_2, 0.0).unwrap().value;
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 0.6065307).abs() < 1e-7);
        assert!((lambda_hat(&e, 0.0, 2f64.ln()).unwrap().value - 2.0).abs() < 1e-14);
        assert!(lambda_hat(&e, -1.0, 0.0).is_err());
    }

    #[test]
    fn lambda_hat_overflow_is_diagnosed() {
        let e = synthetic(vec![row(1000.0, 1.0, 0.0)]);
        assert!(matches!(lambda_hat(&e, 0.0, 1.0), Err(Error::Diagnostic(_))));
    }

    #[test]
    fn e0_synthetic_examples() {
        let e = synthetic(vec![row(1.0, 1.0, 0.3)]);
        let s = solve_e0(&e, 1e-10).unwrap();
        assert!((s.value + 0.3).abs() < 1e-9);
        assert!((s.estimate.value - 1.0).abs() <= 1e-9);

        let e = synthetic(vec![row(1.0, 0.5, 2f64.ln()), row(2.0, 1.0, 2f64.ln())]);
        let s = solve_e0(&e, 1e-10).unwrap();
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!((s.value - golden.ln()).abs() < 1e-9);
        assert!((s.value + 0.4812118).abs() < 1e-7);
    }

    #[test]
    fn e0_bracket_failure() {
        let e = synthetic(vec![row(1.0, 1.0, -0.3)]);
        assert!(matches!(solve_e0(&e, 1e-8), Err(Error::Bracket(_))));
    }

    #[test]
    fn e0_bracket_expands_downward() {
        // Root at -50, far below the initial bracket.
        let e = synthetic(vec![row(1.0, 1.0, 50.0)]);
        let s = solve_e0(&e, 1e-9).unwrap();
        assert!((s.value + 50.0).abs() < 1e-8);
    }

    #[test]
    fn ep_synthetic_examples() {
        let e = synthetic(vec![row(1.0, 0.5, 0.0)]);
        let e0 = solve_e0(&e, 1e-12).unwrap();
        assert!(e0.value.abs() < 1e-11);
        let pt = solve_ep(&e, 0.0, &e0, 1e-10).unwrap();
        assert_eq!(pt.energy, e0.value);
        assert_eq!(pt.kind, PointKind::InteriorRoot);
        let pt = solve_ep(&e, 1.0, &e0, 1e-10).unwrap();
        assert_eq!(pt.kind, PointKind::InteriorRoot);
        assert!((pt.energy - 0.25).abs() < 1e-9);
    }

    #[test]
    fn plateau_when_no_root_below_threshold() {
        let e = synthetic(vec![row(1.0, 1.0, 0.3)]);
        let e0 = solve_e0(&e, 1e-12).unwrap();
        // Λ̂(2, E0 + 1) = e^{0.3 - 2 + 0.7} < 1.
        let pt = solve_ep(&e, 2.0, &e0, 1e-10).unwrap();
        assert_eq!(pt.kind, PointKind::Plateau);
        assert!((pt.energy - (e0.value + 1.0)).abs() < 1e-15);
        assert!(matches!(overlap(&e, &pt), Err(Error::Domain(_))));
    }

    #[test]
    fn effective_mass_synthetic() {
        let e = synthetic(vec![row(1.0, 0.5, 0.0), row(2.0, 1.0, 0.0)]);
        let e0 = E0Solution {
            value: 0.0,
            stderr: 0.0,
            bracket: (0.0, 0.0),
            estimate: lambda_hat(&e, 0.0, 0.0).unwrap(),
            replicates: vec![],
        };
        let m = effective_mass(&e, &e0).unwrap();
        assert!((m.value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn resolvent_and_overlap_synthetic() {
        // Λ̂(0, -1) = 0.5 with a single row τ = 1, logw = ln 2 - ... chosen so.
        let e = synthetic(vec![row(1.0, 1.0, 0.5f64.ln() + 1.0)]);
        let e0 = solve_e0(&e, 1e-12).unwrap();
        let r = resolvent(&e, 0.0, -1.0, &e0).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        assert!(matches!(resolvent(&e, 0.0, e0.value + 0.1, &e0), Err(Error::Domain(_))));

        let one = synthetic(vec![row(1.0, 0.5, 0.0)]);
        let e0 = solve_e0(&one, 1e-12).unwrap();
        let pt = solve_ep(&one, 1.0, &e0, 1e-12).unwrap();
        let o = overlap(&one, &pt).unwrap();
        assert!((o.value - 4.0).abs() < 1e-8);
        assert!(!o.in_range);
    }

    #[test]
    fn resolvent_finite_limit_outside_i0() {
        let e = synthetic(vec![row(1.0, 1.0, 0.3)]);
        let e0 = solve_e0(&e, 1e-13).unwrap();
        let edge = e0.value + 1.0;
        let values: Vec<f64> = (2..=6)
            .map(|k| resolvent(&e, 2.0, edge - 10f64.powi(-k), &e0).unwrap())
            .collect();
        let limit = 1.0 / (2.0 - edge) / (1.0 - (0.3 - 2.0 + edge).exp());
        for w in values.windows(2) {
            assert!((w[1] - w[0]).abs() < (w[0] - limit).abs().max(1e-12) * 1.01 + 1e-12);
        }
        assert!((values[4] - limit).abs() < 1e-5 * limit);
    }

    #[test]
    fn resolvent_simple_pole_inside_i0() {
        let e = alpha_one();
        let e0 = solve_e0(e, 1e-12).unwrap();
        let pt = solve_ep(e, 0.5, &e0, 1e-12).unwrap();
        assert_eq!(pt.kind, PointKind::InteriorRoot);
        let xs: Vec<f64> = (2..=5).map(|k| 10f64.powi(-k)).collect();
        let ys: Vec<f64> = xs.iter().map(|d| resolvent(e, 0.5, pt.energy - d, &e0).unwrap()).collect();
        let slope = (ys[3].ln() - ys[0].ln()) / (xs[3].ln() - xs[0].ln());
        assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
        // Increasing in lambda.
        assert!(ys.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn pathwise_monotone_and_log_convex() {
        let e = alpha_one();
        let e0 = solve_e0(e, 1e-10).unwrap();
        let lam: Vec<f64> = (0..6).map(|i| e0.value - 0.5 + 0.2 * i as f64).collect();
        let p2: Vec<f64> = (0..6).map(|i| 0.4 * i as f64).collect();
        let ll = |x: f64, l: f64| log_lambda(e.rows(), x.sqrt(), l);
        for &x in &p2 {
            for w in lam.windows(2) {
                assert!(ll(x, w[1]) > ll(x, w[0]));
            }
        }
        for &l in &lam {
            for w in p2.windows(2) {
                assert!(ll(w[1], l) < ll(w[0], l));
            }
        }
        for i in 0..p2.len() - 2 {
            for j in 0..lam.len() - 2 {
                let mid = ll(p2[i + 1], lam[j + 1]);
                assert!(2.0 * mid <= ll(p2[i], lam[j]) + ll(p2[i + 2], lam[j + 2]) + 1e-12);
            }
        }
    }

    #[test]
    fn energy_curve_structure_alpha_one() {
        let e = alpha_one();
        let grid: Vec<f64> = (0..=6).map(|i| 0.2 * i as f64).collect();
        let curve = energy_curve(e, &grid, 1e-9).unwrap();
        assert!(curve.e0.value < 0.0);
        assert_eq!(curve.points[0].energy, curve.e0.value);
        assert!(curve.diagnostics.all_passed(), "{:#?}", curve.diagnostics);
        assert!(curve.effective_mass.value > 1.0);
        for w in curve.points.windows(2) {
            assert!(w[1].energy >= w[0].energy);
        }
        // Every reported energy satisfies Λ̂(P, E(P)) <= 1 + tol.
        for pt in &curve.points {
            assert!(lambda_hat(e, pt.p, pt.energy).unwrap().value <= 1.0 + 1e-8);
            assert!(pt.stderr > 0.0);
        }
    }

    #[test]
    fn energy_curve_single_zero_point() {
        let e = alpha_one();
        let curve = energy_curve(e, &[0.0], 1e-8).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert_eq!(curve.points[0].energy, curve.e0.value);
        assert!(energy_curve(e, &[0.5, 0.2], 1e-8).is_err());
    }

    #[test]
    fn i0_probe_examples() {
        let e = alpha_one();
        let e0 = solve_e0(e, 1e-8).unwrap();
        let probes: Vec<I0Probe> = [0.0, 0.5, 1.0, 1.5].iter().map(|&p| i0_probe(e, p, e0.value).unwrap()).collect();
        for w in probes.windows(2) {
            assert!(w[1].log_estimate < w[0].log_estimate);
        }
        assert!(probes[0].tail_index.is_some());

        // Bounded τ <= 2.
        let rows: Vec<_> = (0..1000)
            .map(|i| {
                let t = 0.5 + 1.5 * (i as f64 / 999.0);
                row(t, 0.5 * t, -0.1 * (i % 7) as f64)
            })
            .collect();
        let mean_w = rows.iter().map(|r| r.logw.exp()).sum::<f64>() / rows.len() as f64;
        let e = synthetic(rows);
        let probe = i0_probe(&e, 0.0, -0.2).unwrap();
        assert_eq!(probe.verdict, Verdict::FiniteLooking);
        assert!(probe.estimate <= 2f64.exp() * mean_w);
    }

    #[test]
    fn hill_estimator_recovers_pareto_index() {
        // Deterministic Pareto(2) quantiles.
        let n = 10_000;
        let logs: Vec<f64> = (1..=n).map(|i| -0.5 * (i as f64 / (n as f64 + 1.0)).ln()).collect();
        let a = hill_tail_index(&logs).unwrap();
        assert!((a - 2.0).abs() < 0.2, "{a}");
        assert!(hill_tail_index(&logs[..5]).is_none());
    }
}
