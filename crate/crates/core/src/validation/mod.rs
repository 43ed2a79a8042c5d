//! Acceptance checks, runnable from tests and from the command line.
//!
//! Each check returns a [`CriterionOutcome`] with the numbers behind the
//! verdict and its wall-clock time; nothing here panics on a failed check.

pub mod oracles;

use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::ensemble::{file, generate_ensemble, load_ensemble, save_ensemble, Ensemble};
use crate::error::Result;
use crate::excursion::Interval;
use crate::fk::{self, PathConfig};
use crate::geometry::{brownian_at, norm3, phi, sigma_squared_t};
use crate::moments::{tilted_sums, Tilt};
use crate::renewal::{self, EmpiricalNu};
use crate::rng::shard_rng;
use crate::spectral::{self, PointKind};

use oracles::discretized_projection;

/// Deliberate defects used to check that the checks can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Faults {
    /// Report `t + bᵀG⁻¹b` instead of `t - bᵀG⁻¹b` as the residual variance.
    pub sigma2_sign: bool,
}

impl Faults {
    fn sigma2(&self, intervals: &[Interval], u: &[f64], t: f64) -> Result<f64> {
        let s = sigma_squared_t(intervals, u, t)?;
        Ok(if self.sigma2_sign { 2.0 * t - s } else { s })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub seed: u64,
    /// Rows per ensemble for the ensemble-based checks.
    pub rows: u64,
    pub shards: u64,
    /// Monte Carlo draws per instance in the Gaussian-mixture check.
    pub mixture_draws: usize,
    pub mixture_instances: usize,
    pub geometry_instances: usize,
    pub fk_paths: usize,
    pub fk_steps: usize,
    /// Renewal grid used by the renewal cross-checks.
    pub h: f64,
    pub t_max: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            seed: 20240601,
            rows: 1_000_000,
            shards: 8,
            mixture_draws: 100_000,
            mixture_instances: 20,
            geometry_instances: 100,
            fk_paths: 10_000,
            fk_steps: 800,
            h: 0.001,
            t_max: 10.0,
        }
    }
}

impl ValidationConfig {
    /// Reduced sizes for smoke runs; quantitative checks may lose power.
    pub fn quick() -> Self {
        Self {
            rows: 40_000,
            mixture_draws: 5_000,
            mixture_instances: 4,
            geometry_instances: 10,
            fk_paths: 300,
            fk_steps: 50,
            h: 0.01,
            ..Self::default()
        }
    }

    fn ensemble(&self, alpha: f64, salt: u64) -> Result<Ensemble> {
        generate_ensemble(alpha, self.shards, self.rows.div_ceil(self.shards), self.seed ^ salt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
    pub runtime: Duration,
    pub budget: Duration,
}

impl CriterionOutcome {
    pub fn within_budget(&self) -> bool {
        self.runtime <= self.budget
    }
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} [{}] {}: {} ({:.1}s, budget {}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.details.join("; "),
            self.runtime.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

/// Collects sub-check results for one criterion.
struct Checks {
    passed: bool,
    details: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            passed: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.passed &= ok;
        self.details.push(if ok { detail } else { format!("FAILED {detail}") });
    }

    fn note(&mut self, detail: String) {
        self.details.push(detail);
    }

    fn finish(self, id: u8, name: &'static str, start: Instant, budget_secs: u64) -> CriterionOutcome {
        let runtime = start.elapsed();
        let budget = Duration::from_secs(budget_secs);
        let mut details = self.details;
        let timely = runtime <= budget;
        if !timely {
            details.push(format!("FAILED runtime {:.1}s over budget", runtime.as_secs_f64()));
        }
        CriterionOutcome {
            id,
            name,
            passed: self.passed && timely,
            details,
            runtime,
            budget,
        }
    }
}

fn interval(birth: f64, death: f64) -> Interval {
    Interval::new(birth, death).expect("valid interval")
}

/// Random intervals inside `[0, 3]` with lengths in `[0.1, 1.5]` and
/// coefficients `u_i ∈ [0, 2]`.
fn random_instance<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (Vec<Interval>, Vec<f64>) {
    let ivs = (0..n)
        .map(|_| {
            let b = rng.random_range(0.0..2.5);
            interval(b, b + rng.random_range(0.1..1.5))
        })
        .collect();
    let u = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    (ivs, u)
}

/// Closed-form geometry against hand values and the discretized-BM oracle.
pub fn criterion_1(cfg: &ValidationConfig, faults: &Faults) -> CriterionOutcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let run = || -> Result<(f64, f64, f64)> {
        let hand_sigma: [(Vec<Interval>, Vec<f64>, f64, f64); 4] = [
            (vec![], vec![], 1.7, 1.7),
            (vec![interval(1.0, 2.0)], vec![0.0], 2.0, 2.0),
            (vec![interval(1.0, 2.0)], vec![1.0], 2.0, 1.5),
            (vec![interval(0.0, 1.0), interval(0.0, 1.0)], vec![1.0, 1.0], 1.0, 1.0 / 3.0),
        ];
        let mut hand_err: f64 = 0.0;
        for (ivs, u, t, want) in &hand_sigma {
            hand_err = hand_err.max((faults.sigma2(ivs, u, *t)? - want).abs());
        }
        let hand_phi: [(Vec<Interval>, Vec<f64>, f64); 3] = [
            (vec![interval(0.0, 1.0)], vec![0.0], 1.0),
            (vec![interval(0.0, 1.0)], vec![1.0], 2f64.powf(-1.5)),
            (vec![interval(0.0, 1.0), interval(0.0, 1.0)], vec![1.0, 1.0], 3f64.powf(-1.5)),
        ];
        for (ivs, u, want) in &hand_phi {
            hand_err = hand_err.max((phi(ivs, u)? - want).abs());
        }
        let mut rng = shard_rng(cfg.seed, 1);
        let (mut sig_rel, mut phi_rel): (f64, f64) = (0.0, 0.0);
        for k in 0..cfg.geometry_instances {
            let (ivs, u) = random_instance(&mut rng, 1 + k % 3);
            let tau = ivs.iter().map(|iv| iv.death).fold(0.0, f64::max);
            let oracle = discretized_projection(&ivs, &u, tau, 1e-3)?;
            sig_rel = sig_rel.max((faults.sigma2(&ivs, &u, tau)? / oracle.sigma2 - 1.0).abs());
            phi_rel = phi_rel.max((phi(&ivs, &u)? / oracle.phi - 1.0).abs());
        }
        Ok((hand_err, sig_rel, phi_rel))
    };
    match run() {
        Ok((hand, sig, ph)) => {
            c.check(hand <= 1e-12, format!("hand examples max abs err {hand:.2e} (tol 1e-12)"));
            c.check(
                sig <= 1e-3 && ph <= 1e-3,
                format!(
                    "oracle mesh 1e-3 on {} instances: max rel err sigma2 {sig:.2e}, phi {ph:.2e} (tol 1e-3)",
                    cfg.geometry_instances
                ),
            );
        }
        Err(e) => c.check(false, format!("error: {e}")),
    }
    c.finish(1, "closed-form geometry", start, 60)
}

/// Weighted Monte Carlo ratio `E[|X_t|² e^{-Σu²|X_i|²/2}] / E[e^{...}]`
/// against `3 σ²_t`.
pub fn criterion_2(cfg: &ValidationConfig, faults: &Faults) -> CriterionOutcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut rng = shard_rng(cfg.seed, 2);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for k in 0..cfg.mixture_instances {
        let (ivs, u) = random_instance(&mut rng, 1 + k % 3);
        let tau = ivs.iter().map(|iv| iv.death).fold(0.0, f64::max);
        let t = rng.random_range(0.05..tau + 0.5);
        let want = match faults.sigma2(&ivs, &u, t) {
            Ok(s) => 3.0 * s,
            Err(e) => {
                c.check(false, format!("instance {k}: {e}"));
                continue;
            }
        };
        let mut times: Vec<f64> = ivs.iter().flat_map(|iv| [iv.birth, iv.death]).collect();
        times.push(t);
        let (mut sw, mut swx, mut swx2, mut sw2, mut sw2x) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..cfg.mixture_draws {
            let pos = brownian_at(&mut rng, &times);
            let mut expo = 0.0;
            for (i, ui) in u.iter().enumerate() {
                let a = pos[2 * i];
                let b = pos[2 * i + 1];
                let d = norm3(&[b[0] - a[0], b[1] - a[1], b[2] - a[2]]);
                expo += ui * ui * d * d;
            }
            let w = (-0.5 * expo).exp();
            let x2 = norm3(&pos[2 * ivs.len()]).powi(2);
            sw += w;
            swx += w * x2;
            swx2 += w * w * x2 * x2;
            sw2 += w * w;
            sw2x += w * w * x2;
        }
        let ratio = swx / sw;
        // Delta-method stderr of a ratio of means: sqrt(Σ w²(x - R)²) / Σ w.
        let resid2 = swx2 - 2.0 * ratio * sw2x + ratio * ratio * sw2;
        let se = resid2.max(0.0).sqrt() / sw;
        let z = (ratio - want) / se;
        worst = worst.max(z.abs());
        if z.abs() > 4.0 {
            failures += 1;
            c.note(format!("instance {k}: ratio {ratio:.5} vs 3 sigma2 {want:.5} (z {z:.2})"));
        }
    }
    c.check(
        failures == 0,
        format!(
            "{} instances x {} draws: max |z| {worst:.2} (tol 4)",
            cfg.mixture_instances, cfg.mixture_draws
        ),
    );
    c.finish(2, "Gaussian-mixture identity", start, 300)
}

/// Pathwise monotonicity and log-convexity of `Λ̂` on a 20 × 20 grid.
pub fn criterion_3(ens: &Ensemble) -> CriterionOutcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let rows = ens.rows();
    let p2: Vec<f64> = (0..20).map(|i| 3.0 * i as f64 / 19.0).collect();
    let lam: Vec<f64> = (0..20).map(|j| -2.5 + 2.0 * j as f64 / 19.0).collect();
    let grid: Vec<Vec<f64>> = p2
        .iter()
        .map(|&x| lam.iter().map(|&l| tilted_sums(rows, Tilt::new(x.sqrt(), l)).log_mean()).collect())
        .collect();
    let finite = grid.iter().flatten().all(|v| v.is_finite());
    c.check(finite, "all 400 values finite".into());

    let mut mono_lambda = true;
    let mut mono_p = true;
    for i in 0..20 {
        for j in 0..20 {
            if j + 1 < 20 {
                mono_lambda &= grid[i][j + 1] > grid[i][j];
            }
            if i + 1 < 20 {
                mono_p &= grid[i + 1][j] < grid[i][j];
            }
        }
    }
    c.check(mono_lambda, "strictly increasing in lambda".into());
    c.check(mono_p, "strictly decreasing in P²".into());

    // Λ̂(mid)² <= Λ̂(a) Λ̂(b) for every pair of grid points whose midpoint is a grid point.
    let mut pairs = 0usize;
    let mut worst = f64::INFINITY;
    for i in 0..20i64 {
        for j in 0..20i64 {
            for di in 0..20i64 {
                for dj in -19..20i64 {
                    if di == 0 && dj <= 0 {
                        continue;
                    }
                    let (a, b) = ((i - di, j - dj), (i + di, j + dj));
                    let inside = |(x, y): (i64, i64)| (0..20).contains(&x) && (0..20).contains(&y);
                    if !inside(a) || !inside(b) {
                        continue;
                    }
                    pairs += 1;
                    let lhs = 2.0 * grid[i as usize][j as usize];
                    let rhs = grid[a.0 as usize][a.1 as usize] + grid[b.0 as usize][b.1 as usize];
                    worst = worst.min(rhs - lhs);
                }
            }
        }
    }
    c.check(
        worst >= -1e-12,
        format!("log-convexity over {pairs} midpoint pairs: min slack {worst:.2e} (tol -1e-12)"),
    );
    c.finish(3, "pathwise structure of the moment functional", start, 60)
}

fn renewal_value(ens: &Ensemble, p: f64, t: f64, h: f64) -> Result<(f64, f64)> {
    let r = renewal::renewal_with_errors(ens, p, h, t)?;
    let k = r.solution.values.len() - 1;
    Ok((r.solution.values[k], r.stderr[k]))
}

/// Renewal solution against direct path-integral Monte Carlo.
pub fn criterion_4(cfg: &ValidationConfig, weak: &Ensemble, strong: &Ensemble) -> CriterionOutcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut exact_err: f64 = 0.0;
    for &p in &[0.0, 0.7] {
        for &t in &[1.0, 2.0] {
            let bins = (t / cfg.h).round() as usize;
            match EmpiricalNu::from_weights(cfg.h, p, vec![0.0; bins + 1]) {
                Ok(nu) => {
                    let f = renewal::solve_renewal(&nu);
                    let v = f.values[bins];
                    exact_err = exact_err.max((v - (-0.5 * p * p * t).exp()).abs());
                }
                Err(e) => c.check(false, format!("alpha=0 renewal: {e}")),
            }
        }
    }
    let free = PathConfig::new(2.0, 16, 100, 0.0, 0.0).and_then(|pc| fk::fk_estimate(&mut shard_rng(cfg.seed, 40), &pc));
    if let Ok(f) = free {
        exact_err = exact_err.max((f.value - 1.0).abs()).max(f.stderr);
    }
    c.check(exact_err <= 1e-12, format!("alpha=0 limit max err {exact_err:.2e} (tol 1e-12)"));

    let mut stream = 41;
    for ens in [weak, strong] {
        let alpha = ens.alpha();
        for &p in &[0.0, 0.7] {
            for &t in &[1.0, 2.0] {
                stream += 1;
                let res = renewal_value(ens, p, t, cfg.h).and_then(|r| {
                    let pc = PathConfig::new(t, cfg.fk_steps, cfg.fk_paths, alpha, p)?;
                    Ok((r, fk::fk_estimate_sharded(&pc, cfg.seed ^ stream, 8)?))
                });
                match res {
                    Ok(((f, fse), est)) => {
                        let rel = (est.value - f) / f;
                        let overlap = (est.value - f).abs() <= 2.0 * (est.stderr + fse);
                        c.check(
                            rel.abs() < 0.05 || overlap,
                            format!(
                                "a={alpha} P={p} T={t}: renewal {f:.4}±{fse:.4} fk {:.4}±{:.4} rel {rel:+.3}",
                                est.value, est.stderr
                            ),
                        );
                        if !est.sine_consistent() {
                            c.check(false, format!("a={alpha} P={p} T={t}: sine mean {:.2e} not within 4 stderr of 0", est.sine_mean));
                        }
                    }
                    Err(e) => c.check(false, format!("a={alpha} P={p} T={t}: {e}")),
                }
            }
        }
    }
    c.note(format!("fk steps {} paths {}", cfg.fk_steps, cfg.fk_paths));
    c.finish(4, "renewal vs path-integral oracle", start, 600)
}

/// Laplace transform of the renewal solution against the resolvent formula.
pub fn criterion_5(cfg: &ValidationConfig, ens: &Ensemble) -> CriterionOutcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let run = |p: f64| -> Result<(f64, f64, f64)> {
        let e0 = spectral::solve_e0(ens, spectral::DEFAULT_TOL * 1e-4)?;
        let pt = spectral::solve_ep(ens, p, &e0, spectral::DEFAULT_TOL * 1e-4)?;
        let lambda = pt.energy - 0.5;
        let sol = renewal::solve_renewal(&renewal::empirical_nu(ens, p, cfg.h, cfg.t_max)?);
        let lap = renewal::laplace(&sol, lambda, pt.energy)?;
        let formula = spectral::resolvent(ens, p, lambda, &e0)?;
        Ok((lambda, lap, formula))
    };
    for &p in &[0.0, 0.5] {
        match run(p) {
            Ok((lambda, lap, formula)) => {
                let rel = (lap - formula).abs() / formula;
                c.check(
                    rel < 0.03,
                    format!("P={p} lambda={lambda:.4}: laplace {lap:.5} formula {formula:.5} rel {rel:.2e} (tol 3e-2)"),
                );
            }
            Err(e) => c.check(false, format!("P={p}: {e}")),
        }
    }
    c.finish(5, "resolvent identity", start, 120)
}

/// Ground-state energy and effective mass against second-order perturbation theory.
pub fn criterion_6(ens: &Ensemble) -> CriterionOutcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let alpha = ens.alpha();
    let e_ref = fk::perturbative_e0(alpha);
    let m_ref = fk::perturbative_meff(alpha);
    let quad_err = (fk::perturbative_e0_quadrature(alpha) - e_ref)
        .abs()
        .max((fk::perturbative_meff_quadrature(alpha) - m_ref).abs());
    c.check(quad_err < 1e-8, format!("anchors re-derived by quadrature to {quad_err:.1e}"));
    let run = || -> Result<(spectral::E0Solution, spectral::MassEstimate)> {
        let e0 = spectral::solve_e0(ens, spectral::DEFAULT_TOL)?;
        let m = spectral::effective_mass(ens, &e0)?;
        Ok((e0, m))
    };
    match run() {
        Ok((e0, m)) => {
            let rel = (e0.value - e_ref).abs() / e_ref.abs();
            c.check(
                rel < 0.10,
                format!("E0 {:.5}±{:.5} vs {e_ref:.5} rel {rel:.3} (tol 0.10)", e0.value, e0.stderr),
            );
            let z = (m.value - m_ref) / m.stderr;
            c.check(
                z.abs() <= 2.0,
                format!("meff {:.5}±{:.5} vs {m_ref:.5}: {z:+.2} stderr (tol 2)", m.value, m.stderr),
            );
        }
        Err(e) => c.check(false, format!("error: {e}")),
    }
    c.note(format!("alpha {alpha}, {} rows", ens.len()));
    c.finish(6, "weak-coupling anchors", start, 300)
}

/// Structure of the energy–momentum curve at strong coupling.
pub fn criterion_7(ens: &Ensemble) -> CriterionOutcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let grid: Vec<f64> = (0..=6).map(|i| 0.25 * i as f64).collect();
    match spectral::energy_curve(ens, &grid, spectral::DEFAULT_TOL) {
        Ok(curve) => {
            let d = &curve.diagnostics;
            c.check(curve.e0.value < 0.0, format!("E0 {:.4}±{:.4} < 0", curve.e0.value, curve.e0.stderr));
            c.check(d.monotone.passed, format!("nondecreasing (min margin {:.2e})", d.monotone.worst_margin));
            c.check(d.concave.passed, format!("midpoint concave in P² (min margin {:.2e})", d.concave.worst_margin));
            c.check(
                d.quasi_particle_bound.passed,
                format!("quasi-particle bound within 2 stderr (min margin {:.2e})", d.quasi_particle_bound.worst_margin),
            );
            c.check(d.plateau_terminal.passed, format!("plateau terminal ({})", d.plateau_terminal.detail));
            let m = &curve.effective_mass;
            c.check(
                m.value - 1.0 > 5.0 * m.stderr,
                format!("meff {:.4}±{:.4} exceeds 1 by {:.1} stderr (tol 5)", m.value, m.stderr, (m.value - 1.0) / m.stderr),
            );
            let plateaus = curve.points.iter().filter(|p| p.kind == PointKind::Plateau).count();
            c.note(format!(
                "E(1.5) {:.4}, {plateaus} plateau points",
                curve.points.last().map(|p| p.energy).unwrap_or(f64::NAN)
            ));
        }
        Err(e) => c.check(false, format!("error: {e}")),
    }
    c.finish(7, "energy-curve structure", start, 600)
}

/// Ground-state overlap against the renewal plateau.
pub fn criterion_8(cfg: &ValidationConfig, ens: &Ensemble) -> CriterionOutcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let run = || -> Result<(f64, f64, f64)> {
        let e0 = spectral::solve_e0(ens, spectral::DEFAULT_TOL * 1e-4)?;
        let pt = spectral::solve_ep(ens, 0.0, &e0, spectral::DEFAULT_TOL)?;
        let ov = spectral::overlap(ens, &pt)?;
        let sol = renewal::solve_renewal(&renewal::empirical_nu(ens, 0.0, cfg.h, cfg.t_max)?);
        let pl = renewal::plateau(&sol, e0.value)?;
        Ok((ov.value, pl.value, pl.drift))
    };
    match run() {
        Ok((ov, pl, drift)) => {
            c.check(ov > 0.0 && ov < 1.0, format!("overlap {ov:.5} in (0,1)"));
            let rel = (ov - pl).abs() / pl;
            c.check(rel < 0.05, format!("plateau {pl:.5} (drift {drift:.3}) rel diff {rel:.2e} (tol 5e-2)"));
        }
        Err(e) => c.check(false, format!("error: {e}")),
    }
    c.finish(8, "overlap/plateau consistency", start, 120)
}

/// Byte-identical regeneration, lossless persistence, and merge invariance.
pub fn criterion_9(cfg: &ValidationConfig, scratch: &Path) -> CriterionOutcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let per = 25_000;
    let run = || -> Result<()> {
        let a = generate_ensemble(1.0, 4, per, cfg.seed)?;
        let b = generate_ensemble(1.0, 4, per, cfg.seed)?;
        let (ta, tb) = (file::to_string(&a), file::to_string(&b));
        if ta != tb {
            return Err(crate::Error::Diagnostic("regenerated ensemble differs".into()));
        }
        let path = scratch.join(format!("roundtrip-{}.dat", cfg.seed));
        save_ensemble(&a, &path)?;
        let back = load_ensemble(&path)?;
        let bytes_again = std::fs::read(&path)?;
        std::fs::remove_file(&path)?;
        if back != a || bytes_again != ta.as_bytes() {
            return Err(crate::Error::Diagnostic("save/load round trip is not lossless".into()));
        }
        Ok(())
    };
    let persistence = run();
    c.check(
        persistence.is_ok(),
        match &persistence {
            Ok(()) => format!("two runs of 4x{per} rows byte-identical; save/load lossless"),
            Err(e) => format!("{e}"),
        },
    );

    let merge = || -> Result<f64> {
        let a = generate_ensemble(1.0, 2, 20_000, cfg.seed ^ 1)?;
        let b = generate_ensemble(1.0, 3, 10_000, cfg.seed ^ 2)?;
        let union: Vec<_> = a.rows().iter().chain(b.rows()).copied().collect();
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let mut worst: f64 = 0.0;
        for &(p, l) in &[(0.0, -1.4), (0.5, -1.0), (1.2, -0.5), (0.0, -3.0)] {
            let t = Tilt::new(p, l);
            let (sa, sb, su) = (tilted_sums(a.rows(), t), tilted_sums(b.rows(), t), tilted_sums(&union, t));
            let combined = (na * sa.mean() + nb * sb.mean()) / (na + nb);
            worst = worst.max((su.mean() / combined - 1.0).abs());
            worst = worst.max((sa.merge(&sb).mean() / su.mean() - 1.0).abs());
            worst = worst.max((sa.merge(&sb).mean_tau() / su.mean_tau() - 1.0).abs());
        }
        Ok(worst)
    };
    match merge() {
        Ok(w) => c.check(w <= 1e-12, format!("merge invariance max rel err {w:.2e} (tol 1e-12)")),
        Err(e) => c.check(false, format!("merge: {e}")),
    }
    c.finish(9, "determinism and persistence", start, 60)
}

/// Ensembles shared by several checks.
pub struct SharedEnsembles {
    pub weak: Ensemble,
    pub medium: Ensemble,
    pub strong: Ensemble,
}

impl SharedEnsembles {
    pub fn generate(cfg: &ValidationConfig) -> Result<Self> {
        Ok(Self {
            weak: cfg.ensemble(0.1, 0x6)?,
            medium: cfg.ensemble(0.3, 0x3)?,
            strong: cfg.ensemble(1.0, 0x1)?,
        })
    }
}

/// Runs all nine checks in order.
pub fn run_all(cfg: &ValidationConfig, faults: &Faults, scratch: &Path) -> Result<Vec<CriterionOutcome>> {
    let ens = SharedEnsembles::generate(cfg)?;
    Ok(vec![
        criterion_1(cfg, faults),
        criterion_2(cfg, faults),
        criterion_3(&ens.strong),
        criterion_4(cfg, &ens.medium, &ens.strong),
        criterion_5(cfg, &ens.strong),
        criterion_6(&ens.weak),
        criterion_7(&ens.strong),
        criterion_8(cfg, &ens.strong),
        criterion_9(cfg, scratch),
    ])
}
