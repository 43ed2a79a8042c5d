//! Finite-dimensional Gaussian computations attached to an excursion.
//!
//! For intervals `(s_i, t_i)` and coefficients `u_i >= 0`, the observations
//! `u_i B(s_i, t_i) + Z_i` (one-dimensional Brownian increments plus unit
//! noise) have Gram matrix `G = I + D_u C D_u`, where `C` is the matrix of
//! interval overlaps. The residual variance of `B_t` after projecting onto
//! their span is `t - b' G^{-1} b` with `b_i = u_i |[s_i, t_i] ∩ [0, t]|`,
//! and the normalization of the tilted Wiener measure
//! `exp(-Σ u_i² |X(s_i, t_i)|² / 2) dW` in three dimensions is
//! `det(G)^{-3/2}`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::excursion::{Excursion, Interval};
use crate::quad;

/// Symmetric matrix of pairwise interval overlap lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix(DMatrix<f64>);

impl OverlapMatrix {
    pub fn new(intervals: &[Interval]) -> Self {
        let n = intervals.len();
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            c[(i, i)] = intervals[i].len();
            for j in 0..i {
                let v = intervals[i].overlap(intervals[j].birth, intervals[j].death);
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        Self(c)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn overlap_matrix(intervals: &[Interval]) -> OverlapMatrix {
    OverlapMatrix::new(intervals)
}

/// Three-dimensional Brownian motion started at the origin, evaluated at
/// the given times (any order, duplicates allowed).
///
/// The distinct times are sorted into a refinement of `[0, max]`; one
/// independent `N(0, len · I₃)` increment is drawn per cell of positive
/// length, and positions are their running sums.
pub fn brownian_at<R: Rng + ?Sized>(rng: &mut R, times: &[f64]) -> Vec<[f64; 3]> {
    let mut grid: Vec<f64> = times.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut positions = Vec::with_capacity(grid.len());
    let mut x = [0.0; 3];
    let mut prev = 0.0;
    for &t in &grid {
        let len = t - prev;
        if len > 0.0 {
            let sd = len.sqrt();
            for c in &mut x {
                let z: f64 = StandardNormal.sample(rng);
                *c += sd * z;
            }
        }
        positions.push(x);
        prev = t;
    }
    times
        .iter()
        .map(|t| {
            let k = grid.partition_point(|g| g < t);
            positions[k]
        })
        .collect()
}

/// Brownian displacements `X(s_i, t_i)` for each interval of the excursion.
pub fn sample_displacements<R: Rng + ?Sized>(rng: &mut R, excursion: &Excursion) -> Vec<[f64; 3]> {
    displacements_for(rng, excursion.intervals())
}

pub(crate) fn displacements_for<R: Rng + ?Sized>(rng: &mut R, intervals: &[Interval]) -> Vec<[f64; 3]> {
    let times: Vec<f64> = intervals.iter().flat_map(|iv| [iv.birth, iv.death]).collect();
    let pos = brownian_at(rng, &times);
    pos.chunks_exact(2)
        .map(|p| [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]])
        .collect()
}

pub fn norm3(x: &[f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Draws `u_i` half-normal with scale `1 / |X_i|` and returns the log of
/// the importance weight `Π 1/|X_i|`.
///
/// With density `q(u) = sqrt(2/π) r exp(-u² r² / 2)`, the identity
/// `∫ du sqrt(2/π) exp(-u² r²/2) g(u) = E_q[g(u)] / r` holds per coordinate.
pub fn sample_u<R: Rng + ?Sized>(rng: &mut R, displacement_norms: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut log_weight = 0.0;
    let mut u = Vec::with_capacity(displacement_norms.len());
    for &r in displacement_norms {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid("displacement_norms", format!("norm must be positive, got {r}")));
        }
        let z: f64 = StandardNormal.sample(rng);
        u.push(z.abs() / r);
        log_weight -= r.ln();
    }
    Ok((u, log_weight))
}

/// An excursion together with its displacement norms and the auxiliary
/// coefficients `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedExcursion {
    pub excursion: Excursion,
    pub u: Vec<f64>,
    pub displacement_norms: Vec<f64>,
}

impl DressedExcursion {
    pub fn new(excursion: Excursion, u: Vec<f64>, displacement_norms: Vec<f64>) -> Result<Self> {
        let n = excursion.n();
        if u.len() != n || displacement_norms.len() != n {
            return Err(invalid("dressed", "u and norms must have one entry per interval"));
        }
        if u.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(invalid("u", "entries must be finite and nonnegative"));
        }
        if displacement_norms.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid("displacement_norms", "entries must be positive"));
        }
        Ok(Self {
            excursion,
            u,
            displacement_norms,
        })
    }

    /// Samples displacements and `u` for `excursion`. Returns the dressed
    /// excursion and `log Π 1/|X_i|`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, excursion: Excursion) -> Result<(Self, f64)> {
        let norms: Vec<f64> = sample_displacements(rng, &excursion).iter().map(norm3).collect();
        let (u, log_weight) = sample_u(rng, &norms)?;
        Ok((Self::new(excursion, u, norms)?, log_weight))
    }

    pub fn tilt(&self) -> Result<GaussianTilt<'_>> {
        GaussianTilt::new(self.excursion.intervals(), &self.u)
    }
}

/// Cholesky factorization of `G = I + D_u C D_u`, shared by the residual
/// variance and the normalization constant.
pub struct GaussianTilt<'a> {
    intervals: &'a [Interval],
    u: &'a [f64],
    chol: Option<Cholesky<f64, Dyn>>,
}

impl<'a> GaussianTilt<'a> {
    pub fn new(intervals: &'a [Interval], u: &'a [f64]) -> Result<Self> {
        if intervals.len() != u.len() {
            return Err(invalid("u", "length must match the number of intervals"));
        }
        if u.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(invalid("u", "entries must be finite and nonnegative"));
        }
        let n = intervals.len();
        let chol = if n == 0 {
            None
        } else {
            let c = OverlapMatrix::new(intervals).0;
            let g = DMatrix::from_fn(n, n, |i, j| {
                let v = u[i] * c[(i, j)] * u[j];
                if i == j {
                    1.0 + v
                } else {
                    v
                }
            });
            Some(Cholesky::new(g).ok_or_else(|| {
                Error::Numerical("Cholesky factorization of I + D C D failed".into())
            })?)
        };
        Ok(Self { intervals, u, chol })
    }

    /// `t - b' G^{-1} b`, the squared L² distance from `B_t` to the span of
    /// the noisy increment observations.
    pub fn residual_variance(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid("t", format!("must be nonnegative, got {t}")));
        }
        let Some(chol) = &self.chol else {
            return Ok(t);
        };
        let b = DVector::from_iterator(
            self.u.len(),
            self.intervals.iter().zip(self.u).map(|(iv, &ui)| ui * iv.overlap(0.0, t)),
        );
        let x = chol.solve(&b);
        let value = t - b.dot(&x);
        if value < -1e-10 || !value.is_finite() {
            return Err(Error::Numerical(format!("negative residual variance {value} at t = {t}")));
        }
        Ok(value.max(0.0))
    }

    /// `log det(G)`.
    pub fn log_det(&self) -> f64 {
        match &self.chol {
            None => 0.0,
            Some(chol) => 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        }
    }

    /// `log φ = -3/2 log det(G)`.
    pub fn log_phi(&self) -> f64 {
        -1.5 * self.log_det()
    }
}

pub fn sigma_squared_t(intervals: &[Interval], u: &[f64], t: f64) -> Result<f64> {
    GaussianTilt::new(intervals, u)?.residual_variance(t)
}

/// `σ²` of a dressed excursion, i.e. the residual variance at `tau`.
pub fn sigma_squared(dressed: &DressedExcursion) -> Result<f64> {
    dressed.tilt()?.residual_variance(dressed.excursion.tau())
}

pub fn phi(intervals: &[Interval], u: &[f64]) -> Result<f64> {
    Ok(GaussianTilt::new(intervals, u)?.log_phi().exp())
}

/// Deterministic evaluation of
/// `∫_{[0,∞)^n} du (2/π)^{n/2} φ(ξ,u) exp(-P² σ²_t(ξ,u) / 2)` for `n <= 2`
/// by nested adaptive quadrature, using `u = x / (1 - x)`.
///
/// This equals `E_W[cos(P X_t^{(1)}) Π 1/|X(s_i,t_i)|]` and is used to
/// cross-check the importance-sampled route.
pub fn u_quadrature(intervals: &[Interval], t: f64, p: f64, tol: f64) -> Result<f64> {
    let n = intervals.len();
    if n > 2 {
        return Err(invalid("intervals", "deterministic u-quadrature supports n <= 2"));
    }
    let integrand = |u: &[f64]| -> f64 {
        let tilt = match GaussianTilt::new(intervals, u) {
            Ok(t) => t,
            Err(_) => return f64::NAN,
        };
        let s2 = tilt.residual_variance(t).unwrap_or(f64::NAN);
        (2.0 / std::f64::consts::PI).powf(n as f64 / 2.0) * (tilt.log_phi() - 0.5 * p * p * s2).exp()
    };
    let map = |x: f64| (x / (1.0 - x), 1.0 / ((1.0 - x) * (1.0 - x)));
    let value = match n {
        0 => integrand(&[]),
        1 => quad::adaptive_simpson(
            |x| {
                if x >= 1.0 {
                    return 0.0;
                }
                let (u, jac) = map(x);
                integrand(&[u]) * jac
            },
            0.0,
            1.0,
            tol,
        ),
        _ => quad::adaptive_simpson(
            |x| {
                if x >= 1.0 {
                    return 0.0;
                }
                let (u1, j1) = map(x);
                j1 * quad::adaptive_simpson(
                    |y| {
                        if y >= 1.0 {
                            return 0.0;
                        }
                        let (u2, j2) = map(y);
                        integrand(&[u1, u2]) * j2
                    },
                    0.0,
                    1.0,
                    tol,
                )
            },
            0.0,
            1.0,
            tol,
        ),
    };
    if !value.is_finite() {
        return Err(Error::Numerical("u-quadrature produced a non-finite value".into()));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ivs(pairs: &[(f64, f64)]) -> Vec<Interval> {
        pairs.iter().map(|&(s, t)| Interval::new(s, t).unwrap()).collect()
    }

    fn dense(m: &OverlapMatrix) -> Vec<Vec<f64>> {
        (0..m.dim()).map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect()).collect()
    }

    #[test]
    fn overlap_matrix_examples() {
        assert_eq!(
            dense(&overlap_matrix(&ivs(&[(0.0, 2.0), (1.0, 3.0)]))),
            vec![vec![2.0, 1.0], vec![1.0, 2.0]]
        );
        assert_eq!(
            dense(&overlap_matrix(&ivs(&[(1.0, 3.0), (2.0, 5.0), (4.0, 6.0)]))),
            vec![vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]
        );
        assert_eq!(dense(&overlap_matrix(&ivs(&[(0.0, 1.0)]))), vec![vec![1.0]]);
    }

    #[test]
    fn sigma_squared_t_examples() {
        assert_eq!(sigma_squared_t(&[], &[], 2.5).unwrap(), 2.5);
        let one = ivs(&[(1.0, 2.0)]);
        assert_eq!(sigma_squared_t(&one, &[0.0], 2.0).unwrap(), 2.0);
        assert!((sigma_squared_t(&one, &[1.0], 2.0).unwrap() - 1.5).abs() < 1e-12);
        let two = ivs(&[(0.0, 1.0), (0.0, 1.0)]);
        assert!((sigma_squared_t(&two, &[1.0, 1.0], 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(sigma_squared_t(&one, &[-1.0], 2.0).is_err());
        assert!(sigma_squared_t(&one, &[1.0, 1.0], 2.0).is_err());
    }

    #[test]
    fn sigma_squared_single_interval_closed_form() {
        // t - u²ℓ²/(1+u²ℓ) when the interval lies inside [0, t].
        for &(s, l, u, t) in &[(0.2, 0.7, 1.3, 3.0), (1.0, 2.0, 0.4, 3.0), (0.5, 0.01, 30.0, 1.0)] {
            let iv = ivs(&[(s, s + l)]);
            let expect = t - u * u * l * l / (1.0 + u * u * l);
            assert!((sigma_squared_t(&iv, &[u], t).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_examples() {
        let one = ivs(&[(0.0, 1.0)]);
        assert_eq!(phi(&one, &[0.0]).unwrap(), 1.0);
        assert!((phi(&one, &[1.0]).unwrap() - 2f64.powf(-1.5)).abs() < 1e-12);
        let two = ivs(&[(0.0, 1.0), (0.0, 1.0)]);
        assert!((phi(&two, &[1.0, 1.0]).unwrap() - 3f64.powf(-1.5)).abs() < 1e-12);
        assert_eq!(phi(&[], &[]).unwrap(), 1.0);
    }

    #[test]
    fn sample_u_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (u, lw) = sample_u(&mut rng, &[1.0]).unwrap();
        assert_eq!(lw, 0.0);
        assert!(u[0] >= 0.0);
        let (_, lw) = sample_u(&mut rng, &[2.0, 0.5]).unwrap();
        assert!(lw.abs() < 1e-15);
        assert!(sample_u(&mut rng, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn displacement_variance_and_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let two = ivs(&[(0.0, 2.0), (1.0, 3.0)]);
        let (mut s11, mut s12, mut s1) = (0.0, 0.0, 0.0);
        let mut prods = Vec::with_capacity(n);
        for _ in 0..n {
            let x = displacements_for(&mut rng, &two);
            s1 += x[0][0];
            s11 += x[0][0] * x[0][0];
            let p = x[0][1] * x[1][1];
            s12 += p;
            prods.push(p);
        }
        let nf = n as f64;
        // Var of X_1 is 2 per coordinate (interval length 2).
        let var1 = s11 / nf - (s1 / nf).powi(2);
        let se_var = (2.0 * 4.0 / nf).sqrt();
        assert!((var1 - 2.0).abs() < 4.0 * se_var, "var {var1}");
        let cov = s12 / nf;
        let sd = (prods.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
        assert!((cov - 1.0).abs() < 4.0 * sd / nf.sqrt(), "cov {cov}");
    }

    #[test]
    fn unit_interval_variance_and_inverse_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let n = 100_000;
        for &len in &[1.0, 0.3] {
            let one = ivs(&[(0.5, 0.5 + len)]);
            let mut xs = Vec::with_capacity(n);
            let mut inv = Vec::with_capacity(n);
            for _ in 0..n {
                let x = displacements_for(&mut rng, &one)[0];
                xs.push(x[2]);
                inv.push(1.0 / norm3(&x));
            }
            let (m, v) = mean_var(&xs);
            assert!((v - len).abs() < 4.0 * (2.0 * len * len / n as f64).sqrt());
            assert!(m.abs() < 4.0 * (len / n as f64).sqrt());
            // 1-D quadrature of E[1/|X|] over the chi(3) density scaled by sqrt(len).
            let oracle = quad::adaptive_simpson(
                |r| (2.0 / std::f64::consts::PI).sqrt() * r * (-r * r / 2.0).exp() / len.sqrt(),
                0.0,
                12.0,
                1e-12,
            );
            assert!((oracle - (2.0 / (std::f64::consts::PI * len)).sqrt()).abs() < 1e-9);
            let (mi, vi) = mean_var(&inv);
            assert!((mi - oracle).abs() < 4.0 * (vi / n as f64).sqrt(), "{mi} vs {oracle}");
        }
    }

    #[test]
    fn weighted_constant_estimates_mean_inverse_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let exc = Excursion::new(ivs(&[(0.4, 1.4)])).unwrap();
        let n = 100_000;
        let w: Vec<f64> = (0..n)
            .map(|_| DressedExcursion::sample(&mut rng, exc.clone()).unwrap().1.exp())
            .collect();
        let (m, v) = mean_var(&w);
        let target = (2.0 / std::f64::consts::PI).sqrt();
        assert!((m - target).abs() < 4.0 * (v / n as f64).sqrt(), "{m} vs {target}");
    }

    #[test]
    fn importance_sampling_matches_u_quadrature() {
        // E[cos(P X_t) Π 1/|X_i|] via sampled (X, u) versus deterministic quadrature.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cases = [
            (ivs(&[(0.3, 1.3)]), 1.6, 0.8),
            (ivs(&[(0.2, 1.0), (0.6, 1.5)]), 1.5, 1.1),
        ];
        for (intervals, t, p) in cases {
            let exact = u_quadrature(&intervals, t, p, 1e-9).unwrap();
            let exc = Excursion::new(intervals.clone()).unwrap();
            let n = 100_000;
            let vals: Vec<f64> = (0..n)
                .map(|_| {
                    let (d, lw) = DressedExcursion::sample(&mut rng, exc.clone()).unwrap();
                    let s2 = d.tilt().unwrap().residual_variance(t).unwrap();
                    (lw - 0.5 * p * p * s2).exp()
                })
                .collect();
            let (m, v) = mean_var(&vals);
            assert!((m - exact).abs() < 4.0 * (v / n as f64).sqrt(), "{m} vs {exact}");
        }
    }

    #[test]
    fn u_quadrature_single_interval_zero_momentum_is_mean_inverse_norm() {
        let iv = ivs(&[(0.0, 2.0)]);
        let q = u_quadrature(&iv, 2.0, 0.0, 1e-10).unwrap();
        assert!((q - (2.0 / (std::f64::consts::PI * 2.0)).sqrt()).abs() < 1e-7, "{q}");
        assert!(u_quadrature(&ivs(&[(0.0, 1.0), (0.5, 2.0), (1.0, 3.0)]), 3.0, 0.0, 1e-6).is_err());
    }

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    fn instance() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<f64>, f64)> {
        (1usize..5).prop_flat_map(|n| {
            (
                prop::collection::vec((0.0f64..3.0, 0.05f64..2.0), n),
                prop::collection::vec(0.0f64..3.0, n),
                0.0f64..6.0,
            )
                .prop_map(|(iv, u, t)| (iv.into_iter().map(|(s, l)| (s, s + l)).collect(), u, t))
        })
    }

    proptest! {
        #[test]
        fn overlap_matrix_is_psd_gram(pairs in prop::collection::vec((0.0f64..3.0, 0.01f64..2.0), 1..6)) {
            let iv: Vec<Interval> = pairs.iter().map(|&(s, l)| Interval::new(s, s + l).unwrap()).collect();
            let c = overlap_matrix(&iv);
            for i in 0..c.dim() {
                prop_assert!((c.get(i, i) - iv[i].len()).abs() < 1e-15);
                for j in 0..c.dim() {
                    prop_assert_eq!(c.get(i, j), c.get(j, i));
                    prop_assert!(c.get(i, j) >= 0.0);
                }
            }
            let eig = c.as_matrix().clone().symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&e| e > -1e-12));
        }

        #[test]
        fn residual_variance_bounds_and_monotonicity((pairs, u, t) in instance(), k in 0usize..4) {
            let iv = ivs(&pairs);
            let s2 = sigma_squared_t(&iv, &u, t).unwrap();
            prop_assert!(s2 >= 0.0 && s2 <= t + 1e-12);
            let i = k % u.len();
            let mut bumped = u.clone();
            bumped[i] += 1e-3;
            let s2b = sigma_squared_t(&iv, &bumped, t).unwrap();
            prop_assert!(s2b <= s2 + 1e-10, "increasing u_{} raised σ²: {} -> {}", i, s2, s2b);
        }

        #[test]
        fn phi_in_unit_interval((pairs, u, _t) in instance()) {
            let iv = ivs(&pairs);
            let ph = phi(&iv, &u).unwrap();
            prop_assert!(ph > 0.0 && ph <= 1.0);
            let zero = vec![0.0; u.len()];
            prop_assert!((phi(&iv, &zero).unwrap() - 1.0).abs() < 1e-12);
            if u.iter().any(|&x| x > 1e-3) {
                prop_assert!(ph < 1.0 - 1e-12);
            }
        }
    }
}
