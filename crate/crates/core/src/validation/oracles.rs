//! Brute-force reference computations used by the acceptance checks.

use crate::error::{invalid, Result};
use crate::excursion::Interval;

/// Residual variance and Gaussian normalization from a discretized
/// Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteProjection {
    pub sigma2: f64,
    pub phi: f64,
}

/// Represents `B` by independent increments on cells of width at most
/// `mesh` (a uniform subdivision between consecutive interval endpoints)
/// and the noises `Z_i` by extra orthonormal coordinates, then projects
/// `B_t` onto `span{u_i B_{s_i,t_i} + Z_i}` by modified Gram–Schmidt. The
/// Gram determinant of the observation vectors is the product of the
/// squared Gram–Schmidt norms.
pub fn discretized_projection(intervals: &[Interval], u: &[f64], t: f64, mesh: f64) -> Result<DiscreteProjection> {
    if intervals.len() != u.len() {
        return Err(invalid("u", "length must match intervals"));
    }
    if !(mesh > 0.0) {
        return Err(invalid("mesh", "must be positive"));
    }
    let mut breaks: Vec<f64> = intervals.iter().flat_map(|iv| [iv.birth, iv.death]).collect();
    breaks.extend([0.0, t]);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    // Cell edges.
    let mut edges = vec![breaks[0]];
    for w in breaks.windows(2) {
        let pieces = ((w[1] - w[0]) / mesh).ceil().max(1.0) as usize;
        for k in 1..=pieces {
            edges.push(if k == pieces { w[1] } else { w[0] + (w[1] - w[0]) * k as f64 / pieces as f64 });
        }
    }
    let cells = edges.len() - 1;
    let scale: Vec<f64> = edges.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
    let cell_of = |x: f64| edges.partition_point(|&e| e < x);
    let n = intervals.len();
    let dim = cells + n;

    let obs: Vec<Vec<f64>> = intervals
        .iter()
        .zip(u)
        .enumerate()
        .map(|(i, (iv, &ui))| {
            let mut v = vec![0.0; dim];
            for c in cell_of(iv.birth)..cell_of(iv.death) {
                v[c] = ui * scale[c];
            }
            v[cells + i] = 1.0;
            v
        })
        .collect();
    let mut target = vec![0.0; dim];
    for c in 0..cell_of(t) {
        target[c] = scale[c];
    }

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut log_det = 0.0;
    for mut v in obs {
        for q in &basis {
            let c = dot(&v, q);
            for (x, y) in v.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
        let norm2 = dot(&v, &v);
        log_det += norm2.ln();
        let inv = 1.0 / norm2.sqrt();
        basis.push(v.into_iter().map(|x| x * inv).collect());
    }
    for q in &basis {
        let c = dot(&target, q);
        for (x, y) in target.iter_mut().zip(q) {
            *x -= c * y;
        }
    }
    Ok(DiscreteProjection {
        sigma2: dot(&target, &target),
        phi: (-1.5 * log_det).exp(),
    })
}
