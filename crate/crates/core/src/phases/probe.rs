//! Sampled checks on phase maps: Jacobian determinants and collisions.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::measures::Measure;
use crate::real::{euclid_dist, Real};

use super::{PhaseMap, DEFAULT_FD_STEP};

#[derive(Clone, Copy, Debug)]
pub struct PreservationOptions {
    /// Difference step for maps without an analytic Jacobian.
    pub h: f64,
    /// Points within this distance of a non-smooth locus are skipped.
    pub band: f64,
}

impl Default for PreservationOptions {
    fn default() -> Self {
        Self {
            h: DEFAULT_FD_STEP,
            band: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PreservationReport {
    pub max_dev: f64,
    pub points_checked: usize,
    pub excluded_fraction: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Samples `n` points of `domain` and reports `max ||det J(x)| − 1|`.
pub fn measure_preservation_check<T: Real>(
    phi: &PhaseMap<T>,
    domain: &Measure<T>,
    n: usize,
    tol: f64,
    seed: u64,
    opts: PreservationOptions,
) -> Result<PreservationReport> {
    let pts = domain.sample(n, seed)?;
    let band = T::lit(opts.band);
    let h = T::lit(opts.h);
    let kept: Vec<&Vec<T>> = pts.iter().filter(|p| !phi.near_nonsmooth(p, band)).collect();
    let devs: Vec<Result<f64>> = kept
        .par_iter()
        .map(|p| {
            let det = phi.jacobian(p, h)?.det()?;
            Ok((det.abs() - T::one()).abs().as_f64())
        })
        .collect();
    let mut max_dev: f64 = 0.0;
    for d in devs {
        let d = d?;
        max_dev = if d.is_nan() { f64::INFINITY } else { max_dev.max(d) };
    }
    Ok(PreservationReport {
        max_dev,
        points_checked: kept.len(),
        excluded_fraction: 1.0 - kept.len() as f64 / n as f64,
        tol,
        pass: max_dev <= tol,
    })
}

/// Upper bound on the number of colliding pairs listed in a report.
pub const MAX_LISTED_PAIRS: usize = 1000;

#[derive(Clone, Debug, Serialize)]
pub struct CollisionReport {
    pub n_samples: usize,
    /// A prefix of the colliding pairs `(x, x′)`.
    pub collisions: Vec<(Vec<f64>, Vec<f64>)>,
    pub n_pairs: usize,
    /// Fraction of samples that take part in at least one collision.
    pub collision_fraction: f64,
    pub delta_x: f64,
    pub delta_y: f64,
}

/// Looks for pairs of samples that are far apart (`|x − x′| > δ_x`) but
/// land close together (`|φ(x) − φ(x′)| < δ_y`). Finding none is not a proof
/// of essential injectivity. Defaults: `δ_x = 0.05·diam(support)` and
/// `δ_y = 10⁻⁴·diam(range)`.
pub fn essential_injectivity_probe<T: Real>(
    phi: &PhaseMap<T>,
    mu: &Measure<T>,
    n: usize,
    delta_x: Option<f64>,
    delta_y: Option<f64>,
    seed: u64,
) -> Result<CollisionReport> {
    if n < 100 {
        return Err(invalid("n", "need at least 100 samples to populate the hash grid"));
    }
    let xs = mu.sample(n, seed)?;
    let ys: Vec<Vec<T>> = xs.iter().map(|x| phi.eval(x)).collect::<Result<_>>()?;
    let dx = match delta_x {
        Some(v) => v,
        None => 0.05 * mu.support_diameter()?.as_f64(),
    };
    let dy = match delta_y {
        Some(v) => v,
        None => {
            let d = ys[0].len();
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for y in &ys {
                for k in 0..d {
                    lo[k] = lo[k].min(y[k].as_f64());
                    hi[k] = hi[k].max(y[k].as_f64());
                }
            }
            let diam = euclid_dist(&lo, &hi);
            1e-4 * if diam > 0.0 { diam } else { 1.0 }
        }
    };
    if !(dx > 0.0 && dy > 0.0) {
        return Err(invalid("delta", "thresholds must be positive"));
    }
    let key = |y: &[T]| -> Vec<i64> { y.iter().map(|v| (v.as_f64() / dy).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, y) in ys.iter().enumerate() {
        grid.entry(key(y)).or_default().push(i);
    }
    let d = ys[0].len();
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut c| {
            (0..d)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect()
        })
        .collect();
    let xs64: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|v| v.as_f64()).collect()).collect();
    let ys64: Vec<Vec<f64>> = ys.iter().map(|y| y.iter().map(|v| v.as_f64()).collect()).collect();
    let found: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let base = key(&ys[i]);
            let mut partners = Vec::new();
            for off in &offsets {
                let cell: Vec<i64> = base.iter().zip(off).map(|(a, b)| a + b).collect();
                if let Some(members) = grid.get(&cell) {
                    for &j in members {
                        if j > i && euclid_dist(&ys64[i], &ys64[j]) < dy && euclid_dist(&xs64[i], &xs64[j]) > dx {
                            partners.push(j);
                        }
                    }
                }
            }
            partners
        })
        .collect();
    let mut involved = vec![false; n];
    let mut pairs = Vec::new();
    let mut n_pairs = 0;
    for (i, ps) in found.iter().enumerate() {
        for &j in ps {
            involved[i] = true;
            involved[j] = true;
            n_pairs += 1;
            if pairs.len() < MAX_LISTED_PAIRS {
                pairs.push((xs64[i].clone(), xs64[j].clone()));
            }
        }
    }
    let hit = involved.iter().filter(|&&b| b).count();
    Ok(CollisionReport {
        n_samples: n,
        collisions: pairs,
        n_pairs,
        collision_fraction: hit as f64 / n as f64,
        delta_x: dx,
        delta_y: dy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    #[test]
    fn identity_preserves_measure() {
        let r = measure_preservation_check(
            &PhaseMap::<f64>::identity(2),
            &Measure::unit_cube(2),
            500,
            1e-12,
            1,
            PreservationOptions::default(),
        )
        .unwrap();
        assert_eq!(r.max_dev, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn dilation_fails() {
        let p = PhaseMap::affine(Mat::diag(&[2.0, 1.0]), vec![0.0, 0.0]).unwrap();
        let r = measure_preservation_check(&p, &Measure::unit_cube(2), 200, 1e-6, 1, PreservationOptions::default())
            .unwrap();
        assert_eq!(r.max_dev, 1.0);
        assert!(!r.pass);
    }

    #[test]
    fn mirror_pairs_collide() {
        let mu = Measure::<f64>::lebesgue_box(vec![-1.0], vec![1.0]).unwrap();
        let r = essential_injectivity_probe(&PhaseMap::square(), &mu, 10_000, Some(0.1), Some(0.01), 4).unwrap();
        assert!(r.collision_fraction >= 0.5, "{}", r.collision_fraction);
        for (a, b) in &r.collisions {
            assert!((a[0] - b[0]).abs() > 0.1);
            assert!((a[0] * a[0] - b[0] * b[0]).abs() < 0.01);
        }
        let r = essential_injectivity_probe(
            &PhaseMap::<f64>::identity(1),
            &Measure::unit_cube(1),
            10_000,
            Some(0.1),
            Some(0.01),
            4,
        )
        .unwrap();
        assert_eq!(r.collision_fraction, 0.0);
        assert!(
            essential_injectivity_probe(&PhaseMap::identity(1), &Measure::<f64>::unit_cube(1), 50, None, None, 4)
                .is_err()
        );
    }
}
