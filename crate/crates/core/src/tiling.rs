//! Packing and tiling checks for `φ([0,1)^d)`-type images against a
//! lattice `AZ^d`.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::measures::Measure;
use crate::phases::{
    measure_preservation_check, PhaseMap, PreservationOptions, PreservationReport, ScalarFn, Triangular2D,
};
use crate::real::Real;
use crate::rng;

/// Largest tolerated fraction of failed inversions.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;
/// Cells per direction of the occupancy grid used for maps without an
/// analytic inverse.
pub const GRID_CELLS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Uniformity {
    Uniform,
    Nonuniform,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct HistogramReport {
    pub chi2: f64,
    pub dof: usize,
    pub threshold_99: f64,
    pub threshold_9999: f64,
    pub empty_bins: usize,
    pub bins: usize,
    pub n: usize,
    /// Whether `|det A|` equals the box volume; otherwise only packing is
    /// assessable.
    pub volume_matches: bool,
    pub counts: Vec<u64>,
    pub verdict: Uniformity,
}

impl HistogramReport {
    /// Writes one line per bin with its center in lattice coordinates.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = dims_of(self.counts.len(), self.bins);
        let header: Vec<String> = (1..=d).map(|k| format!("u{k}")).collect();
        writeln!(w, "{},count", header.join(","))?;
        for (i, c) in self.counts.iter().enumerate() {
            let mut rem = i;
            let mut coords = Vec::with_capacity(d);
            for _ in 0..d {
                coords.push(format!(
                    "{}",
                    (rem % self.bins) as f64 / self.bins as f64 + 0.5 / self.bins as f64
                ));
                rem /= self.bins;
            }
            writeln!(w, "{},{c}", coords.join(","))?;
        }
        Ok(())
    }
}

fn dims_of(total: usize, bins: usize) -> usize {
    let mut d = 0;
    let mut t = 1;
    while t < total {
        t *= bins;
        d += 1;
    }
    d.max(1)
}

fn check_box<T: Real>(lo: &[T], hi: &[T]) -> Result<T> {
    if lo.len() != hi.len() || lo.is_empty() {
        return Err(invalid("box", "lo and hi must have the same positive length"));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(invalid("box", "need lo < hi in every coordinate"));
    }
    Ok(lo.iter().zip(hi).fold(T::one(), |v, (a, b)| v * (*b - *a)))
}

fn uniform_in<T: Real, R: Rng>(r: &mut R, lo: &[T], hi: &[T]) -> Vec<T> {
    lo.iter()
        .zip(hi)
        .map(|(a, b)| *a + (*b - *a) * T::lit(r.random::<f64>()))
        .collect()
}

/// Chi-square uniformity test of `frac(A⁻¹φ(x))` for `x` uniform in the
/// box, with `bins` bins per direction.
pub fn frac_histogram_test<T: Real>(
    phi: &PhaseMap<T>,
    lo: &[T],
    hi: &[T],
    a: &Mat<T>,
    n: usize,
    bins: usize,
    seed: u64,
) -> Result<HistogramReport> {
    let vol = check_box(lo, hi)?;
    let d = lo.len();
    if phi.in_dim() != d || phi.out_dim() != a.rows() || !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: phi.in_dim(),
        });
    }
    if bins < 2 {
        return Err(invalid("bins", "need at least two bins per direction"));
    }
    let total_bins = bins
        .checked_pow(a.rows() as u32)
        .ok_or_else(|| invalid("bins", "too many bins"))?;
    if n < 10 * total_bins {
        return Err(invalid(
            "n",
            format!("need at least 10 samples per bin ({} total)", 10 * total_bins),
        ));
    }
    let ainv = a.inverse()?;
    let det = a.det()?.abs();
    let bt = T::of(bins);
    let partial: Vec<Result<Vec<u64>>> = rng::batches(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(id, count)| {
            let mut r = rng::stream(seed, id);
            let mut h = vec![0u64; total_bins];
            for _ in 0..count {
                let x = uniform_in(&mut r, lo, hi);
                let u = ainv.matvec(&phi.eval(&x)?);
                let mut idx = 0usize;
                for v in u.iter().rev() {
                    let f = *v - v.floor();
                    let b = (f * bt).floor().to_usize().unwrap_or(0).min(bins - 1);
                    idx = idx * bins + b;
                }
                h[idx] += 1;
            }
            Ok(h)
        })
        .collect();
    let mut counts = vec![0u64; total_bins];
    for h in partial {
        for (c, v) in counts.iter_mut().zip(h?) {
            *c += v;
        }
    }
    let expected = n as f64 / total_bins as f64;
    let chi2 = counts
        .iter()
        .map(|&c| {
            let dlt = c as f64 - expected;
            dlt * dlt / expected
        })
        .sum::<f64>();
    let dof = total_bins - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| invalid("bins", e.to_string()))?;
    let t99 = dist.inverse_cdf(0.99);
    let t9999 = dist.inverse_cdf(0.9999);
    let verdict = if chi2 < t99 {
        Uniformity::Uniform
    } else if chi2 > t9999 {
        Uniformity::Nonuniform
    } else {
        Uniformity::Inconclusive
    };
    Ok(HistogramReport {
        chi2,
        dof,
        threshold_99: t99,
        threshold_9999: t9999,
        empty_bins: counts.iter().filter(|&&c| c == 0).count(),
        bins,
        n,
        volume_matches: (det - vol).abs() <= T::lit(1e-9) * vol.max(T::one()),
        counts,
        verdict,
    })
}

/// Membership test `y ∈ φ(box)`.
enum Inverter<'a, T: Real> {
    Identity,
    Affine { m: &'a Mat<T>, b: &'a [T] },
    Unipotent(&'a [ScalarFn<T>]),
    Triangular(&'a Triangular2D<T>),
    Grid(OccupancyGrid<T>),
}

struct OccupancyGrid<T> {
    lo: Vec<T>,
    width: Vec<T>,
    cells: usize,
    occupied: Vec<bool>,
}

impl<T: Real> OccupancyGrid<T> {
    /// Marks the cells hit by `φ` on a regular grid of the box (two points
    /// per cell width), then dilates by one cell.
    fn build(phi: &PhaseMap<T>, lo: &[T], hi: &[T]) -> Result<Self> {
        let d = lo.len();
        let out = phi.out_dim();
        let cells = if out <= 3 {
            GRID_CELLS
        } else {
            (((1usize << 24) as f64).powf(1.0 / out as f64) as usize).max(2)
        };
        let per = {
            let cap = (1usize << 22) as f64;
            ((cap.powf(1.0 / d as f64)) as usize).clamp(2, 2 * GRID_CELLS)
        };
        let total = per.pow(d as u32);
        let pts: Vec<Vec<T>> = (0..total)
            .into_par_iter()
            .map(|mut i| {
                let x: Vec<T> = (0..d)
                    .map(|k| {
                        let j = i % per;
                        i /= per;
                        lo[k] + (hi[k] - lo[k]) * (T::of(j) + T::lit(0.5)) / T::of(per)
                    })
                    .collect();
                phi.eval(&x)
            })
            .collect::<Result<_>>()?;
        let mut plo = vec![T::infinity(); out];
        let mut phi_hi = vec![T::neg_infinity(); out];
        for p in &pts {
            for k in 0..out {
                plo[k] = plo[k].min(p[k]);
                phi_hi[k] = phi_hi[k].max(p[k]);
            }
        }
        // the samples sit at cell centres, so the image reaches past their
        // bounding box; pad by two cell widths on each side
        let width: Vec<T> = (0..out)
            .map(|k| {
                let span = phi_hi[k] - plo[k];
                let w = span / T::of(cells - 4);
                if w > T::zero() {
                    plo[k] -= w + w;
                    w
                } else {
                    plo[k] -= T::one();
                    T::one()
                }
            })
            .collect();
        let mut g = Self {
            lo: plo,
            width,
            cells,
            occupied: vec![false; cells.pow(out as u32)],
        };
        let mut marks = Vec::with_capacity(pts.len());
        for p in &pts {
            marks.push(g.cell(p));
        }
        let offsets: Vec<Vec<i64>> = (0..3usize.pow(out as u32))
            .map(|mut c| {
                (0..out)
                    .map(|_| {
                        let o = (c % 3) as i64 - 1;
                        c /= 3;
                        o
                    })
                    .collect()
            })
            .collect();
        for c in marks {
            for off in &offsets {
                let nb: Vec<i64> = c.iter().zip(off).map(|(a, b)| a + b).collect();
                if let Some(i) = g.flat(&nb) {
                    g.occupied[i] = true;
                }
            }
        }
        Ok(g)
    }

    fn cell(&self, y: &[T]) -> Vec<i64> {
        y.iter()
            .zip(&self.lo)
            .zip(&self.width)
            .map(|((v, l), w)| ((*v - *l) / *w).floor().to_i64().unwrap_or(i64::MIN))
            .collect()
    }

    fn flat(&self, c: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for &v in c.iter().rev() {
            if v < 0 || v >= self.cells as i64 {
                return None;
            }
            idx = idx * self.cells + v as usize;
        }
        Some(idx)
    }

    fn contains(&self, y: &[T]) -> bool {
        self.flat(&self.cell(y)).is_some_and(|i| self.occupied[i])
    }
}

fn in_box<T: Real>(x: &[T], lo: &[T], hi: &[T]) -> bool {
    x.iter().zip(lo).zip(hi).all(|((v, a), b)| *v >= *a && *v < *b)
}

impl<'a, T: Real> Inverter<'a, T> {
    fn new(phi: &'a PhaseMap<T>, lo: &[T], hi: &[T]) -> Result<Self> {
        Ok(match phi {
            PhaseMap::Identity { .. } => Inverter::Identity,
            PhaseMap::Affine { m, b } if m.is_square() => Inverter::Affine { m, b },
            PhaseMap::Unipotent { l } => Inverter::Unipotent(l),
            PhaseMap::Triangular2D(t) => Inverter::Triangular(t),
            _ => Inverter::Grid(OccupancyGrid::build(phi, lo, hi)?),
        })
    }

    fn exact(&self) -> bool {
        !matches!(self, Inverter::Grid(_))
    }

    /// `Ok(true)` when `y ∈ φ(box)`; `Err` counts as an inversion failure.
    fn contains(&self, y: &[T], lo: &[T], hi: &[T]) -> Result<bool> {
        match self {
            Inverter::Identity => Ok(in_box(y, lo, hi)),
            Inverter::Affine { m, b } => {
                let rhs: Vec<T> = y.iter().zip(b.iter()).map(|(a, c)| *a - *c).collect();
                Ok(in_box(&m.solve(&rhs)?, lo, hi))
            }
            Inverter::Unipotent(l) => {
                let d = y.len();
                let mut x = y.to_vec();
                for k in (0..d - 1).rev() {
                    x[k] = y[k] - l[k].eval(&x[k + 1..]);
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteValue {
                        node: y.iter().map(|v| v.as_f64()).collect(),
                    });
                }
                Ok(in_box(&x, lo, hi))
            }
            Inverter::Triangular(t) => {
                let Some(x2) = t.invert_second(y[1], lo[1], hi[1])? else {
                    return Ok(false);
                };
                let x1 = (y[0] - t.f(x2)) / t.z(x2);
                if !x1.is_finite() {
                    return Err(Error::NonFiniteValue {
                        node: y.iter().map(|v| v.as_f64()).collect(),
                    });
                }
                Ok(in_box(&[x1, x2], lo, hi))
            }
            Inverter::Grid(g) => Ok(g.contains(y)),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OverlapReport {
    pub k: Vec<f64>,
    pub volume_est: f64,
    pub std_err: f64,
    pub n: usize,
    pub inversion_failures: usize,
    /// False when membership came from the occupancy grid.
    pub exact_inversion: bool,
}

/// Monte-Carlo estimate of `m((φ(box) + k) ∩ φ(box))`, computed as
/// `∫_box 1[φ(x) + k ∈ φ(box)]·|det Jφ(x)| dx`. Assumes `φ` is injective on
/// the box.
pub fn overlap_volume<T: Real>(
    phi: &PhaseMap<T>,
    lo: &[T],
    hi: &[T],
    k: &[T],
    n: usize,
    seed: u64,
) -> Result<OverlapReport> {
    let inv = Inverter::new(phi, lo, hi)?;
    overlap_with(phi, &inv, lo, hi, k, n, seed)
}

fn overlap_with<T: Real>(
    phi: &PhaseMap<T>,
    inv: &Inverter<'_, T>,
    lo: &[T],
    hi: &[T],
    k: &[T],
    n: usize,
    seed: u64,
) -> Result<OverlapReport> {
    let vol = check_box(lo, hi)?;
    if n < 2 {
        return Err(invalid("n", "need at least two samples"));
    }
    if k.len() != phi.out_dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.out_dim(),
            got: k.len(),
        });
    }
    let h = T::lit(crate::phases::DEFAULT_FD_STEP);
    let parts: Vec<Result<(f64, f64, usize)>> = rng::batches(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(id, count)| {
            let mut r = rng::stream(seed, id);
            let (mut s, mut s2, mut fails) = (0.0, 0.0, 0usize);
            for _ in 0..count {
                let x = uniform_in(&mut r, lo, hi);
                let mut y = phi.eval(&x)?;
                for (yi, ki) in y.iter_mut().zip(k) {
                    *yi += *ki;
                }
                match inv.contains(&y, lo, hi) {
                    Ok(true) => {
                        let jac = if phi.is_differentiable() {
                            phi.jacobian(&x, h)?.det()?.abs().as_f64()
                        } else {
                            1.0
                        };
                        s += jac;
                        s2 += jac * jac;
                    }
                    Ok(false) => {}
                    Err(_) => fails += 1,
                }
            }
            Ok((s, s2, fails))
        })
        .collect();
    let (mut s, mut s2, mut fails) = (0.0, 0.0, 0usize);
    for p in parts {
        let (a, b, c) = p?;
        s += a;
        s2 += b;
        fails += c;
    }
    if fails as f64 > MAX_FAILURE_FRACTION * n as f64 {
        return Err(Error::InversionFailures {
            failed: fails,
            total: n,
        });
    }
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 / nf) - mean * mean).max(0.0);
    let v = vol.as_f64();
    Ok(OverlapReport {
        k: k.iter().map(|t| t.as_f64()).collect(),
        volume_est: v * mean,
        std_err: v * (var / (nf - 1.0)).sqrt(),
        n,
        inversion_failures: fails,
        exact_inversion: inv.exact(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum PackingVerdict {
    Packing,
    NotPacking,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum TilingVerdict {
    Tiles,
    NotTiling,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TilingConfig {
    /// Sup-radius of the integer vectors `k` whose translates `Ak` are
    /// tested for overlap.
    pub radius: i64,
    pub overlap_samples: usize,
    pub volume_samples: usize,
    pub histogram_samples: usize,
    pub bins: usize,
    pub seed: u64,
    pub preservation_tol: f64,
}

impl Default for TilingConfig {
    fn default() -> Self {
        Self {
            radius: 2,
            overlap_samples: 20_000,
            volume_samples: 20_000,
            histogram_samples: 200_000,
            bins: 16,
            seed: 0,
            preservation_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeReport {
    pub volume_est: f64,
    pub std_err: f64,
    pub det_a: f64,
    pub matches: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TilingReport {
    pub packing: PackingVerdict,
    pub overlaps: Vec<OverlapReport>,
    pub volume: VolumeReport,
    pub preservation: Option<PreservationReport>,
    pub histogram: HistogramReport,
    pub tiling: TilingVerdict,
}

/// `m(φ(box))` as `∫_box |det Jφ|`, assuming injectivity.
fn image_volume<T: Real>(phi: &PhaseMap<T>, lo: &[T], hi: &[T], n: usize, seed: u64) -> Result<(f64, f64)> {
    let vol = check_box(lo, hi)?.as_f64();
    let h = T::lit(crate::phases::DEFAULT_FD_STEP);
    let parts: Vec<Result<(f64, f64)>> = rng::batches(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(id, count)| {
            let mut r = rng::stream(seed, rng::INTERNAL_STREAM_BASE + id);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let x = uniform_in(&mut r, lo, hi);
                let j = phi.jacobian(&x, h)?.det()?.abs().as_f64();
                s += j;
                s2 += j * j;
            }
            Ok((s, s2))
        })
        .collect();
    let (mut s, mut s2) = (0.0, 0.0);
    for p in parts {
        let (a, b) = p?;
        s += a;
        s2 += b;
    }
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 / nf) - mean * mean).max(0.0);
    Ok((vol * mean, vol * (var / (nf - 1.0)).sqrt()))
}

/// Packing by `AZ^d` plus `m(φ(box)) = |det A|` gives a tiling. The
/// frequency histogram is reported as corroboration only.
pub fn tiling_verdict<T: Real>(
    phi: &PhaseMap<T>,
    lo: &[T],
    hi: &[T],
    a: &Mat<T>,
    config: &TilingConfig,
) -> Result<TilingReport> {
    let d = phi.out_dim();
    if !a.is_square() || a.rows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.rows(),
        });
    }
    if config.radius < 1 {
        return Err(invalid("radius", "must be at least 1"));
    }
    let inv = Inverter::new(phi, lo, hi)?;
    let side = (2 * config.radius + 1) as usize;
    let mut overlaps = Vec::new();
    for idx in 0..side.pow(d as u32) {
        let mut rem = idx;
        let kint: Vec<T> = (0..d)
            .map(|_| {
                let v = (rem % side) as i64 - config.radius;
                rem /= side;
                T::lit(v as f64)
            })
            .collect();
        if kint.iter().all(|v| *v == T::zero()) {
            continue;
        }
        let k = a.matvec(&kint);
        overlaps.push(overlap_with(
            phi,
            &inv,
            lo,
            hi,
            &k,
            config.overlap_samples,
            config.seed.wrapping_add(idx as u64),
        )?);
    }
    let packing = if overlaps.iter().all(|o| o.volume_est <= 3.0 * o.std_err) {
        PackingVerdict::Packing
    } else if overlaps.iter().any(|o| o.volume_est > 5.0 * o.std_err) {
        PackingVerdict::NotPacking
    } else {
        PackingVerdict::Inconclusive
    };
    let det_a = a.det()?.abs().as_f64();
    let (vest, vse) = image_volume(phi, lo, hi, config.volume_samples, config.seed)?;
    let volume = VolumeReport {
        volume_est: vest,
        std_err: vse,
        det_a,
        matches: (vest - det_a).abs() <= 1e-6 + 3.0 * vse,
    };
    let preservation = if phi.is_differentiable() {
        let dom = Measure::lebesgue_box(lo.to_vec(), hi.to_vec())?;
        Some(measure_preservation_check(
            phi,
            &dom,
            config.volume_samples.min(10_000),
            config.preservation_tol,
            config.seed,
            PreservationOptions::default(),
        )?)
    } else {
        None
    };
    let total_bins = config.bins.pow(d as u32);
    let histogram = frac_histogram_test(
        phi,
        lo,
        hi,
        a,
        config.histogram_samples.max(10 * total_bins),
        config.bins,
        config.seed,
    )?;
    let tiling = match (packing, volume.matches) {
        (PackingVerdict::Packing, true) => TilingVerdict::Tiles,
        (PackingVerdict::NotPacking, _) | (_, false) => TilingVerdict::NotTiling,
        _ => TilingVerdict::Inconclusive,
    };
    Ok(TilingReport {
        packing,
        overlaps,
        volume,
        preservation,
        histogram,
        tiling,
    })
}
