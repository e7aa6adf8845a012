//! Discretizing representations of `ℝ^d ⋊ ℝ^m` into windowed systems.
//!
//! With `t•y = exp(Σ t_k A_k) y` for commuting `A_k` and a fixed `ℓ`, the
//! phase is `φ(t) = exp(−Σ t_k A_k)ᵀ ℓ` and the atoms are
//! `a_{λ,γ}(s) = e^{2πiφ(s−γ)·λ} 1_Ω(s−γ) = e^{2πiφ(s)·(γ•λ)} 1_Ω(s−γ)`.
//! Translates of `Ω` are disjoint, so the Gram matrix of the atoms splits
//! into one block per `γ`.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{frame_bounds, gram, GramOptions, TestBasis, Verdict};
use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::measures::Measure;
use crate::phases::{GroupPhase, PhaseMap};
use crate::quadrature::QuadratureSpec;
use crate::real::{cis_turns, dot, Real};
use crate::spectra::{SpectrumSet, Truncation};

/// Commuting matrices `A_1..A_m` (each `d×d`) and `ℓ ∈ ℝ^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct GroupData<T: Real> {
    #[serde(rename = "A")]
    pub matrices: Vec<Vec<Vec<T>>>,
    pub ell: Vec<T>,
}

impl<T: Real> GroupData<T> {
    /// Validates shapes and pairwise commutation.
    pub fn new(matrices: Vec<Vec<Vec<T>>>, ell: Vec<T>) -> Result<Self> {
        let g = Self { matrices, ell };
        g.phase()?;
        Ok(g)
    }

    pub fn m(&self) -> usize {
        self.matrices.len()
    }

    pub fn d(&self) -> usize {
        self.ell.len()
    }

    pub fn phase(&self) -> Result<GroupPhase<T>> {
        let mats = self
            .matrices
            .iter()
            .map(|rows| Mat::from_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        GroupPhase::new(mats, self.ell.clone())
    }

    /// `d = 2`, `m = 1`, `A₁ = [[0,1],[0,0]]`, `ℓ = (1,0)`: `φ(t) = (1, −t)`.
    pub fn heisenberg() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            matrices: vec![vec![vec![z, o], vec![z, z]]],
            ell: vec![o, z],
        }
    }

    /// `d = 3`, `m = 2`, `A₁ = E₁₂ + E₂₃`, `A₂ = E₁₃`, `ℓ = e₁`:
    /// `φ(t) = (1, −t₁, −t₂ + t₁²/2)`.
    pub fn poly2d() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            matrices: vec![
                vec![vec![z, o, z], vec![z, z, o], vec![z, z, z]],
                vec![vec![z, z, o], vec![z, z, z], vec![z, z, z]],
            ],
            ell: vec![o, z, z],
        }
    }

    /// `d = m = 1`, `A = [[1]]`: `φ(s) = e^{−s}ℓ`.
    pub fn axb(ell: T) -> Self {
        Self {
            matrices: vec![vec![vec![T::one()]]],
            ell: vec![ell],
        }
    }

    /// `A₁ = I`, `A₂ = [[0,1],[0,0]]`, `ℓ = (1,0)`:
    /// `φ(t) = (e^{−t₁}, −t₂e^{−t₁})`.
    pub fn shearlet() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            matrices: vec![vec![vec![o, z], vec![z, o]], vec![vec![z, o], vec![z, z]]],
            ell: vec![o, z],
        }
    }

    /// Built-in data by name: `heisenberg`, `poly2d`, `axb` (`ℓ = 1`),
    /// `shearlet`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "heisenberg" => Some(Self::heisenberg()),
            "poly2d" => Some(Self::poly2d()),
            "axb" => Some(Self::axb(T::one())),
            "shearlet" => Some(Self::shearlet()),
            _ => None,
        }
    }
}

/// `φ(t) = exp(−Σ t_k A_k)ᵀ ℓ` as a phase map.
pub fn phase_from_group<T: Real>(g: &GroupData<T>) -> Result<PhaseMap<T>> {
    Ok(PhaseMap::GroupExp(g.phase()?))
}

/// Window `Ω`, translations `Γ`, frequencies `Λ` and the group phase.
#[derive(Clone, Debug)]
pub struct WindowSystem<T: Real> {
    pub omega_lo: Vec<T>,
    pub omega_hi: Vec<T>,
    pub gamma_set: Vec<Vec<T>>,
    pub lambda_set: SpectrumSet<T>,
    pub group: GroupData<T>,
    phase: GroupPhase<T>,
}

fn box_overlap<T: Real>(alo: &[T], ahi: &[T], blo: &[T], bhi: &[T]) -> T {
    alo.iter()
        .zip(ahi)
        .zip(blo.iter().zip(bhi))
        .fold(T::one(), |v, ((al, ah), (bl, bh))| {
            v * (ah.min(*bh) - al.max(*bl)).max(T::zero())
        })
}

impl<T: Real> WindowSystem<T> {
    /// Checks dimensions and that the translates `Ω + γ` are pairwise
    /// disjoint up to boundaries.
    pub fn new(
        omega_lo: Vec<T>,
        omega_hi: Vec<T>,
        gamma_set: Vec<Vec<T>>,
        lambda_set: SpectrumSet<T>,
        group: GroupData<T>,
    ) -> Result<Self> {
        let phase = group.phase()?;
        let m = phase.m();
        if omega_lo.len() != m || omega_hi.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: omega_lo.len(),
            });
        }
        if omega_lo.iter().zip(&omega_hi).any(|(a, b)| !(a < b)) {
            return Err(invalid("omega", "need lo < hi in every coordinate"));
        }
        if gamma_set.is_empty() {
            return Err(invalid("gamma_set", "need at least one translation"));
        }
        if let Some(g) = gamma_set.iter().find(|g| g.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: g.len(),
            });
        }
        if lambda_set.dim != phase.d() {
            return Err(Error::DimensionMismatch {
                expected: phase.d(),
                got: lambda_set.dim,
            });
        }
        let vol = omega_lo.iter().zip(&omega_hi).fold(T::one(), |v, (a, b)| v * (*b - *a));
        let shifted = |g: &[T]| -> (Vec<T>, Vec<T>) {
            (
                omega_lo.iter().zip(g).map(|(a, b)| *a + *b).collect(),
                omega_hi.iter().zip(g).map(|(a, b)| *a + *b).collect(),
            )
        };
        for (i, a) in gamma_set.iter().enumerate() {
            let (alo, ahi) = shifted(a);
            for (j, b) in gamma_set.iter().enumerate().skip(i + 1) {
                let (blo, bhi) = shifted(b);
                if box_overlap(&alo, &ahi, &blo, &bhi) > T::lit(1e-12) * vol {
                    return Err(invalid(
                        "gamma_set",
                        format!("translates {i} and {j} of the window overlap"),
                    ));
                }
            }
        }
        Ok(Self {
            omega_lo,
            omega_hi,
            gamma_set,
            lambda_set,
            group,
            phase,
        })
    }

    pub fn phi(&self) -> PhaseMap<T> {
        PhaseMap::GroupExp(self.phase.clone())
    }

    /// `Ω + γ` as a box.
    pub fn translate(&self, gamma: &[T]) -> (Vec<T>, Vec<T>) {
        (
            self.omega_lo.iter().zip(gamma).map(|(a, b)| *a + *b).collect(),
            self.omega_hi.iter().zip(gamma).map(|(a, b)| *a + *b).collect(),
        )
    }

    /// `γ•Λ`.
    pub fn acted_spectrum(&self, gamma: &[T]) -> Result<SpectrumSet<T>> {
        let e = self.phase.flow(gamma)?;
        Ok(self.lambda_set.transformed(&e))
    }
}

/// One atom `a_{λ,γ}`.
#[derive(Clone, Debug)]
pub struct Atom<T: Real> {
    pub lambda: Vec<T>,
    pub gamma: Vec<T>,
    system: Arc<WindowSystem<T>>,
}

impl<T: Real> Atom<T> {
    fn in_window(&self, s: &[T]) -> bool {
        s.iter()
            .zip(&self.gamma)
            .zip(self.system.omega_lo.iter().zip(&self.system.omega_hi))
            .all(|((v, g), (lo, hi))| *v - *g >= *lo && *v - *g < *hi)
    }

    /// `e^{2πiφ(s−γ)·λ} 1_Ω(s−γ)`.
    pub fn eval(&self, s: &[T]) -> Result<Complex<T>> {
        if !self.in_window(s) {
            return Ok(Complex::new(T::zero(), T::zero()));
        }
        let u: Vec<T> = s.iter().zip(&self.gamma).map(|(a, b)| *a - *b).collect();
        let y = self.system.phase.eval(&u)?;
        Ok(cis_turns(dot(&y, &self.lambda)))
    }

    /// `[π(γ•λ, γ)1_Ω](s) = e^{2πiφ(s)·(γ•λ)} 1_Ω(s−γ)`.
    pub fn eval_representation(&self, s: &[T]) -> Result<Complex<T>> {
        if !self.in_window(s) {
            return Ok(Complex::new(T::zero(), T::zero()));
        }
        let y = self.system.phase.eval(s)?;
        let x = self.system.phase.act(&self.gamma, &self.lambda)?;
        Ok(cis_turns(dot(&y, &x)))
    }
}

/// Every atom, ordered by `γ` and then by `λ`.
pub fn build_system<T: Real>(ws: &WindowSystem<T>) -> Vec<Atom<T>> {
    let sys = Arc::new(ws.clone());
    ws.gamma_set
        .iter()
        .flat_map(|g| {
            let sys = sys.clone();
            ws.lambda_set.points.iter().map(move |l| Atom {
                lambda: l.clone(),
                gamma: g.clone(),
                system: sys.clone(),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockForm {
    /// `gram(Lebesgue(Ω+γ), φ, γ•Λ)`.
    Representation,
    /// `gram(Lebesgue(Ω+γ), φ∘(s ↦ s−γ), Λ)`.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum Mode {
    /// Every block must be `vol(Ω)·I` within `tol·vol(Ω)`.
    Onb { tol: f64 },
    /// Frame bounds per block; `A_est ≥ a_floor` everywhere passes.
    Frame { basis: TestBasis, a_floor: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockReport {
    pub gamma: Vec<f64>,
    pub max_offdiag: Option<f64>,
    pub diag_dev: Option<f64>,
    pub max_err: Option<f64>,
    pub a_est: Option<f64>,
    pub b_est: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RepdiscReport {
    pub verdict: Verdict,
    pub mode: Mode,
    pub form: BlockForm,
    pub blocks: Vec<BlockReport>,
    pub max_offdiag: Option<f64>,
    pub max_diag_dev: Option<f64>,
    pub min_a: Option<f64>,
    pub max_b: Option<f64>,
    pub gamma_count: usize,
    pub spectrum_size: usize,
    pub truncation: Truncation,
    pub note: &'static str,
}

const WINDOW_NOTE: &str =
    "verified on the window only: finite truncations of Gamma and Lambda, no claim about all of R^m";

/// Selects the translates inside `W`; `W` must be their union.
fn covering<T: Real>(ws: &WindowSystem<T>, wlo: &[T], whi: &[T]) -> Result<Vec<Vec<T>>> {
    let m = ws.omega_lo.len();
    if wlo.len() != m || whi.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: wlo.len(),
        });
    }
    let slack = T::lit(1e-12);
    let vol = |lo: &[T], hi: &[T]| lo.iter().zip(hi).fold(T::one(), |v, (a, b)| v * (*b - *a));
    let inside: Vec<Vec<T>> = ws
        .gamma_set
        .iter()
        .filter(|g| {
            let (lo, hi) = ws.translate(g);
            (0..m).all(|k| lo[k] >= wlo[k] - slack && hi[k] <= whi[k] + slack)
        })
        .cloned()
        .collect();
    let covered = T::of(inside.len()) * vol(&ws.omega_lo, &ws.omega_hi);
    let target = vol(wlo, whi);
    if inside.is_empty() || (covered - target).abs() > T::lit(1e-9) * target.max(T::one()) {
        return Err(invalid("window", "W is not a union of translates of the window"));
    }
    Ok(inside)
}

/// Checks the system on `W` block by block. Cross-block inner products
/// vanish by disjoint supports and are not computed.
pub fn verify_system_on_window<T: Real>(
    ws: &WindowSystem<T>,
    wlo: &[T],
    whi: &[T],
    mode: &Mode,
    form: BlockForm,
    quad: &QuadratureSpec,
) -> Result<RepdiscReport> {
    let gammas = covering(ws, wlo, whi)?;
    let phi = ws.phi();
    let vol = ws
        .omega_lo
        .iter()
        .zip(&ws.omega_hi)
        .fold(T::one(), |v, (a, b)| v * (*b - *a));
    let opts = GramOptions::default();
    let blocks = gammas
        .par_iter()
        .map(|g| -> Result<BlockReport> {
            let (lo, hi) = ws.translate(g);
            let mu = Measure::lebesgue_box(lo, hi)?;
            let (map, lambda) = match form {
                BlockForm::Representation => (phi.clone(), ws.acted_spectrum(g)?),
                BlockForm::Direct => {
                    let back: Vec<T> = g.iter().map(|v| -*v).collect();
                    (PhaseMap::shift(back).then(phi.clone())?, ws.lambda_set.clone())
                }
            };
            let gamma = g.iter().map(|v| v.as_f64()).collect();
            match mode {
                Mode::Onb { .. } => {
                    let r = gram(&mu, &map, &lambda, quad, &opts)?;
                    Ok(BlockReport {
                        gamma,
                        max_offdiag: Some((r.max_offdiag / vol).as_f64()),
                        diag_dev: Some((r.diag_dev / vol).as_f64()),
                        max_err: Some(r.max_err.as_f64()),
                        a_est: None,
                        b_est: None,
                    })
                }
                Mode::Frame { basis, .. } => {
                    let r = frame_bounds(&mu, &map, &lambda, basis, quad)?;
                    Ok(BlockReport {
                        gamma,
                        max_offdiag: None,
                        diag_dev: None,
                        max_err: None,
                        a_est: Some(r.a_est.as_f64()),
                        b_est: Some(r.b_est.as_f64()),
                    })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let fold = |f: &dyn Fn(&BlockReport) -> Option<f64>, init: f64, pick: fn(f64, f64) -> f64| {
        blocks
            .iter()
            .filter_map(f)
            .fold(None, |acc: Option<f64>, v| Some(pick(acc.unwrap_or(init), v)))
    };
    let max_offdiag = fold(&|b| b.max_offdiag, f64::NEG_INFINITY, f64::max);
    let max_diag_dev = fold(&|b| b.diag_dev, f64::NEG_INFINITY, f64::max);
    let min_a = fold(&|b| b.a_est, f64::INFINITY, f64::min);
    let max_b = fold(&|b| b.b_est, f64::NEG_INFINITY, f64::max);
    let verdict = match mode {
        Mode::Onb { tol } => {
            if max_offdiag.is_some_and(|v| v <= *tol) && max_diag_dev.is_some_and(|v| v <= *tol) {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
        Mode::Frame { a_floor, .. } => {
            if min_a.is_some_and(|a| a >= *a_floor) && max_b.is_some_and(f64::is_finite) {
                Verdict::Pass
            } else {
                Verdict::Inconclusive
            }
        }
    };
    Ok(RepdiscReport {
        verdict,
        mode: mode.clone(),
        form,
        blocks,
        max_offdiag,
        max_diag_dev,
        min_a,
        max_b,
        gamma_count: gammas.len(),
        spectrum_size: ws.lambda_set.len(),
        truncation: ws.lambda_set.truncation.clone(),
        note: WINDOW_NOTE,
    })
}

/// Kolmogorov–Smirnov distance between `φ_*μ` (sampled, normalised) and a
/// one-dimensional reference CDF.
pub fn pushforward_ks<T: Real>(
    mu: &Measure<T>,
    phi: &PhaseMap<T>,
    cdf: impl Fn(f64) -> f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    if phi.out_dim() != 1 {
        return Err(invalid("phi", "KS distance needs a one-dimensional image"));
    }
    let nu = Measure::pushforward(mu, phi)?;
    let mut ys: Vec<f64> = nu.sample_flat(n, seed, 0)?.iter().map(|v| v.as_f64()).collect();
    ys.sort_by(|a, b| a.total_cmp(b));
    let nf = ys.len() as f64;
    Ok(ys.iter().enumerate().fold(0.0, |m, (i, &y)| {
        let f = cdf(y);
        m.max((f - i as f64 / nf).abs()).max(((i + 1) as f64 / nf - f).abs())
    }))
}

/// CDF of the normalised `1/x` law on `[e^{−ε}ℓ, e^{ε}ℓ]`, the pushforward of
/// Lebesgue measure on `[−ε, ε]` under `s ↦ e^{−s}ℓ`.
pub fn log_law_cdf(eps: f64, ell: f64) -> impl Fn(f64) -> f64 {
    move |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        ((y / ell).ln() + eps).clamp(0.0, 2.0 * eps) / (2.0 * eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn preset_phases_match_closed_forms() {
        let h = phase_from_group(&GroupData::<f64>::heisenberg()).unwrap();
        let y = h.eval(&[0.3]).unwrap();
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], -0.3, epsilon = 1e-15);
        let p = phase_from_group(&GroupData::<f64>::poly2d()).unwrap();
        let (t1, t2) = (0.7, -0.4);
        let y = p.eval(&[t1, t2]).unwrap();
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y[1], -t1, epsilon = 1e-14);
        assert_abs_diff_eq!(y[2], -t2 + t1 * t1 / 2.0, epsilon = 1e-14);
        let s = phase_from_group(&GroupData::<f64>::shearlet()).unwrap();
        let y = s.eval(&[t1, t2]).unwrap();
        assert_abs_diff_eq!(y[0], (-t1).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(y[1], -t2 * (-t1).exp(), epsilon = 1e-14);
        let z = GroupData::new(vec![vec![vec![0.0, 0.0], vec![0.0, 0.0]]], vec![2.0, -1.0]).unwrap();
        let y = phase_from_group(&z).unwrap().eval(&[5.0]).unwrap();
        assert_abs_diff_eq!(y[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y[1], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn non_commuting_data_is_rejected() {
        let a = vec![vec![0.0, 1.0], vec![0.0, 0.0]];
        let b = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert!(matches!(
            GroupData::new(vec![a, b], vec![1.0, 0.0]),
            Err(Error::NonCommuting { .. })
        ));
    }

    #[test]
    fn overlapping_translates_are_rejected() {
        let e = WindowSystem::new(
            vec![0.0],
            vec![1.0],
            vec![vec![0.0], vec![0.5]],
            SpectrumSet::integers(0, 1).padded(1),
            GroupData::heisenberg(),
        );
        assert!(e.is_err());
    }

    #[test]
    fn both_atom_forms_agree() {
        let ws = WindowSystem::new(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![vec![0.0, 0.0], vec![1.0, -1.0], vec![-2.0, 1.0]],
            crate::spectra::integer_lattice(2, 1).padded(1),
            GroupData::poly2d(),
        )
        .unwrap();
        for a in build_system(&ws) {
            for s in [[0.3, 0.2], [1.5, -0.5], [-1.25, 1.75]] {
                let u = a.eval(&s).unwrap();
                let v = a.eval_representation(&s).unwrap();
                assert!((u - v).norm() < 1e-10, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn misaligned_window_is_rejected() {
        let ws = WindowSystem::new(
            vec![0.0],
            vec![1.0],
            (-2..=2).map(|g| vec![g as f64]).collect(),
            SpectrumSet::integers(-2, 2).padded(1),
            GroupData::heisenberg(),
        )
        .unwrap();
        let mode = Mode::Onb { tol: 1e-10 };
        let e = verify_system_on_window(
            &ws,
            &[-1.5],
            &[2.0],
            &mode,
            BlockForm::Direct,
            &QuadratureSpec::gauss(16),
        );
        assert!(e.is_err());
    }

    #[test]
    fn log_law_cdf_endpoints() {
        let f = log_law_cdf(0.5, 1.0);
        assert_abs_diff_eq!(f((-0.5f64).exp()), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f(1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f(0.5f64.exp()), 1.0, epsilon = 1e-15);
    }
}
