//! Experiment configuration. Every struct rejects unknown keys.

use std::sync::Arc;

use genexp::analysis::{GramOptions, TestBasis};
use genexp::phases::{DigitMap, Triangular2D, VectorFn};
use genexp::repdisc::{BlockForm, Mode};
use genexp::spectra::{dual_lattice, integer_lattice, lambda4, lattice};
use genexp::tiling::TilingConfig;
use genexp::{GroupData, Mat, Measure, PhaseMap, QuadratureSpec, ScalarFn, SpectrumSet, TestFunction};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::expr::{Expr, MAX_VARS};

/// Error while turning a configuration into library objects.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<genexp::Error> for ConfigError {
    fn from(e: genexp::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ConfigError>;

pub(crate) fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Subcommands this config is meant for; others are refused.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commands: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<QuadratureSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default)]
    pub onb: OnbConfig,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub tiling: TilingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityConfig>,
    #[serde(default)]
    pub reconstruct: ReconstructConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repdisc: Option<RepdiscConfig>,
    #[serde(default)]
    pub probe: ProbeConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum MeasureConfig {
    LebesgueBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    LebesgueDisc {
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "one")]
        radius: f64,
    },
    /// `ratio` with digit offsets and weights (equal when omitted).
    SelfSimilar {
        ratio: u32,
        digits: Vec<f64>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    Nu3 {},
    Nu4 {},
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum PhaseConfig {
    /// Dimension defaults to that of the measure.
    Identity {
        #[serde(default)]
        dim: Option<usize>,
    },
    Affine {
        m: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Digit(DigitConfig),
    Holhos {},
    /// `x ↦ x²` on the line.
    Square {},
    /// `φ_k = x_k + l_k(x_{k+1}, …, x_d)`, each `l_k` written in the global
    /// variable names.
    Unipotent {
        l: Vec<String>,
    },
    /// `φ = (z(x2)·x1 + f(x2), ∫₁^{x2} dt/z + k)`; `k` defaults to the value
    /// that makes `φ₂(·, 0) = 0`.
    Triangular {
        z: String,
        #[serde(default = "zero_expr")]
        f: String,
        #[serde(default)]
        k: Option<f64>,
    },
    Group {
        group: GroupConfig,
    },
    /// One expression per output coordinate.
    Custom {
        components: Vec<String>,
    },
    /// Applied left to right.
    Composed {
        maps: Vec<PhaseConfig>,
    },
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigitConfig {
    /// `binary_to_quaternary` or `ternary_to_quaternary`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_base: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_digits: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_base: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(u32, u32)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    /// `heisenberg`, `poly2d`, `axb` or `shearlet`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SpectrumConfig {
    Integers {
        lo: i64,
        hi: i64,
    },
    IntegerLattice {
        dim: usize,
        radius: i64,
    },
    /// Points `a·k` with sup-norm at most `radius`.
    Lattice {
        a: Vec<Vec<f64>>,
        radius: f64,
    },
    /// The lattice generated by `a^{-T}`.
    DualLattice {
        a: Vec<Vec<f64>>,
        radius: f64,
    },
    Lambda4 {
        n: usize,
    },
    Explicit {
        points: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionConfig {
    pub name: String,
    pub re: String,
    #[serde(default = "zero_expr")]
    pub im: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnbConfig {
    pub tol_orth: f64,
    pub tol_c: f64,
    /// `null` turns the self-similar product formula off.
    pub product_trunc: Option<usize>,
    pub cap: usize,
    pub tolerance: Option<f64>,
    /// Replaces the standard battery when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_functions: Option<Vec<TestFunctionConfig>>,
}

impl Default for OnbConfig {
    fn default() -> Self {
        let g = GramOptions::default();
        Self {
            tol_orth: 1e-8,
            tol_c: 0.02,
            product_trunc: g.product_trunc,
            cap: g.cap,
            tolerance: g.tolerance,
            test_functions: None,
        }
    }
}

impl OnbConfig {
    pub fn gram_options(&self) -> GramOptions {
        GramOptions {
            cap: self.cap,
            product_trunc: self.product_trunc,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameConfig {
    pub basis: TestBasis,
    /// `A_est` must exceed this for a PASS.
    pub a_floor: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            basis: TestBasis::Dyadic { m: 64 },
            a_floor: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TilingSection {
    /// Lattice generator; the identity when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    /// `seed` is taken from the top level.
    pub settings: TilingConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DensitySourceConfig {
    Lattice {
        a: Vec<Vec<f64>>,
    },
    Lambda4 {},
    /// The top-level `spectrum`.
    Spectrum {},
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentersConfig {
    #[serde(default = "thousand")]
    pub count: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

fn thousand() -> usize {
    1000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub source: DensitySourceConfig,
    pub radii: Vec<f64>,
    pub centers: CentersConfig,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructConfig {
    /// The standard battery when empty.
    pub functions: Vec<TestFunctionConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum GammaConfig {
    Explicit {
        points: Vec<Vec<f64>>,
    },
    /// `γ = step ⊙ k` for integer `k` in `[lo, hi]`; `step` defaults to the
    /// window widths.
    Grid {
        lo: Vec<i64>,
        hi: Vec<i64>,
        #[serde(default)]
        step: Option<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KsConfig {
    pub eps: f64,
    #[serde(default = "one")]
    pub ell: f64,
    #[serde(default = "hundred_thousand")]
    pub n: usize,
    #[serde(default = "ks_threshold")]
    pub max_distance: f64,
}

fn hundred_thousand() -> usize {
    100_000
}

fn ks_threshold() -> f64 {
    0.01
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepdiscConfig {
    pub group: GroupConfig,
    pub omega: BoxConfig,
    pub gamma: GammaConfig,
    pub window: BoxConfig,
    /// Leading zeros added to each point of the top-level `spectrum`.
    #[serde(default)]
    pub pad: usize,
    pub mode: Mode,
    #[serde(default = "direct")]
    pub form: BlockForm,
    /// Why this `Λ` was chosen, copied into the report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_choice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<KsConfig>,
}

fn direct() -> BlockForm {
    BlockForm::Direct
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub n: usize,
    pub delta_x: Option<f64>,
    pub delta_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preservation: Option<PreservationConfig>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            n: 20_000,
            delta_x: None,
            delta_y: None,
            preservation: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreservationConfig {
    #[serde(default = "ten_thousand")]
    pub n: usize,
    #[serde(default = "preservation_tol")]
    pub tol: f64,
    #[serde(default = "band")]
    pub band: f64,
}

fn ten_thousand() -> usize {
    10_000
}

fn preservation_tol() -> f64 {
    1e-6
}

fn band() -> f64 {
    0.05
}

// ---- conversion into library objects ----

pub fn parse_expr(text: &str, field: &str) -> Result<Expr> {
    Expr::parse(text).map_err(|e| ConfigError(format!("{field}: {e} in \"{text}\"")))
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<Mat> {
    Mat::from_rows(rows).map_err(|e| ConfigError(format!("{field}: {e}")))
}

impl MeasureConfig {
    pub fn build(&self) -> Result<Measure> {
        Ok(match self {
            MeasureConfig::LebesgueBox { lo, hi } => Measure::lebesgue_box(lo.clone(), hi.clone())?,
            MeasureConfig::LebesgueDisc { center, radius } => Measure::lebesgue_disc(*center, *radius)?,
            MeasureConfig::SelfSimilar { ratio, digits, weights } => {
                let w = match weights {
                    Some(w) => w.clone(),
                    None => vec![1.0 / digits.len().max(1) as f64; digits.len()],
                };
                Measure::self_similar(*ratio, digits.clone(), w)?
            }
            MeasureConfig::Nu3 {} => Measure::nu3(),
            MeasureConfig::Nu4 {} => Measure::nu4(),
        })
    }
}

/// `l_k` of a unipotent map sees the tail `x[k+1..]`; the expression is
/// written in global names, so the tail is placed back at its offset.
fn tail_fn(e: Expr, offset: usize, d: usize) -> ScalarFn {
    let label = e.source().to_string();
    let e = Arc::new(e);
    let g = e.clone();
    let value = Arc::new(move |tail: &[f64]| {
        let mut buf = [0.0; MAX_VARS];
        buf[offset..offset + tail.len()].copy_from_slice(tail);
        e.eval(&buf)
    });
    let grad = Arc::new(move |tail: &[f64]| {
        let mut buf = [0.0; MAX_VARS];
        buf[offset..offset + tail.len()].copy_from_slice(tail);
        g.eval_grad(&buf).1[offset..d].to_vec()
    });
    ScalarFn::from_parts(label, value, Some(grad))
}

/// A function of `x2` alone, called with a one-element slice.
fn x2_fn(e: Expr) -> ScalarFn {
    let label = e.source().to_string();
    let e = Arc::new(e);
    let g = e.clone();
    let value = Arc::new(move |t: &[f64]| e.eval(&[0.0, t[0]]));
    let grad = Arc::new(move |t: &[f64]| vec![g.eval_grad(&[0.0, t[0]]).1[1]]);
    ScalarFn::from_parts(label, value, Some(grad))
}

impl GroupConfig {
    pub fn build(&self) -> Result<GroupData> {
        let mut g = match (&self.preset, &self.a) {
            (Some(_), Some(_)) => return err("group: give either preset or A, not both"),
            (Some(p), None) => match GroupData::preset(p) {
                Some(g) => g,
                None => {
                    return err(format!(
                        "group: unknown preset '{p}' (heisenberg, poly2d, axb, shearlet)"
                    ))
                }
            },
            (None, Some(a)) => {
                let Some(ell) = &self.ell else {
                    return err("group: ell is required with A");
                };
                return Ok(GroupData::new(a.clone(), ell.clone())?);
            }
            (None, None) => return err("group: need preset or A"),
        };
        if let Some(ell) = &self.ell {
            g = GroupData::new(g.matrices, ell.clone())?;
        }
        Ok(g)
    }

    /// Whether the data is the shearlet group, which has no canonical
    /// frequency set.
    pub fn is_shearlet(&self) -> bool {
        match self.build() {
            Ok(g) => g.matrices == GroupData::shearlet().matrices,
            Err(_) => false,
        }
    }
}

impl DigitConfig {
    fn build(&self) -> Result<DigitMap> {
        let explicit =
            self.in_base.is_some() || self.in_digits.is_some() || self.out_base.is_some() || self.table.is_some();
        let map = match (&self.preset, explicit) {
            (Some(_), true) => return err("phase.digit: give either preset or an explicit table, not both"),
            (Some(p), false) => match p.as_str() {
                "binary_to_quaternary" => DigitMap::binary_to_quaternary(),
                "ternary_to_quaternary" => DigitMap::ternary_to_quaternary(),
                _ => return err(format!("phase.digit: unknown preset '{p}'")),
            },
            (None, _) => {
                let (Some(ib), Some(id), Some(ob), Some(t)) =
                    (self.in_base, &self.in_digits, self.out_base, &self.table)
                else {
                    return err("phase.digit: need in_base, in_digits, out_base and table");
                };
                DigitMap::new(ib, id.clone(), ob, t.clone(), genexp::phases::DEFAULT_DIGIT_DEPTH)?
            }
        };
        Ok(match self.depth {
            Some(d) => map.with_depth(d)?,
            None => map,
        })
    }
}

impl PhaseConfig {
    /// `dim` is the dimension of the measure the map acts on.
    pub fn build(&self, dim: usize) -> Result<PhaseMap> {
        Ok(match self {
            PhaseConfig::Identity { dim: d } => PhaseMap::identity(d.unwrap_or(dim)),
            PhaseConfig::Affine { m, b } => PhaseMap::affine(matrix(m, "phase.m")?, b.clone())?,
            PhaseConfig::Digit(d) => PhaseMap::Digit(d.build()?),
            PhaseConfig::Holhos {} => PhaseMap::Holhos,
            PhaseConfig::Square {} => PhaseMap::square(),
            PhaseConfig::Unipotent { l } => {
                let d = l.len() + 1;
                if d > MAX_VARS {
                    return err(format!("phase.l: at most {} functions", MAX_VARS - 1));
                }
                let mut fns = Vec::with_capacity(l.len());
                for (k, text) in l.iter().enumerate() {
                    let field = format!("phase.l[{k}]");
                    let e = parse_expr(text, &field)?;
                    if let Some(bad) = (0..=k).chain(d..MAX_VARS).find(|&i| e.uses(i)) {
                        return err(format!("{field}: may only use x{}..x{d}, found x{}", k + 2, bad + 1));
                    }
                    fns.push(tail_fn(e, k + 1, d));
                }
                PhaseMap::unipotent(fns)?
            }
            PhaseConfig::Triangular { z, f, k } => {
                let mut parts = Vec::new();
                for (name, text) in [("z", z), ("f", f)] {
                    let field = format!("phase.{name}");
                    let e = parse_expr(text, &field)?;
                    if let Some(bad) = (0..MAX_VARS).filter(|&i| i != 1).find(|&i| e.uses(i)) {
                        return err(format!("{field}: a function of x2 only, found x{}", bad + 1));
                    }
                    parts.push(x2_fn(e));
                }
                let fpart = parts.pop().expect("two parts");
                let zpart = parts.pop().expect("two parts");
                let k = match k {
                    Some(k) => *k,
                    None => -Triangular2D::new(zpart.clone(), fpart.clone(), 0.0).inner_integral(0.0)?,
                };
                PhaseMap::Triangular2D(Triangular2D::new(zpart, fpart, k))
            }
            PhaseConfig::Group { group } => genexp::repdisc::phase_from_group(&group.build()?)?,
            PhaseConfig::Custom { components } => {
                let exprs: Vec<Expr> = components
                    .iter()
                    .enumerate()
                    .map(|(k, t)| parse_expr(t, &format!("phase.components[{k}]")))
                    .collect::<Result<_>>()?;
                if let Some((k, _)) = exprs.iter().enumerate().find(|(_, e)| e.arity() > dim) {
                    return err(format!("phase.components[{k}]: uses a variable beyond x{dim}"));
                }
                let label = components.join(", ");
                let out = exprs.len();
                let exprs = Arc::new(exprs);
                let jac = exprs.clone();
                PhaseMap::Custom(
                    VectorFn::new(label, dim, out, move |x: &[f64]| {
                        exprs.iter().map(|e| e.eval(x)).collect()
                    })
                    .with_jacobian(move |x: &[f64]| {
                        let rows: Vec<Vec<f64>> = jac.iter().map(|e| e.eval_grad(x).1[..x.len()].to_vec()).collect();
                        Mat::from_rows(&rows).expect("rectangular Jacobian")
                    }),
                )
            }
            PhaseConfig::Composed { maps } => {
                let mut it = maps.iter();
                let Some(first) = it.next() else {
                    return err("phase.maps: need at least one map");
                };
                let mut phi = first.build(dim)?;
                for m in it {
                    let next = m.build(phi.out_dim())?;
                    phi = phi.then(next)?;
                }
                phi
            }
        })
    }
}

impl SpectrumConfig {
    pub fn build(&self) -> Result<SpectrumSet> {
        Ok(match self {
            SpectrumConfig::Integers { lo, hi } => {
                if lo > hi {
                    return err("spectrum: need lo <= hi");
                }
                SpectrumSet::integers(*lo, *hi)
            }
            SpectrumConfig::IntegerLattice { dim, radius } => integer_lattice(*dim, *radius),
            SpectrumConfig::Lattice { a, radius } => lattice(&matrix(a, "spectrum.a")?, *radius)?,
            SpectrumConfig::DualLattice { a, radius } => lattice(&dual_lattice(&matrix(a, "spectrum.a")?)?, *radius)?,
            SpectrumConfig::Lambda4 { n } => lambda4(*n)?,
            SpectrumConfig::Explicit { points } => SpectrumSet::explicit(points.clone())?,
        })
    }
}

impl TestFunctionConfig {
    pub fn build(&self, field: &str) -> Result<TestFunction> {
        let re = parse_expr(&self.re, &format!("{field}.re"))?;
        let im = parse_expr(&self.im, &format!("{field}.im"))?;
        Ok(TestFunction::new(self.name.clone(), move |x: &[f64]| {
            Complex::new(re.eval(x), im.eval(x))
        }))
    }
}

impl Config {
    pub fn measure(&self) -> Result<Measure> {
        match &self.measure {
            Some(m) => m.build(),
            None => err("config: `measure` is required for this command"),
        }
    }

    pub fn phase(&self, dim: usize) -> Result<PhaseMap> {
        match &self.phase {
            Some(p) => p.build(dim),
            None => Ok(PhaseMap::identity(dim)),
        }
    }

    pub fn spectrum(&self) -> Result<SpectrumSet> {
        match &self.spectrum {
            Some(s) => s.build(),
            None => err("config: `spectrum` is required for this command"),
        }
    }

    /// The configured rule, or a default suited to the measure.
    pub fn quadrature(&self, mu: &Measure) -> Result<QuadratureSpec> {
        let q = match &self.quad {
            Some(q) => q.clone(),
            None if mu.as_self_similar().is_some() => QuadratureSpec::SelfSimilarDigit { depth: 12 },
            None => QuadratureSpec::gauss(64),
        };
        q.validate()?;
        Ok(q)
    }
}
