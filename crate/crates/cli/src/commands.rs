//! One function per subcommand, each returning a verdict and a JSON result.

use genexp::analysis::{frame_bounds, standard_battery, verify_onb, Verdict};
use genexp::measures::MeasureKind;
use genexp::phases::{essential_injectivity_probe, measure_preservation_check, PreservationOptions};
use genexp::reconstruct::reconstruct;
use genexp::repdisc::{log_law_cdf, phase_from_group, pushforward_ks, verify_system_on_window};
use genexp::spectra::{beurling_density, CenterSampling, DensitySource, DensityVerdict};
use genexp::tiling::{tiling_verdict, TilingVerdict};
use genexp::{Mat, Measure, QuadratureSpec, TestFunction, WindowSystem};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{err, Config, ConfigError, DensitySourceConfig, GammaConfig, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    VerifyOnb,
    FrameBounds,
    TilingCheck,
    Density,
    Reconstruct,
    Repdisc,
    ProbeInjectivity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyOnb => "verify-onb",
            Command::FrameBounds => "frame-bounds",
            Command::TilingCheck => "tiling-check",
            Command::Density => "density",
            Command::Reconstruct => "reconstruct",
            Command::Repdisc => "repdisc",
            Command::ProbeInjectivity => "probe-injectivity",
        }
    }
}

/// What a run produced.
pub struct Outcome {
    pub verdict: &'static str,
    pub result: Value,
    /// CSV files as `(file name, contents)`.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

/// Process exit code for a verdict.
pub fn exit_code(verdict: &str) -> i32 {
    match verdict {
        "PASS" | "UNIFORM" | "TILES" | "CONVERGING" | "ZERO-LOWER-DENSITY" => 0,
        "FAIL" | "NONUNIFORM" | "NOT-TILING" => 1,
        _ => 2,
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

fn to_json(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| ConfigError(format!("serialising the result: {e}")))
}

fn csv(name: impl Into<String>, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(String, Vec<u8>)> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| ConfigError(e.to_string()))?;
    Ok((name.into(), buf))
}

fn test_functions(cfg: &[crate::config::TestFunctionConfig], field: &str, mu: &Measure) -> Result<Vec<TestFunction>> {
    if cfg.is_empty() {
        return Ok(standard_battery(mu)?);
    }
    cfg.iter()
        .enumerate()
        .map(|(i, t)| t.build(&format!("{field}[{i}]")))
        .collect()
}

pub fn execute(cmd: Command, cfg: &Config) -> Result<Outcome> {
    if let Some(list) = &cfg.commands {
        if !list.iter().any(|c| c == cmd.name()) {
            return err(format!("this config is for {}, not {}", list.join(", "), cmd.name()));
        }
    }
    match cmd {
        Command::VerifyOnb => run_onb(cfg),
        Command::FrameBounds => run_frame(cfg),
        Command::TilingCheck => run_tiling(cfg),
        Command::Density => run_density(cfg),
        Command::Reconstruct => run_reconstruct(cfg),
        Command::Repdisc => run_repdisc(cfg),
        Command::ProbeInjectivity => run_probe(cfg),
    }
}

fn run_onb(cfg: &Config) -> Result<Outcome> {
    let mu = cfg.measure()?;
    let phi = cfg.phase(mu.dim())?;
    let lambda = cfg.spectrum()?;
    let quad = cfg.quadrature(&mu)?;
    let tests = test_functions(
        cfg.onb.test_functions.as_deref().unwrap_or(&[]),
        "onb.test_functions",
        &mu,
    )?;
    let r = verify_onb(
        &mu,
        &phi,
        &lambda,
        &quad,
        cfg.onb.tol_orth,
        cfg.onb.tol_c,
        &tests,
        &cfg.onb.gram_options(),
    )?;
    let gram = csv("gram.csv", |w| r.gram.write_csv(w))?;
    Ok(Outcome {
        verdict: verdict_name(r.verdict),
        result: to_json(&r)?,
        artifacts: vec![gram],
    })
}

fn run_frame(cfg: &Config) -> Result<Outcome> {
    let mu = cfg.measure()?;
    let phi = cfg.phase(mu.dim())?;
    let lambda = cfg.spectrum()?;
    let quad = cfg.quadrature(&mu)?;
    let r = frame_bounds(&mu, &phi, &lambda, &cfg.frame.basis, &quad)?;
    // a positive lower estimate on a finite test space cannot rule out a
    // frame failure elsewhere, but a vanishing one is not a proof either
    let verdict = if r.a_est > cfg.frame.a_floor && r.b_est.is_finite() {
        "PASS"
    } else {
        "INCONCLUSIVE"
    };
    Ok(Outcome {
        verdict,
        result: json!({ "a_floor": cfg.frame.a_floor, "bounds": to_json(&r)? }),
        artifacts: vec![],
    })
}

fn run_tiling(cfg: &Config) -> Result<Outcome> {
    let mu = cfg.measure()?;
    let (lo, hi) = match mu.kind() {
        MeasureKind::LebesgueBox { lo, hi } => (lo.clone(), hi.clone()),
        _ => return err("tiling-check: the measure must be a lebesgue_box"),
    };
    let phi = cfg.phase(mu.dim())?;
    let a = match &cfg.tiling.a {
        Some(rows) => Mat::from_rows(rows).map_err(|e| ConfigError(format!("tiling.a: {e}")))?,
        None => Mat::identity(phi.out_dim()),
    };
    let mut settings = cfg.tiling.settings.clone();
    settings.seed = cfg.seed;
    let r = tiling_verdict(&phi, &lo, &hi, &a, &settings)?;
    let hist = csv("histogram.csv", |w| r.histogram.write_csv(w))?;
    let verdict = match r.tiling {
        TilingVerdict::Tiles => "TILES",
        TilingVerdict::NotTiling => "NOT-TILING",
        TilingVerdict::Inconclusive => "INCONCLUSIVE",
    };
    Ok(Outcome {
        verdict,
        result: to_json(&r)?,
        artifacts: vec![hist],
    })
}

fn run_density(cfg: &Config) -> Result<Outcome> {
    let Some(sec) = &cfg.density else {
        return err("density: the `density` section is required");
    };
    let source = match &sec.source {
        DensitySourceConfig::Lattice { a } => {
            DensitySource::Lattice(Mat::from_rows(a).map_err(|e| ConfigError(format!("density.source.a: {e}")))?)
        }
        DensitySourceConfig::Lambda4 {} => DensitySource::Lambda4,
        DensitySourceConfig::Spectrum {} => DensitySource::Explicit(cfg.spectrum()?),
    };
    let centers = CenterSampling {
        count: sec.centers.count,
        lo: sec.centers.lo.clone(),
        hi: sec.centers.hi.clone(),
        seed: cfg.seed,
    };
    let r = beurling_density(&source, &sec.radii, &centers)?;
    let verdict = match r.verdict {
        DensityVerdict::Converging { .. } => "CONVERGING",
        DensityVerdict::ZeroLowerDensity => "ZERO-LOWER-DENSITY",
        DensityVerdict::Undetermined => "UNDETERMINED",
    };
    Ok(Outcome {
        verdict,
        result: to_json(&r)?,
        artifacts: vec![],
    })
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn run_reconstruct(cfg: &Config) -> Result<Outcome> {
    let mu = cfg.measure()?;
    let phi = cfg.phase(mu.dim())?;
    let lambda = cfg.spectrum()?;
    let quad = cfg.quadrature(&mu)?;
    let fns = test_functions(&cfg.reconstruct.functions, "reconstruct.functions", &mu)?;
    let mut reports = Vec::with_capacity(fns.len());
    let mut artifacts = Vec::with_capacity(fns.len());
    for f in &fns {
        let r = reconstruct(f, &mu, &phi, &lambda, &quad)?;
        let name = if fns.len() == 1 {
            "coefficients.csv".to_string()
        } else {
            format!("coefficients-{}.csv", file_stem(&f.name))
        };
        artifacts.push(csv(name, |w| r.coefficients.write_csv(w))?);
        reports.push(r);
    }
    let flagged = reports.iter().any(|r| r.flagged > 0);
    Ok(Outcome {
        verdict: if flagged { "INCONCLUSIVE" } else { "PASS" },
        result: to_json(&reports)?,
        artifacts,
    })
}

const EXPLORATORY_NOTE: &str =
    "the shearlet group has no canonical frequency set; this run uses a user-chosen one and is exploratory";

fn run_repdisc(cfg: &Config) -> Result<Outcome> {
    let Some(sec) = &cfg.repdisc else {
        return err("repdisc: the `repdisc` section is required");
    };
    let group = sec.group.build()?;
    let (olo, ohi) = (sec.omega.lo.clone(), sec.omega.hi.clone());
    let gamma: Vec<Vec<f64>> = match &sec.gamma {
        GammaConfig::Explicit { points } => points.clone(),
        GammaConfig::Grid { lo, hi, step } => {
            let m = lo.len();
            if hi.len() != m || olo.len() != m {
                return err("repdisc.gamma: lo, hi and the window must have the same dimension");
            }
            let step = match step {
                Some(s) if s.len() == m => s.clone(),
                Some(_) => return err("repdisc.gamma.step: wrong dimension"),
                None => olo.iter().zip(&ohi).map(|(a, b)| b - a).collect(),
            };
            let mut out = Vec::new();
            let mut k = lo.clone();
            if lo.iter().zip(hi).any(|(a, b)| a > b) {
                return err("repdisc.gamma: need lo <= hi");
            }
            'outer: loop {
                out.push(k.iter().zip(&step).map(|(&i, s)| i as f64 * s).collect());
                for i in (0..m).rev() {
                    k[i] += 1;
                    if k[i] <= hi[i] {
                        continue 'outer;
                    }
                    k[i] = lo[i];
                }
                break;
            }
            out
        }
    };
    let mut lambda = cfg.spectrum()?;
    if sec.pad > 0 {
        lambda = lambda.padded(sec.pad);
    }
    let ws = WindowSystem::new(olo, ohi, gamma, lambda, group.clone())?;
    let quad = match &cfg.quad {
        Some(q) => {
            q.validate()?;
            q.clone()
        }
        None => QuadratureSpec::gauss(48),
    };
    let r = verify_system_on_window(&ws, &sec.window.lo, &sec.window.hi, &sec.mode, sec.form, &quad)?;
    let mut verdict = verdict_name(r.verdict);

    let ks = match &sec.ks {
        Some(k) => {
            let mu = Measure::lebesgue_box(vec![-k.eps], vec![k.eps])?;
            let d = pushforward_ks(
                &mu,
                &phase_from_group(&group)?,
                log_law_cdf(k.eps, k.ell),
                k.n,
                cfg.seed,
            )?;
            let pass = d <= k.max_distance;
            if !pass {
                verdict = "FAIL";
            }
            Some(
                json!({ "eps": k.eps, "ell": k.ell, "n": k.n, "distance": d, "max_distance": k.max_distance, "pass": pass }),
            )
        }
        None => None,
    };
    let exploratory = sec.group.is_shearlet();
    Ok(Outcome {
        verdict,
        result: json!({
            "blocks": to_json(&r)?,
            "spectrum_choice": sec.spectrum_choice,
            "exploratory": exploratory,
            "exploratory_note": exploratory.then_some(EXPLORATORY_NOTE),
            "ks": ks,
        }),
        artifacts: vec![],
    })
}

fn run_probe(cfg: &Config) -> Result<Outcome> {
    let mu = cfg.measure()?;
    let phi = cfg.phase(mu.dim())?;
    let p = &cfg.probe;
    let c = essential_injectivity_probe(&phi, &mu, p.n, p.delta_x, p.delta_y, cfg.seed)?;
    let pres = match &p.preservation {
        Some(s) => {
            let opts = PreservationOptions {
                band: s.band,
                ..PreservationOptions::default()
            };
            Some(measure_preservation_check(&phi, &mu, s.n, s.tol, cfg.seed, opts)?)
        }
        None => None,
    };
    let ok = c.n_pairs == 0 && pres.as_ref().is_none_or(|r| r.pass);
    Ok(Outcome {
        verdict: if ok { "PASS" } else { "FAIL" },
        result: json!({ "collisions": to_json(&c)?, "preservation": pres.map(|r| to_json(&r)).transpose()? }),
        artifacts: vec![],
    })
}
