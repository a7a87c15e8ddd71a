//! The five experiment tasks.

use std::path::Path;

use red_core::operators::{add_gaussian_noise, bicubic_upscale, gaussian_image};
use red_core::prior_lab::{
    circulant_eigenvalues, directional_consistency, induced_denoiser, kernelize, row_stochastic_check,
};
use red_core::{
    certify, load_image, psnr, solve, solve_p3, Denoiser, Image, RunReport, Scheme,
};
use serde::Serialize;

use crate::artifacts::{fmt_opt, write_schedule, write_trace, RunDir};
use crate::config::{Resolved, SchemeKind, Task};
use crate::error::{write_err, CliError};

/// Loads an input image, turning read failures into configuration errors.
fn load_input(path: &Path) -> Result<Image, CliError> {
    load_image(path).map_err(|e| CliError::Config(format!("cannot load input: {e}")))
}

fn load_ground_truth(cfg: &Resolved, path: &Path) -> Result<Image, CliError> {
    let img = load_input(path)?;
    match cfg.config().crop {
        Some([x, y, w, h]) => Ok(img.crop(x, y, w, h)?),
        None => Ok(img),
    }
}

/// Blurs, decimates and adds seeded noise to the configured ground truth.
/// Returns `(degraded, ground_truth)`.
pub fn synthesize_degraded(cfg: &Resolved) -> Result<(Image, Image), CliError> {
    let path = cfg
        .config()
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("no ground truth: set `input`".into()))?;
    let gt = load_ground_truth(cfg, path)?;
    let model = cfg.model()?;
    let y = add_gaussian_noise(&model.apply(&gt)?, model.noise_sigma, cfg.seed());
    Ok((y, gt))
}

/// The observation plus the ground truth when one is configured.
fn observation(cfg: &Resolved, dir: &mut RunDir) -> Result<(Image, Option<Image>), CliError> {
    let c = cfg.config();
    if let Some(path) = &c.input {
        dir.record_input(path)?;
    }
    match &c.degraded {
        Some(path) => {
            dir.record_input(path)?;
            let y = load_input(path)?;
            let gt = c.input.as_deref().map(|p| load_ground_truth(cfg, p)).transpose()?;
            Ok((y, gt))
        }
        None => synthesize_degraded(cfg).map(|(y, gt)| (y, Some(gt))),
    }
}

#[derive(Debug, Serialize)]
pub struct RestorationSummary {
    pub task: String,
    pub method: String,
    pub engine: String,
    pub iterations: usize,
    pub final_energy: f64,
    /// `degraded` for deblurring, `bicubic` for super-resolution.
    pub baseline: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_psnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restored_psnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_iteration: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_psnr: Option<f64>,
}

impl RestorationSummary {
    pub fn line(&self) -> String {
        let psnrs = match (self.baseline_psnr, self.restored_psnr) {
            (Some(b), Some(r)) => format!(
                "{} {b:.2} dB -> restored {r:.2} dB ({:+.2} dB)",
                self.baseline,
                r - b
            ),
            _ => "no ground truth".to_string(),
        };
        format!(
            "{} {} [{}]: {psnrs}; {} iterations, final energy {:.6e}",
            self.task, self.method, self.engine, self.iterations, self.final_energy
        )
    }
}

fn method_name(scheme: SchemeKind) -> &'static str {
    match scheme {
        SchemeKind::Sd => "red-sd",
        SchemeKind::Admm => "red-admm",
        SchemeKind::Fp => "red-fp",
        SchemeKind::P3 => "p3",
    }
}

fn psnr_opt(gt: Option<&Image>, img: &Image) -> Result<Option<f64>, CliError> {
    gt.map(|g| psnr(g, img).map(|q| q.psnr_db)).transpose().map_err(Into::into)
}

/// Deblurring and super-resolution share one pipeline; only the baseline
/// image differs.
pub fn restore(cfg: &Resolved) -> Result<RestorationSummary, CliError> {
    let mut dir = RunDir::create(cfg.out_dir())?;
    dir.write_text("config.toml", &cfg.to_toml())?;
    let (y, gt) = observation(cfg, &mut dir)?;
    let model = cfg.model()?;
    let engine = cfg.engine()?;

    let report = match cfg.scheme() {
        SchemeKind::P3 => {
            let p = cfg.p3_params();
            p.validate()?;
            solve_p3(&y, &model, &p, &engine, gt.as_ref())?
        }
        _ => solve(&y, &model, &cfg.solver_params()?, &engine, gt.as_ref())?,
    };

    // quality is measured on the 8-bit files that were actually written
    let gt_saved = gt.as_ref().map(|g| dir.save_image("ground_truth.png", g)).transpose()?;
    let y_saved = dir.save_image("degraded.png", &y)?;
    let restored = dir.save_image("restored.png", &report.final_image)?;
    let (baseline, baseline_img) = if model.scale_factor > 1 {
        let up = dir.save_image("bicubic.png", &bicubic_upscale(&y_saved, model.scale_factor))?;
        ("bicubic", up)
    } else {
        ("degraded", y_saved)
    };
    if let Some(best) = &report.best {
        if cfg.scheme() == SchemeKind::P3 {
            dir.save_image("best.png", &best.image)?;
        }
    }
    write_trace(&mut dir, "trace.csv", &report)?;
    write_schedule(&mut dir, "schedule.csv", &report)?;

    let best = report.best.as_ref().filter(|_| cfg.scheme() == SchemeKind::P3);
    let summary = RestorationSummary {
        task: cfg.task().name().to_string(),
        method: method_name(cfg.scheme()).to_string(),
        engine: engine.name(),
        iterations: report.iterations_run,
        final_energy: report.final_energy(),
        baseline: baseline.to_string(),
        baseline_psnr: psnr_opt(gt_saved.as_ref(), &baseline_img)?,
        restored_psnr: psnr_opt(gt_saved.as_ref(), &restored)?,
        best_iteration: best.map(|b| b.iteration),
        best_psnr: best.map(|b| b.psnr),
    };
    dir.write_toml("summary.toml", &summary)?;
    dir.finish(cfg.task().name(), cfg.seed())?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct EngineRow {
    pub engine: String,
    pub image: String,
    pub epsilon: f64,
    pub homogeneity_std: f64,
    pub passivity_estimate: f64,
    pub directional_gap: f64,
}

pub fn check_engine(cfg: &Resolved) -> Result<Vec<EngineRow>, CliError> {
    let c = cfg.config();
    let mut images: Vec<&Path> = c.input.iter().map(|p| p.as_path()).collect();
    images.extend(c.inputs.iter().map(|p| p.as_path()));
    if images.is_empty() {
        return Err(CliError::Config("check-engine needs `input` or `inputs`".into()));
    }
    let engine = cfg.engine()?;
    let mut dir = RunDir::create(cfg.out_dir())?;
    dir.write_text("config.toml", &cfg.to_toml())?;

    let mut rows = Vec::new();
    for path in images {
        dir.record_input(path)?;
        let x = load_ground_truth(cfg, path)?;
        let r = certify(&engine, &x, cfg.epsilon(), &cfg.power_params())?;
        rows.push(EngineRow {
            engine: engine.name(),
            image: path.display().to_string(),
            epsilon: cfg.epsilon(),
            homogeneity_std: r.homogeneity_std,
            passivity_estimate: r.passivity_estimate,
            directional_gap: r.directional_gap,
        });
    }
    dir.write_rows("check_engine.csv", &rows)?;
    dir.finish(cfg.task().name(), cfg.seed())?;
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub final_energy: f64,
    pub final_psnr: Option<f64>,
    pub iterations_run: usize,
}

#[derive(Debug, Serialize)]
pub struct CompareSummary {
    pub red_method: String,
    pub engine: String,
    pub red_final_energy: f64,
    pub red_final_psnr: Option<f64>,
    pub p3_final_psnr: Option<f64>,
    pub p3_best_psnr: Option<f64>,
    pub p3_best_iteration: Option<usize>,
    /// `(max - min) / min` of the RED-ADMM final energies over the beta sweep.
    pub sweep_energy_spread: f64,
    pub sweep: Vec<SweepRow>,
}

impl CompareSummary {
    pub fn line(&self) -> String {
        format!(
            "compare [{}]: {} {} dB, p3 final {} dB (best {} dB at {}); beta sweep energy spread {:.3e}",
            self.engine,
            self.red_method,
            fmt_db(self.red_final_psnr),
            fmt_db(self.p3_final_psnr),
            fmt_db(self.p3_best_psnr),
            self.p3_best_iteration.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
            self.sweep_energy_spread,
        )
    }
}

fn fmt_db(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
}

pub fn compare(cfg: &Resolved) -> Result<CompareSummary, CliError> {
    let mut dir = RunDir::create(cfg.out_dir())?;
    dir.write_text("config.toml", &cfg.to_toml())?;
    let (y, gt) = observation(cfg, &mut dir)?;
    let model = cfg.model()?;
    let engine = cfg.engine()?;
    let params = cfg.solver_params()?;
    cfg.p3_params().validate()?;

    let red = solve(&y, &model, &params, &engine, gt.as_ref())?;
    let p3 = solve_p3(&y, &model, &cfg.p3_params(), &engine, gt.as_ref())?;
    if let Some(g) = &gt {
        dir.save_image("ground_truth.png", g)?;
    }
    dir.save_image("degraded.png", &y)?;
    dir.save_image("red_restored.png", &red.final_image)?;
    dir.save_image("p3_restored.png", &p3.final_image)?;
    write_trace(&mut dir, "red_trace.csv", &red)?;
    write_trace(&mut dir, "p3_trace.csv", &p3)?;
    write_schedule(&mut dir, "p3_schedule.csv", &p3)?;
    write_paired(&mut dir, &red, &p3)?;

    let mut sweep = Vec::new();
    for &beta in cfg.beta_sweep() {
        let mut p = params.clone();
        p.scheme = Scheme::Admm;
        p.beta = beta;
        let r = solve(&y, &model, &p, &engine, gt.as_ref())?;
        sweep.push(SweepRow {
            beta,
            final_energy: r.final_energy(),
            final_psnr: r.final_psnr(),
            iterations_run: r.iterations_run,
        });
    }
    let lo = sweep.iter().map(|r| r.final_energy).fold(f64::INFINITY, f64::min);
    let hi = sweep.iter().map(|r| r.final_energy).fold(f64::NEG_INFINITY, f64::max);
    dir.write_rows("beta_sweep.csv", &sweep)?;

    let summary = CompareSummary {
        red_method: method_name(cfg.scheme()).to_string(),
        engine: engine.name(),
        red_final_energy: red.final_energy(),
        red_final_psnr: red.final_psnr(),
        p3_final_psnr: p3.final_psnr(),
        p3_best_psnr: p3.best.as_ref().map(|b| b.psnr),
        p3_best_iteration: p3.best.as_ref().map(|b| b.iteration),
        sweep_energy_spread: if sweep.is_empty() { 0.0 } else { (hi - lo) / lo.abs() },
        sweep,
    };
    dir.write_toml("summary.toml", &summary)?;
    dir.finish(cfg.task().name(), cfg.seed())?;
    Ok(summary)
}

/// RED and Plug-and-Play traces side by side; the shorter run leaves blanks.
fn write_paired(dir: &mut RunDir, red: &RunReport, p3: &RunReport) -> Result<(), CliError> {
    let name = "paired_trace.csv";
    let mut w = dir.csv(
        name,
        &["iteration", "red_energy", "red_grad_norm", "red_psnr", "p3_data_term", "p3_split_gap", "p3_psnr"],
    )?;
    let n = red.energy_trace.len().max(p3.energy_trace.len());
    let at = |v: &[f64], k: usize| fmt_opt(v.get(k).copied());
    let psnr_at = |r: &RunReport, k: usize| fmt_opt(r.psnr_trace.as_ref().and_then(|t| t.get(k).copied()));
    for k in 0..n {
        w.write_record([
            k.to_string(),
            at(&red.energy_trace, k),
            at(&red.grad_norm_trace, k),
            psnr_at(red, k),
            at(&p3.energy_trace, k),
            at(&p3.grad_norm_trace, k),
            psnr_at(p3, k),
        ])?;
    }
    w.flush().map_err(|e| write_err(&dir.path(name), e))
}

#[derive(Debug, Serialize)]
pub struct PriorReport {
    pub prior: String,
    pub width: usize,
    pub height: usize,
    pub passivity_bound: f64,
    pub samples: usize,
    /// Largest `|x^T (x - f(x)) / 2 - rho(x)| / rho(x)` over the samples.
    pub roundtrip_residual: f64,
    pub eigenvalue_min: f64,
    pub eigenvalue_max: f64,
    /// Kernelized against Fourier-symbol eigenvalues.
    pub eigenvalue_formula_gap: f64,
    pub row_stochastic: bool,
    pub max_row_deviation: f64,
    pub nonnegative: bool,
    pub min_entry: f64,
    pub directional_gap: f64,
}

impl PriorReport {
    pub fn line(&self) -> String {
        format!(
            "{} on {}x{}: roundtrip residual {:.2e}, eigenvalues [{:.6}, {:.6}], row-stochastic {}",
            self.prior,
            self.width,
            self.height,
            self.roundtrip_residual,
            self.eigenvalue_min,
            self.eigenvalue_max,
            self.row_stochastic
        )
    }
}

pub fn derive_prior(cfg: &Resolved) -> Result<PriorReport, CliError> {
    let (prior, width, height, samples) = cfg.prior()?;
    let f = induced_denoiser(&prior)?;
    let w = kernelize(&prior, width, height)?;
    let mut dir = RunDir::create(cfg.out_dir())?;
    dir.write_text("config.toml", &cfg.to_toml())?;

    let sample = |i: usize| {
        gaussian_image(width, height, cfg.seed().wrapping_add(i as u64)).map(|v| 128.0 + 40.0 * v)
    };
    let mut roundtrip_residual: f64 = 0.0;
    for i in 0..samples {
        let x = sample(i);
        let lhs = 0.5 * x.dot(&(&x - &f.denoise(&x)));
        let rho = prior.rho(&x);
        let res = (lhs - rho).abs();
        roundtrip_residual = roundtrip_residual.max(if rho != 0.0 { res / rho.abs() } else { res });
    }

    let kernelized = w.eigenvalues()?;
    let mut formula = circulant_eigenvalues(&prior, width, height);
    formula.sort_by(f64::total_cmp);
    let eigenvalue_formula_gap = kernelized
        .iter()
        .zip(&formula)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut ev = dir.csv("eigenvalues.csv", &["index", "kernelized", "formula"])?;
    for (i, (a, b)) in kernelized.iter().zip(&formula).enumerate() {
        ev.write_record([i.to_string(), a.to_string(), b.to_string()])?;
    }
    ev.flush().map_err(|e| write_err(&dir.path("eigenvalues.csv"), e))?;
    drop(ev);

    let rs = row_stochastic_check(&w);
    let report = PriorReport {
        prior: f.name(),
        width,
        height,
        passivity_bound: prior.passivity_bound(),
        samples,
        roundtrip_residual,
        eigenvalue_min: kernelized[0],
        eigenvalue_max: kernelized[kernelized.len() - 1],
        eigenvalue_formula_gap,
        row_stochastic: rs.row_stochastic,
        max_row_deviation: rs.max_row_deviation,
        nonnegative: rs.nonnegative,
        min_entry: rs.min_entry,
        directional_gap: directional_consistency(&prior, &sample(samples))?,
    };
    dir.write_toml("report.toml", &report)?;
    dir.finish(cfg.task().name(), cfg.seed())?;
    Ok(report)
}

/// Runs the configured task and returns its one-line summary.
pub fn run(cfg: &Resolved) -> Result<String, CliError> {
    match cfg.task() {
        Task::Deblur | Task::SuperRes => restore(cfg).map(|s| s.line()),
        Task::CheckEngine => check_engine(cfg).map(|rows| {
            rows.iter()
                .map(|r| {
                    format!(
                        "{} {}: homogeneity {:.3e}, passivity {:.4}, directional gap {:.3e}",
                        r.engine, r.image, r.homogeneity_std, r.passivity_estimate, r.directional_gap
                    )
                })
                .collect::<Vec<_>>()
                .join("\n")
        }),
        Task::Compare => compare(cfg).map(|s| s.line()),
        Task::DerivePrior => derive_prior(cfg).map(|r| r.line()),
    }
}
