//! Experiment configuration: a versioned TOML file, per-key overrides, and
//! the per-task defaults that fill everything left unset.
//!
//! A resolved configuration has every optional field populated and is what
//! gets archived next to a run's outputs, so feeding the archived file back
//! in reproduces the run.

use std::path::{Path, PathBuf};

use red_core::prior_lab::PriorOperator;
use red_core::{
    DegradationModel, DenoiserSpec, Engine, Init, InnerSolve, NlmParams, P3Params, Psf, Scheme,
    SolverParams,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "deblur")]
    Deblur,
    #[serde(rename = "superres")]
    SuperRes,
    #[serde(rename = "check-engine")]
    CheckEngine,
    #[serde(rename = "compare")]
    Compare,
    #[serde(rename = "derive-prior")]
    DerivePrior,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Self::Deblur => "deblur",
            Self::SuperRes => "superres",
            Self::CheckEngine => "check-engine",
            Self::Compare => "compare",
            Self::DerivePrior => "derive-prior",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsfKind {
    Uniform,
    Gaussian,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Median,
    Nlm,
    Tikhonov,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Sd,
    Admm,
    Fp,
    /// The Plug-and-Play baseline, configured by `[p3]`.
    P3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Observation,
    Bicubic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerSolveKind {
    Auto,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Diff1d,
    Grad2d,
    Identity,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psf: Option<PsfKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psf_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psf_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<EngineKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patch_radius: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_radius: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reg_weight: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_iters_m1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_iters_m2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_scale: Option<f64>,
    /// Relative gradient-norm stop; 0 disables it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_solve: Option<InnerSolveKind>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct P3Section {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_iters_m1: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation_scale: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_sweep: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<PriorKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    /// Ground-truth image.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Extra images for `check-engine`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<PathBuf>,
    /// A ready-made observation; skips synthesis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degraded: Option<PathBuf>,
    /// `[x, y, width, height]` applied to every loaded ground truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crop: Option<[usize; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub degradation: DegradationSection,
    pub engine: EngineSection,
    pub solver: SolverSection,
    pub p3: P3Section,
    pub check: CheckSection,
    pub compare: CompareSection,
    pub prior: PriorSection,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Reads the config file (if any) and applies `key=value` overrides on top.
/// Keys are dotted paths into the TOML document, values are TOML literals;
/// anything that does not parse as one is taken as a bare string.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("cannot read config {}: {e}", p.display())))?;
            let doc: toml::Table = text
                .parse()
                .map_err(|e| config_err(format!("{}: {e}", p.display())))?;
            match doc.get("version") {
                None => return Err(config_err(format!("{}: missing `version`", p.display()))),
                Some(toml::Value::Integer(v)) if *v == CONFIG_VERSION as i64 => {}
                Some(v) => {
                    return Err(config_err(format!(
                        "{}: unsupported config version {v}, expected {CONFIG_VERSION}",
                        p.display()
                    )))
                }
            }
            doc
        }
        None => toml::Table::new(),
    };
    for kv in overrides {
        apply_override(&mut doc, kv)?;
    }
    let mut cfg: ExperimentConfig = doc
        .try_into()
        .map_err(|e: toml::de::Error| config_err(format!("invalid configuration: {e}")))?;
    cfg.version.get_or_insert(CONFIG_VERSION);
    if cfg.version != Some(CONFIG_VERSION) {
        return Err(config_err(format!("unsupported config version, expected {CONFIG_VERSION}")));
    }
    Ok(cfg)
}

pub fn apply_override(doc: &mut toml::Table, kv: &str) -> Result<(), CliError> {
    let (key, raw) = kv
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{kv}` is not key=value")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("malformed override key `{key}`")));
    }
    let value = parse_value(raw.trim());
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = doc;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override `{key}`: `{p}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// A configuration with every field filled for one task.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved(ExperimentConfig);

const FILLED: &str = "resolved configuration has every field set";

impl ExperimentConfig {
    /// Fills unset fields with the task's defaults and validates the result.
    pub fn resolve(mut self, task: Task) -> Result<Resolved, CliError> {
        match self.task {
            Some(t) if t != task => {
                return Err(config_err(format!(
                    "config is for task `{}` but `{}` was requested",
                    t.name(),
                    task.name()
                )))
            }
            _ => self.task = Some(task),
        }
        self.out.get_or_insert_with(|| PathBuf::from("runs").join(task.name()));
        self.seed.get_or_insert(0);
        let sr = task == Task::SuperRes;

        let d = &mut self.degradation;
        let psf = *d.psf.get_or_insert(if sr { PsfKind::Gaussian } else { PsfKind::Uniform });
        d.psf_size.get_or_insert(match (psf, sr) {
            (PsfKind::Gaussian, true) => 7,
            (PsfKind::Gaussian, false) => 25,
            (PsfKind::Uniform, _) => 9,
            (PsfKind::Identity, _) => 1,
        });
        d.psf_std.get_or_insert(1.6);
        let scale = *d.scale.get_or_insert(if sr { 3 } else { 1 });
        d.sigma.get_or_insert(if sr { 5.0 } else { 2f64.sqrt() });
        if sr && scale < 2 {
            return Err(config_err("superres needs degradation.scale >= 2"));
        }
        if task == Task::Deblur && scale != 1 {
            return Err(config_err("deblur needs degradation.scale = 1; use superres"));
        }

        // parameter tables: uniform blur, Gaussian blur, and x3 super-resolution
        let (lambda, sigma_f, beta0, p3_ratio) = if scale > 1 {
            (0.008, 3.0, 0.001, 360.0)
        } else if psf == PsfKind::Gaussian {
            (0.01, 4.1, 0.0007, 320.0)
        } else {
            (0.02, 3.25, 0.0007, 512.0)
        };

        let e = &mut self.engine;
        e.kind.get_or_insert(EngineKind::Nlm);
        e.sigma_f.get_or_insert(sigma_f);
        e.window.get_or_insert(3);
        let nlm = NlmParams::default();
        e.patch_radius.get_or_insert(nlm.patch_radius);
        e.search_radius.get_or_insert(nlm.search_radius);
        e.bandwidth_scale.get_or_insert(nlm.bandwidth_scale);
        e.reg_weight.get_or_insert(1.0);

        let s = &mut self.solver;
        let scheme = *s.scheme.get_or_insert(if task == Task::Compare {
            SchemeKind::Admm
        } else {
            SchemeKind::Fp
        });
        if task == Task::Compare && scheme == SchemeKind::P3 {
            return Err(config_err("compare runs the baseline itself; pick a RED scheme"));
        }
        s.lambda.get_or_insert(lambda);
        s.outer_iters.get_or_insert(if scheme == SchemeKind::Sd { 1500 } else { 200 });
        s.inner_iters_m1.get_or_insert(200);
        s.inner_iters_m2.get_or_insert(1);
        s.beta.get_or_insert(0.001);
        s.step_scale.get_or_insert(1.0);
        s.grad_tol.get_or_insert(0.0);
        s.init.get_or_insert(if scale > 1 { InitKind::Bicubic } else { InitKind::Observation });
        s.inner_solve.get_or_insert(InnerSolveKind::Auto);

        let p = &mut self.p3;
        p.alpha.get_or_insert(1.02);
        let b0 = *p.beta0.get_or_insert(beta0);
        p.lambda.get_or_insert(p3_ratio * b0);
        p.outer_iters.get_or_insert(200);
        p.inner_iters_m1.get_or_insert(200);

        let c = &mut self.check;
        c.epsilon.get_or_insert(0.01);
        c.max_iters.get_or_insert(500);
        c.tol.get_or_insert(1e-5);
        c.perturbation_scale.get_or_insert(1.0);

        self.compare.beta_sweep.get_or_insert_with(|| vec![1e-3, 1e-2, 1e-1]);

        let pr = &mut self.prior;
        pr.operator.get_or_insert(PriorKind::Grad2d);
        pr.weight.get_or_insert(0.1);
        pr.width.get_or_insert(16);
        pr.height.get_or_insert(16);
        pr.samples.get_or_insert(100);

        let resolved = Resolved(self);
        resolved.validate()?;
        Ok(resolved)
    }
}

impl Resolved {
    pub fn config(&self) -> &ExperimentConfig {
        &self.0
    }

    pub fn task(&self) -> Task {
        self.0.task.expect(FILLED)
    }

    pub fn seed(&self) -> u64 {
        self.0.seed.expect(FILLED)
    }

    pub fn out_dir(&self) -> &Path {
        self.0.out.as_deref().expect(FILLED)
    }

    pub fn scheme(&self) -> SchemeKind {
        self.0.solver.scheme.expect(FILLED)
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some([_, _, w, h]) = self.0.crop {
            if w == 0 || h == 0 {
                return Err(config_err("crop width and height must be positive"));
            }
        }
        self.model()?;
        self.engine()?;
        // a noiseless model can still be synthesized; solving it is refused later
        let noisy = self.0.degradation.sigma.expect(FILLED) > 0.0;
        if noisy && matches!(self.task(), Task::Deblur | Task::SuperRes | Task::Compare) {
            if self.scheme() == SchemeKind::P3 || self.task() == Task::Compare {
                self.p3_params().validate()?;
            }
            if self.scheme() != SchemeKind::P3 {
                self.solver_params()?.validate()?;
            }
        }
        let c = &self.0.check;
        let eps = c.epsilon.expect(FILLED);
        if !(eps > 0.0 && eps <= 0.05) {
            return Err(config_err(format!("check.epsilon must be in (0, 0.05], got {eps}")));
        }
        if self.0.compare.beta_sweep.as_ref().expect(FILLED).iter().any(|b| b.is_nan() || *b <= 0.0) {
            return Err(config_err("compare.beta_sweep entries must be positive"));
        }
        let pr = &self.0.prior;
        if pr.width.expect(FILLED) == 0 || pr.height.expect(FILLED) == 0 || pr.samples.expect(FILLED) == 0 {
            return Err(config_err("prior.width, prior.height and prior.samples must be positive"));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<DegradationModel, CliError> {
        let d = &self.0.degradation;
        let size = d.psf_size.expect(FILLED);
        let psf = match d.psf.expect(FILLED) {
            PsfKind::Uniform => red_core::operators::make_uniform_psf(size)?,
            PsfKind::Gaussian => red_core::operators::make_gaussian_psf(size, d.psf_std.expect(FILLED))?,
            PsfKind::Identity => Psf::identity(),
        };
        Ok(DegradationModel::new(psf, d.scale.expect(FILLED), d.sigma.expect(FILLED))?)
    }

    pub fn engine(&self) -> Result<DenoiserSpec, CliError> {
        let e = &self.0.engine;
        let engine = match e.kind.expect(FILLED) {
            EngineKind::Median => Engine::Median {
                window: e.window.expect(FILLED),
            },
            EngineKind::Nlm => Engine::Nlm(NlmParams {
                patch_radius: e.patch_radius.expect(FILLED),
                search_radius: e.search_radius.expect(FILLED),
                bandwidth_scale: e.bandwidth_scale.expect(FILLED),
            }),
            EngineKind::Tikhonov => Engine::Tikhonov {
                reg_weight: e.reg_weight.expect(FILLED),
            },
        };
        Ok(DenoiserSpec::new(engine, e.sigma_f.expect(FILLED))?)
    }

    fn red_scheme(&self) -> Scheme {
        match self.scheme() {
            SchemeKind::Sd => Scheme::Sd,
            SchemeKind::Admm => Scheme::Admm,
            SchemeKind::Fp | SchemeKind::P3 => Scheme::Fp,
        }
    }

    fn init(&self) -> Init {
        match self.0.solver.init.expect(FILLED) {
            InitKind::Observation => Init::Observation,
            InitKind::Bicubic => Init::BicubicUpscale,
        }
    }

    fn inner_solve(&self) -> InnerSolve {
        match self.0.solver.inner_solve.expect(FILLED) {
            InnerSolveKind::Auto => InnerSolve::Auto,
            InnerSolveKind::Iterative => InnerSolve::Iterative,
        }
    }

    pub fn solver_params(&self) -> Result<SolverParams, CliError> {
        let s = &self.0.solver;
        let sigma = self.0.degradation.sigma.expect(FILLED);
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(config_err("the solvers need degradation.sigma > 0"));
        }
        let mut p = SolverParams::new(self.red_scheme(), s.lambda.expect(FILLED), sigma);
        p.outer_iters = s.outer_iters.expect(FILLED);
        p.inner_iters_m1 = s.inner_iters_m1.expect(FILLED);
        p.inner_iters_m2 = s.inner_iters_m2.expect(FILLED);
        p.beta = s.beta.expect(FILLED);
        p.step_scale = s.step_scale.expect(FILLED);
        let tol = s.grad_tol.expect(FILLED);
        p.grad_tol = (tol > 0.0).then_some(tol);
        p.init = self.init();
        p.inner_solve = self.inner_solve();
        Ok(p)
    }

    pub fn p3_params(&self) -> P3Params {
        let c = &self.0.p3;
        let mut p = P3Params::new(
            c.beta0.expect(FILLED),
            c.lambda.expect(FILLED),
            self.0.degradation.sigma.expect(FILLED),
        );
        p.alpha = c.alpha.expect(FILLED);
        p.outer_iters = c.outer_iters.expect(FILLED);
        p.inner_iters_m1 = c.inner_iters_m1.expect(FILLED);
        p.init = self.init();
        p.inner_solve = self.inner_solve();
        p
    }

    pub fn power_params(&self) -> red_core::PowerMethodParams {
        let c = &self.0.check;
        red_core::PowerMethodParams {
            max_iters: c.max_iters.expect(FILLED),
            tol: c.tol.expect(FILLED),
            seed: self.seed(),
            perturbation_scale: c.perturbation_scale.expect(FILLED),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.0.check.epsilon.expect(FILLED)
    }

    pub fn beta_sweep(&self) -> &[f64] {
        self.0.compare.beta_sweep.as_deref().expect(FILLED)
    }

    pub fn prior(&self) -> Result<(red_core::QuadraticPrior, usize, usize, usize), CliError> {
        let p = &self.0.prior;
        let op = match p.operator.expect(FILLED) {
            PriorKind::Diff1d => PriorOperator::Difference1D,
            PriorKind::Grad2d => PriorOperator::Gradient2D,
            PriorKind::Identity => PriorOperator::Identity,
        };
        let prior = red_core::QuadraticPrior::new(op, p.weight.expect(FILLED))?;
        Ok((prior, p.width.expect(FILLED), p.height.expect(FILLED), p.samples.expect(FILLED)))
    }

    /// The archived form. Input paths are made absolute so the file works
    /// from any directory.
    pub fn to_toml(&self) -> String {
        let mut c = self.0.clone();
        let abs = |p: &mut PathBuf| {
            if let Ok(a) = std::path::absolute(&*p) {
                *p = a;
            }
        };
        c.input.as_mut().map(abs);
        c.degraded.as_mut().map(abs);
        c.inputs.iter_mut().for_each(abs);
        c.out.as_mut().map(abs);
        toml::to_string(&c).expect("configuration serializes")
    }
}
