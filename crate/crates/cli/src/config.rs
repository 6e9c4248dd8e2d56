//! Run configuration: JSON in, validated [`RunConfig`] out.

use std::path::PathBuf;

use gsvgd::diagnostics::find_modes;
use gsvgd::targets::tri_crescent_target;
use gsvgd::{DynamicsKind, Method};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetId {
    Gauss,
    GaussMix,
    TriCrescent,
    Bnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// `"target": "gauss"` is shorthand for `"target": {"id": "gauss"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub id: TargetId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<MixtureComponent>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default = "default_kind")]
    pub kind: DynamicsKind,
    #[serde(default = "one")]
    pub sigma2: f64,
    /// Friction.
    #[serde(rename = "A", default)]
    pub friction: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "default_d_scale")]
    pub d_scale: f64,
    #[serde(default = "default_c_offset")]
    pub c_offset: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            kind: DynamicsKind::Ld,
            sigma2: 1.0,
            friction: 0.0,
            mu: 1.0,
            gamma: 1.0,
            d_scale: 1.5,
            c_offset: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    Median,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "default_mode")]
    pub mode: KernelMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default = "default_h_min")]
    pub h_min: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            mode: KernelMode::Median,
            h: None,
            h_min: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    #[default]
    Euler,
    Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_particles")]
    pub n_particles: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            eps: default_eps(),
            iters: default_iters(),
            n_particles: default_particles(),
            seed: 0,
            output_dir: default_output_dir(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesConfig {
    #[serde(default)]
    pub centers: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    #[serde(default = "default_every")]
    pub every: usize,
    #[serde(default = "yes")]
    pub snapshots: bool,
    /// Exact target draws used for the energy distance (0 disables it).
    #[serde(default = "default_reference")]
    pub reference_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<ModesConfig>,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self {
            every: default_every(),
            snapshots: true,
            reference_samples: default_reference(),
            modes: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    /// Momentum refresh period in outer steps; 0 never refreshes.
    #[serde(default)]
    pub resample_period: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    /// Variance of the `N(0, v I)` draw for θ (ignored by the bnn target).
    #[serde(default = "default_theta_var")]
    pub theta_var: f64,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            theta_var: default_theta_var(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnnSection {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Minibatch size; absent means full batch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
}

impl Default for BnnSection {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            batch: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// CSV file; absent means the synthetic `sin(3x)` problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Split / synthetic-data seed; defaults to `run.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_test_frac")]
    pub test_frac: f64,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            path: None,
            seed: None,
            test_frac: default_test_frac(),
            n_train: default_n_train(),
            n_test: default_n_test(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub target: TargetConfig,
    pub method: Method,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub integrator: IntegratorKind,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bnn: Option<BnnSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_kind() -> DynamicsKind {
    DynamicsKind::Ld
}
fn default_d_scale() -> f64 {
    1.5
}
fn default_c_offset() -> f64 {
    0.5
}
fn default_mode() -> KernelMode {
    KernelMode::Median
}
fn default_h_min() -> f64 {
    1e-6
}
fn default_eps() -> f64 {
    0.05
}
fn default_iters() -> usize {
    1000
}
fn default_particles() -> usize {
    100
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_every() -> usize {
    10
}
fn default_reference() -> usize {
    1000
}
fn default_theta_var() -> f64 {
    0.01
}
fn default_hidden() -> usize {
    gsvgd::bnn::DEFAULT_HIDDEN
}
fn default_test_frac() -> f64 {
    0.1
}
fn default_n_train() -> usize {
    200
}
fn default_n_test() -> usize {
    20
}

/// Starting points of the gradient-ascent mode search on the crescent target.
pub const CRESCENT_MODE_STARTS: [[f64; 2]; 5] = [
    [2.0, 2.0],
    [-2.0, 2.0],
    [2.0, -2.0],
    [-2.0, -2.0],
    [0.0, 2.0],
];

/// Local maxima of the crescent target reached from [`CRESCENT_MODE_STARTS`].
pub fn crescent_modes() -> Vec<Vec<f64>> {
    let starts: Vec<Array1<f64>> = CRESCENT_MODE_STARTS
        .iter()
        .map(|s| Array1::from(s.to_vec()))
        .collect();
    find_modes(&tri_crescent_target(), &starts, 0.01, 200_000, 0.1)
        .expect("crescent gradient is finite")
        .into_iter()
        .map(|m| m.to_vec())
        .collect()
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Parse, apply defaults, and validate.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| invalid("", e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        if let Some(serde_json::Value::String(id)) = obj.get("target") {
            let id = id.clone();
            obj.insert("target".into(), serde_json::json!({ "id": id }));
        }
    }
    let mut cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let key = e.path().to_string();
        let message = e.into_inner().to_string();
        let message = if key == "method" && message.contains("unknown variant") {
            let valid: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            format!("{message} (valid methods: {})", valid.join(", "))
        } else {
            message
        };
        invalid(&key, message)
    })?;
    cfg.resolve()?;
    Ok(cfg)
}

impl RunConfig {
    /// Fill derived defaults and check every constraint.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let run = &self.run;
        if !(run.eps > 0.0 && run.eps.is_finite()) {
            return Err(invalid("run.eps", "must be a finite number > 0"));
        }
        if run.iters < 1 {
            return Err(invalid("run.iters", "must be >= 1"));
        }
        if run.n_particles < 1 {
            return Err(invalid("run.n_particles", "must be >= 1"));
        }
        if self.trace.every < 1 {
            return Err(invalid("trace.every", "must be >= 1"));
        }
        if !(self.init.theta_var >= 0.0 && self.init.theta_var.is_finite()) {
            return Err(invalid("init.theta_var", "must be a finite number >= 0"));
        }
        if !(self.kernel.h_min > 0.0) {
            return Err(invalid("kernel.h_min", "must be > 0"));
        }
        match (self.kernel.mode, self.kernel.h) {
            (KernelMode::Fixed, None) => {
                return Err(invalid("kernel.h", "required when kernel.mode = \"fixed\""))
            }
            (KernelMode::Fixed, Some(h)) if !(h > 0.0) => {
                return Err(invalid("kernel.h", "must be > 0"))
            }
            (KernelMode::Median, Some(_)) => {
                return Err(invalid(
                    "kernel.h",
                    "only allowed when kernel.mode = \"fixed\"",
                ))
            }
            _ => {}
        }
        let d = &self.dynamics;
        for (key, v, strict) in [
            ("dynamics.sigma2", d.sigma2, true),
            ("dynamics.mu", d.mu, true),
            ("dynamics.d_scale", d.d_scale, true),
            ("dynamics.A", d.friction, false),
        ] {
            let ok = if strict { v > 0.0 } else { v >= 0.0 };
            if !ok || !v.is_finite() {
                return Err(invalid(
                    key,
                    if strict {
                        "must be > 0"
                    } else {
                        "must be >= 0"
                    },
                ));
            }
        }
        if !d.gamma.is_finite() || !d.c_offset.is_finite() {
            return Err(invalid("dynamics", "gamma and c_offset must be finite"));
        }
        if matches!(self.method, Method::Svgd | Method::Blob) && d.kind != DynamicsKind::Ld {
            return Err(invalid(
                "dynamics.kind",
                format!(
                    "method \"{}\" runs Langevin dynamics; use \"LD\"",
                    self.method.name()
                ),
            ));
        }
        if self.integrator == IntegratorKind::Split {
            if !d.kind.has_momentum() {
                return Err(invalid(
                    "integrator",
                    "\"split\" needs dynamics with a momentum block",
                ));
            }
            if self.method == Method::Mcmc {
                return Err(invalid(
                    "integrator",
                    "method \"mcmc\" uses Euler–Maruyama steps; use \"euler\"",
                ));
            }
        }
        if self.sampler.resample_period > 0 && !d.kind.has_momentum() {
            return Err(invalid(
                "sampler.resample_period",
                "dynamics has no momentum to resample",
            ));
        }
        self.resolve_target()?;
        if let Some(m) = &self.trace.modes {
            if !(m.radius > 0.0) {
                return Err(invalid("trace.modes.radius", "must be > 0"));
            }
            if m.centers.is_empty() {
                return Err(invalid(
                    "trace.modes.centers",
                    "must list at least one center",
                ));
            }
        }
        Ok(())
    }

    fn resolve_target(&mut self) -> Result<(), CliError> {
        let t = &mut self.target;
        let is_bnn = t.id == TargetId::Bnn;
        if !is_bnn && (self.bnn.is_some() || self.data.is_some()) {
            return Err(invalid("bnn", "bnn and data sections need target \"bnn\""));
        }
        match t.id {
            TargetId::Gauss => {
                if t.components.is_some() {
                    return Err(invalid("target.components", "only used by \"gauss_mix\""));
                }
                let mean = t.mean.get_or_insert_with(|| vec![1.0, -1.0]).clone();
                let cov = t
                    .cov
                    .get_or_insert_with(|| vec![vec![1.0, 0.5], vec![0.5, 1.0]]);
                if mean.is_empty()
                    || cov.len() != mean.len()
                    || cov.iter().any(|r| r.len() != mean.len())
                {
                    return Err(invalid(
                        "target.cov",
                        "must be a square matrix matching target.mean",
                    ));
                }
            }
            TargetId::GaussMix => {
                if t.mean.is_some() || t.cov.is_some() {
                    return Err(invalid("target.mean", "gauss_mix takes target.components"));
                }
                let comps = t.components.get_or_insert_with(|| {
                    [[-2.0, 0.0], [2.0, 0.0], [0.0, 2.5]]
                        .iter()
                        .map(|m| MixtureComponent {
                            weight: 1.0 / 3.0,
                            mean: m.to_vec(),
                            cov: vec![vec![0.3, 0.0], vec![0.0, 0.3]],
                        })
                        .collect()
                });
                let d = comps.first().map(|c| c.mean.len()).unwrap_or(0);
                if d == 0
                    || comps.iter().any(|c| {
                        c.mean.len() != d || c.cov.len() != d || c.cov.iter().any(|r| r.len() != d)
                    })
                {
                    return Err(invalid(
                        "target.components",
                        "components need equal, non-zero dimensions",
                    ));
                }
            }
            TargetId::TriCrescent => {
                if t.mean.is_some() || t.cov.is_some() || t.components.is_some() {
                    return Err(invalid("target", "tri_crescent takes no parameters"));
                }
                let modes = self.trace.modes.get_or_insert_with(|| ModesConfig {
                    centers: Vec::new(),
                    radius: 1.0,
                });
                if modes.centers.is_empty() {
                    modes.centers = crescent_modes();
                }
            }
            TargetId::Bnn => {
                if t.mean.is_some() || t.cov.is_some() || t.components.is_some() {
                    return Err(invalid(
                        "target",
                        "bnn takes its model from the bnn and data sections",
                    ));
                }
                let bnn = self.bnn.get_or_insert_with(BnnSection::default);
                if bnn.hidden == 0 {
                    return Err(invalid("bnn.hidden", "must be >= 1"));
                }
                if bnn.batch == Some(0) {
                    return Err(invalid("bnn.batch", "must be >= 1"));
                }
                let data = self.data.get_or_insert_with(DataSection::default);
                if data.seed.is_none() {
                    data.seed = Some(self.run.seed);
                }
                if !(data.test_frac > 0.0 && data.test_frac < 1.0) {
                    return Err(invalid("data.test_frac", "must lie in (0, 1)"));
                }
                if data.path.is_none() && (data.n_train == 0 || data.n_test == 0) {
                    return Err(invalid(
                        "data.n_train",
                        "synthetic splits need n_train, n_test >= 1",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
