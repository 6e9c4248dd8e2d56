//! Experiment loop: build the problem from a [`RunConfig`], step the ensemble,
//! record diagnostics, write files.
//!
//! All randomness comes from `run.seed` through independent ChaCha8 streams,
//! so changing what is recorded never changes the trajectory:
//!
//! | stream | use |
//! |--------|-----|
//! | 0 | particle initialization, particle by particle (θ, then r) |
//! | 1 | minibatch permutations (one per epoch) |
//! | 2 | Euler–Maruyama noise |
//! | 3 | momentum refreshes |
//! | 4 | exact reference samples for the energy distance |
//!
//! The train/test split and synthetic data use `data.seed`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use gsvgd::bnn::{init_params, load_regression_csv, synthetic_sine, BnnShape, BnnTarget, Dataset};
use gsvgd::diagnostics::{
    energy_distance, mode_occupancy, moments, test_log_likelihood, write_snapshot, TraceMetrics,
    TraceWriter,
};
use gsvgd::integrator::{euler_step, split_step_with};
use gsvgd::sampler::{mcmc_step, resample_momentum};
use gsvgd::targets::{Gaussian, GaussianMixture};
use gsvgd::{
    AugmentedTarget, DynamicsSpec, Ensemble, Error, KernelConfig, Method, RiemannConfig,
    TargetDensity,
};
use ndarray::{s, Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{IntegratorKind, KernelMode, RunConfig, TargetId};
use crate::CliError;

const STREAM_INIT: u64 = 0;
const STREAM_MINIBATCH: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_RESAMPLE: u64 = 3;
const STREAM_REFERENCE: u64 = 4;

pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub iter: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_dist: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occupancy: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unassigned: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_ll: Option<f64>,
    pub theta_mean: Vec<f64>,
    pub theta_cov: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub config: RunConfig,
    pub initial: Metrics,
    #[serde(rename = "final")]
    pub last: Metrics,
    pub trace_rows: usize,
    pub snapshots: usize,
}

struct Problem {
    base: Arc<dyn TargetDensity<f64>>,
    reference: Option<Array2<f64>>,
    bnn: Option<(BnnShape, Arc<Dataset<f64>>)>,
}

fn matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    Array2::from_shape_fn((n, d), |(i, j)| rows[i][j])
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset<f64>, CliError> {
    let data = cfg.data.clone().unwrap_or_default();
    let seed = data.seed.unwrap_or(cfg.run.seed);
    Ok(match &data.path {
        Some(path) => load_regression_csv(path, seed, data.test_frac)?,
        None => {
            let (x, y) = synthetic_sine::<f64>(data.n_train + data.n_test, seed);
            let n = data.n_train;
            Dataset::from_split(
                x.slice(s![..n, ..]).to_owned(),
                y.slice(s![..n]).to_owned(),
                x.slice(s![n.., ..]).to_owned(),
                y.slice(s![n..]).to_owned(),
            )?
        }
    })
}

fn build_problem(cfg: &RunConfig) -> Result<Problem, CliError> {
    let t = &cfg.target;
    let base: Arc<dyn TargetDensity<f64>>;
    let mut bnn = None;
    match t.id {
        TargetId::Gauss => {
            let mean = Array1::from(t.mean.clone().unwrap_or_default());
            let cov = matrix(t.cov.as_deref().unwrap_or_default());
            base = Arc::new(Gaussian::new(mean, cov)?);
        }
        TargetId::GaussMix => {
            let comps = t.components.clone().unwrap_or_default();
            let weights = comps.iter().map(|c| c.weight).collect();
            let parts = comps
                .iter()
                .map(|c| Gaussian::new(Array1::from(c.mean.clone()), matrix(&c.cov)))
                .collect::<Result<Vec<_>, _>>()?;
            base = Arc::new(GaussianMixture::new(weights, parts)?);
        }
        TargetId::TriCrescent => base = Arc::new(gsvgd::targets::tri_crescent_target()),
        TargetId::Bnn => {
            let data = Arc::new(load_dataset(cfg)?);
            let hidden = cfg
                .bnn
                .as_ref()
                .map_or(gsvgd::bnn::DEFAULT_HIDDEN, |b| b.hidden);
            let shape = BnnShape::new(data.d_in(), hidden);
            base = Arc::new(BnnTarget::full(shape, &data)?);
            bnn = Some((shape, data));
        }
    }
    let reference = if cfg.trace.reference_samples > 0 {
        let mut rng = rng_stream(cfg.run.seed, STREAM_REFERENCE);
        base.sample_exact(&mut rng, cfg.trace.reference_samples)
    } else {
        None
    };
    Ok(Problem {
        base,
        reference,
        bnn,
    })
}

fn dynamics_spec(cfg: &RunConfig, theta_dim: usize) -> Result<DynamicsSpec<f64>, CliError> {
    let d = &cfg.dynamics;
    Ok(DynamicsSpec::for_kind(
        d.kind,
        theta_dim,
        d.sigma2,
        d.friction,
        d.mu,
        d.gamma,
        RiemannConfig {
            d_scale: d.d_scale,
            c_offset: d.c_offset,
        },
    )?)
}

fn kernel_config(cfg: &RunConfig) -> Result<KernelConfig<f64>, CliError> {
    let mut k = match cfg.kernel.mode {
        KernelMode::Median => KernelConfig::median(),
        KernelMode::Fixed => KernelConfig::fixed(cfg.kernel.h.unwrap_or(f64::NAN))?,
    };
    k.h_min = cfg.kernel.h_min;
    k.validate()?;
    Ok(k)
}

fn initial_ensemble(
    cfg: &RunConfig,
    problem: &Problem,
    target: &AugmentedTarget<f64>,
) -> Result<Ensemble<f64>, CliError> {
    let layout = target.layout().clone();
    let n = cfg.run.n_particles;
    let mut rng = rng_stream(cfg.run.seed, STREAM_INIT);
    let mut pos = Array2::zeros((n, layout.total_dim()));
    let sd = cfg.init.theta_var.sqrt();
    let r_sd = target.sigma2().sqrt();
    for mut row in pos.rows_mut() {
        match &problem.bnn {
            Some((shape, _)) => row
                .slice_mut(s![layout.theta()])
                .assign(&init_params::<f64>(*shape, &mut rng)),
            None => {
                for k in layout.theta() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    row[k] = sd * z;
                }
            }
        }
        for k in layout.r() {
            let z: f64 = StandardNormal.sample(&mut rng);
            row[k] = r_sd * z;
        }
        if let Some(th) = target.thermostat() {
            row.slice_mut(s![layout.xi()]).fill(th.center);
        }
    }
    Ok(Ensemble::new(pos, layout)?)
}

/// Cycles through shuffled training indices, reshuffling at each epoch.
struct Minibatches {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    size: usize,
}

impl Minibatches {
    fn new(n: usize, size: usize, rng: ChaCha8Rng) -> Self {
        Self {
            rng,
            order: (0..n).collect(),
            cursor: n,
            size: size.min(n),
        }
    }

    fn next(&mut self) -> &[usize] {
        if self.cursor + self.size > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let batch = &self.order[self.cursor..self.cursor + self.size];
        self.cursor += self.size;
        batch
    }
}

struct Recorder<'a> {
    cfg: &'a RunConfig,
    problem: &'a Problem,
    centers: Vec<Array1<f64>>,
    radius: f64,
}

impl Recorder<'_> {
    fn measure(
        &self,
        e: &Ensemble<f64>,
        iter: usize,
    ) -> Result<(Metrics, TraceMetrics<f64>), CliError> {
        let theta = e.theta();
        let energy_dist = match &self.problem.reference {
            Some(reference) => Some(energy_distance(theta, reference.view())?),
            None => None,
        };
        let occupancy = if self.centers.is_empty() {
            None
        } else {
            Some(mode_occupancy(e, &self.centers, self.radius)?)
        };
        let test_ll = match &self.problem.bnn {
            Some((shape, data)) => Some(test_log_likelihood(*shape, theta, data)?),
            None => None,
        };
        let (mean, cov) = if self.problem.bnn.is_some() {
            // θ is a weight vector; its moments are not a useful summary
            (Array1::zeros(0), Array2::zeros((0, 0)))
        } else {
            moments(theta)
        };
        let metrics = Metrics {
            iter,
            energy_dist,
            occupancy: occupancy.as_ref().map(|o| o.fractions.clone()),
            unassigned: occupancy.as_ref().map(|o| o.unassigned),
            test_ll,
            theta_mean: mean.to_vec(),
            theta_cov: cov.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        Ok((
            metrics,
            TraceMetrics {
                energy_dist,
                occupancy,
                test_ll,
            },
        ))
    }

    fn snapshot(&self, dir: &Path, e: &Ensemble<f64>, iter: usize) -> Result<bool, CliError> {
        if !self.cfg.trace.snapshots {
            return Ok(false);
        }
        write_snapshot(
            dir.join(format!("iter_{iter:06}.csv")),
            e.positions().view(),
            iter,
        )?;
        Ok(true)
    }
}

/// Run the configured experiment, writing `trace.csv`, `snapshots/` and
/// `summary.json` under `run.output_dir`.
pub fn run_experiment(cfg: &RunConfig) -> Result<Summary, CliError> {
    let problem = build_problem(cfg)?;
    let dynamics = dynamics_spec(cfg, problem.base.dim())?;
    let full_target = dynamics.augment(problem.base.clone())?;
    let kernel = kernel_config(cfg)?;
    let out = &cfg.run.output_dir;
    let snap_dir = out.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(|e| CliError::io(&snap_dir, e))?;

    let (centers, radius) = match &cfg.trace.modes {
        Some(m) => (
            m.centers.iter().map(|c| Array1::from(c.clone())).collect(),
            m.radius,
        ),
        None => (Vec::new(), 1.0),
    };
    let rec = Recorder {
        cfg,
        problem: &problem,
        centers,
        radius,
    };

    let mut e = initial_ensemble(cfg, &problem, &full_target)?;
    let (initial, _) = rec.measure(&e, 0)?;
    let mut snapshots = usize::from(rec.snapshot(&snap_dir, &e, 0)?);
    let mut trace = TraceWriter::create(out.join("trace.csv"), rec.centers.len())?;

    let mut batches = match (&problem.bnn, cfg.bnn.as_ref().and_then(|b| b.batch)) {
        (Some((_, data)), Some(size)) if size < data.n_train() => Some(Minibatches::new(
            data.n_train(),
            size,
            rng_stream(cfg.run.seed, STREAM_MINIBATCH),
        )),
        _ => None,
    };
    let mut noise = rng_stream(cfg.run.seed, STREAM_NOISE);
    let mut refresh = rng_stream(cfg.run.seed, STREAM_RESAMPLE);
    let eps = cfg.run.eps;
    let mut last = initial.clone();

    for iter in 1..=cfg.run.iters {
        let step_target = match (&mut batches, &problem.bnn) {
            (Some(b), Some((shape, data))) => {
                let base = Arc::new(BnnTarget::minibatch(*shape, data, b.next())?);
                full_target.with_base(base)?
            }
            _ => full_target.clone(),
        };
        let stepped = if cfg.method == Method::Mcmc {
            mcmc_step(&e, &step_target, &dynamics, eps, &mut noise)
        } else {
            let h = kernel.resolve(e.positions().view())?;
            let v = |s: &Ensemble<f64>| cfg.method.velocity(s, &step_target, &dynamics, h);
            match cfg.integrator {
                IntegratorKind::Euler => euler_step(&e, v, eps),
                IntegratorKind::Split => split_step_with(&e, v, eps),
            }
        };
        e = stepped.map_err(|err| err.at_iteration(iter))?;
        let period = cfg.sampler.resample_period;
        if period > 0 && iter % period == 0 {
            e = resample_momentum(&e, dynamics.sigma2, &mut refresh)?;
        }
        if iter % cfg.trace.every == 0 || iter == cfg.run.iters {
            let (metrics, row) = rec.measure(&e, iter).map_err(|err| match err {
                CliError::Run(inner) => CliError::Run(inner.at_iteration(iter)),
                other => other,
            })?;
            trace.record(iter, &row)?;
            snapshots += usize::from(rec.snapshot(&snap_dir, &e, iter)?);
            last = metrics;
        }
    }
    let trace_rows = trace.rows();
    trace.finish()?;

    let summary = Summary {
        config: cfg.clone(),
        initial,
        last,
        trace_rows,
        snapshots,
    };
    let path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(summary)
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}
