//! Fixed-step integration, trajectory/dataset generation, and rollouts.
//!
//! Trajectories are integrated with classic RK4 by default (forward Euler is
//! kept for diagnostics). Dataset generation samples the derivative at clean
//! trajectory points and then adds i.i.d. Gaussian noise to both states and
//! derivatives; noise streams are derived per trajectory from
//! `(seed, trajectory index)`, so the result does not depend on evaluation
//! order.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::regression::{Dataset, DatasetMeta};
use crate::systems::HamiltonianSystem;

/// An autonomous vector field on phase space.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// Adapter turning a closure into a [`VectorField`].
pub struct FnField<F: Fn(&DVector<f64>) -> DVector<f64>> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Rk4,
    Euler,
}

/// A fixed-step trajectory request.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub x0: DVector<f64>,
    pub step: f64,
    pub t_end: f64,
    pub integrator: Integrator,
}

impl TrajectorySpec {
    pub fn new(x0: DVector<f64>, step: f64, t_end: f64, integrator: Integrator) -> Result<Self> {
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "step must be positive, got {step}"
            )));
        }
        if !t_end.is_finite() || t_end < step {
            return Err(Error::InvalidSpec(format!(
                "t_end must be at least one step, got t_end={t_end}, step={step}"
            )));
        }
        Ok(TrajectorySpec {
            x0,
            step,
            t_end,
            integrator,
        })
    }

    /// Number of integration steps; the trajectory has `steps() + 1` samples
    /// including `t = 0`. The small slack absorbs division roundoff so that
    /// e.g. `t_end = 0.7, step = 0.1` yields 7 steps.
    pub fn steps(&self) -> usize {
        (self.t_end / self.step + 1e-9).floor() as usize
    }
}

/// Additive measurement noise: i.i.d. `N(0, std^2)` on every component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub std: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(std: f64, seed: u64) -> Result<Self> {
        if !std.is_finite() || std < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "noise std must be >= 0, got {std}"
            )));
        }
        Ok(NoiseSpec { std, seed })
    }

    pub fn noiseless(seed: u64) -> Self {
        NoiseSpec { std: 0.0, seed }
    }
}

fn step_rk4(field: &dyn VectorField, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = field.eval(x);
    let k2 = field.eval(&(x + &k1 * (h / 2.0)));
    let k3 = field.eval(&(x + &k2 * (h / 2.0)));
    let k4 = field.eval(&(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn step_euler(field: &dyn VectorField, x: &DVector<f64>, h: f64) -> DVector<f64> {
    x + field.eval(x) * h
}

/// Integrate and keep whatever was produced before a non-finite state.
///
/// Returns the samples `(t, x)` starting at `t = 0` and the index of the
/// first failed step, if any.
pub fn integrate_partial(
    field: &dyn VectorField,
    spec: &TrajectorySpec,
) -> (Vec<(f64, DVector<f64>)>, Option<usize>) {
    let steps = spec.steps();
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = spec.x0.clone();
    if !x.iter().all(|v| v.is_finite()) {
        return (out, Some(0));
    }
    out.push((0.0, x.clone()));
    for i in 0..steps {
        x = match spec.integrator {
            Integrator::Rk4 => step_rk4(field, &x, spec.step),
            Integrator::Euler => step_euler(field, &x, spec.step),
        };
        if !x.iter().all(|v| v.is_finite()) {
            return (out, Some(i + 1));
        }
        out.push(((i + 1) as f64 * spec.step, x.clone()));
    }
    (out, None)
}

/// Fixed-step integration of `field` from `spec.x0`.
///
/// The result includes the `t = 0` sample and has
/// `floor(t_end / step) + 1` entries.
pub fn integrate(
    field: &dyn VectorField,
    spec: &TrajectorySpec,
) -> Result<Vec<(f64, DVector<f64>)>> {
    let (trajectory, failed) = integrate_partial(field, spec);
    match failed {
        Some(step) => Err(Error::NonFiniteState { step }),
        None => Ok(trajectory),
    }
}

/// RNG stream for one use site, derived from `(seed, context, index)`.
fn stream_rng(seed: u64, context: u8, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    key[16] = context;
    ChaCha8Rng::from_seed(key)
}

const NOISE_CONTEXT: u8 = 1;

/// Generate a training dataset from the true system.
///
/// One clean trajectory is integrated per initial condition; at every sample
/// the derivative is the exact field at the clean state, after which noise is
/// added to both the state and the derivative. Deterministic for a fixed
/// `noise.seed`.
pub fn make_dataset(
    system: &HamiltonianSystem,
    ics: &[DVector<f64>],
    spec: &TrajectorySpec,
    noise: &NoiseSpec,
) -> Result<Dataset> {
    if ics.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let normal = if noise.std > 0.0 {
        Some(Normal::new(0.0, noise.std).expect("validated std"))
    } else {
        None
    };

    let mut points = Vec::new();
    let mut derivatives = Vec::new();
    for (index, x0) in ics.iter().enumerate() {
        let traj_spec = TrajectorySpec {
            x0: x0.clone(),
            ..spec.clone()
        };
        let trajectory = integrate(system, &traj_spec)?;
        let mut rng = stream_rng(noise.seed, NOISE_CONTEXT, index as u64);
        for (_, x_clean) in &trajectory {
            let mut x = x_clean.clone();
            let mut y = system.true_field(x_clean)?;
            if let Some(normal) = &normal {
                for v in x.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
                for v in y.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
            points.push(x);
            derivatives.push(y);
        }
    }

    let meta = DatasetMeta {
        system: Some(*system),
        ics: ics.iter().map(|x| x.iter().cloned().collect()).collect(),
        step: spec.step,
        t_end: spec.t_end,
        noise_std: noise.std,
        seed: noise.seed,
    };
    Dataset::new(points, derivatives, meta)
}

/// Which trajectory diverged during a rollout comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergedSide {
    Reference,
    Learned,
}

/// Pointwise error series between two rollouts of the same initial condition.
#[derive(Debug, Clone)]
pub struct RolloutSeries {
    /// `(t, ||x_reference - x_learned||)`, strictly increasing in `t`.
    pub samples: Vec<(f64, f64)>,
    /// Set when one of the trajectories produced a non-finite state; the
    /// series is truncated at the last finite sample of both.
    pub truncated: Option<(usize, DivergedSide)>,
}

impl RolloutSeries {
    pub fn mean_error(&self) -> f64 {
        if self.samples.is_empty() {
            return f64::NAN;
        }
        self.samples.iter().map(|(_, e)| e).sum::<f64>() / self.samples.len() as f64
    }

    pub fn max_error(&self) -> f64 {
        self.samples.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }
}

/// Integrate `reference` and `learned` from the same initial condition with
/// the same integrator and step, and return the pointwise Euclidean error.
pub fn rollout_error(
    reference: &dyn VectorField,
    learned: &dyn VectorField,
    x0: &DVector<f64>,
    step: f64,
    t_end: f64,
) -> Result<RolloutSeries> {
    let spec = TrajectorySpec::new(x0.clone(), step, t_end, Integrator::Rk4)?;
    let (ref_traj, ref_fail) = integrate_partial(reference, &spec);
    let (learn_traj, learn_fail) = integrate_partial(learned, &spec);
    let len = ref_traj.len().min(learn_traj.len());
    let samples = ref_traj[..len]
        .iter()
        .zip(&learn_traj[..len])
        .map(|((t, xb), (_, xl))| (*t, (xb - xl).norm()))
        .collect();
    let truncated = match (ref_fail, learn_fail) {
        (Some(s), _) => Some((s, DivergedSide::Reference)),
        (None, Some(s)) => Some((s, DivergedSide::Learned)),
        (None, None) => None,
    };
    Ok(RolloutSeries { samples, truncated })
}

/// Write a dataset as CSV (`x1,..,xn,y1,..,yn`) with a JSON metadata sidecar
/// at `<path>.meta.json`. Floats use the shortest round-trip representation.
pub fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let n = dataset.dim();
    let mut out = String::new();
    for i in 1..=n {
        write!(out, "x{i},").unwrap();
    }
    for i in 1..=n {
        write!(out, "y{i}").unwrap();
        out.push(if i == n { '\n' } else { ',' });
    }
    for (x, y) in dataset.points.iter().zip(&dataset.derivatives) {
        let row: Vec<String> = x.iter().chain(y.iter()).map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    let meta_path = meta_sidecar_path(path);
    std::fs::write(meta_path, serde_json::to_string_pretty(&dataset.meta)?)?;
    Ok(())
}

/// Read a dataset written by [`write_dataset_csv`]; the metadata sidecar is
/// optional.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty dataset file".into(),
    })?;
    let columns = header.split(',').count();
    if columns % 2 != 0 || columns == 0 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected an even number of columns, got {columns}"),
        });
    }
    let n = columns / 2;
    let mut points = Vec::new();
    let mut derivatives = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: format!("bad float `{tok}`: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != columns {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {columns} values, got {}", values.len()),
            });
        }
        points.push(DVector::from_column_slice(&values[..n]));
        derivatives.push(DVector::from_column_slice(&values[n..]));
    }
    let meta_path = meta_sidecar_path(path);
    let meta = if meta_path.exists() {
        serde_json::from_str(&std::fs::read_to_string(meta_path)?)?
    } else {
        DatasetMeta::default()
    };
    Dataset::new(points, derivatives, meta)
}

fn meta_sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}
