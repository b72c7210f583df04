//! Numerical evaluation of learned models: odd-error statistics, Hamiltonian
//! constancy along trajectories, field grids for phase portraits, and the CSV
//! report writers.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::regression::TrainedModel;
use crate::simulate::{RolloutSeries, VectorField};
use crate::systems::HamiltonianSystem;

/// Empirical mean and (population) variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub variance: f64,
}

impl Stats {
    pub fn from_values(values: &[f64]) -> Stats {
        if values.is_empty() {
            return Stats {
                mean: f64::NAN,
                variance: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let variance =
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
        Stats { mean, variance }
    }
}

/// Odd error `e_odd = ||f(x) + f(-x)||` over uniform samples of an
/// axis-aligned box (one `(lo, hi)` pair per coordinate).
pub fn odd_error_stats(
    field: &dyn VectorField,
    region: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<Stats> {
    if region.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            actual: region.len(),
        });
    }
    if samples == 0 {
        return Err(Error::InvalidSpec(
            "odd_error_stats requires samples >= 1".into(),
        ));
    }
    for (lo, hi) in region {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidSpec(format!("empty box side [{lo}, {hi}]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = DVector::from_iterator(
            region.len(),
            region.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)),
        );
        let e = (field.eval(&x) + field.eval(&(-&x))).norm();
        values.push(e);
    }
    Ok(Stats::from_values(&values))
}

/// Sampling window for the odd-error statistic: the right half of the phase
/// portrait each benchmark system is plotted on.
pub fn default_odd_error_region(system: &HamiltonianSystem) -> Vec<(f64, f64)> {
    match system {
        HamiltonianSystem::HarmonicOscillator { .. } => vec![(0.0, 4.0), (-4.0, 4.0)],
        HamiltonianSystem::SimplePendulum { .. } => {
            vec![(0.0, std::f64::consts::PI), (-8.0, 8.0)]
        }
    }
}

/// Learned-Hamiltonian statistics along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianStats {
    pub mean: f64,
    pub variance: f64,
    /// `mean(H_learned) - mean(H_true)` when a true system was supplied. The
    /// learned energy is only defined up to a constant, so the offset is
    /// expected to be nonzero.
    pub offset: Option<f64>,
}

/// Evaluate the learned Hamiltonian at every trajectory point.
pub fn hamiltonian_stats(
    model: &TrainedModel,
    trajectory: &[DVector<f64>],
    true_system: Option<&HamiltonianSystem>,
) -> Result<HamiltonianStats> {
    if trajectory.is_empty() {
        return Err(Error::InvalidSpec(
            "hamiltonian_stats requires a nonempty trajectory".into(),
        ));
    }
    let learned: Vec<f64> = trajectory
        .iter()
        .map(|x| model.evaluate_hamiltonian(x))
        .collect::<Result<_>>()?;
    let stats = Stats::from_values(&learned);
    let offset = match true_system {
        Some(system) => {
            let truth: Vec<f64> = trajectory
                .iter()
                .map(|x| system.true_hamiltonian(x))
                .collect::<Result<_>>()?;
            Some(stats.mean - Stats::from_values(&truth).mean)
        }
        None => None,
    };
    Ok(HamiltonianStats {
        mean: stats.mean,
        variance: stats.variance,
        offset,
    })
}

/// Row-major sampling of a planar field over a window; rows are
/// `(x1, x2, f1, f2)` with `x1` varying fastest.
pub fn field_grid(
    field: &dyn VectorField,
    window: &[(f64, f64); 2],
    nx: usize,
    ny: usize,
) -> Result<Vec<[f64; 4]>> {
    if field.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: field.dim(),
        });
    }
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidSpec("field_grid requires nx, ny >= 2".into()));
    }
    let mut rows = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        let x2 = window[1].0 + (window[1].1 - window[1].0) * iy as f64 / (ny - 1) as f64;
        for ix in 0..nx {
            let x1 = window[0].0 + (window[0].1 - window[0].0) * ix as f64 / (nx - 1) as f64;
            let f = field.eval(&DVector::from_column_slice(&[x1, x2]));
            rows.push([x1, x2, f[0], f[1]]);
        }
    }
    Ok(rows)
}

pub fn write_field_grid_csv(rows: &[[f64; 4]], path: &Path) -> Result<()> {
    let mut out = String::from("x1,x2,f1,f2\n");
    for [x1, x2, f1, f2] in rows {
        writeln!(out, "{x1},{x2},{f1},{f2}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Odd-error table: one row per evaluated field.
pub fn write_odd_error_csv(rows: &[(String, Stats)], path: &Path) -> Result<()> {
    let mut out = String::from("model,mean,variance\n");
    for (label, stats) in rows {
        writeln!(out, "{label},{},{}", stats.mean, stats.variance).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Hamiltonian table: one row per Hamiltonian (real and learned).
pub fn write_hamiltonian_csv(rows: &[(String, f64, f64, Option<f64>)], path: &Path) -> Result<()> {
    let mut out = String::from("hamiltonian,mean,variance,offset_vs_true\n");
    for (label, mean, variance, offset) in rows {
        let offset = offset.map(|o| format!("{o}")).unwrap_or_default();
        writeln!(out, "{label},{mean},{variance},{offset}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_rollout_csv(series: &RolloutSeries, path: &Path) -> Result<()> {
    let mut out = String::from("t,err\n");
    for (t, err) in &series.samples {
        writeln!(out, "{t},{err}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}
