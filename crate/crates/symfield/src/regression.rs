//! Vector-valued kernel ridge regression.
//!
//! Training solves the stacked normal equations `(G + N lambda I) a = y`,
//! where `G` is the `Nn x Nn` block Gram matrix with `(i, j)` block
//! `K(x_i, x_j)`. The learned field is `f*(x) = sum_i K(x, x_i) a_i`; for
//! symplectic kernels the same coefficients also define a learned Hamiltonian
//! `H(x) = -sum_i grad^T g(x - x_i) c_i` with `c_i = J^T a_i`, so that
//! `f* = J grad H` holds identically.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::simulate::VectorField;
use crate::systems::HamiltonianSystem;

/// Relative tolerance of the post-solve representer residual check.
pub const RESIDUAL_RTOL: f64 = 1e-8;

/// Provenance of a dataset: how it was generated, if known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DatasetMeta {
    pub system: Option<HamiltonianSystem>,
    pub ics: Vec<Vec<f64>>,
    pub step: f64,
    pub t_end: f64,
    pub noise_std: f64,
    pub seed: u64,
}

/// Paired samples `(x_i, y_i)` of states and state derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<DVector<f64>>,
    pub derivatives: Vec<DVector<f64>>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(
        points: Vec<DVector<f64>>,
        derivatives: Vec<DVector<f64>>,
        meta: DatasetMeta,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if points.len() != derivatives.len() {
            return Err(Error::LengthMismatch {
                points: points.len(),
                derivatives: derivatives.len(),
            });
        }
        let dim = points[0].len();
        for v in points.iter().chain(derivatives.iter()) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
        }
        Ok(Dataset {
            points,
            derivatives,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Restrict to the given sample indices (used by cross-validation).
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let derivatives = indices
            .iter()
            .map(|&i| self.derivatives[i].clone())
            .collect();
        Dataset::new(points, derivatives, self.meta.clone())
    }
}

/// Assemble the `Nn x Nn` block Gram matrix, block `(i, j) = K(x_i, x_j)`.
pub fn assemble_gram(dataset: &Dataset, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    if dataset.dim() != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: spec.dim,
            actual: dataset.dim(),
        });
    }
    let n = spec.dim;
    let count = dataset.len();
    let mut gram = DMatrix::zeros(count * n, count * n);
    for (i, xi) in dataset.points.iter().enumerate() {
        for (j, xj) in dataset.points.iter().enumerate() {
            let block = spec.evaluate(xi, xj)?;
            gram.view_mut((i * n, j * n), (n, n)).copy_from(&block);
        }
    }
    Ok(gram)
}

/// A trained kernel ridge regression model.
///
/// Immutable after construction; evaluation is read-only and safe to share
/// across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: KernelSpec,
    pub lambda: f64,
    pub centers: Vec<DVector<f64>>,
    pub coeffs: Vec<DVector<f64>>,
    pub meta: DatasetMeta,
    /// Diagonal jitter that was added to recover from a failed factorization,
    /// if any.
    pub jitter: Option<f64>,
}

/// Solve `(G + N lambda I) a = y` and package the result.
///
/// The factorization is a symmetric positive-definite Cholesky; if it fails,
/// one retry is made with diagonal jitter `1e-10 trace(G) / (Nn)` and the
/// jitter is reported on the returned model. After the solve the representer
/// residual `||sum_j K(x_i,x_j) a_j + N lambda a_i - y_i||` is verified
/// against `RESIDUAL_RTOL * max(1, ||y_i||)` for every sample.
pub fn solve_coefficients(
    dataset: &Dataset,
    spec: &KernelSpec,
    lambda: f64,
) -> Result<TrainedModel> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::NonPositiveLambda(lambda));
    }
    spec.validate()?;
    let gram = assemble_gram(dataset, spec)?;
    let n = spec.dim;
    let count = dataset.len();
    let size = count * n;
    let ridge = count as f64 * lambda;

    let mut system = gram.clone();
    for i in 0..size {
        system[(i, i)] += ridge;
    }

    let mut stacked = DVector::zeros(size);
    for (i, y) in dataset.derivatives.iter().enumerate() {
        stacked.rows_mut(i * n, n).copy_from(y);
    }

    let (solution, jitter) = match Cholesky::new(system.clone()) {
        Some(chol) => (chol.solve(&stacked), None),
        None => {
            let jitter = 1e-10 * gram.trace() / size as f64;
            let mut retry = system.clone();
            for i in 0..size {
                retry[(i, i)] += jitter;
            }
            match Cholesky::new(retry.clone()) {
                Some(chol) => {
                    system = retry;
                    (chol.solve(&stacked), Some(jitter))
                }
                None => {
                    return Err(Error::SolveFailure {
                        diagnostic: format!(
                            "Cholesky failed twice (N={count}, lambda={lambda:e}, \
                             trace(G)={:e}, jitter={jitter:e})",
                            gram.trace()
                        ),
                    })
                }
            }
        }
    };

    // Representer residual check, per sample.
    let residual = &system * &solution - &stacked;
    for i in 0..count {
        let r = residual.rows(i * n, n).norm();
        let bound = RESIDUAL_RTOL * dataset.derivatives[i].norm().max(1.0);
        if r > bound {
            return Err(Error::ResidualCheck {
                index: i,
                residual: r,
                bound,
            });
        }
    }

    let coeffs = (0..count)
        .map(|i| DVector::from(solution.rows(i * n, n).clone_owned()))
        .collect();
    Ok(TrainedModel {
        spec: *spec,
        lambda,
        centers: dataset.points.clone(),
        coeffs,
        meta: dataset.meta.clone(),
        jitter,
    })
}

impl TrainedModel {
    /// Learned vector field `f*(x) = sum_i K(x, x_i) a_i`.
    pub fn evaluate_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.spec.dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.dim,
                actual: x.len(),
            });
        }
        let mut out = DVector::zeros(self.spec.dim);
        for (center, coeff) in self.centers.iter().zip(&self.coeffs) {
            let k = self.spec.evaluate(x, center)?;
            out += k * coeff;
        }
        Ok(out)
    }

    /// Learned Hamiltonian, defined up to an additive constant.
    ///
    /// Only meaningful for symplectic-family kernels, where
    /// `f*(x) = J grad H(x)` holds by construction.
    pub fn evaluate_hamiltonian(&self, x: &DVector<f64>) -> Result<f64> {
        if !self.spec.family.is_symplectic() {
            return Err(Error::NotSymplectic {
                operation: "evaluate_hamiltonian",
                family: self.spec.family.to_string(),
            });
        }
        if x.len() != self.spec.dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.dim,
                actual: x.len(),
            });
        }
        let s2 = self.spec.sigma * self.spec.sigma;
        let mut h = 0.0;
        for (center, coeff) in self.centers.iter().zip(&self.coeffs) {
            let c = apply_j_transpose(coeff);
            // -grad^T g(x - x_i) c with grad g(r) = -(r / s^2) exp(-r^T r / 2 s^2).
            let rm = x - center;
            let gm = (-rm.norm_squared() / (2.0 * s2)).exp();
            let term_minus = rm.dot(&c) / s2 * gm;
            match self.spec.family {
                KernelFamily::Symplectic => h += term_minus,
                KernelFamily::OddSymplectic => {
                    let rp = x + center;
                    let gp = (-rp.norm_squared() / (2.0 * s2)).exp();
                    h += 0.5 * (term_minus - rp.dot(&c) / s2 * gp);
                }
                _ => unreachable!(),
            }
        }
        Ok(h)
    }

    /// Max over samples of the relative representer residual on a dataset
    /// with the same points as the training set.
    pub fn max_relative_residual(&self, dataset: &Dataset) -> Result<f64> {
        if dataset.len() != self.centers.len() {
            return Err(Error::LengthMismatch {
                points: dataset.len(),
                derivatives: self.centers.len(),
            });
        }
        let ridge = self.centers.len() as f64 * self.lambda;
        let mut worst: f64 = 0.0;
        for (i, (xi, yi)) in dataset.points.iter().zip(&dataset.derivatives).enumerate() {
            let mut lhs = DVector::zeros(self.spec.dim);
            for (xj, aj) in self.centers.iter().zip(&self.coeffs) {
                lhs += self.spec.evaluate(xi, xj)? * aj;
            }
            lhs += &self.coeffs[i] * ridge;
            let rel = (lhs - yi).norm() / yi.norm().max(1.0);
            worst = worst.max(rel);
        }
        Ok(worst)
    }

    /// Save as a versioned, human-readable JSON document.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile::from(self);
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    /// Load a model saved by [`TrainedModel::save`]. Evaluations of the
    /// loaded model are bit-identical to the original.
    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        file.into_model()
    }
}

impl VectorField for TrainedModel {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        self.evaluate_field(x).expect("dimension checked by caller")
    }
}

/// `J^T a` for the canonical `J`; for `a = (a_q, a_p)` this is `(-a_p, a_q)`.
fn apply_j_transpose(a: &DVector<f64>) -> DVector<f64> {
    let n = a.len();
    let m = n / 2;
    let mut out = DVector::zeros(n);
    for i in 0..m {
        out[i] = -a[m + i];
        out[m + i] = a[i];
    }
    out
}

const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk model representation: flat row-major arrays, lowercase family.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    family: KernelFamily,
    sigma: f64,
    lambda: f64,
    dim: usize,
    n_samples: usize,
    centers: Vec<f64>,
    coeffs: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jitter: Option<f64>,
    meta: DatasetMeta,
}

impl From<&TrainedModel> for ModelFile {
    fn from(model: &TrainedModel) -> Self {
        let flatten = |vs: &[DVector<f64>]| vs.iter().flat_map(|v| v.iter().cloned()).collect();
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            family: model.spec.family,
            sigma: model.spec.sigma,
            lambda: model.lambda,
            dim: model.spec.dim,
            n_samples: model.centers.len(),
            centers: flatten(&model.centers),
            coeffs: flatten(&model.coeffs),
            jitter: model.jitter,
            meta: model.meta.clone(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<TrainedModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format_version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let spec = KernelSpec::new(self.family, self.sigma, self.dim)?;
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(Error::NonPositiveLambda(self.lambda));
        }
        let expected = self.n_samples * self.dim;
        if self.centers.len() != expected || self.coeffs.len() != expected {
            return Err(Error::ModelFormat(format!(
                "expected {expected} center/coefficient values, got {}/{}",
                self.centers.len(),
                self.coeffs.len()
            )));
        }
        let unflatten = |flat: &[f64]| {
            flat.chunks(self.dim)
                .map(DVector::from_column_slice)
                .collect::<Vec<_>>()
        };
        Ok(TrainedModel {
            spec,
            lambda: self.lambda,
            centers: unflatten(&self.centers),
            coeffs: unflatten(&self.coeffs),
            meta: self.meta,
            jitter: self.jitter,
        })
    }
}
