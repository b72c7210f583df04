//! Hyperparameter selection by k-fold cross-validation grid search.
//!
//! The score of a grid cell `(sigma, lambda)` is the mean over folds of the
//! held-out empirical MSE `(1/|Z_i|) sum ||f(x) - y||^2`, where `f` is trained
//! on the remaining folds. Fold assignment is a seeded shuffle, fixed for the
//! whole grid, so scores are deterministic in `(sigma, lambda)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::regression::{solve_coefficients, Dataset};

/// Grid-search request: candidate widths and regularizers, fold count, and
/// the fold-assignment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl GridSpec {
    pub fn new(sigmas: Vec<f64>, lambdas: Vec<f64>, folds: usize, seed: u64) -> Result<Self> {
        if sigmas.is_empty() || lambdas.is_empty() {
            return Err(Error::InvalidGrid(
                "sigma and lambda lists must be nonempty".into(),
            ));
        }
        for (name, list) in [("sigma", &sigmas), ("lambda", &lambdas)] {
            if list.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "{name} values must be positive"
                )));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGrid(format!(
                    "{name} values must be ascending"
                )));
            }
        }
        if folds < 2 {
            return Err(Error::InvalidGrid(format!(
                "fold count must be >= 2, got {folds}"
            )));
        }
        Ok(GridSpec {
            sigmas,
            lambdas,
            folds,
            seed,
        })
    }

    /// Default grid: 25 widths (a 21-point log spacing of [0.5, 50] merged
    /// with 3, 12.1, 12.3 and 19.5) and 7 regularizers, 5 folds.
    pub fn default_grid(seed: u64) -> Self {
        GridSpec {
            sigmas: default_sigmas(),
            lambdas: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 1.0],
            folds: 5,
            seed,
        }
    }
}

/// The default sigma grid; exposed for reuse by callers that override only
/// the lambda list.
pub fn default_sigmas() -> Vec<f64> {
    let (lo, hi) = (0.5f64.log10(), 50.0f64.log10());
    let mut sigmas: Vec<f64> = (0..21)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / 20.0))
        .collect();
    sigmas.extend([3.0, 12.1, 12.3, 19.5]);
    sigmas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sigmas.dedup();
    sigmas
}

/// Split `0..dataset.len()` into `k` disjoint folds of sizes differing by at
/// most one. Deterministic for a fixed seed.
pub fn kfold_split(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = dataset.len();
    if k > n {
        return Err(Error::TooManyFolds {
            folds: k,
            samples: n,
        });
    }
    if k < 2 {
        return Err(Error::InvalidGrid(format!(
            "fold count must be >= 2, got {k}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, idx) in indices.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    Ok(folds)
}

/// Mean held-out MSE over the supplied folds.
pub fn cv_score(
    dataset: &Dataset,
    spec: &KernelSpec,
    lambda: f64,
    folds: &[Vec<usize>],
) -> Result<f64> {
    let mut total = 0.0;
    for (fold_index, held_out) in folds.iter().enumerate() {
        let train_indices: Vec<usize> = (0..dataset.len())
            .filter(|i| !held_out.contains(i))
            .collect();
        let train = dataset.subset(&train_indices)?;
        let model = solve_coefficients(&train, spec, lambda).map_err(|e| Error::FoldTraining {
            fold: fold_index,
            source: Box::new(e),
        })?;
        let mut mse = 0.0;
        for &i in held_out {
            let prediction = model.evaluate_field(&dataset.points[i])?;
            mse += (prediction - &dataset.derivatives[i]).norm_squared();
        }
        total += mse / held_out.len() as f64;
    }
    Ok(total / folds.len() as f64)
}

/// One scored grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub sigma: f64,
    pub lambda: f64,
    pub cv_mse: f64,
}

/// Grid-search outcome: the minimizing pair plus the full score table in
/// grid order (sigma-major).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub sigma: f64,
    pub lambda: f64,
    pub score: f64,
    pub table: Vec<CvRow>,
}

/// Exhaustive scan of the grid; ties are broken by larger lambda, then
/// larger sigma.
pub fn grid_search(
    dataset: &Dataset,
    family: KernelFamily,
    grid: &GridSpec,
) -> Result<GridSearchResult> {
    GridSpec::new(
        grid.sigmas.clone(),
        grid.lambdas.clone(),
        grid.folds,
        grid.seed,
    )?;
    let folds = kfold_split(dataset, grid.folds, grid.seed)?;
    let mut table = Vec::with_capacity(grid.sigmas.len() * grid.lambdas.len());
    let mut best: Option<CvRow> = None;
    for &sigma in &grid.sigmas {
        let spec = KernelSpec::new(family, sigma, dataset.dim())?;
        for &lambda in &grid.lambdas {
            let cv_mse = cv_score(dataset, &spec, lambda, &folds)?;
            let row = CvRow {
                sigma,
                lambda,
                cv_mse,
            };
            table.push(row);
            let better = match best {
                None => true,
                Some(b) => {
                    cv_mse < b.cv_mse
                        || (cv_mse == b.cv_mse
                            && (lambda > b.lambda || (lambda == b.lambda && sigma > b.sigma)))
                }
            };
            if better {
                best = Some(row);
            }
        }
    }
    let best = best.expect("grid is nonempty");
    Ok(GridSearchResult {
        sigma: best.sigma,
        lambda: best.lambda,
        score: best.cv_mse,
        table,
    })
}

/// Emit the score table as CSV `sigma,lambda,cv_mse`.
pub fn write_score_table(rows: &[CvRow], path: &Path) -> Result<()> {
    let mut out = String::from("sigma,lambda,cv_mse\n");
    for row in rows {
        writeln!(out, "{},{},{}", row.sigma, row.lambda, row.cv_mse).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::DatasetMeta;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_dataset(seed: u64, count: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<_> = (0..count)
            .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0)))
            .collect();
        let derivs: Vec<_> = (0..count)
            .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0)))
            .collect();
        Dataset::new(points, derivs, DatasetMeta::default()).unwrap()
    }

    #[test]
    fn kfold_exact_division() {
        let data = random_dataset(1, 15);
        let folds = kfold_split(&data, 5, 0).unwrap();
        assert_eq!(folds.len(), 5);
        assert!(folds.iter().all(|f| f.len() == 3));
    }

    #[test]
    fn kfold_remainder_distribution() {
        let data = random_dataset(2, 24);
        let folds = kfold_split(&data, 5, 0).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![4, 5, 5, 5, 5]);
    }

    #[test]
    fn kfold_folds_partition_the_index_set() {
        let data = random_dataset(3, 17);
        let folds = kfold_split(&data, 4, 9).unwrap();
        let mut seen = [false; 17];
        for fold in &folds {
            for &i in fold {
                assert!(!seen[i], "index {i} appears twice");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn kfold_is_deterministic_and_seed_sensitive() {
        let data = random_dataset(4, 15);
        assert_eq!(
            kfold_split(&data, 5, 7).unwrap(),
            kfold_split(&data, 5, 7).unwrap()
        );
        assert_ne!(
            kfold_split(&data, 5, 7).unwrap(),
            kfold_split(&data, 5, 8).unwrap()
        );
    }

    #[test]
    fn kfold_rejects_too_many_folds() {
        let data = random_dataset(5, 4);
        assert!(matches!(
            kfold_split(&data, 5, 0),
            Err(Error::TooManyFolds {
                folds: 5,
                samples: 4
            })
        ));
    }

    #[test]
    fn cv_score_zero_targets() {
        let mut data = random_dataset(6, 12);
        data.derivatives = vec![DVector::zeros(2); 12];
        let folds = kfold_split(&data, 4, 0).unwrap();
        for lambda in [1e-6, 1e-2, 1.0] {
            let spec = KernelSpec::new(KernelFamily::Symplectic, 1.0, 2).unwrap();
            let score = cv_score(&data, &spec, lambda, &folds).unwrap();
            assert_eq!(score, 0.0);
        }
    }

    #[test]
    fn cv_score_invariant_to_fold_order() {
        let data = random_dataset(7, 12);
        let folds = kfold_split(&data, 4, 3).unwrap();
        let mut reversed = folds.clone();
        reversed.reverse();
        let spec = KernelSpec::new(KernelFamily::SeparableGaussian, 1.5, 2).unwrap();
        let a = cv_score(&data, &spec, 1e-3, &folds).unwrap();
        let b = cv_score(&data, &spec, 1e-3, &reversed).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn cv_score_large_lambda_limit() {
        // With lambda -> inf the trained model is ~0 and the score approaches
        // the mean squared target norm.
        let data = random_dataset(8, 12);
        let folds = kfold_split(&data, 4, 0).unwrap();
        let spec = KernelSpec::new(KernelFamily::SeparableGaussian, 1.0, 2).unwrap();
        let score = cv_score(&data, &spec, 1e6, &folds).unwrap();
        let reference: f64 = data
            .derivatives
            .iter()
            .map(|y| y.norm_squared())
            .sum::<f64>()
            / data.len() as f64;
        assert!(
            (score - reference).abs() <= 0.05 * reference,
            "score {score} vs reference {reference}"
        );
    }

    #[test]
    fn grid_of_size_one() {
        let data = random_dataset(9, 10);
        let grid = GridSpec::new(vec![1.5], vec![1e-3], 5, 0).unwrap();
        let result = grid_search(&data, KernelFamily::Symplectic, &grid).unwrap();
        assert_eq!(result.sigma, 1.5);
        assert_eq!(result.lambda, 1e-3);
        assert_eq!(result.table.len(), 1);
        assert_eq!(result.score, result.table[0].cv_mse);
    }

    #[test]
    fn grid_search_returns_table_minimum() {
        let data = random_dataset(10, 12);
        let grid = GridSpec::new(vec![0.5, 1.0, 2.0, 4.0], vec![1e-4, 1e-2, 1.0], 4, 1).unwrap();
        let result = grid_search(&data, KernelFamily::OddSymplectic, &grid).unwrap();
        assert_eq!(result.table.len(), 12);
        let min = result
            .table
            .iter()
            .map(|r| r.cv_mse)
            .fold(f64::MAX, f64::min);
        assert_eq!(result.score, min);
        assert!(result
            .table
            .iter()
            .any(|r| r.sigma == result.sigma && r.lambda == result.lambda));
    }

    #[test]
    fn default_grid_contains_benchmark_widths() {
        let grid = GridSpec::default_grid(0);
        assert_eq!(grid.sigmas.len(), 25);
        for target in [0.5, 3.0, 12.1, 12.3, 19.5, 50.0] {
            assert!(
                grid.sigmas.iter().any(|s| (s - target).abs() < 1e-12),
                "missing sigma {target}"
            );
        }
        assert_eq!(grid.lambdas.len(), 7);
        assert!(grid.sigmas.windows(2).all(|w| w[0] < w[1]));
        GridSpec::new(grid.sigmas, grid.lambdas, grid.folds, 0).unwrap();
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(vec![], vec![1.0], 5, 0).is_err());
        assert!(GridSpec::new(vec![1.0], vec![], 5, 0).is_err());
        assert!(GridSpec::new(vec![2.0, 1.0], vec![1.0], 5, 0).is_err());
        assert!(GridSpec::new(vec![-1.0, 1.0], vec![1.0], 5, 0).is_err());
        assert!(GridSpec::new(vec![1.0], vec![1.0], 1, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn grid_search_result_is_global_minimum(seed in 0u64..1000) {
            let data = random_dataset(seed, 10);
            let grid = GridSpec::new(vec![0.7, 1.4, 2.8], vec![1e-3, 1e-1], 5, seed).unwrap();
            let result = grid_search(&data, KernelFamily::SeparableGaussian, &grid).unwrap();
            for row in &result.table {
                prop_assert!(result.score <= row.cv_mse);
            }
        }
    }
}
