//! End-to-end benchmark experiment recipes.
//!
//! An [`Experiment`] bundles a benchmark system with its data-generation
//! settings and test trajectory. [`Experiment::run`] executes the full
//! pipeline — generate, tune, train (separable Gaussian and odd symplectic),
//! evaluate — writing every artifact into an output directory and returning a
//! summary of structural checks. All randomness is derived from the single
//! experiment seed, so two runs with the same seed produce byte-identical
//! files.

use nalgebra::DVector;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluate::{
    self, default_odd_error_region, field_grid, hamiltonian_stats, odd_error_stats, Stats,
};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::regression::{solve_coefficients, TrainedModel};
use crate::simulate::{
    self, integrate, Integrator, NoiseSpec, RolloutSeries, TrajectorySpec, VectorField,
};
use crate::systems::HamiltonianSystem;
use crate::tune::{grid_search, write_score_table, GridSpec};

/// Number of half-plane samples used for the odd-error statistic.
pub const ODD_ERROR_SAMPLES: usize = 10_000;

/// The two kernel families compared by the benchmark experiments.
pub const COMPARED_FAMILIES: [KernelFamily; 2] =
    [KernelFamily::SeparableGaussian, KernelFamily::OddSymplectic];

/// A reproducible benchmark experiment recipe.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub system: HamiltonianSystem,
    pub ics: Vec<DVector<f64>>,
    pub step: f64,
    pub t_end: f64,
    pub noise_std: f64,
    pub test_x0: DVector<f64>,
    pub test_t_end: f64,
    /// Half-plane window for the odd-error statistic.
    pub odd_error_region: Vec<(f64, f64)>,
    /// Full window for exported field grids.
    pub plot_window: [(f64, f64); 2],
}

impl Experiment {
    /// Harmonic oscillator benchmark: three trajectories of five samples,
    /// noise std 0.1, test rollout from `(2, 0)` over four seconds.
    pub fn oscillator() -> Self {
        let system = HamiltonianSystem::default_oscillator();
        Experiment {
            odd_error_region: default_odd_error_region(&system),
            system,
            ics: vec![
                DVector::from_column_slice(&[1.0, 0.0]),
                DVector::from_column_slice(&[2.25, 0.0]),
                DVector::from_column_slice(&[3.5, 0.0]),
            ],
            step: 0.25,
            t_end: 1.0,
            noise_std: 0.1,
            test_x0: DVector::from_column_slice(&[2.0, 0.0]),
            test_t_end: 4.0,
            plot_window: [(-4.0, 4.0), (-4.0, 4.0)],
        }
    }

    /// Simple pendulum benchmark: three trajectories of eight samples, noise
    /// std 0.01, test rollout from `(pi/2, 0)` over two seconds.
    pub fn pendulum() -> Self {
        let pi = std::f64::consts::PI;
        let system = HamiltonianSystem::default_pendulum();
        Experiment {
            odd_error_region: default_odd_error_region(&system),
            system,
            ics: vec![
                DVector::from_column_slice(&[2.0 * pi / 5.0, 0.0]),
                DVector::from_column_slice(&[4.0 * pi / 5.0, 0.0]),
                DVector::from_column_slice(&[19.0 * pi / 20.0, -4.0]),
            ],
            step: 0.1,
            t_end: 0.7,
            noise_std: 0.01,
            test_x0: DVector::from_column_slice(&[pi / 2.0, 0.0]),
            test_t_end: 2.0,
            plot_window: [(-pi, pi), (-8.0, 8.0)],
        }
    }

    pub fn for_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "oscillator" | "harmonic-oscillator" | "harmonic_oscillator" => Ok(Self::oscillator()),
            "pendulum" | "simple-pendulum" | "simple_pendulum" => Ok(Self::pendulum()),
            other => Err(Error::InvalidSpec(format!("unknown experiment `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        self.system.name()
    }

    fn trajectory_spec(&self) -> Result<TrajectorySpec> {
        TrajectorySpec::new(self.ics[0].clone(), self.step, self.t_end, Integrator::Rk4)
    }

    /// Generate the training dataset for this recipe.
    pub fn generate_dataset(&self, seed: u64) -> Result<crate::regression::Dataset> {
        let spec = self.trajectory_spec()?;
        let noise = NoiseSpec::new(self.noise_std, seed)?;
        simulate::make_dataset(&self.system, &self.ics, &spec, &noise)
    }

    /// Tune and train one kernel family on a dataset generated with `seed`.
    pub fn tune_and_train(
        &self,
        dataset: &crate::regression::Dataset,
        family: KernelFamily,
        seed: u64,
    ) -> Result<(TrainedModel, crate::tune::GridSearchResult)> {
        let grid = GridSpec::default_grid(seed);
        let choice = grid_search(dataset, family, &grid)?;
        let spec = KernelSpec::new(family, choice.sigma, dataset.dim())?;
        let model = solve_coefficients(dataset, &spec, choice.lambda)?;
        Ok((model, choice))
    }

    /// Rollout-error series of a learned model against the true system on
    /// the test trajectory.
    pub fn test_rollout(&self, model: &TrainedModel) -> Result<RolloutSeries> {
        simulate::rollout_error(
            &self.system,
            model,
            &self.test_x0,
            self.step,
            self.test_t_end,
        )
    }

    /// Run the full pipeline, writing artifacts into `out_dir`.
    pub fn run(&self, seed: u64, out_dir: &Path) -> Result<ReproSummary> {
        std::fs::create_dir_all(out_dir)?;
        let prefix = format!("{}_seed{seed}", self.name());
        let file = |suffix: &str| out_dir.join(format!("{prefix}_{suffix}"));
        let mut written: Vec<PathBuf> = Vec::new();
        let mut checks: Vec<ReproCheck> = Vec::new();

        // generate
        let dataset = self.generate_dataset(seed)?;
        let dataset_path = file("dataset.csv");
        simulate::write_dataset_csv(&dataset, &dataset_path)?;
        written.push(dataset_path.clone());
        written.push(out_dir.join(format!("{prefix}_dataset.meta.json")));

        // tune + train both families
        let mut models = Vec::new();
        for family in COMPARED_FAMILIES {
            let (model, choice) = self.tune_and_train(&dataset, family, seed)?;
            let table_path = file(&format!("cv_{family}.csv"));
            write_score_table(&choice.table, &table_path)?;
            written.push(table_path);
            let model_path = file(&format!("model_{family}.json"));
            model.save(&model_path)?;
            written.push(model_path);
            checks.push(ReproCheck::info(
                format!("tuned_{family}"),
                format!(
                    "sigma={} lambda={} cv_mse={}",
                    choice.sigma, choice.lambda, choice.score
                ),
            ));
            let residual = model.max_relative_residual(&dataset)?;
            checks.push(ReproCheck::gate(
                format!("residual_{family}"),
                residual <= crate::regression::RESIDUAL_RTOL,
                format!("max relative representer residual {residual:e} (bound 1e-8)"),
            ));
            models.push(model);
        }
        let separable = &models[0];
        let odd_symplectic = &models[1];

        // odd-error table (true field and both models)
        let eval_seed = seed;
        let truth_stats = odd_error_stats(
            &self.system,
            &self.odd_error_region,
            ODD_ERROR_SAMPLES,
            eval_seed,
        )?;
        let sep_stats = odd_error_stats(
            separable,
            &self.odd_error_region,
            ODD_ERROR_SAMPLES,
            eval_seed,
        )?;
        let odd_stats = odd_error_stats(
            odd_symplectic,
            &self.odd_error_region,
            ODD_ERROR_SAMPLES,
            eval_seed,
        )?;
        let odd_error_path = file("odd_error.csv");
        evaluate::write_odd_error_csv(
            &[
                ("true".to_string(), truth_stats),
                (COMPARED_FAMILIES[0].to_string(), sep_stats),
                (COMPARED_FAMILIES[1].to_string(), odd_stats),
            ],
            &odd_error_path,
        )?;
        written.push(odd_error_path);
        checks.push(ReproCheck::gate(
            "odd_error_true".into(),
            truth_stats.mean == 0.0 && truth_stats.variance == 0.0,
            format!(
                "true field e_odd mean={} variance={}",
                truth_stats.mean, truth_stats.variance
            ),
        ));
        checks.push(ReproCheck::gate(
            "odd_error_odd_symplectic".into(),
            odd_stats.mean <= 1e-10 && odd_stats.variance <= 1e-20,
            format!(
                "odd-symplectic e_odd mean={:e} variance={:e} (bounds 1e-10, 1e-20)",
                odd_stats.mean, odd_stats.variance
            ),
        ));
        checks.push(ReproCheck::info(
            "odd_error_separable".into(),
            format!(
                "separable-gaussian e_odd mean={} variance={}",
                sep_stats.mean, sep_stats.variance
            ),
        ));

        // test rollouts
        let mut rollout_means = Vec::new();
        for (family, model) in COMPARED_FAMILIES.iter().zip(&models) {
            let series = self.test_rollout(model)?;
            let rollout_path = file(&format!("rollout_{family}.csv"));
            evaluate::write_rollout_csv(&series, &rollout_path)?;
            written.push(rollout_path);
            rollout_means.push(series.mean_error());
        }
        checks.push(ReproCheck::gate(
            "rollout_gap".into(),
            rollout_means[1] < rollout_means[0],
            format!(
                "mean rollout error: odd-symplectic {} < separable-gaussian {}",
                rollout_means[1], rollout_means[0]
            ),
        ));

        // Hamiltonian constancy along the test trajectories
        let test_spec = TrajectorySpec::new(
            self.test_x0.clone(),
            self.step,
            self.test_t_end,
            Integrator::Rk4,
        )?;
        let true_traj: Vec<DVector<f64>> = integrate(&self.system, &test_spec)?
            .into_iter()
            .map(|(_, x)| x)
            .collect();
        let learned_traj: Vec<DVector<f64>> =
            integrate(odd_symplectic as &dyn VectorField, &test_spec)?
                .into_iter()
                .map(|(_, x)| x)
                .collect();
        let true_h: Vec<f64> = true_traj
            .iter()
            .map(|x| self.system.true_hamiltonian(x))
            .collect::<Result<_>>()?;
        let true_h_stats = Stats::from_values(&true_h);
        let learned_h = hamiltonian_stats(odd_symplectic, &learned_traj, None)?;
        let offset = learned_h.mean - true_h_stats.mean;
        let hamiltonian_path = file("hamiltonian.csv");
        evaluate::write_hamiltonian_csv(
            &[
                (
                    "real".into(),
                    true_h_stats.mean,
                    true_h_stats.variance,
                    None,
                ),
                (
                    "learned".into(),
                    learned_h.mean,
                    learned_h.variance,
                    Some(offset),
                ),
            ],
            &hamiltonian_path,
        )?;
        written.push(hamiltonian_path);
        checks.push(ReproCheck::gate(
            "hamiltonian_variance_true".into(),
            true_h_stats.variance <= 1e-5,
            format!("true H variance {:e} (bound 1e-5)", true_h_stats.variance),
        ));
        checks.push(ReproCheck::gate(
            "hamiltonian_variance_learned".into(),
            learned_h.variance <= 1e-5,
            format!("learned H variance {:e} (bound 1e-5)", learned_h.variance),
        ));
        checks.push(ReproCheck::info(
            "hamiltonian_offset".into(),
            format!(
                "learned mean {} vs true mean {} (offset {offset})",
                learned_h.mean, true_h_stats.mean
            ),
        ));

        // field grids for phase portraits
        let mut grids: Vec<(String, &dyn VectorField)> =
            vec![("true".into(), &self.system as &dyn VectorField)];
        for (family, model) in COMPARED_FAMILIES.iter().zip(&models) {
            grids.push((family.to_string(), model as &dyn VectorField));
        }
        for (label, field) in grids {
            let rows = field_grid(field, &self.plot_window, 25, 25)?;
            let path = file(&format!("field_{label}.csv"));
            evaluate::write_field_grid_csv(&rows, &path)?;
            written.push(path);
        }

        let summary = ReproSummary {
            experiment: self.name().to_string(),
            seed,
            checks,
            written,
        };
        let summary_path = file("summary.txt");
        std::fs::write(&summary_path, summary.render())?;
        Ok(summary)
    }
}

/// One line of the experiment summary. Gated checks decide the overall
/// pass/fail status; info lines only record measured values.
#[derive(Debug, Clone)]
pub struct ReproCheck {
    pub name: String,
    pub passed: Option<bool>,
    pub detail: String,
}

impl ReproCheck {
    fn gate(name: String, passed: bool, detail: String) -> Self {
        ReproCheck {
            name,
            passed: Some(passed),
            detail,
        }
    }

    fn info(name: String, detail: String) -> Self {
        ReproCheck {
            name,
            passed: None,
            detail,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReproSummary {
    pub experiment: String,
    pub seed: u64,
    pub checks: Vec<ReproCheck>,
    pub written: Vec<PathBuf>,
}

impl ReproSummary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed != Some(false))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "experiment: {}", self.experiment).unwrap();
        writeln!(out, "seed: {}", self.seed).unwrap();
        for check in &self.checks {
            let status = match check.passed {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "INFO",
            };
            writeln!(out, "[{status}] {}: {}", check.name, check.detail).unwrap();
        }
        writeln!(
            out,
            "overall: {}",
            if self.all_passed() { "PASS" } else { "FAIL" }
        )
        .unwrap();
        out
    }
}
