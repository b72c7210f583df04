//! Implementation of the `symfield` command-line interface.
//!
//! Each subcommand is a thin recipe over the library: parse and merge inputs
//! (flags override config-file values, which override per-system defaults),
//! run the pipeline stage, and write artifacts into the output directory.
//! When a command fails after producing partial output, the new files are
//! moved into a `quarantine/` subdirectory so that a successful run never
//! mixes with debris from a failed one.

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DVector;
use serde::Deserialize;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

use symfield::evaluate::{
    self, default_odd_error_region, field_grid, hamiltonian_stats, odd_error_stats, Stats,
};
use symfield::kernels::{KernelFamily, KernelSpec};
use symfield::regression::{solve_coefficients, Dataset, TrainedModel};
use symfield::repro::{Experiment, ODD_ERROR_SAMPLES};
use symfield::simulate::{
    integrate, make_dataset, read_dataset_csv, rollout_error, write_dataset_csv, Integrator,
    NoiseSpec, TrajectorySpec, VectorField,
};
use symfield::systems::HamiltonianSystem;
use symfield::tune::{grid_search, write_score_table, GridSpec};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SYMFIELD_OUT";

/// Optional config file mirroring the command-line flags. Flags override
/// these values; these values override the per-system defaults.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub system: Option<String>,
    pub params: Option<String>,
    pub ics: Option<String>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub noise_std: Option<f64>,
    pub seed: Option<u64>,
    pub kernel: Option<String>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub folds: Option<usize>,
    pub grid_sigma: Option<String>,
    pub grid_lambda: Option<String>,
    pub x0: Option<String>,
    pub samples: Option<usize>,
    pub window: Option<String>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub out: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }
}

/// Common flag bundle shared by the subcommands; every field is optional and
/// resolved against the config file and system defaults.
#[derive(Debug, Default, Clone)]
pub struct CommonArgs {
    pub config: Option<PathBuf>,
    pub system: Option<String>,
    pub params: Option<String>,
    pub ics: Option<String>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub noise_std: Option<f64>,
    pub seed: Option<u64>,
    pub kernel: Option<String>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub folds: Option<usize>,
    pub grid_sigma: Option<String>,
    pub grid_lambda: Option<String>,
    pub x0: Option<String>,
    pub samples: Option<usize>,
    pub window: Option<String>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Flag/config/default resolution for one command invocation.
pub struct Resolved {
    args: CommonArgs,
    config: FileConfig,
}

impl Resolved {
    pub fn new(args: CommonArgs) -> Result<Self> {
        let config = FileConfig::load(args.config.as_deref())?;
        Ok(Resolved { args, config })
    }

    pub fn seed(&self) -> u64 {
        self.args.seed.or(self.config.seed).unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.args
            .out
            .clone()
            .or_else(|| self.config.out.as_ref().map(PathBuf::from))
            .or_else(|| std::env::var(OUT_ENV).ok().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn system(&self) -> Result<HamiltonianSystem> {
        let name = self
            .args
            .system
            .as_deref()
            .or(self.config.system.as_deref())
            .ok_or_else(|| anyhow!("--system is required (oscillator or pendulum)"))?;
        let params = self
            .args
            .params
            .as_deref()
            .or(self.config.params.as_deref());
        build_system(name, params)
    }

    /// The benchmark recipe for the selected system; per-system defaults for
    /// ics, steps, horizons and windows come from here.
    pub fn experiment(&self) -> Result<Experiment> {
        let name = self
            .args
            .system
            .as_deref()
            .or(self.config.system.as_deref())
            .ok_or_else(|| anyhow!("--system is required (oscillator or pendulum)"))?;
        let mut experiment = Experiment::for_name(name)?;
        experiment.system = self.system()?;
        Ok(experiment)
    }

    pub fn kernel(&self) -> Result<KernelFamily> {
        let name = self
            .args
            .kernel
            .as_deref()
            .or(self.config.kernel.as_deref())
            .ok_or_else(|| anyhow!("--kernel is required"))?;
        Ok(name.parse::<KernelFamily>()?)
    }

    pub fn ics(&self, default: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        match self.args.ics.as_deref().or(self.config.ics.as_deref()) {
            None => Ok(default.to_vec()),
            Some(text) => parse_ics(text),
        }
    }

    pub fn x0(&self, default: &DVector<f64>) -> Result<DVector<f64>> {
        match self.args.x0.as_deref().or(self.config.x0.as_deref()) {
            None => Ok(default.clone()),
            Some(text) => parse_point(text),
        }
    }

    pub fn dt(&self, default: f64) -> f64 {
        self.args.dt.or(self.config.dt).unwrap_or(default)
    }

    pub fn t_end(&self, default: f64) -> f64 {
        self.args.t_end.or(self.config.t_end).unwrap_or(default)
    }

    pub fn noise_std(&self, default: f64) -> f64 {
        self.args
            .noise_std
            .or(self.config.noise_std)
            .unwrap_or(default)
    }

    pub fn folds(&self) -> usize {
        self.args.folds.or(self.config.folds).unwrap_or(5)
    }

    pub fn samples(&self) -> usize {
        self.args
            .samples
            .or(self.config.samples)
            .unwrap_or(ODD_ERROR_SAMPLES)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let default = GridSpec::default_grid(self.seed());
        let sigmas = match self
            .args
            .grid_sigma
            .as_deref()
            .or(self.config.grid_sigma.as_deref())
        {
            None => default.sigmas,
            Some(text) => parse_list(text)?,
        };
        let lambdas = match self
            .args
            .grid_lambda
            .as_deref()
            .or(self.config.grid_lambda.as_deref())
        {
            None => default.lambdas,
            Some(text) => parse_list(text)?,
        };
        Ok(GridSpec::new(sigmas, lambdas, self.folds(), self.seed())?)
    }

    pub fn window(&self, default: [(f64, f64); 2]) -> Result<[(f64, f64); 2]> {
        match self
            .args
            .window
            .as_deref()
            .or(self.config.window.as_deref())
        {
            None => Ok(default),
            Some(text) => {
                let values = parse_list(text)?;
                if values.len() != 4 {
                    bail!("--window expects `x1min,x1max,x2min,x2max`");
                }
                Ok([(values[0], values[1]), (values[2], values[3])])
            }
        }
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (
            self.args.nx.or(self.config.nx).unwrap_or(25),
            self.args.ny.or(self.config.ny).unwrap_or(25),
        )
    }
}

/// Build a system from its name and `k=v,...` parameter overrides.
pub fn build_system(name: &str, params: Option<&str>) -> Result<HamiltonianSystem> {
    let recipe = Experiment::for_name(name)?;
    let mut system = recipe.system;
    if let Some(text) = params {
        for pair in text.split(',').filter(|s| !s.trim().is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| anyhow!("bad parameter `{pair}`, expected key=value"))?;
            let value: f64 = value
                .trim()
                .parse()
                .with_context(|| format!("parsing value in `{pair}`"))?;
            system = apply_param(system, key.trim(), value)?;
        }
    }
    system.validate()?;
    Ok(system)
}

fn apply_param(system: HamiltonianSystem, key: &str, value: f64) -> Result<HamiltonianSystem> {
    match system {
        HamiltonianSystem::HarmonicOscillator { mass, spring } => match key {
            "m" | "mass" => Ok(HamiltonianSystem::HarmonicOscillator {
                mass: value,
                spring,
            }),
            "k" | "spring" => Ok(HamiltonianSystem::HarmonicOscillator {
                mass,
                spring: value,
            }),
            other => bail!("unknown oscillator parameter `{other}` (expected m, k)"),
        },
        HamiltonianSystem::SimplePendulum {
            mass,
            length,
            gravity,
        } => match key {
            "m" | "mass" => Ok(HamiltonianSystem::SimplePendulum {
                mass: value,
                length,
                gravity,
            }),
            "l" | "length" => Ok(HamiltonianSystem::SimplePendulum {
                mass,
                length: value,
                gravity,
            }),
            "g" | "gravity" => Ok(HamiltonianSystem::SimplePendulum {
                mass,
                length,
                gravity: value,
            }),
            other => bail!("unknown pendulum parameter `{other}` (expected m, l, g)"),
        },
    }
}

/// Parse `a,b,c` into floats.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .filter(|tok| !tok.trim().is_empty())
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .with_context(|| format!("parsing number `{tok}`"))
        })
        .collect()
}

/// Parse a single `q,p` point.
pub fn parse_point(text: &str) -> Result<DVector<f64>> {
    let values = parse_list(text)?;
    if values.is_empty() {
        bail!("empty point");
    }
    Ok(DVector::from_column_slice(&values))
}

/// Parse `q,p;q,p;...` into a list of points of equal dimension.
pub fn parse_ics(text: &str) -> Result<Vec<DVector<f64>>> {
    let points: Vec<DVector<f64>> = text
        .split(';')
        .filter(|tok| !tok.trim().is_empty())
        .map(parse_point)
        .collect::<Result<_>>()?;
    if points.is_empty() {
        bail!("--ics contained no points");
    }
    if points.iter().any(|p| p.len() != points[0].len()) {
        bail!("--ics points have mixed dimensions");
    }
    Ok(points)
}

/// Snapshot of an output directory; on failure, files created since the
/// snapshot are moved into `quarantine/`.
pub struct OutputGuard {
    dir: PathBuf,
    preexisting: HashSet<PathBuf>,
}

impl OutputGuard {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputGuard {
            dir: dir.to_path_buf(),
            preexisting: Self::listing(dir)?,
        })
    }

    fn listing(dir: &Path) -> Result<HashSet<PathBuf>> {
        let mut set = HashSet::new();
        for entry in std::fs::read_dir(dir)? {
            set.insert(entry?.path());
        }
        Ok(set)
    }

    /// Move files created since the snapshot into `quarantine/`.
    pub fn quarantine(&self) -> Result<PathBuf> {
        let quarantine = self.dir.join("quarantine");
        std::fs::create_dir_all(&quarantine)?;
        for path in Self::listing(&self.dir)? {
            if !self.preexisting.contains(&path) && path != quarantine {
                if let Some(name) = path.file_name() {
                    let _ = std::fs::rename(&path, quarantine.join(name));
                }
            }
        }
        Ok(quarantine)
    }
}

/// Run `body`, quarantining freshly written files if it fails.
pub fn guarded<T>(out_dir: &Path, body: impl FnOnce() -> Result<T>) -> Result<T> {
    let guard = OutputGuard::new(out_dir)?;
    match body() {
        Ok(value) => Ok(value),
        Err(err) => {
            let quarantine = guard.quarantine()?;
            Err(err.context(format!("partial outputs moved to {}", quarantine.display())))
        }
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset_csv(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn dataset_label(dataset: &Dataset) -> String {
    match &dataset.meta.system {
        Some(system) => system.name().to_string(),
        None => "custom".to_string(),
    }
}

pub fn cmd_generate(resolved: &Resolved) -> Result<PathBuf> {
    let experiment = resolved.experiment()?;
    let out_dir = resolved.out_dir();
    let seed = resolved.seed();
    guarded(&out_dir, || {
        let ics = resolved.ics(&experiment.ics)?;
        let spec = TrajectorySpec::new(
            ics[0].clone(),
            resolved.dt(experiment.step),
            resolved.t_end(experiment.t_end),
            Integrator::Rk4,
        )?;
        let noise = NoiseSpec::new(resolved.noise_std(experiment.noise_std), seed)?;
        let dataset = make_dataset(&experiment.system, &ics, &spec, &noise)?;
        let path = out_dir.join(format!("{}_seed{seed}_dataset.csv", experiment.name()));
        write_dataset_csv(&dataset, &path)?;
        println!("N={} -> {}", dataset.len(), path.display());
        Ok(path)
    })
}

pub fn cmd_tune(resolved: &Resolved, data: &Path) -> Result<(f64, f64)> {
    let dataset = load_dataset(data)?;
    let family = resolved.kernel()?;
    let grid = resolved.grid()?;
    let out_dir = resolved.out_dir();
    guarded(&out_dir, || {
        let result = grid_search(&dataset, family, &grid)?;
        let path = out_dir.join(format!(
            "{}_{family}_seed{}_cv.csv",
            dataset_label(&dataset),
            resolved.seed()
        ));
        write_score_table(&result.table, &path)?;
        println!(
            "sigma={} lambda={} cv_mse={} table={}",
            result.sigma,
            result.lambda,
            result.score,
            path.display()
        );
        Ok((result.sigma, result.lambda))
    })
}

pub fn cmd_train(resolved: &Resolved, data: &Path) -> Result<PathBuf> {
    let dataset = load_dataset(data)?;
    let family = resolved.kernel()?;
    let sigma = resolved
        .args
        .sigma
        .or(resolved.config.sigma)
        .ok_or_else(|| anyhow!("--sigma is required for train"))?;
    let lambda = resolved
        .args
        .lambda
        .or(resolved.config.lambda)
        .ok_or_else(|| anyhow!("--lambda is required for train"))?;
    let out_dir = resolved.out_dir();
    guarded(&out_dir, || {
        let spec = KernelSpec::new(family, sigma, dataset.dim())?;
        let model = solve_coefficients(&dataset, &spec, lambda)?;
        let residual = model.max_relative_residual(&dataset)?;
        let path = out_dir.join(format!(
            "{}_{family}_seed{}_model.json",
            dataset_label(&dataset),
            dataset.meta.seed
        ));
        model.save(&path)?;
        if let Some(jitter) = model.jitter {
            println!("jitter={jitter} was added to stabilize the factorization");
        }
        println!("residual={residual} -> {}", path.display());
        Ok(path)
    })
}

pub fn cmd_rollout(resolved: &Resolved, model_path: &Path) -> Result<PathBuf> {
    let model = TrainedModel::load(model_path)?;
    let experiment = resolved.experiment()?;
    let out_dir = resolved.out_dir();
    guarded(&out_dir, || {
        let x0 = resolved.x0(&experiment.test_x0)?;
        let series = rollout_error(
            &experiment.system,
            &model,
            &x0,
            resolved.dt(experiment.step),
            resolved.t_end(experiment.test_t_end),
        )?;
        let path = out_dir.join(format!(
            "{}_{}_seed{}_rollout.csv",
            experiment.name(),
            model.spec.family,
            model.meta.seed
        ));
        evaluate::write_rollout_csv(&series, &path)?;
        if let Some((step, side)) = &series.truncated {
            println!("truncated at step {step} ({side:?} trajectory diverged)");
        }
        println!(
            "mean_err={} max_err={} -> {}",
            series.mean_error(),
            series.max_error(),
            path.display()
        );
        Ok(path)
    })
}

pub fn cmd_evaluate(resolved: &Resolved, model_path: &Path) -> Result<Vec<PathBuf>> {
    let model = TrainedModel::load(model_path)?;
    let experiment = resolved.experiment()?;
    let out_dir = resolved.out_dir();
    let seed = resolved.seed();
    guarded(&out_dir, || {
        let mut written = Vec::new();
        let prefix = format!("{}_{}_seed{seed}", experiment.name(), model.spec.family);
        let system = &experiment.system;

        // Odd-error table over the half-plane window.
        let region = resolved
            .window(window_from_region(&default_odd_error_region(system)))?
            .to_vec();
        let samples = resolved.samples();
        let truth = odd_error_stats(system, &region, samples, seed)?;
        let learned = odd_error_stats(&model, &region, samples, seed)?;
        let odd_path = out_dir.join(format!("{prefix}_odd_error.csv"));
        evaluate::write_odd_error_csv(
            &[
                ("true".to_string(), truth),
                (model.spec.family.to_string(), learned),
            ],
            &odd_path,
        )?;
        println!("e_odd mean={} variance={}", learned.mean, learned.variance);
        written.push(odd_path);

        // Rollout error on the test trajectory.
        let x0 = resolved.x0(&experiment.test_x0)?;
        let dt = resolved.dt(experiment.step);
        let t_end = resolved.t_end(experiment.test_t_end);
        let series = rollout_error(system, &model, &x0, dt, t_end)?;
        let rollout_path = out_dir.join(format!("{prefix}_rollout.csv"));
        evaluate::write_rollout_csv(&series, &rollout_path)?;
        println!("rollout mean_err={}", series.mean_error());
        written.push(rollout_path);

        // Hamiltonian constancy along the model's own rollout.
        if model.spec.family.is_symplectic() {
            let spec = TrajectorySpec::new(x0.clone(), dt, t_end, Integrator::Rk4)?;
            let learned_traj: Vec<DVector<f64>> = integrate(&model as &dyn VectorField, &spec)?
                .into_iter()
                .map(|(_, x)| x)
                .collect();
            let stats = hamiltonian_stats(&model, &learned_traj, Some(system))?;
            let true_traj = integrate(system, &spec)?;
            let true_h: Vec<f64> = true_traj
                .iter()
                .map(|(_, x)| system.true_hamiltonian(x))
                .collect::<symfield::Result<_>>()?;
            let true_stats = Stats::from_values(&true_h);
            let h_path = out_dir.join(format!("{prefix}_hamiltonian.csv"));
            evaluate::write_hamiltonian_csv(
                &[
                    ("real".into(), true_stats.mean, true_stats.variance, None),
                    (
                        "learned".into(),
                        stats.mean,
                        stats.variance,
                        Some(stats.mean - true_stats.mean),
                    ),
                ],
                &h_path,
            )?;
            println!(
                "hamiltonian mean={} variance={}",
                stats.mean, stats.variance
            );
            written.push(h_path);
        }

        // Field grids of the model and the true system.
        let window = resolved.window(experiment.plot_window)?;
        let (nx, ny) = resolved.grid_shape();
        for (label, field) in [
            ("model", &model as &dyn VectorField),
            ("true", system as &dyn VectorField),
        ] {
            let rows = field_grid(field, &window, nx, ny)?;
            let path = out_dir.join(format!("{prefix}_field_{label}.csv"));
            evaluate::write_field_grid_csv(&rows, &path)?;
            written.push(path);
        }
        Ok(written)
    })
}

fn window_from_region(region: &[(f64, f64)]) -> [(f64, f64); 2] {
    [region[0], region[1]]
}

pub fn cmd_field(resolved: &Resolved, model_path: Option<&Path>) -> Result<PathBuf> {
    let out_dir = resolved.out_dir();
    let model = model_path.map(TrainedModel::load).transpose()?;
    guarded(&out_dir, || {
        let (nx, ny) = resolved.grid_shape();
        let (label, rows) = match &model {
            Some(model) => {
                let default_window = match &model.meta.system {
                    Some(system) => Experiment::for_name(system.name())?.plot_window,
                    None => [(-4.0, 4.0), (-4.0, 4.0)],
                };
                let window = resolved.window(default_window)?;
                (
                    model.spec.family.to_string(),
                    field_grid(model, &window, nx, ny)?,
                )
            }
            None => {
                let experiment = resolved.experiment()?;
                let window = resolved.window(experiment.plot_window)?;
                (
                    experiment.name().to_string(),
                    field_grid(&experiment.system, &window, nx, ny)?,
                )
            }
        };
        let path = out_dir.join(format!("{label}_field.csv"));
        evaluate::write_field_grid_csv(&rows, &path)?;
        println!("{} rows -> {}", rows.len(), path.display());
        Ok(path)
    })
}

pub fn cmd_repro(resolved: &Resolved, experiment_name: &str) -> Result<bool> {
    let experiment = Experiment::for_name(experiment_name)?;
    let seed = resolved.seed();
    let out_dir = resolved
        .out_dir()
        .join(format!("{}_seed{seed}", experiment.name()));
    guarded(&out_dir, || {
        let summary = experiment.run(seed, &out_dir)?;
        print!("{}", summary.render());
        println!("artifacts: {}", out_dir.display());
        Ok(summary.all_passed())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_parameter_overrides() {
        let system = build_system("oscillator", Some("m=2,k=3")).unwrap();
        match system {
            HamiltonianSystem::HarmonicOscillator { mass, spring } => {
                assert_eq!(mass, 2.0);
                assert_eq!(spring, 3.0);
            }
            _ => panic!("wrong system"),
        }
        assert!(build_system("oscillator", Some("l=1")).is_err());
        assert!(build_system("pendulum", Some("g=1.62")).is_ok());
        assert!(build_system("oscillator", Some("m=-1")).is_err());
    }

    #[test]
    fn parses_ics_and_points() {
        let ics = parse_ics("1,0;2.25,0;3.5,0").unwrap();
        assert_eq!(ics.len(), 3);
        assert_eq!(ics[1][0], 2.25);
        assert!(parse_ics("1,0;2").is_err());
        assert!(parse_ics("").is_err());
        assert_eq!(parse_point("0.5,-2").unwrap()[1], -2.0);
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"sigma": 1.0, "bogus": true}"#).unwrap();
        assert!(FileConfig::load(Some(&path)).is_err());
        std::fs::write(&path, r#"{"sigma": 1.0, "seed": 7}"#).unwrap();
        let config = FileConfig::load(Some(&path)).unwrap();
        assert_eq!(config.sigma, Some(1.0));
        assert_eq!(config.seed, Some(7));
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"seed": 7, "folds": 3}"#).unwrap();
        let resolved = Resolved::new(CommonArgs {
            config: Some(path),
            seed: Some(11),
            ..CommonArgs::default()
        })
        .unwrap();
        assert_eq!(resolved.seed(), 11);
        assert_eq!(resolved.folds(), 3);
    }

    #[test]
    fn quarantine_moves_new_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("old.txt"), "keep").unwrap();
        let result: Result<()> = guarded(dir.path(), || {
            std::fs::write(dir.path().join("new.txt"), "partial").unwrap();
            bail!("boom")
        });
        assert!(result.is_err());
        assert!(dir.path().join("old.txt").exists());
        assert!(!dir.path().join("new.txt").exists());
        assert!(dir.path().join("quarantine/new.txt").exists());
    }
}
