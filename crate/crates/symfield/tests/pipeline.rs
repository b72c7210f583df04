//! End-to-end pipeline tests: the experiment runner writes a complete,
//! self-consistent artifact set.

mod common;

use symfield::regression::TrainedModel;
use symfield::repro::Experiment;
use symfield::simulate::read_dataset_csv;

#[test]
fn oscillator_experiment_writes_complete_artifact_set() {
    let dir = tempfile::tempdir().unwrap();
    let experiment = Experiment::oscillator();
    let summary = experiment.run(0, dir.path()).unwrap();

    let expected = [
        "oscillator_seed0_dataset.csv",
        "oscillator_seed0_dataset.meta.json",
        "oscillator_seed0_cv_separable-gaussian.csv",
        "oscillator_seed0_cv_odd-symplectic.csv",
        "oscillator_seed0_model_separable-gaussian.json",
        "oscillator_seed0_model_odd-symplectic.json",
        "oscillator_seed0_odd_error.csv",
        "oscillator_seed0_rollout_separable-gaussian.csv",
        "oscillator_seed0_rollout_odd-symplectic.csv",
        "oscillator_seed0_hamiltonian.csv",
        "oscillator_seed0_field_true.csv",
        "oscillator_seed0_field_separable-gaussian.csv",
        "oscillator_seed0_field_odd-symplectic.csv",
        "oscillator_seed0_summary.txt",
    ];
    for name in expected {
        assert!(dir.path().join(name).exists(), "missing artifact {name}");
    }

    // The artifacts parse back into usable objects.
    let dataset = read_dataset_csv(&dir.path().join("oscillator_seed0_dataset.csv")).unwrap();
    assert_eq!(dataset.len(), 15);
    assert_eq!(dataset.meta.noise_std, 0.1);
    let model = TrainedModel::load(
        &dir.path()
            .join("oscillator_seed0_model_odd-symplectic.json"),
    )
    .unwrap();
    assert!(model.max_relative_residual(&dataset).unwrap() <= 1e-8);

    // The rendered summary carries one line per check.
    let text = std::fs::read_to_string(dir.path().join("oscillator_seed0_summary.txt")).unwrap();
    for check in &summary.checks {
        assert!(text.contains(&check.name), "summary missing {}", check.name);
    }
    assert!(summary.all_passed(), "summary gates failed:\n{text}");
}

#[test]
fn pendulum_experiment_counts_and_gates() {
    let dir = tempfile::tempdir().unwrap();
    let summary = Experiment::pendulum().run(0, dir.path()).unwrap();
    let dataset = read_dataset_csv(&dir.path().join("pendulum_seed0_dataset.csv")).unwrap();
    assert_eq!(dataset.len(), 24);
    assert!(summary.all_passed());
}

#[test]
fn cv_table_covers_the_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    Experiment::oscillator().run(0, dir.path()).unwrap();
    let table = std::fs::read_to_string(
        dir.path()
            .join("oscillator_seed0_cv_separable-gaussian.csv"),
    )
    .unwrap();
    // Header plus 25 sigmas x 7 lambdas.
    assert_eq!(table.lines().count(), 1 + 25 * 7);
    assert!(table.starts_with("sigma,lambda,cv_mse\n"));
}
