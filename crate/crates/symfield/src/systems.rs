//! Ground-truth Hamiltonian benchmark systems.
//!
//! Both systems live in the two-dimensional phase space `x = [q, p]` and
//! expose their exact dynamics `f = J grad H` and exact Hamiltonian, so that
//! learned models can be measured against an analytic reference.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::symplectic_matrix;
use crate::simulate::{self, Integrator, TrajectorySpec, VectorField};

/// A benchmark system with strictly positive physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum HamiltonianSystem {
    /// Undamped mass-spring system; `q` is position, `p = m qdot`.
    /// `H = p^2 / (2m) + k q^2 / 2`.
    HarmonicOscillator { mass: f64, spring: f64 },
    /// Point mass on a massless rod; `q` is the angle, `p = m l^2 qdot`.
    /// `H = p^2 / (2 m l^2) + m g l (1 - cos q)` with the potential zero at
    /// the hanging position.
    SimplePendulum {
        mass: f64,
        length: f64,
        gravity: f64,
    },
}

impl HamiltonianSystem {
    pub fn harmonic_oscillator(mass: f64, spring: f64) -> Result<Self> {
        for (name, value) in [("mass", mass), ("spring", spring)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "oscillator parameter {name} must be positive, got {value}"
                )));
            }
        }
        Ok(HamiltonianSystem::HarmonicOscillator { mass, spring })
    }

    pub fn simple_pendulum(mass: f64, length: f64, gravity: f64) -> Result<Self> {
        for (name, value) in [("mass", mass), ("length", length), ("gravity", gravity)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "pendulum parameter {name} must be positive, got {value}"
                )));
            }
        }
        Ok(HamiltonianSystem::SimplePendulum {
            mass,
            length,
            gravity,
        })
    }

    /// Benchmark oscillator: `m = 0.5`, `k = 1`.
    pub fn default_oscillator() -> Self {
        HamiltonianSystem::HarmonicOscillator {
            mass: 0.5,
            spring: 1.0,
        }
    }

    /// Benchmark pendulum: `m = 0.5`, `l = 1`, `g = 9.81`.
    pub fn default_pendulum() -> Self {
        HamiltonianSystem::SimplePendulum {
            mass: 0.5,
            length: 1.0,
            gravity: 9.81,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HamiltonianSystem::HarmonicOscillator { .. } => "oscillator",
            HamiltonianSystem::SimplePendulum { .. } => "pendulum",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            HamiltonianSystem::HarmonicOscillator { mass, spring } => {
                Self::harmonic_oscillator(mass, spring).map(|_| ())
            }
            HamiltonianSystem::SimplePendulum {
                mass,
                length,
                gravity,
            } => Self::simple_pendulum(mass, length, gravity).map(|_| ()),
        }
    }

    /// Exact dynamics: oscillator `(p/m, -k q)`, pendulum
    /// `(p/(m l^2), -m g l sin q)`.
    pub fn true_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: x.len(),
            });
        }
        let (q, p) = (x[0], x[1]);
        Ok(match *self {
            HamiltonianSystem::HarmonicOscillator { mass, spring } => {
                DVector::from_column_slice(&[p / mass, -spring * q])
            }
            HamiltonianSystem::SimplePendulum {
                mass,
                length,
                gravity,
            } => DVector::from_column_slice(&[
                p / (mass * length * length),
                -mass * gravity * length * q.sin(),
            ]),
        })
    }

    /// Exact total energy.
    pub fn true_hamiltonian(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: x.len(),
            });
        }
        let (q, p) = (x[0], x[1]);
        Ok(match *self {
            HamiltonianSystem::HarmonicOscillator { mass, spring } => {
                0.5 * p * p / mass + 0.5 * spring * q * q
            }
            HamiltonianSystem::SimplePendulum {
                mass,
                length,
                gravity,
            } => 0.5 * p * p / (mass * length * length) + mass * gravity * length * (1.0 - q.cos()),
        })
    }
}

impl VectorField for HamiltonianSystem {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        self.true_field(x)
            .expect("benchmark systems are two-dimensional")
    }
}

/// Deviation of the flow map of `field` from symplecticity.
///
/// The flow Jacobian `Psi(t) = d phi_t(x0) / d x0` is estimated by central
/// finite differences of RK4-integrated trajectories (perturbation 1e-6 per
/// coordinate), and the Frobenius norm of `Psi^T J Psi - J` is returned. A
/// Hamiltonian field gives a defect at the integrator/difference noise floor;
/// a non-Hamiltonian field gives an O(1) defect.
pub fn symplecticity_defect(
    field: &dyn VectorField,
    x0: &DVector<f64>,
    t: f64,
    step: f64,
) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 || !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "symplecticity defect requires t > 0 and step > 0, got t={t}, step={step}"
        )));
    }
    let n = x0.len();
    let delta = 1e-6;
    let mut jac = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut plus = x0.clone();
        plus[col] += delta;
        let mut minus = x0.clone();
        minus[col] -= delta;
        let end_plus = flow_endpoint(field, plus, t, step)?;
        let end_minus = flow_endpoint(field, minus, t, step)?;
        for row in 0..n {
            jac[(row, col)] = (end_plus[row] - end_minus[row]) / (2.0 * delta);
        }
    }
    let j = symplectic_matrix(n);
    Ok((jac.transpose() * &j * &jac - j).norm())
}

fn flow_endpoint(
    field: &dyn VectorField,
    x0: DVector<f64>,
    t: f64,
    step: f64,
) -> Result<DVector<f64>> {
    let spec = TrajectorySpec::new(x0, step, t, Integrator::Rk4)?;
    let trajectory = simulate::integrate(field, &spec)?;
    Ok(trajectory
        .last()
        .expect("trajectory contains t = 0")
        .1
        .clone())
}
