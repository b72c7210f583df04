//! Scalar and matrix-valued reproducing kernels on phase space.
//!
//! All kernels are built from the shift-invariant Gaussian
//! `g_sigma(r) = exp(-||r||^2 / (2 sigma^2))`:
//!
//! * separable: `k_sigma(x,z) I`
//! * curl-free: `G_c(x-z) = -grad grad^T g_sigma`, whose RKHS contains only
//!   gradient fields
//! * symplectic: `J G_c J^T`, whose RKHS contains only Hamiltonian fields
//! * odd variants `(K(x,z) - K(-x,z)) / 2`, which force `f(-x) = -f(x)`
//!
//! Everything is evaluated in closed form; finite differences appear only in
//! test oracles. All functions are pure and safe to call from any thread.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The matrix-valued kernel families supported by the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    SeparableGaussian,
    CurlFree,
    OddCurlFree,
    Symplectic,
    OddSymplectic,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 5] = [
        KernelFamily::SeparableGaussian,
        KernelFamily::CurlFree,
        KernelFamily::OddCurlFree,
        KernelFamily::Symplectic,
        KernelFamily::OddSymplectic,
    ];

    /// Lowercase name used in model files and on the command line.
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelFamily::SeparableGaussian => "separable-gaussian",
            KernelFamily::CurlFree => "curl-free",
            KernelFamily::OddCurlFree => "odd-curl-free",
            KernelFamily::Symplectic => "symplectic",
            KernelFamily::OddSymplectic => "odd-symplectic",
        }
    }

    /// Families whose RKHS consists of Hamiltonian vector fields `J grad H`.
    pub fn is_symplectic(&self) -> bool {
        matches!(self, KernelFamily::Symplectic | KernelFamily::OddSymplectic)
    }

    /// Families whose RKHS consists of odd vector fields.
    pub fn is_odd(&self) -> bool {
        matches!(
            self,
            KernelFamily::OddCurlFree | KernelFamily::OddSymplectic
        )
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "separable-gaussian" | "gaussian" | "separable" => Ok(KernelFamily::SeparableGaussian),
            "curl-free" | "curlfree" => Ok(KernelFamily::CurlFree),
            "odd-curl-free" | "oddcurlfree" => Ok(KernelFamily::OddCurlFree),
            "symplectic" => Ok(KernelFamily::Symplectic),
            "odd-symplectic" | "oddsymplectic" => Ok(KernelFamily::OddSymplectic),
            other => Err(Error::InvalidSpec(format!(
                "unknown kernel family `{other}`"
            ))),
        }
    }
}

/// A matrix-valued kernel: family, width `sigma` and phase-space dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub sigma: f64,
    pub dim: usize,
}

impl KernelSpec {
    /// Validated constructor: `sigma > 0`, `dim` even and at least 2.
    pub fn new(family: KernelFamily, sigma: f64, dim: usize) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::NonPositiveSigma(sigma));
        }
        if dim < 2 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidSpec(format!(
                "phase-space dimension must be even and >= 2, got {dim}"
            )));
        }
        Ok(KernelSpec { family, sigma, dim })
    }

    /// Re-run the constructor invariants (useful after deserialization).
    pub fn validate(&self) -> Result<()> {
        KernelSpec::new(self.family, self.sigma, self.dim).map(|_| ())
    }

    /// Evaluate the kernel matrix `K(x, z)` for this spec's family.
    pub fn evaluate(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self.family {
            KernelFamily::SeparableGaussian => separable_gaussian(x, z, self),
            KernelFamily::CurlFree => curl_free(x, z, self),
            KernelFamily::OddCurlFree => odd_curl_free(x, z, self),
            KernelFamily::Symplectic => symplectic(x, z, self),
            KernelFamily::OddSymplectic => odd_symplectic(x, z, self),
        }
    }
}

/// The canonical symplectic matrix `J = [[0, I], [-I, 0]]`.
pub fn symplectic_matrix(dim: usize) -> DMatrix<f64> {
    assert!(
        dim >= 2 && dim.is_multiple_of(2),
        "J requires an even dimension"
    );
    let m = dim / 2;
    let mut j = DMatrix::zeros(dim, dim);
    for i in 0..m {
        j[(i, m + i)] = 1.0;
        j[(m + i, i)] = -1.0;
    }
    j
}

fn check_pair(x: &DVector<f64>, z: &DVector<f64>, dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: x.len(),
        });
    }
    if z.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: z.len(),
        });
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::NonPositiveSigma(sigma));
    }
    Ok(())
}

/// Scalar Gaussian kernel `exp(-||x - z||^2 / (2 sigma^2))`.
pub fn gaussian_scalar(x: &DVector<f64>, z: &DVector<f64>, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: z.len(),
        });
    }
    let d = x - z;
    Ok((-d.norm_squared() / (2.0 * sigma * sigma)).exp())
}

/// Odd scalar Gaussian kernel `(g(x - z) - g(x + z)) / 2`.
///
/// Sections of this kernel are odd in `x`, so scalar functions expanded on it
/// satisfy `f(-x) = -f(x)`.
pub fn gaussian_odd_scalar(x: &DVector<f64>, z: &DVector<f64>, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: z.len(),
        });
    }
    let s2 = 2.0 * sigma * sigma;
    let dm = x - z;
    let dp = x + z;
    Ok(0.5 * ((-dm.norm_squared() / s2).exp() - (-dp.norm_squared() / s2).exp()))
}

/// Separable Gaussian kernel `k_sigma(x, z) I_n`.
pub fn separable_gaussian(
    x: &DVector<f64>,
    z: &DVector<f64>,
    spec: &KernelSpec,
) -> Result<DMatrix<f64>> {
    check_pair(x, z, spec.dim)?;
    let k = gaussian_scalar(x, z, spec.sigma)?;
    Ok(DMatrix::identity(spec.dim, spec.dim) * k)
}

/// Curl-free kernel derived from the Gaussian,
/// `G_c(r) = (1/sigma^2) exp(-r^T r / (2 sigma^2)) (I - r r^T / sigma^2)`
/// with `r = x - z`.
pub fn curl_free(x: &DVector<f64>, z: &DVector<f64>, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    check_pair(x, z, spec.dim)?;
    check_sigma(spec.sigma)?;
    let r = x - z;
    Ok(curl_free_from_difference(&r, spec.sigma))
}

fn curl_free_from_difference(r: &DVector<f64>, sigma: f64) -> DMatrix<f64> {
    let s2 = sigma * sigma;
    let scale = (-r.norm_squared() / (2.0 * s2)).exp() / s2;
    let n = r.len();
    let mut m = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] -= r[i] * r[j] / s2;
        }
    }
    m * scale
}

/// Symplectic kernel `K_s(x, z) = J G_c(x - z) J^T`.
pub fn symplectic(x: &DVector<f64>, z: &DVector<f64>, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    let gc = curl_free(x, z, spec)?;
    Ok(conjugate_by_j(&gc))
}

/// Odd curl-free kernel `(K_c(x, z) - K_c(-x, z)) / 2`, equal to
/// `-grad grad^T` of the odd scalar Gaussian.
pub fn odd_curl_free(
    x: &DVector<f64>,
    z: &DVector<f64>,
    spec: &KernelSpec,
) -> Result<DMatrix<f64>> {
    check_pair(x, z, spec.dim)?;
    check_sigma(spec.sigma)?;
    let rm = x - z;
    let rp = x + z;
    let km = curl_free_from_difference(&rm, spec.sigma);
    let kp = curl_free_from_difference(&rp, spec.sigma);
    // K_c(-x, z) = G_c(-(x + z)) = G_c(x + z) since G_c is even.
    Ok((km - kp) * 0.5)
}

/// Odd symplectic kernel `J K_{c,odd}(x, z) J^T`, identical to
/// `(K_s(x, z) - K_s(-x, z)) / 2`.
pub fn odd_symplectic(
    x: &DVector<f64>,
    z: &DVector<f64>,
    spec: &KernelSpec,
) -> Result<DMatrix<f64>> {
    let kc = odd_curl_free(x, z, spec)?;
    Ok(conjugate_by_j(&kc))
}

/// Conjugation `J M J^T` computed block-wise. For `M = [[A, B], [C, D]]`
/// this is `[[D, -C], [-B, A]]`, which is exact in floating point.
fn conjugate_by_j(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    debug_assert!(n.is_multiple_of(2) && m.ncols() == n);
    let half = n / 2;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..half {
        for j in 0..half {
            out[(i, j)] = m[(half + i, half + j)];
            out[(i, half + j)] = -m[(half + i, j)];
            out[(half + i, j)] = -m[(i, half + j)];
            out[(half + i, half + j)] = m[(i, j)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(data: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(data)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
    }

    #[test]
    fn gaussian_scalar_zero_distance() {
        let x = v(&[0.3, -1.2, 4.0, 0.5]);
        assert_eq!(gaussian_scalar(&x, &x, 1.7).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_scalar_unit_distance() {
        let k = gaussian_scalar(&v(&[1.0, 0.0]), &v(&[0.0, 0.0]), 1.0).unwrap();
        assert!((k - 0.6065306597126334).abs() < 1e-15);
    }

    #[test]
    fn gaussian_scalar_rejects_bad_inputs() {
        let x = v(&[1.0, 0.0]);
        assert!(gaussian_scalar(&x, &v(&[1.0]), 1.0).is_err());
        assert!(gaussian_scalar(&x, &x, 0.0).is_err());
        assert!(gaussian_scalar(&x, &x, -2.0).is_err());
    }

    #[test]
    fn gaussian_odd_scalar_vanishes_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = v(&[0.0, 0.0]);
        for _ in 0..20 {
            let z = random_vec(&mut rng, 2, 3.0);
            assert_eq!(gaussian_odd_scalar(&zero, &z, 1.3).unwrap(), 0.0);
        }
    }

    #[test]
    fn gaussian_odd_scalar_matches_closed_form() {
        let x = v(&[1.0, 0.0]);
        let k = gaussian_odd_scalar(&x, &x, 1.0).unwrap();
        assert!((k - 0.43233235838169365).abs() < 1e-15);
    }

    #[test]
    fn separable_gaussian_at_center_is_identity() {
        let spec = KernelSpec::new(KernelFamily::SeparableGaussian, 2.0, 4).unwrap();
        let x = v(&[1.0, 2.0, 3.0, 4.0]);
        let k = separable_gaussian(&x, &x, &spec).unwrap();
        assert_eq!(k, DMatrix::identity(4, 4));
    }

    #[test]
    fn separable_gaussian_structure() {
        let spec = KernelSpec::new(KernelFamily::SeparableGaussian, 1.5, 4).unwrap();
        let x = v(&[1.0, 0.0, -1.0, 2.0]);
        let z = v(&[0.0, 0.5, 1.0, 1.0]);
        let k = separable_gaussian(&x, &z, &spec).unwrap();
        let scalar = gaussian_scalar(&x, &z, 1.5).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    assert_eq!(k[(i, j)], scalar);
                } else {
                    assert_eq!(k[(i, j)], 0.0);
                }
            }
        }
        assert!((k.trace() - 4.0 * scalar).abs() < 1e-15);
    }

    #[test]
    fn curl_free_at_center() {
        let sigma = 1.7;
        let spec = KernelSpec::new(KernelFamily::CurlFree, sigma, 2).unwrap();
        let x = v(&[0.4, -0.9]);
        let k = curl_free(&x, &x, &spec).unwrap();
        let expected = DMatrix::identity(2, 2) / (sigma * sigma);
        assert!((k - expected).norm() < 1e-15);
    }

    #[test]
    fn curl_free_even_in_difference() {
        let spec = KernelSpec::new(KernelFamily::CurlFree, 1.2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let zero = DVector::zeros(4);
        for _ in 0..20 {
            let r = random_vec(&mut rng, 4, 2.0);
            let a = curl_free(&r, &zero, &spec).unwrap();
            let b = curl_free(&(-&r), &zero, &spec).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn curl_free_closed_form_r_equals_sigma() {
        // r = [sigma, 0] zeroes the (0,0) entry: 1 - r_1^2/sigma^2 = 0.
        let sigma = 1.0;
        let spec = KernelSpec::new(KernelFamily::CurlFree, sigma, 2).unwrap();
        let k = curl_free(&v(&[1.0, 0.0]), &v(&[0.0, 0.0]), &spec).unwrap();
        let e = 0.6065306597126334;
        assert!(k[(0, 0)].abs() < 1e-15);
        assert!((k[(1, 1)] - e).abs() < 1e-15);
        assert!(k[(0, 1)].abs() < 1e-15);
        assert!(k[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn symplectic_at_center_is_scaled_identity() {
        let sigma = 2.5;
        let spec = KernelSpec::new(KernelFamily::Symplectic, sigma, 4).unwrap();
        let x = v(&[0.1, 0.2, 0.3, 0.4]);
        let k = symplectic(&x, &x, &spec).unwrap();
        let expected = DMatrix::identity(4, 4) / (sigma * sigma);
        assert!((k - expected).norm() < 1e-15);
    }

    #[test]
    fn symplectic_swaps_diagonal_for_axis_difference() {
        let spec = KernelSpec::new(KernelFamily::Symplectic, 1.0, 2).unwrap();
        let k = symplectic(&v(&[1.0, 0.0]), &v(&[0.0, 0.0]), &spec).unwrap();
        let e = 0.6065306597126334;
        assert!((k[(0, 0)] - e).abs() < 1e-15);
        assert!(k[(1, 1)].abs() < 1e-15);
    }

    #[test]
    fn symplectic_matches_explicit_j_conjugation() {
        // Independent J builder, dense multiplication.
        let spec = KernelSpec::new(KernelFamily::Symplectic, 0.9, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let j = symplectic_matrix(6);
        for _ in 0..20 {
            let x = random_vec(&mut rng, 6, 2.0);
            let z = random_vec(&mut rng, 6, 2.0);
            let ks = symplectic(&x, &z, &spec).unwrap();
            let gc = curl_free(&x, &z, &spec).unwrap();
            let explicit = &j * gc * j.transpose();
            assert!((ks - explicit).norm() < 1e-15);
        }
    }

    #[test]
    fn odd_kernels_vanish_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let zero = DVector::zeros(2);
        for family in [KernelFamily::OddCurlFree, KernelFamily::OddSymplectic] {
            let spec = KernelSpec::new(family, 1.1, 2).unwrap();
            for _ in 0..10 {
                let z = random_vec(&mut rng, 2, 3.0);
                let k = spec.evaluate(&zero, &z).unwrap();
                assert_eq!(k.norm(), 0.0);
            }
        }
    }

    #[test]
    fn odd_symplectic_construction_orders_agree() {
        // Conjugate-then-oddify vs oddify-then-conjugate.
        let spec = KernelSpec::new(KernelFamily::OddSymplectic, 1.4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = random_vec(&mut rng, 4, 3.0);
            let z = random_vec(&mut rng, 4, 3.0);
            let a = odd_symplectic(&x, &z, &spec).unwrap();
            let ks_x = symplectic(&x, &z, &spec).unwrap();
            let ks_mx = symplectic(&(-&x), &z, &spec).unwrap();
            let b = (ks_x - ks_mx) * 0.5;
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn symplectic_matrix_properties() {
        for dim in [2, 4, 8] {
            let j = symplectic_matrix(dim);
            assert_eq!(j.transpose(), -&j);
            assert!((&j * j.transpose() - DMatrix::identity(dim, dim)).norm() == 0.0);
        }
    }

    #[test]
    fn gram_on_random_points_is_psd() {
        // Moore-Aronszajn obligation checked through the eigenvalues of the
        // stacked Gram matrix.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let points: Vec<DVector<f64>> = (0..10).map(|_| random_vec(&mut rng, 2, 3.0)).collect();
        for family in KernelFamily::ALL {
            let spec = KernelSpec::new(family, 1.0, 2).unwrap();
            let n = spec.dim;
            let mut gram = DMatrix::zeros(points.len() * n, points.len() * n);
            for (i, xi) in points.iter().enumerate() {
                for (j, xj) in points.iter().enumerate() {
                    let block = spec.evaluate(xi, xj).unwrap();
                    gram.view_mut((i * n, j * n), (n, n)).copy_from(&block);
                }
            }
            let eigs = gram.symmetric_eigenvalues();
            let max = eigs.iter().cloned().fold(f64::MIN, f64::max);
            let min = eigs.iter().cloned().fold(f64::MAX, f64::min);
            assert!(
                min >= -1e-10 * max.max(1e-300),
                "{family}: min eigenvalue {min:e} vs max {max:e}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn kernel_symmetry(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_vec(&mut rng, 4, 4.0);
            let z = random_vec(&mut rng, 4, 4.0);
            for family in KernelFamily::ALL {
                let spec = KernelSpec::new(family, 1.3, 4).unwrap();
                let kxz = spec.evaluate(&x, &z).unwrap();
                let kzx = spec.evaluate(&z, &x).unwrap();
                prop_assert!((kxz - kzx.transpose()).norm() < 1e-14);
            }
        }

        #[test]
        fn odd_kernels_are_odd(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_vec(&mut rng, 2, 4.0);
            let z = random_vec(&mut rng, 2, 4.0);
            prop_assert_eq!(
                gaussian_odd_scalar(&(-&x), &z, 0.8).unwrap(),
                -gaussian_odd_scalar(&x, &z, 0.8).unwrap()
            );
            for family in [KernelFamily::OddCurlFree, KernelFamily::OddSymplectic] {
                let spec = KernelSpec::new(family, 0.8, 2).unwrap();
                let k = spec.evaluate(&x, &z).unwrap();
                let k_neg = spec.evaluate(&(-&x), &z).unwrap();
                prop_assert_eq!(k_neg, -k);
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::new(KernelFamily::Symplectic, 1.0, 3).is_err());
        assert!(KernelSpec::new(KernelFamily::Symplectic, 1.0, 0).is_err());
        assert!(KernelSpec::new(KernelFamily::Symplectic, -1.0, 2).is_err());
        assert!(KernelSpec::new(KernelFamily::Symplectic, f64::NAN, 2).is_err());
        assert!(KernelSpec::new(KernelFamily::Symplectic, 1.0, 2).is_ok());
    }

    #[test]
    fn family_string_round_trip() {
        for family in KernelFamily::ALL {
            assert_eq!(family.as_str().parse::<KernelFamily>().unwrap(), family);
        }
        assert!("frobnicating".parse::<KernelFamily>().is_err());
    }
}
