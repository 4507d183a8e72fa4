use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::channel::complex_gaussian;
use crate::error::{Error, Result};

/// CSIT whose condition number exceeds this is resampled by the simulator.
pub const MAX_CSIT_CONDITION: f64 = 1e8;

/// Unit-norm precoders for the common stream and each private stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub common: DVector<Complex64>,
    /// Column `k` is the precoder of user `k`'s private stream.
    pub private: DMatrix<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CommonPrecoderMode {
    /// Isotropic direction independent of the channel (the analysis assumption).
    #[default]
    Random,
    /// Dominant eigenvector of the per-slot CSIT covariance `(1/K) Ĥ^H Ĥ`.
    PrincipalEigenvector,
}

impl PrecoderSet {
    pub fn build<R: Rng + ?Sized>(
        csit: &DMatrix<Complex64>,
        mode: CommonPrecoderMode,
        rng: &mut R,
    ) -> Result<Self> {
        let private = zf_precoders(csit)?;
        let common = common_precoder(csit, mode, rng);
        Ok(Self { common, private })
    }
}

pub fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Column-normalized right pseudo-inverse `Ĥ^H (Ĥ Ĥ^H)^{-1}` of the CSIT rows.
pub fn zf_precoders(csit: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let condition = condition_number(csit);
    if !(condition <= MAX_CSIT_CONDITION) {
        return Err(Error::SingularCsit { condition });
    }
    let adj = csit.adjoint();
    let gram = csit * &adj;
    let inv = gram.try_inverse().ok_or(Error::SingularCsit { condition })?;
    let mut p = adj * inv;
    for mut col in p.column_iter_mut() {
        let norm = col.norm();
        col /= Complex64::new(norm, 0.0);
    }
    Ok(p)
}

/// Normalized complex Gaussian vector, uniform on the complex unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<Complex64> {
    let v = DVector::from_fn(n, |_, _| complex_gaussian(rng));
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Dominant eigenvector of a Hermitian positive semidefinite matrix.
pub fn principal_eigenvector(cov: DMatrix<Complex64>) -> DVector<Complex64> {
    let eig = cov.symmetric_eigen();
    let (best, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let v = eig.eigenvectors.column(best).into_owned();
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

pub fn common_precoder<R: Rng + ?Sized>(
    csit: &DMatrix<Complex64>,
    mode: CommonPrecoderMode,
    rng: &mut R,
) -> DVector<Complex64> {
    match mode {
        CommonPrecoderMode::Random => random_unit_vector(csit.ncols(), rng),
        CommonPrecoderMode::PrincipalEigenvector => {
            let k = csit.nrows() as f64;
            let cov = csit.adjoint() * csit / Complex64::new(k, 0.0);
            principal_eigenvector(cov)
        }
    }
}
