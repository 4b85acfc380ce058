//! Linear-approximation feature matrices.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

const RANK_TOL: f64 = 1e-10;
const ROW_NORM_TOL: f64 = 1e-12;
const QR_ATTEMPTS: usize = 3;

/// An `n x m` feature matrix with full column rank and rows of norm at most 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureDocument", into = "FeatureDocument")]
pub struct FeatureMatrix {
    phi: DMatrix<f64>,
    /// Row-major copy for per-state access on the hot path.
    rows: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(phi: DMatrix<f64>) -> Result<Self> {
        let (n, m) = phi.shape();
        if m == 0 || m > n {
            return Err(Error::InvalidFeatures(format!(
                "need 1 <= m <= n, got n = {n}, m = {m}"
            )));
        }
        if phi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidFeatures("non-finite entry".into()));
        }
        for (s, row) in phi.row_iter().enumerate() {
            let norm = row.norm();
            if norm > 1.0 + ROW_NORM_TOL {
                return Err(Error::InvalidFeatures(format!(
                    "row {s} has norm {norm} > 1"
                )));
            }
        }
        let smallest = phi
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(smallest > RANK_TOL) {
            return Err(Error::InvalidFeatures(format!(
                "not full column rank (smallest singular value {smallest})"
            )));
        }
        let rows = phi.transpose().as_slice().to_vec();
        Ok(FeatureMatrix { phi, rows })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidFeatures("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(n, m, &flat))
    }

    /// Tabular features `I_n`.
    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity features are valid")
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    pub fn m(&self) -> usize {
        self.phi.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Feature vector of state `s`.
    pub fn row(&self, s: usize) -> &[f64] {
        let m = self.m();
        &self.rows[s * m..(s + 1) * m]
    }

    pub fn max_row_norm(&self) -> f64 {
        self.phi
            .row_iter()
            .map(|r| r.norm())
            .fold(0.0, f64::max)
    }

    /// `Phi theta`.
    pub fn approximate_value(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        if theta.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: theta.len(),
            });
        }
        Ok(&self.phi * theta)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Orthogonal-column features from a QR of a Gaussian draw, scaled so the
/// largest row norm is exactly 1.
pub fn build_orthonormal_features(n: usize, m: usize, seed: u64) -> Result<FeatureMatrix> {
    if m == 0 || m > n {
        return Err(Error::InvalidFeatures(format!(
            "need 1 <= m <= n, got n = {n}, m = {m}"
        )));
    }
    let mut attempt_seed = seed;
    for _ in 0..QR_ATTEMPTS {
        let mut rng = seed::stream(attempt_seed);
        let draw = DMatrix::<f64>::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng));
        let qr = draw.qr();
        let r = qr.r();
        if (0..m).all(|i| r[(i, i)].abs() > RANK_TOL) {
            let q = qr.q();
            let max_norm = q.row_iter().map(|row| row.norm()).fold(0.0, f64::max);
            return FeatureMatrix::new(q / max_norm);
        }
        attempt_seed = seed::derive(attempt_seed, 1);
    }
    Err(Error::RankDeficient {
        attempts: QR_ATTEMPTS,
    })
}

#[derive(Serialize, Deserialize)]
struct FeatureDocument {
    n: usize,
    m: usize,
    phi: Vec<Vec<f64>>,
}

impl TryFrom<FeatureDocument> for FeatureMatrix {
    type Error = Error;

    fn try_from(doc: FeatureDocument) -> Result<Self> {
        if doc.phi.len() != doc.n || doc.phi.iter().any(|r| r.len() != doc.m) {
            return Err(Error::InvalidFeatures(format!(
                "phi does not have shape {} x {}",
                doc.n, doc.m
            )));
        }
        FeatureMatrix::from_rows(&doc.phi)
    }
}

impl From<FeatureMatrix> for FeatureDocument {
    fn from(f: FeatureMatrix) -> Self {
        FeatureDocument {
            n: f.n(),
            m: f.m(),
            phi: f.rows.chunks(f.m()).map(|r| r.to_vec()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_case_is_scaled_orthogonal() {
        let f = build_orthonormal_features(6, 6, 9).unwrap();
        let gram = f.matrix().tr_mul(f.matrix());
        let c = gram[(0, 0)];
        assert!(c > 0.0);
        assert!((gram - DMatrix::identity(6, 6) * c).amax() < 1e-12);
    }

    #[test]
    fn full_scale_row_norms() {
        let f = build_orthonormal_features(100, 10, 1).unwrap();
        assert!(f.max_row_norm() <= 1.0 + 1e-12);
        assert!((f.max_row_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_is_accepted() {
        let f = FeatureMatrix::identity(4);
        assert_eq!(f.row(2), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_out_of_contract_matrices() {
        let long_row = FeatureMatrix::from_rows(&[vec![1.5, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(long_row, Err(Error::InvalidFeatures(_))));
        let rank_one = FeatureMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5], vec![0.1, 0.1]]);
        assert!(matches!(rank_one, Err(Error::InvalidFeatures(_))));
        let wide = FeatureMatrix::from_rows(&[vec![0.5, 0.5, 0.1]]);
        assert!(wide.is_err());
    }

    #[test]
    fn approximate_value_cases() {
        let f = FeatureMatrix::identity(2);
        let v = f.approximate_value(&DVector::from_vec(vec![24.0 / 13.0, 4.0 / 13.0])).unwrap();
        assert_eq!(v.as_slice(), &[24.0 / 13.0, 4.0 / 13.0]);
        let f = build_orthonormal_features(10, 3, 2).unwrap();
        assert_eq!(f.approximate_value(&DVector::zeros(3)).unwrap(), DVector::zeros(10));
        assert!(matches!(
            f.approximate_value(&DVector::zeros(4)),
            Err(Error::DimensionMismatch { expected: 3, got: 4 })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn orthonormal_features_invariants(n in 1usize..40, frac in 0.0f64..1.0, seed in any::<u64>()) {
            let m = 1 + ((n - 1) as f64 * frac) as usize;
            let f = build_orthonormal_features(n, m, seed).unwrap();
            prop_assert!(f.max_row_norm() <= 1.0 + 1e-12);
            let phi = f.matrix();
            for i in 0..m {
                for j in 0..i {
                    let ci = phi.column(i);
                    let cj = phi.column(j);
                    prop_assert!(ci.dot(&cj).abs() <= 1e-10 * ci.norm() * cj.norm());
                }
            }
            let back = FeatureMatrix::from_json(&f.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
