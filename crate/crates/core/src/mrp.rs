//! Finite Markov reward processes: the environment every agent samples.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Stream};

const ROW_SUM_TOL: f64 = 1e-12;

/// First violated row-stochasticity constraint of a candidate kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelViolation {
    TooFewStates(usize),
    NotSquare { row: usize, len: usize },
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
}

impl std::fmt::Display for KernelViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelViolation::TooFewStates(n) => write!(f, "need at least 2 states, got {n}"),
            KernelViolation::NotSquare { row, len } => {
                write!(f, "row {row} has {len} entries")
            }
            KernelViolation::EntryOutOfRange { row, col, value } => {
                write!(f, "entry ({row}, {col}) = {value} is outside [0, 1]")
            }
            KernelViolation::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
        }
    }
}

/// Checks that `rows` is an n x n row-stochastic matrix with n >= 2.
///
/// Total: returns the first violation found, or `Ok(())`.
pub fn validate(rows: &[Vec<f64>]) -> std::result::Result<(), KernelViolation> {
    let n = rows.len();
    if n < 2 {
        return Err(KernelViolation::TooFewStates(n));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(KernelViolation::NotSquare {
                row: i,
                len: row.len(),
            });
        }
        for (j, &p) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(KernelViolation::EntryOutOfRange {
                    row: i,
                    col: j,
                    value: p,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(KernelViolation::RowSum { row: i, sum });
        }
    }
    Ok(())
}

/// A validated row-stochastic transition matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionKernel {
    n: usize,
    /// Row-major copy used by the sampler.
    rows: Vec<f64>,
    matrix: DMatrix<f64>,
}

impl TransitionKernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        validate(&rows).map_err(|v| Error::InvalidKernel(v.to_string()))?;
        let n = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let matrix = DMatrix::from_row_slice(n, n, &flat);
        Ok(TransitionKernel {
            n,
            rows: flat,
            matrix,
        })
    }

    pub fn from_matrix(matrix: &DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidKernel(format!(
                "{} x {} matrix is not square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Self::new(
            matrix
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s * self.n..(s + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Whether the chain is irreducible and aperiodic.
    ///
    /// A nonnegative matrix is primitive iff its power at the Wielandt
    /// bound `n^2 - 2n + 2` is strictly positive; only the support matters,
    /// so the powers are taken over booleans and involve no tolerances.
    pub fn is_ergodic(&self) -> bool {
        let support = Support::of(self);
        let exponent = self.n * self.n - 2 * self.n + 2;
        support.pow(exponent).is_full()
    }

    /// Draws the next state from row `s` by a left-to-right inverse-CDF scan.
    pub fn sample_next(&self, s: usize, rng: &mut Stream) -> usize {
        let u: f64 = rng.random();
        let row = self.row(s);
        let mut cumulative = 0.0;
        let mut last_positive = 0;
        for (j, &p) in row.iter().enumerate() {
            cumulative += p;
            if p > 0.0 {
                last_positive = j;
            }
            if u < cumulative {
                return j;
            }
        }
        // Rounding left the cumulative sum just below 1.
        last_positive
    }
}

/// Boolean support of a square matrix, stored as row bitsets.
#[derive(Clone, Debug)]
struct Support {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Support {
    fn of(kernel: &TransitionKernel) -> Self {
        let n = kernel.n;
        let mut s = Support::empty(n);
        for i in 0..n {
            for (j, &p) in kernel.row(i).iter().enumerate() {
                if p > 0.0 {
                    s.set(i, j);
                }
            }
        }
        s
    }

    fn empty(n: usize) -> Self {
        let words = n.div_ceil(64);
        Support {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    fn identity(n: usize) -> Self {
        let mut s = Support::empty(n);
        for i in 0..n {
            s.set(i, i);
        }
        s
    }

    fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] & (1 << (j % 64)) != 0
    }

    fn mul(&self, other: &Support) -> Support {
        let mut out = Support::empty(self.n);
        for i in 0..self.n {
            let dst = i * self.words;
            for k in 0..self.n {
                if self.get(i, k) {
                    let src = k * self.words;
                    for w in 0..self.words {
                        out.bits[dst + w] |= other.bits[src + w];
                    }
                }
            }
        }
        out
    }

    fn pow(&self, mut e: usize) -> Support {
        let mut result = Support::identity(self.n);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    fn is_full(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j)))
    }
}

/// The unique stationary distribution of an ergodic kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryDistribution {
    pi: DVector<f64>,
}

impl StationaryDistribution {
    /// Solves `pi P = pi`, `sum(pi) = 1` by a dense solve of `P^T - I` with
    /// its last row replaced by the normalization constraint.
    pub fn of(kernel: &TransitionKernel) -> Result<Self> {
        if !kernel.is_ergodic() {
            return Err(Error::NotErgodic);
        }
        let n = kernel.n();
        let mut system = kernel.matrix().transpose() - DMatrix::<f64>::identity(n, n);
        for j in 0..n {
            system[(n - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let pi = system
            .lu()
            .solve(&rhs)
            .ok_or(Error::Singular("stationary distribution"))?;
        if pi.iter().any(|&p| p <= 0.0 || !p.is_finite()) {
            return Err(Error::Singular("stationary distribution"));
        }
        Ok(StationaryDistribution { pi })
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn get(&self, s: usize) -> f64 {
        self.pi[s]
    }

    /// `max_s |(pi P)_s - pi_s|`.
    pub fn residual(&self, kernel: &TransitionKernel) -> f64 {
        let moved = kernel.matrix().tr_mul(&self.pi);
        (moved - &self.pi).amax()
    }
}

/// One observation tuple `(s, r, s')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub state: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// A transition kernel with per-state rewards and a discount factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MrpDocument", into = "MrpDocument")]
pub struct MarkovRewardProcess {
    kernel: TransitionKernel,
    rewards: DVector<f64>,
    gamma: f64,
    reward_bound: f64,
}

impl MarkovRewardProcess {
    pub fn new(
        kernel: TransitionKernel,
        rewards: Vec<f64>,
        gamma: f64,
        reward_bound: f64,
    ) -> Result<Self> {
        if rewards.len() != kernel.n() {
            return Err(Error::DimensionMismatch {
                expected: kernel.n(),
                got: rewards.len(),
            });
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidMrp(format!("gamma = {gamma} is not in (0, 1)")));
        }
        if let Some((s, r)) = rewards
            .iter()
            .enumerate()
            .find(|(_, r)| !r.is_finite() || r.abs() > reward_bound)
        {
            return Err(Error::InvalidMrp(format!(
                "|reward[{s}]| = {} exceeds the bound {reward_bound}",
                r.abs()
            )));
        }
        Ok(MarkovRewardProcess {
            kernel,
            rewards: DVector::from_vec(rewards),
            gamma,
            reward_bound,
        })
    }

    pub fn n(&self) -> usize {
        self.kernel.n()
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn rewards(&self) -> &DVector<f64> {
        &self.rewards
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    /// Advances one step from `state`, consuming only `rng`.
    pub fn sample_step(&self, state: usize, rng: &mut Stream) -> Observation {
        let next_state = self.kernel.sample_next(state, rng);
        Observation {
            state,
            reward: self.rewards[state],
            next_state,
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.kernel.clone(),
            self.rewards.iter().copied().collect(),
            gamma,
            self.reward_bound,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Random ergodic MRP: normalized uniform rows mixed with the uniform kernel.
///
/// `P = (1 - smoothing) * raw + smoothing / n`, rewards uniform on
/// `[0, reward_bound]`. Deterministic in `seed`.
pub fn generate_ergodic_mrp(
    n: usize,
    gamma: f64,
    reward_bound: f64,
    smoothing: f64,
    seed: u64,
) -> Result<MarkovRewardProcess> {
    if n < 2 {
        return Err(Error::InvalidKernel(format!("need at least 2 states, got {n}")));
    }
    if !(smoothing > 0.0 && smoothing <= 1.0) {
        return Err(Error::InvalidMrp(format!("smoothing = {smoothing} is not in (0, 1]")));
    }
    if !(reward_bound > 0.0) {
        return Err(Error::InvalidMrp(format!("reward bound {reward_bound} must be positive")));
    }
    let mut rng = seed::stream(seed);
    let uniform = smoothing / n as f64;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let mut row: Vec<f64> = raw
                .iter()
                .map(|x| (1.0 - smoothing) * x / total + uniform)
                .collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
            row
        })
        .collect();
    let rewards: Vec<f64> = (0..n)
        .map(|_| rng.random_range(0.0..=reward_bound))
        .collect();
    MarkovRewardProcess::new(TransitionKernel::new(rows)?, rewards, gamma, reward_bound)
}

#[derive(Serialize, Deserialize)]
struct MrpDocument {
    n: usize,
    gamma: f64,
    kernel: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    reward_bound: f64,
}

impl TryFrom<MrpDocument> for MarkovRewardProcess {
    type Error = Error;

    fn try_from(doc: MrpDocument) -> Result<Self> {
        if doc.kernel.len() != doc.n {
            return Err(Error::DimensionMismatch {
                expected: doc.n,
                got: doc.kernel.len(),
            });
        }
        MarkovRewardProcess::new(
            TransitionKernel::new(doc.kernel)?,
            doc.rewards,
            doc.gamma,
            doc.reward_bound,
        )
    }
}

impl From<MarkovRewardProcess> for MrpDocument {
    fn from(mrp: MarkovRewardProcess) -> Self {
        MrpDocument {
            n: mrp.n(),
            gamma: mrp.gamma,
            kernel: mrp.kernel.to_rows(),
            rewards: mrp.rewards.iter().copied().collect(),
            reward_bound: mrp.reward_bound,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kernel(rows: &[&[f64]]) -> TransitionKernel {
        TransitionKernel::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn validate_accepts_stochastic_rows() {
        assert_eq!(validate(&[vec![0.9, 0.1], vec![0.2, 0.8]]), Ok(()));
        let eye: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        assert_eq!(validate(&eye), Ok(()));
    }

    #[test]
    fn validate_reports_negative_entry() {
        let v = validate(&[vec![1.1, -0.1], vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(v, KernelViolation::EntryOutOfRange { row: 0, col: 0, .. }));
    }

    #[test]
    fn validate_reports_row_sum_and_shape() {
        assert!(matches!(
            validate(&[vec![0.5, 0.4], vec![0.5, 0.5]]),
            Err(KernelViolation::RowSum { row: 0, .. })
        ));
        assert!(matches!(
            validate(&[vec![1.0]]),
            Err(KernelViolation::TooFewStates(1))
        ));
        assert!(matches!(
            validate(&[vec![1.0, 0.0], vec![1.0]]),
            Err(KernelViolation::NotSquare { row: 1, len: 1 })
        ));
    }

    #[test]
    fn ergodicity() {
        assert!(kernel(&[&[0.9, 0.1], &[0.2, 0.8]]).is_ergodic());
        assert!(!kernel(&[&[0.0, 1.0], &[1.0, 0.0]]).is_ergodic());
        assert!(!kernel(&[&[1.0, 0.0], &[0.0, 1.0]]).is_ergodic());
        // Wielandt's extremal matrix: primitive, but only at the bound.
        let n = 5;
        let mut rows = vec![vec![0.0; n]; n];
        for (i, row) in rows.iter_mut().enumerate().take(n - 1) {
            row[i + 1] = 1.0;
        }
        rows[n - 1][0] = 0.5;
        rows[n - 1][1] = 0.5;
        assert!(TransitionKernel::new(rows).unwrap().is_ergodic());
    }

    #[test]
    fn stationary_two_state() {
        let pi = StationaryDistribution::of(&kernel(&[&[0.9, 0.1], &[0.2, 0.8]])).unwrap();
        assert!((pi.get(0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((pi.get(1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_uniform_and_rank_one() {
        let n = 6;
        let uniform = TransitionKernel::new(vec![vec![1.0 / n as f64; n]; n]).unwrap();
        let pi = StationaryDistribution::of(&uniform).unwrap();
        assert!(pi.as_vector().iter().all(|p| (p - 1.0 / n as f64).abs() < 1e-12));

        let q = vec![0.1, 0.2, 0.3, 0.4];
        let rank_one = TransitionKernel::new(vec![q.clone(); 4]).unwrap();
        let pi = StationaryDistribution::of(&rank_one).unwrap();
        for (a, b) in pi.as_vector().iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_rejects_reducible() {
        let eye = kernel(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!(matches!(StationaryDistribution::of(&eye), Err(Error::NotErgodic)));
    }

    #[test]
    fn point_mass_row_is_deterministic() {
        let mrp = MarkovRewardProcess::new(
            kernel(&[&[0.0, 0.0, 1.0], &[0.5, 0.5, 0.0], &[0.3, 0.3, 0.4]]),
            vec![0.25, -1.0, 0.5],
            0.9,
            1.0,
        )
        .unwrap();
        let mut rng = seed::stream(3);
        for _ in 0..1000 {
            let o = mrp.sample_step(0, &mut rng);
            assert_eq!(o, Observation { state: 0, reward: 0.25, next_state: 2 });
        }
        for _ in 0..100 {
            assert_eq!(mrp.sample_step(1, &mut rng).reward, -1.0);
        }
    }

    #[test]
    fn sample_frequency_matches_row() {
        let mrp = MarkovRewardProcess::new(
            kernel(&[&[0.9, 0.1], &[0.2, 0.8]]),
            vec![1.0, 0.0],
            0.5,
            1.0,
        )
        .unwrap();
        let mut rng = seed::stream(11);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| mrp.sample_step(0, &mut rng).next_state == 1)
            .count();
        let freq = hits as f64 / draws as f64;
        assert!((freq - 0.1).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn generated_mrp_properties() {
        let mrp = generate_ergodic_mrp(100, 0.5, 1.0, 0.1, 42).unwrap();
        assert!(mrp.kernel().is_ergodic());
        assert!(mrp.rewards().iter().all(|r| r.abs() <= 1.0));
        let pi = StationaryDistribution::of(mrp.kernel()).unwrap();
        assert!(pi.residual(mrp.kernel()) <= 1e-10);
        assert!((pi.as_vector().sum() - 1.0).abs() <= 1e-12);
        assert_eq!(mrp, generate_ergodic_mrp(100, 0.5, 1.0, 0.1, 42).unwrap());
        assert_ne!(mrp, generate_ergodic_mrp(100, 0.5, 1.0, 0.1, 43).unwrap());
    }

    #[test]
    fn json_shape() {
        let mrp = generate_ergodic_mrp(3, 0.5, 2.0, 0.1, 1).unwrap();
        let value: serde_json::Value = serde_json::from_str(&mrp.to_json().unwrap()).unwrap();
        for key in ["n", "gamma", "kernel", "rewards", "reward_bound"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        let bad = r#"{"n":2,"gamma":0.5,"kernel":[[1.1,-0.1],[0.5,0.5]],"rewards":[0,0],"reward_bound":1}"#;
        assert!(MarkovRewardProcess::from_json(bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn json_round_trip_is_lossless(n in 2usize..12, seed in any::<u64>(), smoothing in 0.01f64..1.0) {
            let mrp = generate_ergodic_mrp(n, 0.7, 3.0, smoothing, seed).unwrap();
            let back = MarkovRewardProcess::from_json(&mrp.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, mrp);
        }

        #[test]
        fn generated_chains_are_ergodic_with_stationary_pi(n in 2usize..30, seed in any::<u64>()) {
            let mrp = generate_ergodic_mrp(n, 0.5, 1.0, 0.1, seed).unwrap();
            prop_assert!(mrp.kernel().is_ergodic());
            let pi = StationaryDistribution::of(mrp.kernel()).unwrap();
            prop_assert!(pi.residual(mrp.kernel()) <= 1e-10);
        }
    }
}
