//! Row-stochastic matrices, probability distributions and the n-step machinery
//! built on them: products, powers, equilibrium detection and a direct
//! stationary solve.
//!
//! Every type here is immutable once constructed. Operations return fresh
//! values and never mutate their inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance for matrices built from exact data.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// Row-sum tolerance admitted for matrices transcribed from rounded sources.
pub const PUBLISHED_ROW_TOLERANCE: f64 = 1e-3;

/// Default equilibrium tolerance: four-decimal agreement across rows.
pub const DEFAULT_EQUILIBRIUM_TOLERANCE: f64 = 1e-4;

/// Relative pivot threshold under which the stationary system is treated as
/// rank deficient.
pub const PIVOT_THRESHOLD: f64 = 1e-10;

/// Above this exponent `power` switches from repeated multiplication to
/// exponentiation by squaring.
pub const NAIVE_POWER_LIMIT: usize = 16;

/// A square matrix whose rows are probability distributions.
///
/// `entry(i, j)` is the probability of moving from state `i` to state `j` in
/// one step. Entries lie in `[0, 1]` and every row sums to one within
/// [`row_tolerance`](Self::row_tolerance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct StochasticMatrix {
    order: usize,
    entries: Vec<f64>,
    row_tolerance: f64,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    order: usize,
    entries: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRepr> for StochasticMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        if repr.entries.len() != repr.order {
            return Err(Error::InvalidMatrix(format!(
                "declared order {} but found {} rows",
                repr.order,
                repr.entries.len()
            )));
        }
        StochasticMatrix::new(repr.entries)
    }
}

impl From<StochasticMatrix> for MatrixRepr {
    fn from(m: StochasticMatrix) -> Self {
        MatrixRepr {
            order: m.order,
            entries: m.to_rows(),
        }
    }
}

impl StochasticMatrix {
    /// Builds a matrix whose rows sum to one within [`ROW_TOLERANCE`].
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_row_tolerance(rows, ROW_TOLERANCE)
    }

    /// Builds a matrix transcribed from a rounded published source.
    ///
    /// Row sums may deviate from one by up to [`PUBLISHED_ROW_TOLERANCE`].
    /// Entries are kept exactly as given; nothing is renormalized, so powers
    /// of the matrix reproduce what the printed numbers imply.
    pub fn as_published(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_row_tolerance(rows, PUBLISHED_ROW_TOLERANCE)
    }

    fn with_row_tolerance(rows: Vec<Vec<f64>>, row_tolerance: f64) -> Result<Self> {
        let order = rows.len();
        if order == 0 {
            return Err(Error::InvalidMatrix("matrix has no rows".into()));
        }
        let mut entries = Vec::with_capacity(order * order);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != order {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {order}",
                    row.len()
                )));
            }
            for (j, &p) in row.iter().enumerate() {
                if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {p} is not a probability"
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > row_tolerance {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} sums to {sum}, outside 1 ± {row_tolerance:e}"
                )));
            }
            entries.extend_from_slice(row);
        }
        Ok(StochasticMatrix {
            order,
            entries,
            row_tolerance,
        })
    }

    /// The identity matrix of the given order (every state absorbing).
    pub fn identity(order: usize) -> Self {
        assert!(order > 0, "identity matrix needs a positive order");
        let mut entries = vec![0.0; order * order];
        for i in 0..order {
            entries[i * order + i] = 1.0;
        }
        StochasticMatrix {
            order,
            entries,
            row_tolerance: ROW_TOLERANCE,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.order)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Row-sum slack this instance was validated against.
    pub fn row_tolerance(&self) -> f64 {
        self.row_tolerance
    }

    /// True when the matrix carries the published-source slack rather than
    /// the exact tolerance.
    pub fn is_published(&self) -> bool {
        self.row_tolerance > ROW_TOLERANCE
    }

    /// Largest entry-wise absolute difference to another matrix of equal order.
    pub fn max_abs_diff(&self, other: &StochasticMatrix) -> Result<f64> {
        check_order(self.order, other.order)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Matrix product `self · rhs`.
    pub fn multiply(&self, rhs: &StochasticMatrix) -> Result<StochasticMatrix> {
        check_order(self.order, rhs.order)?;
        let n = self.order;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.entries[k * n..(k + 1) * n];
                let out = &mut entries[i * n..(i + 1) * n];
                for (o, b) in out.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        // Exact inputs give exact products. Published inputs can drift, and
        // the slack actually carried is recorded on the result.
        let drift = entries
            .chunks_exact(n)
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let row_tolerance = self.row_tolerance.max(rhs.row_tolerance).max(drift);
        Ok(StochasticMatrix {
            order: n,
            entries,
            row_tolerance,
        })
    }

    /// `self^n`, with `self^0` the identity.
    ///
    /// Uses repeated multiplication up to [`NAIVE_POWER_LIMIT`] and
    /// exponentiation by squaring above it.
    pub fn power(&self, n: usize) -> StochasticMatrix {
        if n <= NAIVE_POWER_LIMIT {
            self.power_naive(n)
        } else {
            self.power_by_squaring(n)
        }
    }

    /// `self^n` by `n - 1` successive right-multiplications.
    pub fn power_naive(&self, n: usize) -> StochasticMatrix {
        if n == 0 {
            return StochasticMatrix::identity(self.order);
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.multiply(self).expect("orders agree");
        }
        acc
    }

    /// `self^n` by binary exponentiation.
    pub fn power_by_squaring(&self, n: usize) -> StochasticMatrix {
        let mut result: Option<StochasticMatrix> = None;
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.multiply(&base).expect("orders agree"),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.multiply(&base).expect("orders agree");
            }
        }
        result.unwrap_or_else(|| StochasticMatrix::identity(self.order))
    }

    /// Largest per-column spread (max row entry minus min row entry).
    pub fn column_spread(&self) -> f64 {
        (0..self.order)
            .map(|j| {
                let (lo, hi) = self
                    .rows()
                    .map(|r| r[j])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    });
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Arithmetic mean of the rows.
    fn mean_row(&self) -> Vec<f64> {
        let n = self.order as f64;
        (0..self.order)
            .map(|j| self.rows().map(|r| r[j]).sum::<f64>() / n)
            .collect()
    }
}

fn check_order(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

/// A probability vector over the states of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct Distribution {
    probabilities: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    order: usize,
    entries: Vec<f64>,
}

impl TryFrom<DistributionRepr> for Distribution {
    type Error = Error;

    fn try_from(repr: DistributionRepr) -> Result<Self> {
        if repr.entries.len() != repr.order {
            return Err(Error::InvalidDistribution(format!(
                "declared order {} but found {} entries",
                repr.order,
                repr.entries.len()
            )));
        }
        Distribution::new(repr.entries)
    }
}

impl From<Distribution> for DistributionRepr {
    fn from(d: Distribution) -> Self {
        DistributionRepr {
            order: d.probabilities.len(),
            entries: d.probabilities,
        }
    }
}

impl Distribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probabilities, ROW_TOLERANCE)
    }

    pub(crate) fn with_tolerance(probabilities: Vec<f64>, tolerance: f64) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidDistribution("no entries".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} is negative or not finite"
            )));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, outside 1 ± {tolerance:e}"
            )));
        }
        Ok(Distribution { probabilities })
    }

    /// All mass on `state`.
    pub fn point_mass(order: usize, state: usize) -> Result<Self> {
        if state >= order {
            return Err(Error::InvalidInput(format!(
                "state index {state} out of range for order {order}"
            )));
        }
        let mut probabilities = vec![0.0; order];
        probabilities[state] = 1.0;
        Ok(Distribution { probabilities })
    }

    pub fn order(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.probabilities
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Outcome of searching successive powers for equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    /// First power meeting the criterion, or the last power tried.
    pub steps: usize,
    pub tolerance: f64,
    /// Mean row of `final_matrix`.
    pub limit: Distribution,
    pub final_matrix: StochasticMatrix,
}

/// `a · b`.
pub fn multiply(a: &StochasticMatrix, b: &StochasticMatrix) -> Result<StochasticMatrix> {
    a.multiply(b)
}

/// `p^n`.
pub fn power(p: &StochasticMatrix, n: usize) -> StochasticMatrix {
    p.power(n)
}

/// Finds the smallest `n <= max_steps` for which every column of `p^n` has a
/// spread across rows below `tolerance`.
///
/// Non-convergence is not an error: the report comes back with
/// `converged == false` and the state at `max_steps`.
pub fn find_equilibrium(
    p: &StochasticMatrix,
    tolerance: f64,
    max_steps: usize,
) -> Result<ConvergenceReport> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "equilibrium tolerance must be positive, got {tolerance}"
        )));
    }
    if max_steps == 0 {
        return Err(Error::InvalidInput("max_steps must be at least 1".into()));
    }
    let mut current = p.clone();
    let mut steps = 1;
    loop {
        let converged = current.column_spread() < tolerance;
        if converged || steps == max_steps {
            let limit = Distribution::with_tolerance(current.mean_row(), current.row_tolerance)?;
            return Ok(ConvergenceReport {
                converged,
                steps,
                tolerance,
                limit,
                final_matrix: current,
            });
        }
        current = current.multiply(p)?;
        steps += 1;
    }
}

/// Solves `π P = π`, `Σ π = 1` directly.
///
/// The last balance equation is replaced by the normalization constraint and
/// the system is solved by Gaussian elimination with partial pivoting. A
/// pivot below [`PIVOT_THRESHOLD`] relative to the largest coefficient means
/// the stationary distribution is not unique.
pub fn stationary_direct(p: &StochasticMatrix) -> Result<Distribution> {
    let n = p.order();
    // Row i of the system: Σ_k π_k (P[k][i] - δ_ki) = 0.
    let mut a = vec![vec![0.0; n + 1]; n];
    for (i, eq) in a.iter_mut().enumerate() {
        for (k, slot) in eq[..n].iter_mut().enumerate() {
            *slot = p.entry(k, i) - if k == i { 1.0 } else { 0.0 };
        }
    }
    a[n - 1] = vec![1.0; n + 1];

    let scale = a
        .iter()
        .flat_map(|r| r[..n].iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty range");
        if a[pivot_row][col].abs() < PIVOT_THRESHOLD * scale {
            return Err(Error::NotUnique);
        }
        a.swap(col, pivot_row);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot = &upper[col];
        for row in lower {
            let factor = row[col] / pivot[col];
            if factor != 0.0 {
                for (x, y) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *x -= factor * y;
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * pi[c]).sum();
        pi[r] = (a[r][n] - tail) / a[r][r];
    }
    // Round-off can leave transient states at -1e-17 or so.
    for x in &mut pi {
        if *x < 0.0 && *x > -1e-12 {
            *x = 0.0;
        }
    }
    Distribution::with_tolerance(pi, p.row_tolerance().max(ROW_TOLERANCE))
}

/// `start · P^n`.
pub fn evolve(start: &Distribution, p: &StochasticMatrix, n: usize) -> Result<Distribution> {
    check_order(start.order(), p.order())?;
    let order = p.order();
    let mut v = start.probabilities.clone();
    for _ in 0..n {
        let mut next = vec![0.0; order];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (nj, pij) in next.iter_mut().zip(p.row(i)) {
                *nj += vi * pij;
            }
        }
        v = next;
    }
    let slack = p.row_tolerance() * n.max(1) as f64;
    Distribution::with_tolerance(v, slack.max(ROW_TOLERANCE))
}
