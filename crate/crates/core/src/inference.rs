//! Chi-square goodness of fit and the pooled-variance two-sample t-test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    chi_square_upper_inverse, chi_square_upper_p, student_t_two_tailed_inverse,
    student_t_two_tailed_p,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub expected: Vec<f64>,
}

impl GofResult {
    pub fn significant(&self) -> bool {
        self.statistic > self.critical_value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub n1: usize,
    pub n2: usize,
    pub df: u64,
    pub mean1: f64,
    pub mean2: f64,
    pub pooled_variance: f64,
    pub t_stat: f64,
    pub t_crit: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    ChiSquareGof,
    PooledT,
}

/// Flat summary shared by both tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestKind,
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub significant: bool,
}

impl From<&GofResult> for TestReport {
    fn from(g: &GofResult) -> Self {
        TestReport {
            test: TestKind::ChiSquareGof,
            statistic: g.statistic,
            df: g.df,
            p_value: g.p_value,
            critical_value: g.critical_value,
            alpha: g.alpha,
            significant: g.significant(),
        }
    }
}

impl From<&TTestResult> for TestReport {
    fn from(t: &TTestResult) -> Self {
        TestReport {
            test: TestKind::PooledT,
            statistic: t.t_stat,
            df: t.df,
            p_value: t.p_value,
            critical_value: t.t_crit,
            alpha: t.alpha,
            significant: t.significant,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Pearson's statistic `Σ (O - E)² / E` with `len - 1` degrees of freedom.
pub fn chi_square_gof(observed: &[f64], expected: &[f64], alpha: f64) -> Result<GofResult> {
    check_alpha(alpha)?;
    if observed.len() != expected.len() {
        return Err(Error::InvalidInput(format!(
            "observed has {} values but expected has {}",
            observed.len(),
            expected.len()
        )));
    }
    if observed.len() < 2 {
        return Err(Error::InvalidInput(
            "goodness of fit needs at least two observations".into(),
        ));
    }
    if let Some(e) = expected
        .iter()
        .find(|e| e.is_nan() || **e <= 0.0 || e.is_infinite())
    {
        return Err(Error::InvalidInput(format!(
            "expected value {e} is not positive"
        )));
    }
    if let Some(o) = observed.iter().find(|o| !o.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "observed value {o} is not finite"
        )));
    }
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let df = (observed.len() - 1) as u64;
    Ok(GofResult {
        statistic,
        df,
        p_value: chi_square_upper_p(statistic, df),
        critical_value: chi_square_critical(alpha, df),
        alpha,
        expected: expected.to_vec(),
    })
}

/// Goodness of fit against a constant expectation equal to the sample mean.
pub fn chi_square_gof_vs_mean(observed: &[f64], alpha: f64) -> Result<GofResult> {
    if observed.is_empty() {
        return Err(Error::InvalidInput("no observations".into()));
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    chi_square_gof(observed, &vec![mean; observed.len()], alpha)
}

/// Upper-`alpha` quantile of `χ²(df)`.
pub fn chi_square_critical(alpha: f64, df: u64) -> f64 {
    chi_square_upper_inverse(alpha, df)
}

/// Two-tailed critical value of `t(df)` at level `alpha`.
pub fn t_critical(alpha: f64, df: u64) -> f64 {
    student_t_two_tailed_inverse(alpha, df)
}

fn mean_and_ss(xs: &[f64]) -> (f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let ss = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, ss)
}

/// Equal-variance independent-samples t-test, two-tailed.
pub fn pooled_t_test(sample1: &[f64], sample2: &[f64], alpha: f64) -> Result<TTestResult> {
    check_alpha(alpha)?;
    let (n1, n2) = (sample1.len(), sample2.len());
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidInput(format!(
            "each sample needs at least two values (got {n1} and {n2})"
        )));
    }
    let (mean1, ss1) = mean_and_ss(sample1);
    let (mean2, ss2) = mean_and_ss(sample2);
    let df = (n1 + n2 - 2) as u64;
    let pooled_variance = (ss1 + ss2) / df as f64;
    let se = (pooled_variance * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let t_stat = if se == 0.0 {
        if mean1 != mean2 {
            return Err(Error::DegenerateVariance);
        }
        0.0
    } else {
        (mean1 - mean2) / se
    };
    let p_value = student_t_two_tailed_p(t_stat, df);
    Ok(TTestResult {
        n1,
        n2,
        df,
        mean1,
        mean2,
        pooled_variance,
        t_stat,
        t_crit: t_critical(alpha, df),
        p_value,
        alpha,
        significant: p_value < alpha,
    })
}
