//! End-to-end replication: discretize, count, estimate, find equilibrium,
//! test, and compare every figure against the published values.
//!
//! Two chains are analysed side by side. The *estimated* chain is fitted
//! from the series under the configured estimator. The *paper-mode* chain
//! is [`paper_matrix`] as printed. Paper-mode results never depend on the
//! estimator settings. Any published figure that the computation does not
//! reproduce within its print precision is recorded in
//! [`ReplicationReport::discrepancies`]. Nothing is reconciled silently.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::estimation::{
    count_transitions, estimate, paper_matrix, Denominator, TransitionCounts, ZeroRowPolicy,
};
use crate::inference::{
    chi_square_gof, chi_square_gof_vs_mean, pooled_t_test, GofResult, TTestResult,
};
use crate::special::chi_square_upper_p;
use crate::state_space::{
    default_state_space, discretize, CycleRecord, CycleSeries, Gender, StateSequence, StateSpace,
};
use crate::stochastic::{
    find_equilibrium, stationary_direct, ConvergenceReport, Distribution, StochasticMatrix,
    DEFAULT_EQUILIBRIUM_TOLERANCE,
};

/// Tolerance for figures printed at four decimals.
const FOUR_DP: f64 = 5e-5;
/// Tolerance for figures printed at three decimals.
const THREE_DP: f64 = 5e-4;

/// One graduating student's exit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentRecord {
    #[serde(rename = "cycle")]
    pub cycle_label: String,
    pub gender: Gender,
    pub cgpa: f64,
}

impl StudentRecord {
    pub fn new(cycle_label: impl Into<String>, gender: Gender, cgpa: f64) -> Result<Self> {
        if !(0.0..=5.0).contains(&cgpa) {
            return Err(Error::InvalidInput(format!(
                "CGPA {cgpa} is outside the 0.00-5.00 scale"
            )));
        }
        Ok(StudentRecord {
            cycle_label: cycle_label.into(),
            gender,
            cgpa,
        })
    }
}

/// Reads `cycle,gender,cgpa` CSV.
pub fn students_from_csv_reader<R: Read>(reader: R) -> Result<Vec<StudentRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    rdr.deserialize::<StudentRecord>()
        .map(|r| {
            let r = r?;
            StudentRecord::new(r.cycle_label, r.gender, r.cgpa)
        })
        .collect()
}

pub fn students_from_csv_path(path: impl AsRef<Path>) -> Result<Vec<StudentRecord>> {
    students_from_csv_reader(std::fs::File::open(path)?)
}

/// Gap series derived from student records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentGaps {
    /// Gaps rounded to two decimals.
    pub series: CycleSeries,
    /// `|mean(male) - mean(female)|` before rounding, in series order.
    pub unrounded: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Per cycle, the absolute difference of the gender means, rounded to two
/// decimals. Cycles keep their first-encountered order. Equal means favour
/// `male` and add a warning.
pub fn gaps_from_students(records: &[StudentRecord]) -> Result<StudentGaps> {
    // (cycle, male sum, male n, female sum, female n)
    let mut cycles: Vec<(String, f64, usize, f64, usize)> = Vec::new();
    for r in records {
        let idx = match cycles.iter().position(|c| c.0 == r.cycle_label) {
            Some(i) => i,
            None => {
                cycles.push((r.cycle_label.clone(), 0.0, 0, 0.0, 0));
                cycles.len() - 1
            }
        };
        let c = &mut cycles[idx];
        match r.gender {
            Gender::Male => {
                c.1 += r.cgpa;
                c.2 += 1;
            }
            Gender::Female => {
                c.3 += r.cgpa;
                c.4 += 1;
            }
        }
    }
    let mut out = Vec::with_capacity(cycles.len());
    let mut unrounded = Vec::with_capacity(cycles.len());
    let mut warnings = Vec::new();
    for (label, msum, mn, fsum, fn_) in cycles {
        if mn == 0 || fn_ == 0 {
            return Err(Error::MissingGender(label));
        }
        let male = msum / mn as f64;
        let female = fsum / fn_ as f64;
        let raw = (male - female).abs();
        let favoured = if female > male {
            Gender::Female
        } else {
            if male == female {
                warnings.push(format!(
                    "cycle {label}: equal means ({male:.4}), favoured set to male"
                ));
            }
            Gender::Male
        };
        unrounded.push(raw);
        out.push(CycleRecord {
            cycle_label: label,
            d: round2(raw),
            favoured,
        });
    }
    Ok(StudentGaps {
        series: CycleSeries::new(out)?,
        unrounded,
        warnings,
    })
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosurePrediction {
    pub cycles: usize,
    pub cycles_per_year: f64,
    /// `cycles / cycles_per_year`, rounded up to one decimal.
    pub years: f64,
}

/// Converts the equilibrium step into a closure horizon.
pub fn predict_closure(
    conv: &ConvergenceReport,
    cycles_per_year: f64,
) -> Result<ClosurePrediction> {
    if !(cycles_per_year > 0.0 && cycles_per_year.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "cycles per year must be positive, got {cycles_per_year}"
        )));
    }
    if !conv.converged {
        return Err(Error::NotConverged { steps: conv.steps });
    }
    let tenths = conv.steps as f64 / cycles_per_year * 10.0;
    // Guard against 70.00000000001 style noise before taking the ceiling.
    let years = (tenths - 1e-9).ceil() / 10.0;
    Ok(ClosurePrediction {
        cycles: conv.steps,
        cycles_per_year,
        years,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub denominator: Denominator,
    pub zero_row_policy: ZeroRowPolicy,
    pub tolerance: f64,
    pub max_steps: usize,
    pub cycles_per_year: f64,
    pub alpha: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            denominator: Denominator::OutTransitions,
            zero_row_policy: ZeroRowPolicy::SelfLoop,
            tolerance: DEFAULT_EQUILIBRIUM_TOLERANCE,
            max_steps: 100,
            cycles_per_year: 2.0,
            alpha: 0.05,
        }
    }
}

impl PipelineConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// The published figures, each held once, for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedFigures {
    pub transition_matrix: Vec<Vec<f64>>,
    pub equilibrium_power: usize,
    pub equilibrium_row: Vec<f64>,
    pub chi_square: PublishedChiSquare,
    pub t_test: PublishedTTest,
    pub closure_cycles: usize,
    pub closure_years: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedChiSquare {
    pub statistic: f64,
    pub p_value: f64,
    pub df: u64,
    pub critical_value: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedTTest {
    pub n_male: usize,
    pub n_female: usize,
    pub df: u64,
    pub t_stat: f64,
    pub t_crit: f64,
    pub p_value: f64,
    pub alpha: f64,
}

impl PublishedFigures {
    pub fn reference() -> Self {
        PublishedFigures {
            transition_matrix: paper_matrix().to_rows(),
            equilibrium_power: 15,
            equilibrium_row: vec![0.4997, 0.1669, 0.0835, 0.2499, 0.0],
            chi_square: PublishedChiSquare {
                statistic: 1.731,
                p_value: 0.99924,
                df: 11,
                critical_value: 19.675,
                alpha: 0.05,
            },
            t_test: PublishedTTest {
                n_male: 923,
                n_female: 183,
                df: 1104,
                t_stat: 0.4055,
                t_crit: 1.9621,
                p_value: 0.6852,
                alpha: 0.05,
            },
            closure_cycles: 15,
            closure_years: 8.0,
        }
    }
}

/// Equilibrium and stationary analysis of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainAnalysis {
    pub matrix: StochasticMatrix,
    pub convergence: ConvergenceReport,
    /// `None` when the chain has no unique stationary distribution.
    pub stationary: Option<Distribution>,
    pub closure: Option<ClosurePrediction>,
}

fn analyse(matrix: StochasticMatrix, config: &PipelineConfig) -> Result<ChainAnalysis> {
    let convergence = find_equilibrium(&matrix, config.tolerance, config.max_steps)?;
    let stationary = match stationary_direct(&matrix) {
        Ok(pi) => Some(pi),
        Err(Error::NotUnique) => None,
        Err(e) => return Err(e),
    };
    let closure = if convergence.converged {
        Some(predict_closure(&convergence, config.cycles_per_year)?)
    } else {
        None
    };
    Ok(ChainAnalysis {
        matrix,
        convergence,
        stationary,
        closure,
    })
}

/// Goodness of fit of the gaps against a constant mean, plus the tail
/// probability of the published statistic (`published.chi_square`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofSection {
    pub recomputed: GofResult,
    /// Same test with the expectation rounded to two decimals.
    pub statistic_with_rounded_mean: f64,
    pub p_value_at_published_statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub config: PipelineConfig,
    pub state_space: StateSpace,
    pub series: CycleSeries,
    /// Present when the series was derived from student records.
    pub unrounded_gaps: Option<Vec<f64>>,
    pub state_sequence: StateSequence,
    pub counts: TransitionCounts,
    pub estimated: ChainAnalysis,
    pub paper_mode: ChainAnalysis,
    pub gof: GofSection,
    pub ttest: Option<TTestResult>,
    /// Paper-mode closure horizon.
    pub closure_prediction: ClosurePrediction,
    pub published: PublishedFigures,
    pub warnings: Vec<String>,
    pub discrepancies: Vec<String>,
}

impl ReplicationReport {
    pub fn estimated_matrix(&self) -> &StochasticMatrix {
        &self.estimated.matrix
    }

    pub fn paper_mode_matrix(&self) -> &StochasticMatrix {
        &self.paper_mode.matrix
    }

    /// Canonical JSON: keys sorted, two-space indent.
    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)?)
    }
}

/// Runs the whole chain of analyses over `series` with the default state space.
pub fn replicate(
    series: &CycleSeries,
    students: Option<&[StudentRecord]>,
    config: &PipelineConfig,
) -> Result<ReplicationReport> {
    replicate_with_space(&default_state_space(), series, students, config)
}

/// Derives the series from student records, then replicates with the t-test.
pub fn replicate_from_students(
    students: &[StudentRecord],
    config: &PipelineConfig,
) -> Result<ReplicationReport> {
    let gaps = gaps_from_students(students).stage("gaps")?;
    let mut report = replicate(&gaps.series, Some(students), config)?;
    report.unrounded_gaps = Some(gaps.unrounded);
    report.warnings.extend(gaps.warnings);
    Ok(report)
}

pub fn replicate_with_space(
    space: &StateSpace,
    series: &CycleSeries,
    students: Option<&[StudentRecord]>,
    config: &PipelineConfig,
) -> Result<ReplicationReport> {
    if series.len() < 2 {
        return Err(Error::InsufficientTransitions.in_stage("input"));
    }
    let state_sequence = discretize(space, series).stage("discretize")?;
    let counts = count_transitions(&state_sequence, space).stage("count")?;
    let estimated_matrix =
        estimate(&counts, config.denominator, config.zero_row_policy).stage("estimate")?;

    let estimated = analyse(estimated_matrix, config).stage("estimated chain")?;
    let paper_mode = analyse(paper_matrix(), config).stage("paper-mode chain")?;

    let published = PublishedFigures::reference();
    let recomputed = chi_square_gof_vs_mean(&series.values(), config.alpha).stage("chi-square")?;
    let rounded_mean = round2(recomputed.expected[0]);
    let statistic_with_rounded_mean = if rounded_mean > 0.0 {
        chi_square_gof(
            &series.values(),
            &vec![rounded_mean; series.len()],
            config.alpha,
        )
        .stage("chi-square")?
        .statistic
    } else {
        f64::NAN
    };
    let gof = GofSection {
        recomputed,
        statistic_with_rounded_mean,
        p_value_at_published_statistic: chi_square_upper_p(
            published.chi_square.statistic,
            published.chi_square.df,
        ),
    };

    let ttest = match students {
        Some(students) => {
            let pick = |g: Gender| -> Vec<f64> {
                students
                    .iter()
                    .filter(|s| s.gender == g)
                    .map(|s| s.cgpa)
                    .collect()
            };
            Some(
                pooled_t_test(&pick(Gender::Male), &pick(Gender::Female), config.alpha)
                    .stage("t-test")?,
            )
        }
        None => None,
    };

    let closure_prediction = paper_mode
        .closure
        .ok_or(Error::NotConverged {
            steps: paper_mode.convergence.steps,
        })
        .stage("closure")?;

    let mut report = ReplicationReport {
        config: config.clone(),
        state_space: space.clone(),
        series: series.clone(),
        unrounded_gaps: None,
        state_sequence,
        counts,
        estimated,
        paper_mode,
        gof,
        ttest,
        closure_prediction,
        published,
        warnings: Vec::new(),
        discrepancies: Vec::new(),
    };
    report.discrepancies = find_discrepancies(&report);
    Ok(report)
}

fn fmt_row(row: &[f64]) -> String {
    let parts: Vec<String> = row.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}

fn find_discrepancies(r: &ReplicationReport) -> Vec<String> {
    let mut out = Vec::new();
    let pubf = &r.published;
    let labels: Vec<&str> = r.state_space.labels().collect();

    let est = &r.estimated.matrix;
    if est.order() == pubf.transition_matrix.len() {
        for (i, printed) in pubf.transition_matrix.iter().enumerate() {
            let row = est.row(i);
            let gap = row
                .iter()
                .zip(printed)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if gap > 1e-3 {
                out.push(format!(
                    "transition matrix row {}: estimated {} differs from printed {} (max |diff| {gap:.4})",
                    labels.get(i).copied().unwrap_or("?"),
                    fmt_row(row),
                    fmt_row(printed)
                ));
            }
        }
    } else {
        out.push(format!(
            "estimated chain has {} states, printed matrix has {}",
            est.order(),
            pubf.transition_matrix.len()
        ));
    }

    let conv = &r.paper_mode.convergence;
    if conv.steps != pubf.equilibrium_power || !conv.converged {
        out.push(format!(
            "equilibrium: column spread < {:e} first reached at power {}{}, printed power is {}",
            conv.tolerance,
            conv.steps,
            if conv.converged {
                ""
            } else {
                " (not converged)"
            },
            pubf.equilibrium_power
        ));
    }

    let p_pub = r.paper_mode.matrix.power(pubf.equilibrium_power);
    for (i, row) in p_pub.rows().enumerate() {
        for (j, (a, b)) in row.iter().zip(&pubf.equilibrium_row).enumerate() {
            if (a - b).abs() > FOUR_DP {
                out.push(format!(
                    "P^{} entry ({}, {}) = {a:.6} vs printed {b:.4} (|diff| {:.2e} > {FOUR_DP:e})",
                    pubf.equilibrium_power,
                    labels.get(i).copied().unwrap_or("?"),
                    labels.get(j).copied().unwrap_or("?"),
                    (a - b).abs()
                ));
            }
        }
    }

    if let Some(pi) = &r.paper_mode.stationary {
        for (j, (a, b)) in pi
            .probabilities()
            .iter()
            .zip(&pubf.equilibrium_row)
            .enumerate()
        {
            if (a - b).abs() > FOUR_DP {
                out.push(format!(
                    "stationary entry {} = {a:.8} vs printed {b:.4} (|diff| {:.3e} > {FOUR_DP:e})",
                    labels.get(j).copied().unwrap_or("?"),
                    (a - b).abs()
                ));
            }
        }
    }

    let g = &r.gof;
    if (g.recomputed.statistic - pubf.chi_square.statistic).abs() > THREE_DP {
        out.push(format!(
            "chi-square: recomputed {:.4} against expectation mean(d) = {:.6} ({:.4} with the mean rounded to two decimals), printed {} (expectation behind the printed value is not stated)",
            g.recomputed.statistic,
            g.recomputed.expected.first().copied().unwrap_or(f64::NAN),
            g.statistic_with_rounded_mean,
            pubf.chi_square.statistic
        ));
    }
    if (g.p_value_at_published_statistic - pubf.chi_square.p_value).abs() > THREE_DP {
        out.push(format!(
            "chi-square p at the printed statistic: {:.5} vs printed {}",
            g.p_value_at_published_statistic, pubf.chi_square.p_value
        ));
    }
    if g.recomputed.df == pubf.chi_square.df
        && (g.recomputed.critical_value - pubf.chi_square.critical_value).abs() > 5e-3
    {
        out.push(format!(
            "chi-square critical value {:.4} vs printed {}",
            g.recomputed.critical_value, pubf.chi_square.critical_value
        ));
    }

    let c = &r.closure_prediction;
    if c.cycles != pubf.closure_cycles || c.years != pubf.closure_years {
        out.push(format!(
            "closure: {} cycles / {} per year = {:.1} years; printed {} cycles, {} years (rounded up to whole years)",
            c.cycles, c.cycles_per_year, c.years, pubf.closure_cycles, pubf.closure_years
        ));
    }

    if let Some(t) = &r.ttest {
        let p = &pubf.t_test;
        if t.n1 != p.n_male || t.n2 != p.n_female {
            out.push(format!(
                "t-test sample sizes {}/{} vs printed {}/{}",
                t.n1, t.n2, p.n_male, p.n_female
            ));
        }
        if (t.t_stat - p.t_stat).abs() > FOUR_DP || (t.p_value - p.p_value).abs() > FOUR_DP {
            out.push(format!(
                "t-test: t = {:.4}, p = {:.4} vs printed t = {}, p = {}",
                t.t_stat, t.p_value, p.t_stat, p.p_value
            ));
        }
    }
    out
}

/// Plain-text rendering, four decimals throughout.
pub fn render_text(r: &ReplicationReport) -> String {
    let mut s = String::new();
    let labels: Vec<&str> = r.state_space.labels().collect();
    let _ = writeln!(s, "Series ({} cycles)", r.series.len());
    for (i, (rec, step)) in r
        .series
        .records()
        .iter()
        .zip(&r.state_sequence.steps)
        .enumerate()
    {
        let raw = r
            .unrounded_gaps
            .as_ref()
            .map(|u| format!("  (unrounded {:.6})", u[i]))
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "  {:<10} d = {:.2}  {:<6}  -> {}{raw}",
            rec.cycle_label,
            rec.d,
            rec.favoured.to_string(),
            step.state_label
        );
    }
    let _ = writeln!(s, "\nVisits      {:?}", r.counts.visits);
    let _ = writeln!(s, "Out totals  {:?}", r.counts.out_totals);
    let _ = writeln!(s, "Counts");
    for (l, row) in labels.iter().zip(&r.counts.counts) {
        let _ = writeln!(s, "  {l:<4} {row:?}");
    }
    for (title, a) in [
        (
            format!(
                "Estimated chain ({}, {})",
                r.config.denominator, r.config.zero_row_policy
            ),
            &r.estimated,
        ),
        (
            "Paper-mode chain (printed matrix)".to_string(),
            &r.paper_mode,
        ),
    ] {
        let _ = writeln!(s, "\n{title}");
        s.push_str(&render_matrix(&labels, &a.matrix));
        let conv = &a.convergence;
        let _ = writeln!(
            s,
            "  equilibrium: converged={} at power {} (tolerance {:e}), limit {}",
            conv.converged,
            conv.steps,
            conv.tolerance,
            fmt_row(conv.limit.probabilities())
        );
        match &a.stationary {
            Some(pi) => {
                let _ = writeln!(s, "  stationary:  {}", fmt_row(pi.probabilities()));
            }
            None => {
                let _ = writeln!(s, "  stationary:  not unique");
            }
        }
        if let Some(c) = &a.closure {
            let _ = writeln!(
                s,
                "  closure:     {} cycles, {:.1} years at {} cycles/year",
                c.cycles, c.years, c.cycles_per_year
            );
        }
    }
    let g = &r.gof.recomputed;
    let _ = writeln!(
        s,
        "\nChi-square GOF: statistic {:.4}, df {}, p {:.5}, critical {:.4} (alpha {}), significant {}",
        g.statistic, g.df, g.p_value, g.critical_value, g.alpha, g.significant()
    );
    let _ = writeln!(
        s,
        "  with the mean rounded to two decimals: statistic {:.4}",
        r.gof.statistic_with_rounded_mean
    );
    let _ = writeln!(
        s,
        "  printed statistic {:.4} has p {:.5}",
        r.published.chi_square.statistic, r.gof.p_value_at_published_statistic
    );
    match &r.ttest {
        Some(t) => {
            let _ = writeln!(
                s,
                "Pooled t-test: n {}/{}, df {}, t {:.4}, t-crit {:.4}, p {:.4}, significant {}",
                t.n1, t.n2, t.df, t.t_stat, t.t_crit, t.p_value, t.significant
            );
        }
        None => {
            let p = &r.published.t_test;
            let _ = writeln!(
                s,
                "Pooled t-test: no student data; printed reference n {}/{}, df {}, t {}, t-crit {}, p {}",
                p.n_male, p.n_female, p.df, p.t_stat, p.t_crit, p.p_value
            );
        }
    }
    let c = &r.closure_prediction;
    let _ = writeln!(
        s,
        "\nClosure prediction: {} cycles, {:.1} years",
        c.cycles, c.years
    );
    if !r.warnings.is_empty() {
        let _ = writeln!(s, "\nWarnings");
        for w in &r.warnings {
            let _ = writeln!(s, "  - {w}");
        }
    }
    let _ = writeln!(
        s,
        "\nDiscrepancies with published figures ({})",
        r.discrepancies.len()
    );
    for d in &r.discrepancies {
        let _ = writeln!(s, "  - {d}");
    }
    s
}

pub fn render_matrix(labels: &[&str], m: &StochasticMatrix) -> String {
    let mut s = String::new();
    let _ = write!(s, "  {:<5}", "");
    for l in labels.iter().take(m.order()) {
        let _ = write!(s, "{l:>8}");
    }
    s.push('\n');
    for (i, row) in m.rows().enumerate() {
        let _ = write!(s, "  {:<5}", labels.get(i).copied().unwrap_or(""));
        for x in row {
            let _ = write!(s, "{x:>8.4}");
        }
        s.push('\n');
    }
    s
}
