//! Command-line front end. [`run`] parses arguments, dispatches one
//! subcommand and returns the exit code with the rendered output, so the
//! binary and the tests share a single path.
//!
//! Exit codes: 0 on success, 1 on domain errors, 2 on usage errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::estimation::{count_transitions, estimate, paper_matrix, Denominator, ZeroRowPolicy};
use crate::inference::{chi_square_gof, chi_square_gof_vs_mean, pooled_t_test, TestReport};
use crate::pipeline::{
    predict_closure, render_matrix, render_text, replicate_from_students, replicate_with_space,
    students_from_csv_path, PipelineConfig, StudentRecord,
};
use crate::simulation::{occupancy, simulate};
use crate::state_space::{default_state_space, discretize, CycleSeries, Gender, State, StateSpace};
use crate::stochastic::{
    evolve, find_equilibrium, stationary_direct, Distribution, StochasticMatrix,
};

#[derive(Debug, Parser)]
#[command(
    name = "gapchain",
    version,
    about = "Markov chain analysis of a per-cycle gap series"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map each cycle's gap onto a state.
    Discretize(SeriesArgs),
    /// Count transitions and estimate the transition matrix.
    Estimate(EstimateArgs),
    /// Raise a matrix to the n-th power.
    Power(PowerArgs),
    /// Stationary distribution (direct solve) and equilibrium search.
    Stationary(EquilibriumArgs),
    /// Evolve a point mass for n steps.
    Evolve(EvolveArgs),
    /// Chi-square goodness of fit of the gaps.
    Gof(GofArgs),
    /// Pooled two-sample t-test, male against female CGPA.
    Ttest(TtestArgs),
    /// Simulate a seeded trajectory.
    Simulate(SimulateArgs),
    /// Cycles (and years) until n-step predictions stop depending on the start.
    PredictClosure(ClosureArgs),
    /// Run the full replication.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    /// Gap series CSV (`cycle,d,favoured`); the bundled fixture when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Student CSV (`cycle,gender,cgpa`) to derive the gaps from.
    #[arg(long, conflicts_with = "input")]
    pub students: Option<PathBuf>,
    /// State space JSON (`[{"label", "lower", "upper"}, ...]`).
    #[arg(long)]
    pub state_space: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[arg(long)]
    pub denominator: Option<Denominator>,
    #[arg(long)]
    pub zero_row_policy: Option<ZeroRowPolicy>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatrixArg {
    /// Matrix JSON path, or `paper` for the published matrix.
    #[arg(long, default_value = "paper")]
    pub matrix: String,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub matrix: MatrixArg,
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct EquilibriumArgs {
    #[command(flatten)]
    pub matrix: MatrixArg,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub matrix: MatrixArg,
    /// Start state, as a label (`s2`) or zero-based index.
    #[arg(long)]
    pub start: String,
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    /// Gap series CSV whose `d` column is tested; the bundled fixture when omitted.
    #[arg(long, visible_alias = "input")]
    pub observed: Option<PathBuf>,
    /// Comma-separated expected values; the series mean for every cycle when omitted.
    #[arg(long, value_delimiter = ',')]
    pub expected: Option<Vec<f64>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    /// Student CSV (`cycle,gender,cgpa`).
    #[arg(long, visible_alias = "input")]
    pub students: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub matrix: MatrixArg,
    #[arg(long)]
    pub start: String,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ClosureArgs {
    #[command(flatten)]
    pub matrix: MatrixArg,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub cycles_per_year: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub denominator: Option<Denominator>,
    #[arg(long)]
    pub zero_row_policy: Option<ZeroRowPolicy>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub cycles_per_year: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

/// Exit code plus what would go to standard output and standard error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            return if code == 0 {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome {
                    code: 2,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    match dispatch(&cli) {
        Ok(stdout) => Outcome {
            code: 0,
            stdout,
            stderr: String::new(),
        },
        Err(e) => Outcome {
            code: 1,
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn dispatch(cli: &Cli) -> Result<String> {
    let fmt = cli.format;
    match &cli.command {
        Command::Discretize(a) => cmd_discretize(a, fmt),
        Command::Estimate(a) => cmd_estimate(a, fmt),
        Command::Power(a) => cmd_power(a, fmt),
        Command::Stationary(a) => cmd_stationary(a, fmt),
        Command::Evolve(a) => cmd_evolve(a, fmt),
        Command::Gof(a) => cmd_gof(a, fmt),
        Command::Ttest(a) => cmd_ttest(a, fmt),
        Command::Simulate(a) => cmd_simulate(a, fmt),
        Command::PredictClosure(a) => cmd_closure(a, fmt),
        Command::Replicate(a) => cmd_replicate(a, fmt),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    // Round-trip through Value for sorted keys.
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::from_json_path(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_space(path: Option<&Path>) -> Result<StateSpace> {
    match path {
        Some(p) => StateSpace::from_json_str(&std::fs::read_to_string(p)?),
        None => Ok(default_state_space()),
    }
}

/// Reads a matrix file. Exact row sums are tried first; a matrix that only
/// passes the published-source slack is accepted as such.
fn load_matrix(source: &str) -> Result<StochasticMatrix> {
    if source == "paper" {
        return Ok(paper_matrix());
    }
    let text = std::fs::read_to_string(source)?;
    match serde_json::from_str::<StochasticMatrix>(&text) {
        Ok(m) => Ok(m),
        Err(strict) => {
            #[derive(serde::Deserialize)]
            struct Raw {
                order: usize,
                entries: Vec<Vec<f64>>,
            }
            let raw: Raw = serde_json::from_str(&text)?;
            if raw.entries.len() != raw.order {
                return Err(Error::InvalidMatrix(format!(
                    "declared order {} but found {} rows",
                    raw.order,
                    raw.entries.len()
                )));
            }
            StochasticMatrix::as_published(raw.entries)
                .map_err(|_| Error::InvalidMatrix(strict.to_string()))
        }
    }
}

fn labels_for(order: usize) -> Vec<String> {
    let space = default_state_space();
    if order == space.len() {
        space.labels().map(str::to_owned).collect()
    } else {
        (1..=order).map(|i| format!("s{i}")).collect()
    }
}

fn parse_state(s: &str, labels: &[String]) -> Result<usize> {
    if let Some(i) = labels.iter().position(|l| l == s) {
        return Ok(i);
    }
    match s.parse::<usize>() {
        Ok(i) if i < labels.len() => Ok(i),
        _ => Err(Error::UnknownState(s.to_owned())),
    }
}

fn matrix_text(m: &StochasticMatrix) -> String {
    let labels = labels_for(m.order());
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    render_matrix(&refs, m)
}

fn distribution_text(labels: &[String], d: &Distribution) -> String {
    let mut s = String::new();
    for (l, p) in labels.iter().zip(d.probabilities()) {
        s.push_str(&format!("  {l:<5}{p:>8.4}\n"));
    }
    s
}

struct LoadedSeries {
    series: CycleSeries,
    students: Option<Vec<StudentRecord>>,
}

fn load_series(a: &SeriesArgs) -> Result<LoadedSeries> {
    if let Some(p) = &a.students {
        let students = students_from_csv_path(p)?;
        let series = crate::pipeline::gaps_from_students(&students)?.series;
        return Ok(LoadedSeries {
            series,
            students: Some(students),
        });
    }
    let series = match &a.input {
        Some(p) => CycleSeries::from_csv_path(p)?,
        None => CycleSeries::table1(),
    };
    Ok(LoadedSeries {
        series,
        students: None,
    })
}

fn cmd_discretize(a: &SeriesArgs, fmt: Format) -> Result<String> {
    let space = load_space(a.state_space.as_deref())?;
    let series = load_series(a)?.series;
    let seq = discretize(&space, &series)?;
    let visits = seq.visit_totals(&space);
    match fmt {
        Format::Json => to_json(&json!({
            "sequence": seq,
            "labels": space.labels().collect::<Vec<_>>(),
            "visits": visits,
        })),
        Format::Text => {
            let mut s = String::new();
            for (rec, step) in series.records().iter().zip(&seq.steps) {
                s.push_str(&format!(
                    "{:<10} {:.2}  {}\n",
                    rec.cycle_label, rec.d, step.state_label
                ));
            }
            s.push_str("visits:");
            for (l, v) in space.labels().zip(&visits) {
                s.push_str(&format!(" {l}={v}"));
            }
            s.push('\n');
            Ok(s)
        }
    }
}

fn cmd_estimate(a: &EstimateArgs, fmt: Format) -> Result<String> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(d) = a.denominator {
        config.denominator = d;
    }
    if let Some(z) = a.zero_row_policy {
        config.zero_row_policy = z;
    }
    let space = load_space(a.series.state_space.as_deref())?;
    let series = load_series(&a.series)?.series;
    let seq = discretize(&space, &series)?;
    let counts = count_transitions(&seq, &space)?;
    let p = estimate(&counts, config.denominator, config.zero_row_policy)?;
    match fmt {
        Format::Json => to_json(&json!({
            "denominator": config.denominator,
            "zero_row_policy": config.zero_row_policy,
            "counts": counts,
            "matrix": p,
        })),
        Format::Text => {
            let labels: Vec<&str> = space.labels().collect();
            let mut s = format!(
                "denominator {}, zero-row policy {}\ncounts\n",
                config.denominator, config.zero_row_policy
            );
            for (l, row) in labels.iter().zip(&counts.counts) {
                s.push_str(&format!("  {l:<5}{row:?}\n"));
            }
            s.push_str(&format!(
                "visits {:?}\nout totals {:?}\nmatrix\n",
                counts.visits, counts.out_totals
            ));
            s.push_str(&render_matrix(&labels, &p));
            Ok(s)
        }
    }
}

fn cmd_power(a: &PowerArgs, fmt: Format) -> Result<String> {
    let p = load_matrix(&a.matrix.matrix)?;
    let out = p.power(a.n);
    match fmt {
        Format::Json => to_json(&out),
        Format::Text => Ok(format!("P^{}\n{}", a.n, matrix_text(&out))),
    }
}

fn cmd_stationary(a: &EquilibriumArgs, fmt: Format) -> Result<String> {
    let config = load_config(a.config.as_deref())?;
    let p = load_matrix(&a.matrix.matrix)?;
    let pi = stationary_direct(&p)?;
    let conv = find_equilibrium(
        &p,
        a.tolerance.unwrap_or(config.tolerance),
        a.max_steps.unwrap_or(config.max_steps),
    )?;
    let labels = labels_for(p.order());
    match fmt {
        Format::Json => to_json(&json!({
            "stationary": pi,
            "equilibrium": {
                "converged": conv.converged,
                "steps": conv.steps,
                "tolerance": conv.tolerance,
                "limit": conv.limit,
                "final_matrix": conv.final_matrix,
            },
        })),
        Format::Text => Ok(format!(
            "stationary (direct solve)\n{}equilibrium: converged={} at power {} (tolerance {:e})\nlimit\n{}",
            distribution_text(&labels, &pi),
            conv.converged,
            conv.steps,
            conv.tolerance,
            distribution_text(&labels, &conv.limit)
        )),
    }
}

fn cmd_evolve(a: &EvolveArgs, fmt: Format) -> Result<String> {
    let p = load_matrix(&a.matrix.matrix)?;
    let labels = labels_for(p.order());
    let start = parse_state(&a.start, &labels)?;
    let out = evolve(&Distribution::point_mass(p.order(), start)?, &p, a.n)?;
    match fmt {
        Format::Json => to_json(&out),
        Format::Text => Ok(format!(
            "distribution after {} steps from {}\n{}",
            a.n,
            labels[start],
            distribution_text(&labels, &out)
        )),
    }
}

fn gof_text(r: &TestReport, extra: &str) -> String {
    format!(
        "{extra}statistic {:.4}\ndf {}\np-value {:.5}\ncritical value {:.4} (alpha {})\nsignificant {}\n",
        r.statistic, r.df, r.p_value, r.critical_value, r.alpha, r.significant
    )
}

fn cmd_gof(a: &GofArgs, fmt: Format) -> Result<String> {
    let config = load_config(a.config.as_deref())?;
    let alpha = a.alpha.unwrap_or(config.alpha);
    let series = match &a.observed {
        Some(p) => CycleSeries::from_csv_path(p)?,
        None => CycleSeries::table1(),
    };
    let observed = series.values();
    let g = match &a.expected {
        Some(e) => chi_square_gof(&observed, e, alpha)?,
        None => chi_square_gof_vs_mean(&observed, alpha)?,
    };
    let report = TestReport::from(&g);
    match fmt {
        Format::Json => to_json(&report),
        Format::Text => Ok(gof_text(&report, "chi-square goodness of fit\n")),
    }
}

fn cmd_ttest(a: &TtestArgs, fmt: Format) -> Result<String> {
    let config = load_config(a.config.as_deref())?;
    let alpha = a.alpha.unwrap_or(config.alpha);
    let students = students_from_csv_path(&a.students)?;
    let pick = |g: Gender| -> Vec<f64> {
        students
            .iter()
            .filter(|s| s.gender == g)
            .map(|s| s.cgpa)
            .collect()
    };
    let t = pooled_t_test(&pick(Gender::Male), &pick(Gender::Female), alpha)?;
    let report = TestReport::from(&t);
    match fmt {
        Format::Json => to_json(&report),
        Format::Text => Ok(format!(
            "pooled t-test, male (n={}) vs female (n={})\nt-stat {:.4}\ndf {}\nt-crit {:.4} (alpha {})\np-value {:.4}\nsignificant {}\n",
            t.n1, t.n2, t.t_stat, t.df, t.t_crit, t.alpha, t.p_value, t.significant
        )),
    }
}

fn cmd_simulate(a: &SimulateArgs, fmt: Format) -> Result<String> {
    let p = load_matrix(&a.matrix.matrix)?;
    let labels = labels_for(p.order());
    let start = parse_state(&a.start, &labels)?;
    let traj = simulate(&p, start, a.steps, a.seed)?;
    match fmt {
        Format::Json => to_json(&json!({
            "seed": traj.seed,
            "states": traj.states.iter().map(|&s| labels[s].as_str()).collect::<Vec<_>>(),
            "occupancy": occupancy(&traj, p.order())?,
        })),
        Format::Text => {
            let space = StateSpace::new(
                labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| State::new(l.clone(), i as f64, i as f64 + 1.0))
                    .collect(),
            )?;
            let mut buf = Vec::new();
            traj.write_csv(&space, &mut buf)?;
            Ok(String::from_utf8(buf).expect("csv output is utf-8"))
        }
    }
}

fn cmd_closure(a: &ClosureArgs, fmt: Format) -> Result<String> {
    let config = load_config(a.config.as_deref())?;
    let p = load_matrix(&a.matrix.matrix)?;
    let conv = find_equilibrium(
        &p,
        a.tolerance.unwrap_or(config.tolerance),
        a.max_steps.unwrap_or(config.max_steps),
    )?;
    let c = predict_closure(&conv, a.cycles_per_year.unwrap_or(config.cycles_per_year))?;
    match fmt {
        Format::Json => to_json(&c),
        Format::Text => Ok(format!(
            "closure after {} cycles = {:.1} years at {} cycles per year\n",
            c.cycles, c.years, c.cycles_per_year
        )),
    }
}

fn cmd_replicate(a: &ReplicateArgs, fmt: Format) -> Result<String> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(v) = a.denominator {
        config.denominator = v;
    }
    if let Some(v) = a.zero_row_policy {
        config.zero_row_policy = v;
    }
    if let Some(v) = a.tolerance {
        config.tolerance = v;
    }
    if let Some(v) = a.max_steps {
        config.max_steps = v;
    }
    if let Some(v) = a.cycles_per_year {
        config.cycles_per_year = v;
    }
    if let Some(v) = a.alpha {
        config.alpha = v;
    }
    let space = load_space(a.series.state_space.as_deref())?;
    let loaded = load_series(&a.series)?;
    let report = match &loaded.students {
        Some(students) if a.series.state_space.is_none() => {
            replicate_from_students(students, &config)?
        }
        Some(students) => replicate_with_space(&space, &loaded.series, Some(students), &config)?,
        None => replicate_with_space(&space, &loaded.series, None, &config)?,
    };
    match fmt {
        Format::Json => Ok(report.to_json()? + "\n"),
        Format::Text => Ok(render_text(&report)),
    }
}
