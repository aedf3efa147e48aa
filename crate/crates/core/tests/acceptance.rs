//! Acceptance criteria, one line per check.
//!
//! Runs without the libtest harness so every line is printed whether it
//! passes or not. The process exits non-zero if any check fails.

mod common;

use std::time::{Duration, Instant};

use gapchain::{
    chi_square_critical, chi_square_upper_p, count_transitions, default_state_space, discretize,
    estimate, find_equilibrium, occupancy, paper_matrix, replicate, simulate, stationary_direct,
    student_t_two_tailed_p, t_critical, CycleSeries, Denominator, PipelineConfig, SplitMix64,
    State, StateSequence, StateSpace, StochasticMatrix, ZeroRowPolicy,
};

/// The published series, transcribed: (cycle, d, favoured).
const PUBLISHED_SERIES: [(&str, &str, &str); 12] = [
    ("07/08", "0.52", "Male"),
    ("08/09", "0.06", "Male"),
    ("09/10", "0.14", "Male"),
    ("10/11", "0.06", "Male"),
    ("11/12/A", "0.08", "Female"),
    ("11/12/B", "0.36", "Female"),
    ("12/13/A", "0.08", "Male"),
    ("12/13/B", "0.04", "Male"),
    ("13/14/A", "0.29", "Female"),
    ("13/14/B", "0.10", "Female"),
    ("14/15/A", "0.35", "Male"),
    ("14/15/B", "0.01", "Female"),
];

const EQUILIBRIUM_ROW: [f64; 5] = [0.4997, 0.1669, 0.0835, 0.2499, 0.0];

struct Tally {
    failed: usize,
    total: usize,
}

impl Tally {
    fn check(&mut self, id: &str, what: &str, ok: bool, detail: String) {
        self.total += 1;
        if !ok {
            self.failed += 1;
        }
        println!(
            "{} {id:<3} {what}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
    }

    fn timed(&mut self, id: &str, start: Instant, limit: Duration) {
        let took = start.elapsed();
        self.check(
            id,
            "runtime",
            took < limit,
            format!("{took:?} (limit {limit:?})"),
        );
    }
}

fn criterion_1(t: &mut Tally) {
    let start = Instant::now();
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.csv"))
        .expect("fixture present");
    let mut lines = text.lines();
    let header_ok = lines.next() == Some("cycle,d,favoured");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let rows_ok = rows.len() == 12
        && rows.iter().zip(PUBLISHED_SERIES).all(|(r, (c, d, g))| {
            r.len() == 3 && r[0] == c && r[1] == d && r[2] == g.to_lowercase()
        });
    let bundled_ok = text == CycleSeries::table1_csv();
    t.check(
        "1a",
        "fixture reproduces the 12 table rows",
        header_ok && rows_ok && bundled_ok,
        format!(
            "{} rows, header {header_ok}, bundled copy identical {bundled_ok}",
            rows.len()
        ),
    );

    let space = default_state_space();
    let seq = discretize(&space, &CycleSeries::table1()).expect("fixture discretizes");
    let visits = seq.visit_totals(&space);
    t.check(
        "1b",
        "visit totals (6,2,1,2,1)",
        visits == [6, 2, 1, 2, 1],
        format!("{visits:?}"),
    );
    t.timed("1c", start, Duration::from_secs(1));
}

fn criterion_2(t: &mut Tally) {
    let space = default_state_space();
    let seq = discretize(&space, &CycleSeries::table1()).unwrap();
    let counts = count_transitions(&seq, &space).unwrap();
    let p = estimate(
        &counts,
        Denominator::OutTransitions,
        ZeroRowPolicy::SelfLoop,
    )
    .unwrap();
    let printed = paper_matrix();
    let tail_ok = (1..5).all(|i| p.row(i) == printed.row(i));
    t.check(
        "2a",
        "estimated rows s2-s5 equal the printed rows",
        tail_ok,
        format!(
            "{:?}",
            (1..5).map(|i| p.row(i).to_vec()).collect::<Vec<_>>()
        ),
    );
    // Oracle: the eleven consecutive pairs leaving s1 are s1->s2, s1->s1,
    // s1->s4, s1->s1, s1->s3; five exits.
    let s1 = [2.0 / 5.0, 1.0 / 5.0, 1.0 / 5.0, 1.0 / 5.0, 0.0];
    t.check(
        "2b",
        "estimated row s1 = (0.4, 0.2, 0.2, 0.2, 0)",
        p.row(0) == s1,
        format!("{:?}", p.row(0)),
    );
    let report = replicate(&CycleSeries::table1(), None, &PipelineConfig::default()).unwrap();
    let flagged = report
        .discrepancies
        .iter()
        .find(|d| d.starts_with("transition matrix row s1"));
    t.check(
        "2c",
        "report flags row s1 against the printed row",
        flagged.is_some(),
        flagged
            .cloned()
            .unwrap_or_else(|| "no discrepancy recorded".into()),
    );
}

fn criterion_3(t: &mut Tally) {
    let start = Instant::now();
    let p = paper_matrix();
    let p15 = p.power(15);
    let mut worst = (0.0_f64, 0, 0);
    for (i, row) in p15.rows().enumerate() {
        for (j, (a, b)) in row.iter().zip(EQUILIBRIUM_ROW).enumerate() {
            if (a - b).abs() > worst.0 {
                worst = ((a - b).abs(), i, j);
            }
        }
    }
    t.check(
        "3a",
        "every row of P^15 within 5e-5 of the printed equilibrium row",
        worst.0 <= 5e-5,
        format!(
            "max |diff| {:.3e} at (s{}, s{}), entry {:.8}",
            worst.0,
            worst.1 + 1,
            worst.2 + 1,
            p15.entry(worst.1, worst.2)
        ),
    );

    let pi = stationary_direct(&p).unwrap();
    let gap = pi.max_abs_diff(&EQUILIBRIUM_ROW);
    t.check(
        "3b",
        "stationary distribution within 1e-4 of the printed row",
        gap <= 1e-4,
        format!("{:?}, max |diff| {gap:.3e}", pi.probabilities()),
    );

    let oracle = common::first_equilibrium_power(&common::printed_rows(), 1e-4, 100);
    let conv = find_equilibrium(&p, 1e-4, 100).unwrap();
    t.check(
        "3c",
        "equilibrium at tolerance 1e-4 reached at the brute-force step",
        conv.converged && Some(conv.steps) == oracle,
        format!(
            "library {} / oracle {oracle:?} (printed figure: 15)",
            conv.steps
        ),
    );
    t.timed("3d", start, Duration::from_secs(1));
}

fn within(t: &mut Tally, id: &str, what: &str, got: f64, want: f64, tol: f64) {
    t.check(
        id,
        what,
        (got - want).abs() <= tol,
        format!("{got:.6} vs {want} ± {tol:e}"),
    );
}

fn criterion_4(t: &mut Tally) {
    within(
        t,
        "4a",
        "chi-square upper p(1.731, 11)",
        chi_square_upper_p(1.731, 11),
        0.99924,
        5e-4,
    );
    within(
        t,
        "4b",
        "chi-square critical(0.05, 11)",
        chi_square_critical(0.05, 11),
        19.675,
        5e-3,
    );
    within(
        t,
        "4c",
        "two-tailed t p(0.4055, 1104)",
        student_t_two_tailed_p(0.4055, 1104),
        0.6852,
        5e-4,
    );
    within(
        t,
        "4d",
        "two-tailed t critical(0.05, 1104)",
        t_critical(0.05, 1104),
        1.9621,
        1e-3,
    );

    let report = replicate(&CycleSeries::table1(), None, &PipelineConfig::default()).unwrap();
    let json = report.to_json().unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let recomputed = v["gof"]["recomputed"]["statistic"].as_f64();
    let cited = v["published"]["chi_square"]["statistic"].as_f64();
    let note = report
        .discrepancies
        .iter()
        .find(|d| d.starts_with("chi-square: recomputed"));
    t.check(
        "4e",
        "report carries recomputed and cited chi-square, gap flagged",
        recomputed.is_some() && cited == Some(1.731) && note.is_some(),
        format!("recomputed {recomputed:?}, cited {cited:?}"),
    );
}

fn random_chain(order: usize, seed: u64) -> StochasticMatrix {
    let mut rng = SplitMix64::new(seed);
    let rows = (0..order)
        .map(|_| {
            let w: Vec<f64> = (0..order).map(|_| 0.05 + rng.next_f64()).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect();
    StochasticMatrix::new(rows).unwrap()
}

fn criterion_5(t: &mut Tally) {
    let chains: Vec<StochasticMatrix> = (0..50)
        .map(|k| random_chain(2 + k % 5, 1000 + k as u64))
        .collect();

    let closure = chains.iter().all(|p| {
        (1..=30).all(|n| {
            p.power(n)
                .rows()
                .all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-9)
        })
    });
    t.check(
        "5a",
        "row-stochastic closure of powers",
        closure,
        "50 chains, n = 1..30".into(),
    );

    let mut law = 0.0_f64;
    for p in &chains {
        for m in 0..=20 {
            for n in [0, 1, 7, 20] {
                law = law.max(
                    p.power(m)
                        .multiply(&p.power(n))
                        .unwrap()
                        .max_abs_diff(&p.power(m + n))
                        .unwrap(),
                );
            }
        }
    }
    t.check(
        "5b",
        "exponent law P^m P^n = P^(m+n)",
        law < 1e-10,
        format!("max |diff| {law:.2e}"),
    );

    let mut residual = 0.0_f64;
    for p in chains.iter().chain([&paper_matrix()]) {
        let pi = stationary_direct(p).unwrap();
        let v = pi.probabilities();
        for j in 0..p.order() {
            let image: f64 = (0..p.order()).map(|i| v[i] * p.entry(i, j)).sum();
            residual = residual.max((image - v[j]).abs());
        }
    }
    t.check(
        "5c",
        "stationary fixed-point residual < 1e-9",
        residual < 1e-9,
        format!("{residual:.2e}"),
    );

    let grid: Vec<f64> = (1..400).map(|k| k as f64 * 0.25).collect();
    let mono = [1u64, 2, 5, 11, 30, 200].iter().all(|&df| {
        grid.windows(2)
            .all(|w| chi_square_upper_p(w[1], df) <= chi_square_upper_p(w[0], df))
            && grid
                .windows(2)
                .all(|w| student_t_two_tailed_p(w[1], df) <= student_t_two_tailed_p(w[0], df))
    });
    let mut trip = 0.0_f64;
    for df in [1u64, 2, 5, 11, 30, 200, 1104] {
        for p in [0.001, 0.01, 0.05, 0.1, 0.5, 0.9] {
            trip = trip.max((chi_square_upper_p(chi_square_critical(p, df), df) - p).abs());
            trip = trip.max((student_t_two_tailed_p(t_critical(p, df), df) - p).abs());
        }
    }
    t.check(
        "5d",
        "tail functions monotone, inverses round-trip",
        mono && trip < 1e-9,
        format!("monotone {mono}, max round-trip error {trip:.2e}"),
    );

    let mut est_err = 0.0_f64;
    for (order, chain_seed, seed) in [(3, 101, 1), (4, 202, 2), (5, 303, 3)] {
        let p = random_chain(order, chain_seed);
        let traj = simulate(&p, 0, 100_000, seed).unwrap();
        let space = StateSpace::new(
            (0..order)
                .map(|i| State::new(format!("x{i}"), i as f64, i as f64 + 1.0))
                .collect(),
        )
        .unwrap();
        let seq = StateSequence::from_labels(traj.states.iter().map(|&s| format!("x{s}")));
        let counts = count_transitions(&seq, &space).unwrap();
        let est = estimate(&counts, Denominator::OutTransitions, ZeroRowPolicy::Error).unwrap();
        est_err = est_err.max(est.max_abs_diff(&p).unwrap());
    }
    t.check(
        "5e",
        "estimator recovers 100,000-step simulated chains within 0.01",
        est_err < 0.01,
        format!("max entry error {est_err:.4}"),
    );

    let mut occ_err = 0.0_f64;
    let mut subjects = vec![(paper_matrix(), 7)];
    subjects
        .extend([(2, 11, 21), (4, 12, 22), (6, 13, 23)].map(|(o, cs, s)| (random_chain(o, cs), s)));
    for (p, seed) in subjects {
        let pi = stationary_direct(&p).unwrap();
        let occ = occupancy(&simulate(&p, 0, 200_000, seed).unwrap(), p.order()).unwrap();
        occ_err = occ_err.max(occ.max_abs_diff(pi.probabilities()));
    }
    t.check(
        "5f",
        "occupancy of 200,000-step runs within 0.01 of stationary",
        occ_err < 0.01,
        format!("max entry error {occ_err:.4}"),
    );
}

fn main() {
    let start = Instant::now();
    let mut t = Tally {
        failed: 0,
        total: 0,
    };
    criterion_1(&mut t);
    criterion_2(&mut t);
    criterion_3(&mut t);
    criterion_4(&mut t);
    criterion_5(&mut t);
    t.timed("5g", start, Duration::from_secs(60));
    println!(
        "SKIP 6   raw-CGPA t statistic 0.4055: per-student data unpublished; covered by 4c and 4d"
    );
    println!(
        "\nacceptance: {} of {} checks passed",
        t.total - t.failed,
        t.total
    );
    if t.failed > 0 {
        std::process::exit(1);
    }
}
