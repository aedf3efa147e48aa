//! Transition counting and the relative-frequency estimator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state_space::{StateSequence, StateSpace};
use crate::stochastic::StochasticMatrix;

/// Observed transitions between the states of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCounts {
    pub space: StateSpace,
    /// `counts[i][j]`: observed moves from state `i` to state `j`.
    pub counts: Vec<Vec<u64>>,
    /// Occurrences of each state, including a final one with no successor.
    pub visits: Vec<u64>,
    /// Occurrences of each state that have a successor.
    pub out_totals: Vec<u64>,
}

#[derive(Serialize)]
struct CountsJson<'a> {
    labels: Vec<&'a str>,
    counts: &'a [Vec<u64>],
    visits: &'a [u64],
    out_totals: &'a [u64],
}

impl Serialize for TransitionCounts {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CountsJson {
            labels: self.space.labels().collect(),
            counts: &self.counts,
            visits: &self.visits,
            out_totals: &self.out_totals,
        }
        .serialize(serializer)
    }
}

impl TransitionCounts {
    pub fn order(&self) -> usize {
        self.space.len()
    }

    pub fn transitions(&self) -> u64 {
        self.out_totals.iter().sum()
    }
}

/// Counts consecutive ordered pairs of `seq`.
pub fn count_transitions(seq: &StateSequence, space: &StateSpace) -> Result<TransitionCounts> {
    let r = space.len();
    let indices = seq
        .labels()
        .map(|l| {
            space
                .index_of_label(l)
                .ok_or_else(|| Error::UnknownState(l.to_owned()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut counts = vec![vec![0u64; r]; r];
    let mut visits = vec![0u64; r];
    let mut out_totals = vec![0u64; r];
    for &i in &indices {
        visits[i] += 1;
    }
    for pair in indices.windows(2) {
        counts[pair[0]][pair[1]] += 1;
        out_totals[pair[0]] += 1;
    }
    Ok(TransitionCounts {
        space: space.clone(),
        counts,
        visits,
        out_totals,
    })
}

/// Which per-state total divides the transition counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// Occurrences that have a successor. This is the maximum-likelihood estimator.
    #[default]
    OutTransitions,
    /// Every occurrence, including the last one in the series.
    TotalVisits,
}

/// How to complete a row whose counts do not account for all of its mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroRowPolicy {
    /// Missing mass stays in the current state.
    #[default]
    SelfLoop,
    /// Missing mass is spread evenly over all states.
    Uniform,
    /// Refuse to estimate.
    Error,
}

macro_rules! str_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(format!(
                        "expected one of: {}",
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

str_enum!(Denominator {
    Denominator::OutTransitions => "out_transitions",
    Denominator::TotalVisits => "total_visits",
});

str_enum!(ZeroRowPolicy {
    ZeroRowPolicy::SelfLoop => "self_loop",
    ZeroRowPolicy::Uniform => "uniform",
    ZeroRowPolicy::Error => "error",
});

/// Relative-frequency estimate `p_ij = counts[i][j] / D_i`.
///
/// Rows whose counts fall short of the denominator (no observations at all,
/// or a final visit without a successor under [`Denominator::TotalVisits`])
/// are completed according to `policy`.
pub fn estimate(
    counts: &TransitionCounts,
    denominator: Denominator,
    policy: ZeroRowPolicy,
) -> Result<StochasticMatrix> {
    let r = counts.order();
    let mut rows = Vec::with_capacity(r);
    for i in 0..r {
        let total = match denominator {
            Denominator::OutTransitions => counts.out_totals[i],
            Denominator::TotalVisits => counts.visits[i],
        };
        let mut row: Vec<f64> = if total == 0 {
            vec![0.0; r]
        } else {
            counts.counts[i]
                .iter()
                .map(|&c| c as f64 / total as f64)
                .collect()
        };
        let observed = counts.out_totals[i].min(total);
        if observed < total || total == 0 {
            let label = &counts.space.states()[i].label;
            let deficit = if total == 0 {
                1.0
            } else {
                (total - observed) as f64 / total as f64
            };
            match policy {
                ZeroRowPolicy::SelfLoop => row[i] += deficit,
                ZeroRowPolicy::Uniform => {
                    let share = deficit / r as f64;
                    row.iter_mut().for_each(|p| *p += share);
                }
                ZeroRowPolicy::Error => {
                    return Err(Error::DeficientRow {
                        state: label.clone(),
                        reason: if total == 0 {
                            "no observed exits".into()
                        } else {
                            format!("{} of {total} visits have no successor", total - observed)
                        },
                    })
                }
            }
        }
        rows.push(row);
    }
    StochasticMatrix::new(rows)
}

/// The fitted five-state matrix exactly as published (three-decimal row
/// `s1`), carrying the published-source row slack. Equilibrium replication
/// starts from this matrix.
pub fn paper_matrix() -> StochasticMatrix {
    StochasticMatrix::as_published(vec![
        vec![0.333, 0.167, 0.167, 0.333, 0.0],
        vec![0.5, 0.0, 0.0, 0.5, 0.0],
        vec![0.0, 1.0, 0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0, 0.0],
    ])
    .expect("published matrix is within slack")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::{default_state_space, discretize, CycleSeries, State};

    fn fixture_counts() -> TransitionCounts {
        let space = default_state_space();
        let seq = discretize(&space, &CycleSeries::table1()).unwrap();
        count_transitions(&seq, &space).unwrap()
    }

    #[test]
    fn fixture_transitions() {
        // Pairs enumerated by hand from s5 s1 s2 s1 s1 s4 s1 s1 s3 s2 s4 s1:
        // s5>s1 s1>s2 s2>s1 s1>s1 s1>s4 s4>s1 s1>s1 s1>s3 s3>s2 s2>s4 s4>s1
        let c = fixture_counts();
        assert_eq!(
            c.counts,
            vec![
                vec![2, 1, 1, 1, 0],
                vec![1, 0, 0, 1, 0],
                vec![0, 1, 0, 0, 0],
                vec![2, 0, 0, 0, 0],
                vec![1, 0, 0, 0, 0],
            ]
        );
        assert_eq!(c.visits, vec![6, 2, 1, 2, 1]);
        assert_eq!(c.out_totals, vec![5, 2, 1, 2, 1]);
        assert_eq!(c.transitions(), 11);
    }

    #[test]
    fn single_element_sequence() {
        let space = default_state_space();
        let c = count_transitions(&StateSequence::from_labels(["s3"]), &space).unwrap();
        assert!(c.counts.iter().flatten().all(|&x| x == 0));
        assert_eq!(c.visits, vec![0, 0, 1, 0, 0]);
        assert_eq!(c.out_totals, vec![0; 5]);
    }

    #[test]
    fn unknown_label() {
        let err = count_transitions(
            &StateSequence::from_labels(["s1", "s9"]),
            &default_state_space(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownState(ref l) if l == "s9"));
    }

    #[test]
    fn estimator_rows() {
        let p = estimate(
            &fixture_counts(),
            Denominator::OutTransitions,
            ZeroRowPolicy::SelfLoop,
        )
        .unwrap();
        assert_eq!(p.row(0), &[0.4, 0.2, 0.2, 0.2, 0.0]);
        assert_eq!(p.row(1), &[0.5, 0.0, 0.0, 0.5, 0.0]);
        assert_eq!(p.row(2), &[0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.row(3), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.row(4), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        // Every state was left at least once, so the strict policy also works.
        assert_eq!(
            estimate(
                &fixture_counts(),
                Denominator::OutTransitions,
                ZeroRowPolicy::Error
            )
            .unwrap(),
            p
        );
    }

    #[test]
    fn total_visits_mode() {
        let c = fixture_counts();
        // s1 has six visits, the last without a successor.
        let err = estimate(&c, Denominator::TotalVisits, ZeroRowPolicy::Error).unwrap_err();
        assert!(err.to_string().contains("s1"), "{err}");
        let p = estimate(&c, Denominator::TotalVisits, ZeroRowPolicy::SelfLoop).unwrap();
        let expected = [3.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.0];
        for (a, b) in p.row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(p.row(1), &[0.5, 0.0, 0.0, 0.5, 0.0]);
        let u = estimate(&c, Denominator::TotalVisits, ZeroRowPolicy::Uniform).unwrap();
        let expected = [
            2.0 / 6.0 + 1.0 / 30.0,
            1.0 / 6.0 + 1.0 / 30.0,
            1.0 / 6.0 + 1.0 / 30.0,
            1.0 / 6.0 + 1.0 / 30.0,
            1.0 / 30.0,
        ];
        for (a, b) in u.row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn all_self_loops() {
        let space = default_state_space();
        let c = count_transitions(&StateSequence::from_labels(["s1", "s1", "s1"]), &space).unwrap();
        for mode in [Denominator::OutTransitions, Denominator::TotalVisits] {
            let p = estimate(&c, mode, ZeroRowPolicy::SelfLoop).unwrap();
            assert_eq!(p.entry(0, 0), 1.0);
            assert_eq!(p.entry(3, 3), 1.0);
        }
    }

    #[test]
    fn unseen_state_policies() {
        let space = StateSpace::new(vec![
            State::new("a", 0.0, 1.0),
            State::new("b", 1.0, 2.0),
            State::new("c", 2.0, 3.0),
        ])
        .unwrap();
        let c = count_transitions(&StateSequence::from_labels(["a", "b", "a"]), &space).unwrap();
        let p = estimate(&c, Denominator::OutTransitions, ZeroRowPolicy::Uniform).unwrap();
        assert_eq!(p.row(2), &[1.0 / 3.0; 3]);
        let err = estimate(&c, Denominator::OutTransitions, ZeroRowPolicy::Error).unwrap_err();
        assert!(matches!(err, Error::DeficientRow { ref state, .. } if state == "c"));
    }

    #[test]
    fn printed_matrix() {
        let p = paper_matrix();
        assert_eq!(p.entry(1, 0), 0.5);
        assert_eq!(p.row(3), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(p.is_published());
        for row in p.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-3);
        }
    }

    #[test]
    fn counts_json() {
        let json = serde_json::to_value(fixture_counts()).unwrap();
        assert_eq!(
            json["labels"],
            serde_json::json!(["s1", "s2", "s3", "s4", "s5"])
        );
        assert_eq!(json["visits"], serde_json::json!([6, 2, 1, 2, 1]));
        assert_eq!(json["out_totals"], serde_json::json!([5, 2, 1, 2, 1]));
        assert_eq!(json["counts"][3], serde_json::json!([2, 0, 0, 0, 0]));
    }

    #[test]
    fn enum_names() {
        assert_eq!(
            "total_visits".parse::<Denominator>().unwrap(),
            Denominator::TotalVisits
        );
        assert_eq!(ZeroRowPolicy::SelfLoop.to_string(), "self_loop");
        assert!("bogus".parse::<ZeroRowPolicy>().is_err());
    }
}
