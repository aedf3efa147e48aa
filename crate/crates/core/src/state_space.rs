//! Labeled value intervals and the discretization of a gap series into a
//! sequence of states.
//!
//! Intervals are half-open, `[lower, upper)`. Boundary comparisons are exact
//! (no epsilon): the bundled data carries two decimals, and custom spaces
//! should place bounds with that in mind.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, NearestInterval, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
}

impl State {
    pub fn new(label: impl Into<String>, lower: f64, upper: f64) -> Self {
        State {
            label: label.into(),
            lower,
            upper,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value < self.upper
    }

    fn distance(&self, value: f64) -> f64 {
        if value < self.lower {
            self.lower - value
        } else if value >= self.upper {
            value - self.upper
        } else {
            0.0
        }
    }
}

/// An ordered set of disjoint, uniquely labeled intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<State>", into = "Vec<State>")]
pub struct StateSpace {
    states: Vec<State>,
}

impl TryFrom<Vec<State>> for StateSpace {
    type Error = Error;

    fn try_from(states: Vec<State>) -> Result<Self> {
        StateSpace::new(states)
    }
}

impl From<StateSpace> for Vec<State> {
    fn from(space: StateSpace) -> Self {
        space.states
    }
}

impl StateSpace {
    pub fn new(states: Vec<State>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidStateSpace("no states".into()));
        }
        for s in &states {
            if !(s.lower.is_finite() && s.upper.is_finite() && s.lower < s.upper) {
                return Err(Error::InvalidStateSpace(format!(
                    "state {} has bounds [{}, {})",
                    s.label, s.lower, s.upper
                )));
            }
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].iter().any(|t| t.label == s.label) {
                return Err(Error::InvalidStateSpace(format!(
                    "duplicate label {}",
                    s.label
                )));
            }
        }
        for pair in states.windows(2) {
            if pair[1].lower < pair[0].upper {
                return Err(Error::InvalidStateSpace(format!(
                    "states {} and {} are unsorted or overlap",
                    pair[0].label, pair[1].label
                )));
            }
        }
        Ok(StateSpace { states })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.states.iter().map(|s| s.label.as_str())
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s.label == label)
    }

    /// Index of the state containing `value`.
    pub fn index_of(&self, value: f64) -> Result<usize> {
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("value {value} is not finite")));
        }
        self.states
            .iter()
            .position(|s| s.contains(value))
            .ok_or_else(|| Error::Unclassifiable {
                value,
                cycle: None,
                nearest: self.nearest(value),
            })
    }

    /// Label of the state containing `value`.
    pub fn classify(&self, value: f64) -> Result<&str> {
        self.index_of(value).map(|i| self.states[i].label.as_str())
    }

    fn nearest(&self, value: f64) -> NearestInterval {
        let s = self
            .states
            .iter()
            .min_by(|a, b| a.distance(value).total_cmp(&b.distance(value)))
            .expect("state space is non-empty");
        NearestInterval {
            label: s.label.clone(),
            lower: s.lower,
            upper: s.upper,
        }
    }
}

/// The five bands used for the graduation gap. `[0.40, 0.50)` is absent
/// because no cycle ever fell there.
pub fn default_state_space() -> StateSpace {
    StateSpace::new(vec![
        State::new("s1", 0.01, 0.10),
        State::new("s2", 0.10, 0.20),
        State::new("s3", 0.20, 0.30),
        State::new("s4", 0.30, 0.40),
        State::new("s5", 0.50, 0.60),
    ])
    .expect("default bands are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl std::fmt::Display for Gender {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
        })
    }
}

/// One row of the gap series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    #[serde(rename = "cycle")]
    pub cycle_label: String,
    pub d: f64,
    pub favoured: Gender,
}

/// Chronological per-cycle gaps. Order is transition order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<CycleRecord>", into = "Vec<CycleRecord>")]
pub struct CycleSeries {
    records: Vec<CycleRecord>,
}

impl TryFrom<Vec<CycleRecord>> for CycleSeries {
    type Error = Error;

    fn try_from(records: Vec<CycleRecord>) -> Result<Self> {
        CycleSeries::new(records)
    }
}

impl From<CycleSeries> for Vec<CycleRecord> {
    fn from(series: CycleSeries) -> Self {
        series.records
    }
}

const TABLE1_CSV: &str = include_str!("../fixtures/table1.csv");

impl CycleSeries {
    pub fn new(records: Vec<CycleRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !(r.d.is_finite() && r.d >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "cycle {} has gap {}, expected a non-negative number",
                    r.cycle_label, r.d
                )));
            }
            if records[..i].iter().any(|o| o.cycle_label == r.cycle_label) {
                return Err(Error::InvalidInput(format!(
                    "duplicate cycle label {}",
                    r.cycle_label
                )));
            }
        }
        Ok(CycleSeries { records })
    }

    /// The twelve graduation cycles bundled as `fixtures/table1.csv`.
    pub fn table1() -> Self {
        Self::from_csv_reader(TABLE1_CSV.as_bytes()).expect("bundled fixture parses")
    }

    /// Raw text of the bundled fixture.
    pub fn table1_csv() -> &'static str {
        TABLE1_CSV
    }

    /// Reads `cycle,d,favoured` CSV.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["cycle", "d", "favoured"] {
            return Err(Error::InvalidInput(format!(
                "expected header `cycle,d,favoured`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let records = rdr
            .deserialize::<CycleRecord>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(records)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn records(&self) -> &[CycleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceStep {
    #[serde(rename = "cycle")]
    pub cycle_label: String,
    #[serde(rename = "state")]
    pub state_label: String,
}

/// A series mapped onto state labels, same length and order as its source.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateSequence {
    pub steps: Vec<SequenceStep>,
}

impl StateSequence {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        StateSequence {
            steps: labels
                .into_iter()
                .enumerate()
                .map(|(i, s)| SequenceStep {
                    cycle_label: format!("t{i}"),
                    state_label: s.into(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.state_label.as_str())
    }

    /// Occurrences of each state of `space`, in space order. Labels not in the
    /// space are ignored.
    pub fn visit_totals(&self, space: &StateSpace) -> Vec<usize> {
        let mut totals = vec![0; space.len()];
        for label in self.labels() {
            if let Some(i) = space.index_of_label(label) {
                totals[i] += 1;
            }
        }
        totals
    }
}

/// Classifies every record of `series`, keeping order.
pub fn discretize(space: &StateSpace, series: &CycleSeries) -> Result<StateSequence> {
    let steps = series
        .records()
        .iter()
        .map(|r| {
            let state = space.classify(r.d).map_err(|e| match e {
                Error::Unclassifiable { value, nearest, .. } => Error::Unclassifiable {
                    value,
                    cycle: Some(r.cycle_label.clone()),
                    nearest,
                },
                other => other,
            })?;
            Ok(SequenceStep {
                cycle_label: r.cycle_label.clone(),
                state_label: state.to_owned(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StateSequence { steps })
}
