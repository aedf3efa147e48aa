//! Seeded Monte Carlo trajectories of a chain.
//!
//! # Generator
//!
//! Draws come from SplitMix64, fixed here so other implementations can
//! reproduce trajectories bit for bit:
//!
//! ```text
//! state  = state + 0x9E3779B97F4A7C15            (wrapping)
//! z      = state
//! z      = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (wrapping)
//! z      = (z ^ (z >> 27)) * 0x94D049BB133111EB  (wrapping)
//! output = z ^ (z >> 31)
//! uniform = (output >> 11) * 2^-53               in [0, 1)
//! ```
//!
//! The initial state is the seed. Reference draws:
//!
//! | seed | first five `uniform` draws |
//! |------|----------------------------|
//! | 0 | 0.8833108082136426, 0.43152799704850997, 0.026433771592597743, 0.9708819781538285, 0.10634669156721244 |
//! | 42 | 0.7415648787718233, 0.1599103928769201, 0.27860113025513866, 0.34419071652363753, 0.03803016854024621 |
//! | 1234567 | 0.3500795420214081, 0.17364409667091263, 0.5322073040624192, 0.24900765738229136, 0.889529490618583 |
//!
//! Each transition consumes exactly one draw. The successor of state `i` is
//! the first `j` with `u < p_i0 + … + p_ij`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state_space::StateSpace;
use crate::stochastic::{Distribution, StochasticMatrix};

/// SplitMix64 pseudo-random generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Independent generator seeded from this one's next output.
    pub fn split(&mut self) -> SplitMix64 {
        SplitMix64::new(self.next_u64())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub states: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Writes a `# seed: N` comment line followed by `step,state_label` rows.
    pub fn write_csv<W: Write>(&self, space: &StateSpace, mut out: W) -> Result<()> {
        writeln!(out, "# seed: {}", self.seed)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "state_label"])?;
        for (step, &s) in self.states.iter().enumerate() {
            let label = space
                .states()
                .get(s)
                .map(|st| st.label.as_str())
                .ok_or_else(|| Error::InvalidInput(format!("state index {s} outside the space")))?;
            w.write_record([step.to_string().as_str(), label])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the chain `p` for `steps` transitions from `start`.
///
/// The trajectory holds `steps + 1` states, the start included.
pub fn simulate(p: &StochasticMatrix, start: usize, steps: usize, seed: u64) -> Result<Trajectory> {
    let order = p.order();
    if start >= order {
        return Err(Error::InvalidInput(format!(
            "start state {start} out of range for order {order}"
        )));
    }
    let cumulative: Vec<Vec<f64>> = p
        .rows()
        .map(|row| {
            row.iter()
                .scan(0.0, |acc, &x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    for (i, cum) in cumulative.iter().enumerate() {
        let total = *cum.last().expect("non-empty row");
        if total < 1.0 - 1e-9 {
            return Err(Error::DeficientRow {
                state: i.to_string(),
                reason: format!("row sums to {total}, cannot sample"),
            });
        }
    }
    let last_positive: Vec<usize> = p
        .rows()
        .map(|row| row.iter().rposition(|&x| x > 0.0).expect("row has mass"))
        .collect();

    let mut rng = SplitMix64::new(seed);
    let mut states = Vec::with_capacity(steps + 1);
    let mut current = start;
    states.push(current);
    for _ in 0..steps {
        let u = rng.next_f64();
        current = cumulative[current]
            .iter()
            .position(|&c| u < c)
            .unwrap_or(last_positive[current]);
        states.push(current);
    }
    Ok(Trajectory { seed, states })
}

/// Fraction of the trajectory spent in each of `order` states.
pub fn occupancy(traj: &Trajectory, order: usize) -> Result<Distribution> {
    if traj.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    let mut hits = vec![0usize; order];
    for &s in &traj.states {
        *hits.get_mut(s).ok_or_else(|| {
            Error::InvalidInput(format!("state index {s} out of range for order {order}"))
        })? += 1;
    }
    let n = traj.len() as f64;
    Distribution::new(hits.into_iter().map(|h| h as f64 / n).collect())
}
