//! Binary particle swarm optimization over pixel patterns.
//!
//! [`Objective`] maps a search bitstring to a canonical key and a cost;
//! [`Swarm`] owns particles, the evaluation cache and the history.
//! [`AntennaObjective`] couples the swarm to the two-element pipeline.

mod antenna;
mod cache;
mod swarm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use antenna::{cost_from_sparams, evaluate_cost, AntennaObjective, CostSpec, Evaluator, FdtdEvaluator};
pub use cache::{cache_key, EvalCache, Evaluation};
pub use swarm::{run, HistoryRow, Objective, OneMax, OptResult, Particle, Swarm, CHECKPOINT_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transfer {
    /// Set the bit with probability `1 / (1 + e^-v)`.
    SShaped,
    /// Flip the bit with probability `|tanh v|`.
    VShaped,
}

impl std::str::FromStr for Transfer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s" | "s_shaped" | "s-shaped" => Ok(Self::SShaped),
            "v" | "v_shaped" | "v-shaped" => Ok(Self::VShaped),
            _ => Err(Error::invalid(format!("unknown transfer function {s:?}"))),
        }
    }
}

impl std::fmt::Display for Transfer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SShaped => "s_shaped",
            Self::VShaped => "v_shaped",
        })
    }
}

pub fn transfer(v: f64, kind: Transfer) -> f64 {
    match kind {
        Transfer::SShaped => 1.0 / (1.0 + (-v).exp()),
        Transfer::VShaped => v.tanh().abs(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub n_particles: usize,
    pub n_iters: usize,
    /// Inertia at the first and last iteration, linear in between.
    pub w_start: f64,
    pub w_end: f64,
    pub c1: f64,
    pub c2: f64,
    pub v_max: f64,
    pub transfer: Transfer,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            n_particles: 30,
            n_iters: 200,
            w_start: 0.9,
            w_end: 0.4,
            c1: 2.0,
            c2: 2.0,
            v_max: 6.0,
            transfer: Transfer::SShaped,
            seed: 1,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::invalid(format!("n_particles must be at least 2, got {}", self.n_particles)));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::invalid(format!("v_max must be positive, got {}", self.v_max)));
        }
        if !(self.w_start > 0.0 && self.w_end > 0.0 && self.w_start.is_finite() && self.w_end.is_finite()) {
            return Err(Error::invalid("inertia weights must be positive"));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.c1.is_finite() && self.c2.is_finite()) {
            return Err(Error::invalid("acceleration coefficients must be non-negative"));
        }
        Ok(())
    }

    /// Inertia used by step `t` (1-based) of the run.
    pub fn inertia(&self, t: usize) -> f64 {
        if self.n_iters <= 1 {
            return self.w_start;
        }
        let frac = (t.saturating_sub(1)).min(self.n_iters - 1) as f64 / (self.n_iters - 1) as f64;
        self.w_start + (self.w_end - self.w_start) * frac
    }
}

/// `v' = clamp(w v + c1 r1 (pbest - x) + c2 r2 (gbest - x), +-v_max)`, in place.
#[allow(clippy::too_many_arguments)]
pub fn velocity_update(
    v: &mut [f64],
    x: &[bool],
    pbest: &[bool],
    gbest: &[bool],
    w: f64,
    (c1, c2): (f64, f64),
    v_max: f64,
    r1: &[f64],
    r2: &[f64],
) {
    let n = v.len();
    assert!(x.len() == n && pbest.len() == n && gbest.len() == n && r1.len() == n && r2.len() == n);
    let b = |on: bool| f64::from(u8::from(on));
    for d in 0..n {
        let nv = w * v[d] + c1 * r1[d] * (b(pbest[d]) - b(x[d])) + c2 * r2[d] * (b(gbest[d]) - b(x[d]));
        v[d] = nv.clamp(-v_max, v_max);
    }
}

/// S-shaped: bit set iff `r < S(v)`. V-shaped: bit flipped iff `r < V(v)`.
pub fn position_update(x: &mut [bool], v: &[f64], kind: Transfer, r: &[f64]) {
    assert!(x.len() == v.len() && r.len() == v.len());
    for d in 0..x.len() {
        let p = transfer(v[d], kind);
        match kind {
            Transfer::SShaped => x[d] = r[d] < p,
            Transfer::VShaped => {
                if r[d] < p {
                    x[d] = !x[d];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transfer_values() {
        assert_eq!(transfer(0.0, Transfer::SShaped), 0.5);
        assert_eq!(transfer(0.0, Transfer::VShaped), 0.0);
        let expect = 1.0 / (1.0 + (-6.0f64).exp());
        assert_eq!(transfer(6.0, Transfer::SShaped), expect);
        assert!((transfer(6.0, Transfer::SShaped) - 0.997_527_376_843_365_2).abs() < 1e-15);
        assert_eq!(transfer(-2.0, Transfer::VShaped), transfer(2.0, Transfer::VShaped));
    }

    #[test]
    fn zero_attraction_only_decays() {
        let mut v = vec![1.0, -7.0, 3.0];
        let x = [true, false, true];
        velocity_update(&mut v, &x, &x, &x, 0.5, (2.0, 2.0), 6.0, &[1.0; 3], &[1.0; 3]);
        assert_eq!(v, vec![0.5, -3.5, 1.5]);
    }

    #[test]
    fn hand_computed_attraction() {
        let mut v = vec![0.0];
        velocity_update(&mut v, &[false], &[true], &[true], 0.9, (2.0, 2.0), 6.0, &[1.0], &[1.0]);
        assert_eq!(v, vec![4.0]);
        let mut v = vec![5.0];
        velocity_update(&mut v, &[false], &[true], &[true], 0.9, (2.0, 2.0), 6.0, &[1.0], &[1.0]);
        assert_eq!(v, vec![6.0]);
    }

    #[test]
    fn position_rules() {
        let mut x = vec![true];
        position_update(&mut x, &[-6.0], Transfer::SShaped, &[0.9]);
        assert_eq!(x, vec![false]);
        let mut x = vec![true, false];
        position_update(&mut x, &[0.0, 0.0], Transfer::VShaped, &[0.0, 0.0]);
        assert_eq!(x, vec![true, false]);
        let mut x = vec![true, false];
        position_update(&mut x, &[6.0, -6.0], Transfer::VShaped, &[0.5, 0.5]);
        assert_eq!(x, vec![false, true]);
    }

    #[test]
    fn inertia_schedule() {
        let c = SwarmConfig {
            n_iters: 11,
            ..SwarmConfig::default()
        };
        assert_eq!(c.inertia(1), 0.9);
        assert!((c.inertia(11) - 0.4).abs() < 1e-15);
        assert!((c.inertia(6) - 0.65).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SwarmConfig::default().validate().is_ok());
        let bad = SwarmConfig {
            n_particles: 1,
            ..SwarmConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!("V_SHAPED".parse::<Transfer>().unwrap() == Transfer::VShaped);
        assert!("x".parse::<Transfer>().is_err());
    }
}
