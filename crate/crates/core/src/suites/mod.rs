//! Scenario-driven check suites. Each returns one report per property checked.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::report::{RunParams, VerificationReport};

pub mod equivalence;
pub mod kernel;
pub mod mollify;
pub mod pressure;
pub mod riesz;
pub mod semigroup;

pub use equivalence::{run_equivalence_suite, EquivalenceRun};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Kernel,
    Riesz,
    Pressure,
    Semigroup,
    Mollify,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Kernel, Suite::Riesz, Suite::Pressure, Suite::Semigroup, Suite::Mollify];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Kernel => "kernel",
            Suite::Riesz => "riesz",
            Suite::Pressure => "pressure",
            Suite::Semigroup => "semigroup",
            Suite::Mollify => "mollify",
        }
    }

    pub fn run(self, cfg: &ScenarioConfig) -> Result<Vec<VerificationReport>> {
        match self {
            Suite::Kernel => kernel::run(cfg),
            Suite::Riesz => riesz::run(cfg),
            Suite::Pressure => pressure::run(cfg),
            Suite::Semigroup => semigroup::run(cfg),
            Suite::Mollify => mollify::run(cfg),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}' (kernel, riesz, pressure, semigroup, mollify)")))
    }
}

/// Deterministic generator for one suite; `salt` separates independent streams.
pub(crate) fn suite_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub(crate) fn params(cfg: &ScenarioConfig, grid: Option<usize>) -> RunParams {
    RunParams { grid, eps: cfg.operator.eps, rho_max: cfg.operator.rho_max, seed: Some(cfg.seed) }
}

/// Relative `ℓ²` distance of `a` from `b` after removing the mean difference.
pub(crate) fn rel_l2_mod_const(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len() as f64;
    let shift = a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / m;
    let mb = b.iter().sum::<f64>() / m;
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y - shift).powi(2)).sum();
    let den: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// `a` strictly decreasing, or already at zero.
pub(crate) fn decreasing(a: &[f64]) -> bool {
    a.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))
}
