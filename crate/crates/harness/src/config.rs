//! Run configuration: a flat `key = value` file, overridable by flags.

use std::path::Path;

use kepler_core::prover::{ProverOptions, DEFAULT_SLACK};
use kepler_core::score::{QuadPoly, SRuleKind, ScoreParams};
use kepler_core::voronoi::DEFAULT_CUTOFF;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub q2: f64,
    pub q1: f64,
    pub q0: f64,
    pub m: f64,
    pub r: f64,
    pub s_rule: String,
    /// Neighbor cutoff for Voronoi construction.
    pub cutoff: f64,
    /// Max width of a δ residual interval.
    pub identity_tol: f64,
    /// Bound on `|Σ ε|` over a periodic domain.
    pub eps_sum_tol: f64,
    /// Radius of the periodic extension used for ε-sums.
    pub extension_radius: f64,
    pub slack: f64,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub lp: bool,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let p = ScoreParams::default();
        let o = ProverOptions::default();
        Config {
            q2: p.l.q2,
            q1: p.l.q1,
            q0: p.l.q0,
            m: p.m,
            r: p.r,
            s_rule: p.s_rule.name().to_string(),
            cutoff: DEFAULT_CUTOFF,
            identity_tol: 1e-10,
            eps_sum_tol: 1e-8,
            extension_radius: 12.0,
            slack: DEFAULT_SLACK,
            max_depth: o.max_depth,
            max_leaves: o.max_leaves,
            lp: o.use_lp,
            seed: 0,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| HarnessError::usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::usage(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn score_params(&self) -> Result<ScoreParams> {
        let rule = SRuleKind::parse(&self.s_rule)
            .ok_or_else(|| HarnessError::usage(format!("unknown s_rule `{}`", self.s_rule)))?;
        ScoreParams::new(QuadPoly::new(self.q2, self.q1, self.q0), self.m, self.r, rule).map_err(HarnessError::usage)
    }

    pub fn prover_options(&self) -> ProverOptions {
        ProverOptions {
            max_depth: self.max_depth,
            max_leaves: self.max_leaves,
            use_lp: self.lp,
            slack: self.slack,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_file_overrides_defaults() {
        let c = Config::parse("r = 2.3\nm = 0.0\nlp = false\n").unwrap();
        assert_eq!(c.r, 2.3);
        assert_eq!(c.q1, -1.0);
        assert!(!c.prover_options().use_lp);
        assert_eq!(c.score_params().unwrap().m, 0.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::parse("colour = 1").is_err());
        assert!(Config::parse("r = 3.0").unwrap().score_params().is_err());
        assert!(Config::parse("s_rule = \"nope\"").unwrap().score_params().is_err());
    }
}
