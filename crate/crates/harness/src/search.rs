//! Parameter search over `(q2, q1, q0, M, r)`.
//!
//! The objective of a parameter point is the smallest `margin.lo` over every
//! scored center of every sample packing. Results are numerical evidence only.

use kepler_core::decimal::format_f64;
use kepler_core::score::{QuadPoly, SRuleKind, ScoreParams};
use kepler_core::Interval;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::patches;
use crate::scoring::{prepare, score_prepared, Prepared};
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Grid,
    Random,
}

/// Search specification. In grid mode each list is a set of values; in
/// random mode each list gives the `[min, max]` range to sample from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    #[serde(default = "zero_list")]
    pub q2: Vec<f64>,
    #[serde(default = "zero_list")]
    pub q1: Vec<f64>,
    #[serde(default = "zero_list")]
    pub q0: Vec<f64>,
    #[serde(default = "zero_list")]
    pub m: Vec<f64>,
    pub r: Vec<f64>,
    pub packings: Vec<String>,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_rule")]
    pub s_rule: String,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_extension")]
    pub extension_radius: f64,
}

fn zero_list() -> Vec<f64> {
    vec![0.0]
}
fn default_strategy() -> Strategy {
    Strategy::Grid
}
fn default_count() -> usize {
    100
}
fn default_rule() -> String {
    SRuleKind::LongestEdge.name().to_string()
}
fn default_cutoff() -> f64 {
    kepler_core::voronoi::DEFAULT_CUTOFF
}
fn default_extension() -> f64 {
    12.0
}

impl SearchSpec {
    pub fn parse(text: &str) -> Result<SearchSpec> {
        let spec: SearchSpec = toml::from_str(text).map_err(|e| HarnessError::usage(format!("search spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [("q2", &self.q2), ("q1", &self.q1), ("q0", &self.q0), ("m", &self.m), ("r", &self.r)];
        for (name, list) in lists {
            if list.is_empty() || list.iter().any(|x| !x.is_finite()) {
                return Err(HarnessError::usage(format!("`{name}` needs finite values")));
            }
        }
        let sqrt8 = Interval::sqrt8();
        if let Some(r) = self.r.iter().find(|&&r| !(2.0..=sqrt8.hi()).contains(&r)) {
            return Err(HarnessError::usage(format!("r = {r} outside [2, √8]")));
        }
        if self.count == 0 {
            return Err(HarnessError::usage("count must be at least 1"));
        }
        if self.packings.is_empty() {
            return Err(HarnessError::usage("no sample packings"));
        }
        SRuleKind::parse(&self.s_rule).ok_or_else(|| HarnessError::usage(format!("unknown s_rule `{}`", self.s_rule)))?;
        Ok(())
    }

    fn rule(&self) -> SRuleKind {
        SRuleKind::parse(&self.s_rule).expect("validated")
    }

    /// Parameter points in evaluation order.
    pub fn points(&self) -> Vec<ScoreParams> {
        let rule = self.rule();
        let mk = |q2, q1, q0, m, r| ScoreParams {
            l: QuadPoly::new(q2, q1, q0),
            m,
            r,
            s_rule: rule,
        };
        match self.strategy {
            Strategy::Grid => {
                let mut out = Vec::new();
                for &q2 in &self.q2 {
                    for &q1 in &self.q1 {
                        for &q0 in &self.q0 {
                            for &m in &self.m {
                                for &r in &self.r {
                                    out.push(mk(q2, q1, q0, m, r));
                                }
                            }
                        }
                    }
                }
                out
            }
            Strategy::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let range = |v: &[f64]| {
                    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi)
                };
                let ranges = [range(&self.q2), range(&self.q1), range(&self.q0), range(&self.m), range(&self.r)];
                (0..self.count)
                    .map(|_| {
                        let x: Vec<f64> = ranges
                            .iter()
                            .map(|&(lo, hi)| if lo < hi { rng.gen_range(lo..=hi) } else { lo })
                            .collect();
                        mk(x[0], x[1], x[2], x[3], x[4])
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchRow {
    pub rank: usize,
    pub q2: f64,
    pub q1: f64,
    pub q0: f64,
    pub m: f64,
    pub r: f64,
    pub min_margin_lo: String,
    pub worst_packing: String,
    pub worst_center: usize,
}

#[derive(Debug, Clone)]
struct Evaluated {
    index: usize,
    params: ScoreParams,
    value: f64,
    packing: usize,
    center: usize,
}

/// Rank every parameter point by its worst margin, best first.
pub fn run_search(spec: &SearchSpec) -> Result<Vec<SearchRow>> {
    spec.validate()?;
    let prepared: Vec<Prepared> = spec
        .packings
        .iter()
        .map(|name| prepare(&patches::resolve(name)?, spec.cutoff, spec.extension_radius))
        .collect::<Result<_>>()?;
    if prepared.iter().all(|p| p.centers.is_empty()) {
        return Err(HarnessError::usage("sample packings have no interior centers"));
    }
    let points = spec.points();
    let mut evaluated = points
        .par_iter()
        .enumerate()
        .map(|(index, params)| {
            let mut best: Option<(f64, usize, usize)> = None;
            for (k, prep) in prepared.iter().enumerate() {
                for rep in score_prepared(prep, params)? {
                    let v = rep.margin.lo();
                    if best.map_or(true, |(b, _, _)| v < b) {
                        best = Some((v, k, rep.center));
                    }
                }
            }
            let (value, packing, center) = best.expect("some packing has centers");
            Ok(Evaluated {
                index,
                params: *params,
                value,
                packing,
                center,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    evaluated.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.index.cmp(&b.index)));
    Ok(evaluated
        .into_iter()
        .enumerate()
        .map(|(rank, e)| SearchRow {
            rank: rank + 1,
            q2: e.params.l.q2,
            q1: e.params.l.q1,
            q0: e.params.l.q0,
            m: e.params.m,
            r: e.params.r,
            min_margin_lo: format_f64(e.value),
            worst_packing: spec.packings[e.packing].clone(),
            worst_center: e.center,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_specs() {
        assert!(SearchSpec::parse("r = [3.0]\npackings = [\"fcc:4\"]").is_err());
        assert!(SearchSpec::parse("r = [2.5]\npackings = []").is_err());
        assert!(SearchSpec::parse("r = [2.5]\npackings = [\"fcc:4\"]\ncount = 0\nstrategy = \"random\"").is_err());
        assert!(SearchSpec::parse("r = [2.5]\npackings = [\"fcc:4\"]\nbogus = 1").is_err());
    }

    #[test]
    fn grid_and_random_points() {
        let spec = SearchSpec::parse("q1 = [-1.0, 0.0]\nm = [0.0, 1.0]\nr = [2.3, 2.51]\npackings = [\"fcc:4\"]").unwrap();
        assert_eq!(spec.points().len(), 8);
        let spec = SearchSpec::parse("q1 = [-1.0, 0.0]\nr = [2.3, 2.51]\npackings = [\"fcc:4\"]\nstrategy = \"random\"\ncount = 5\nseed = 3").unwrap();
        let pts = spec.points();
        assert_eq!(pts.len(), 5);
        assert!(pts.iter().all(|p| (2.3..=2.51).contains(&p.r) && (-1.0..=0.0).contains(&p.l.q1)));
        assert_eq!(pts, spec.points());
    }
}
