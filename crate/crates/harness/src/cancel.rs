//! Cancellation checks: δ residuals over T-triangles, μ sums over S-triangles
//! and the ε-sum over a periodic fundamental domain.

use kepler_core::packing::{triangles_s, triangles_t, PackingPatch};
use kepler_core::score::{epsilon_sum, mu_cancellation_residual, triangle_cancellation_residual, ScoreParams};
use kepler_core::Interval;
use serde::Serialize;

use crate::patches::is_periodic_cell;
use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalCheck {
    pub checked: usize,
    /// Hull of all residual intervals.
    pub hull: Option<Interval>,
    pub max_width: f64,
    pub pass: bool,
}

impl IntervalCheck {
    fn new() -> Self {
        IntervalCheck {
            checked: 0,
            hull: None,
            max_width: 0.0,
            pass: true,
        }
    }

    fn push(&mut self, r: Interval, ok: bool) {
        self.checked += 1;
        self.hull = Some(self.hull.map_or(r, |h| h.hull(&r)));
        self.max_width = self.max_width.max(r.width());
        self.pass &= ok;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegerCheck {
    pub checked: usize,
    pub max_abs: i64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CancellationReport {
    pub patch: String,
    pub delta: IntervalCheck,
    pub mu: IntegerCheck,
    pub eps_sum: Option<IntervalCheck>,
    pub notice: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub identity: f64,
    pub eps_sum: f64,
    pub extension_radius: f64,
}

pub fn run_cancellation(id: &str, patch: &PackingPatch, params: &ScoreParams, tol: &Tolerances) -> Result<CancellationReport> {
    params.validate().map_err(HarnessError::usage)?;
    let periodic = is_periodic_cell(patch);
    let (work, centers) = if periodic {
        patch
            .periodic_extension(tol.extension_radius)
            .map_err(HarnessError::usage)?
    } else {
        (patch.clone(), (0..patch.len()).collect())
    };

    let mut delta = IntervalCheck::new();
    let mut mu = IntegerCheck {
        checked: 0,
        max_abs: 0,
        pass: true,
    };
    for &i in &centers {
        for t in triangles_t(&work, i, params.r).map_err(HarnessError::usage)? {
            let r = triangle_cancellation_residual(&params.l, &t);
            delta.push(r, r.contains_zero() && r.width() <= tol.identity);
        }
        for s in triangles_s(&work, i, params.r, params.s_rule.rule()).map_err(HarnessError::usage)? {
            let r = mu_cancellation_residual(&s).map_err(|e| HarnessError::Internal(e.to_string()))?;
            mu.checked += 1;
            mu.max_abs = mu.max_abs.max(i64::from(r).abs());
            mu.pass &= r == 0;
        }
    }

    let (eps_sum, notice) = if periodic {
        let total = epsilon_sum(&work, &centers, params).map_err(HarnessError::usage)?;
        let mut check = IntervalCheck::new();
        check.push(total, total.lo() >= -tol.eps_sum && total.hi() <= tol.eps_sum);
        (Some(check), None)
    } else {
        let why = if patch.lattice().is_some() {
            "patch is a finite lattice sample, not a periodic cell"
        } else {
            "patch has no lattice"
        };
        (None, Some(format!("ε-sum skipped: {why}")))
    };

    let pass = delta.pass && mu.pass && eps_sum.as_ref().map_or(true, |c| c.pass);
    Ok(CancellationReport {
        patch: id.to_string(),
        delta,
        mu,
        eps_sum,
        notice,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patches::{periodic, resolve, Kind};

    const TOL: Tolerances = Tolerances {
        identity: 1e-10,
        eps_sum: 1e-8,
        extension_radius: 12.0,
    };

    #[test]
    fn periodic_fcc_passes_all_three() {
        let rep = run_cancellation("fcc-cell", &resolve("fcc-cell").unwrap(), &ScoreParams::default(), &TOL).unwrap();
        assert!(rep.pass, "{rep:?}");
        let eps = rep.eps_sum.unwrap();
        assert!(eps.hull.unwrap().contains_zero());
        assert!(rep.delta.checked > 0);
    }

    #[test]
    fn jittered_cell_passes() {
        let p = periodic(Kind::Fcc, 1, 0.01, 9).unwrap();
        let rep = run_cancellation("jit", &p, &ScoreParams::default(), &TOL).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.delta.checked > 0);
    }

    #[test]
    fn finite_patch_skips_eps_sum() {
        let rep = run_cancellation("fcc:3", &resolve("fcc:3").unwrap(), &ScoreParams::default(), &TOL).unwrap();
        assert!(rep.pass);
        assert!(rep.eps_sum.is_none());
        assert!(rep.notice.is_some());
    }
}
