//! Score runs over the interior centers of a patch.

use kepler_core::packing::PackingPatch;
use kepler_core::score::{score_with_volume, ScoreParams, ScoreReport, ScoreRow};
use kepler_core::voronoi::{cell_volume, mark_interior, voronoi_cell};
use kepler_core::Interval;
use rayon::prelude::*;
use serde::Serialize;

use crate::patches::is_periodic_cell;
use crate::{HarnessError, Result};

/// A patch with its scored centers and their (parameter-independent) volumes.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub patch: PackingPatch,
    pub centers: Vec<usize>,
    pub volumes: Vec<Interval>,
}

/// Pick the centers to score and compute their cell volumes. A periodic cell
/// is extended by `extension_radius` and its domain centers are scored.
pub fn prepare(patch: &PackingPatch, cutoff: f64, extension_radius: f64) -> Result<Prepared> {
    let (patch, centers) = if is_periodic_cell(patch) {
        patch.periodic_extension(extension_radius).map_err(HarnessError::usage)?
    } else {
        let mut p = patch.clone();
        mark_interior(&mut p, cutoff).map_err(HarnessError::usage)?;
        let centers = (0..p.len()).filter(|&i| p.interior_flags()[i]).collect();
        (p, centers)
    };
    let volumes = centers
        .par_iter()
        .map(|&i| {
            let cell = voronoi_cell(&patch, i, cutoff).map_err(HarnessError::usage)?;
            cell_volume(&cell).map_err(|e| HarnessError::Internal(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        patch,
        centers,
        volumes,
    })
}

pub fn score_prepared(prep: &Prepared, params: &ScoreParams) -> Result<Vec<ScoreReport>> {
    prep.centers
        .par_iter()
        .zip(prep.volumes.par_iter())
        .map(|(&i, &v)| score_with_volume(&prep.patch, i, params, v).map_err(HarnessError::usage))
        .collect()
}

/// Ball-volume fraction of the union of scored cells, against `π/√18`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density {
    pub estimate: Interval,
    pub bound: Interval,
    pub consistent: bool,
}

pub fn density(volumes: &[Interval]) -> Option<Density> {
    if volumes.is_empty() {
        return None;
    }
    let total: Interval = volumes.iter().copied().sum();
    let balls = (Interval::pi() * Interval::point(4.0 * volumes.len() as f64))
        .div(&Interval::point(3.0))
        .ok()?;
    let estimate = balls.div(&total).ok()?;
    let bound = Interval::pi().div(&Interval::point(18.0).sqrt().ok()?).ok()?;
    Some(Density {
        estimate,
        bound,
        consistent: estimate.lo() <= bound.hi(),
    })
}

#[derive(Debug, Clone)]
pub struct ScoreRun {
    pub reports: Vec<ScoreReport>,
    pub density: Option<Density>,
}

impl ScoreRun {
    /// Report with the smallest `margin.lo` (first on ties).
    pub fn worst(&self) -> Option<&ScoreReport> {
        self.reports
            .iter()
            .reduce(|a, b| if b.margin.lo() < a.margin.lo() { b } else { a })
    }
}

pub fn run_score(patch: &PackingPatch, params: &ScoreParams, cutoff: f64, extension_radius: f64) -> Result<ScoreRun> {
    let prep = prepare(patch, cutoff, extension_radius)?;
    let reports = score_prepared(&prep, params)?;
    Ok(ScoreRun {
        density: density(&prep.volumes),
        reports,
    })
}

#[derive(Serialize)]
pub struct ScoreDoc<'a> {
    pub evidence: &'static str,
    pub patch: &'a str,
    pub params: &'a ScoreParams,
    pub centers: Vec<ScoreRow>,
    pub summary: Summary,
}

#[derive(Serialize)]
pub struct Summary {
    pub interior_centers: usize,
    pub min_margin_lo: Option<String>,
    pub min_margin_center: Option<usize>,
    pub density_lo: Option<String>,
    pub density_hi: Option<String>,
    pub density_bound: String,
    pub density_consistent: Option<bool>,
}

pub const EVIDENCE: &str = "numerical evidence, not a proof";

pub fn summary(run: &ScoreRun) -> Summary {
    use kepler_core::decimal::format_f64;
    let worst = run.worst();
    let bound = Interval::pi().div(&Interval::point(18.0).sqrt().expect("positive")).expect("nonzero");
    Summary {
        interior_centers: run.reports.len(),
        min_margin_lo: worst.map(|r| format_f64(r.margin.lo())),
        min_margin_center: worst.map(|r| r.center),
        density_lo: run.density.map(|d| format_f64(d.estimate.lo())),
        density_hi: run.density.map(|d| format_f64(d.estimate.hi())),
        density_bound: format_f64(bound.mid()),
        density_consistent: run.density.map(|d| d.consistent),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use kepler_core::packing::gen_fcc;

    #[test]
    fn fcc_density_is_the_bound() {
        let run = run_score(&gen_fcc(6.0), &ScoreParams::default(), 6.0, 12.0).unwrap();
        let d = run.density.unwrap();
        assert!(d.estimate.overlaps(&d.bound));
        assert!(d.consistent);
        assert!(run.worst().unwrap().margin.contains_zero());
    }

    #[test]
    fn single_center_has_no_scores() {
        let lone = PackingPatch::new(vec![kepler_core::packing::Point::zeros()]).unwrap();
        let run = run_score(&lone, &ScoreParams::default(), 6.0, 12.0).unwrap();
        assert!(run.reports.is_empty());
        assert!(run.density.is_none());
    }
}
