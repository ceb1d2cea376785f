//! Patch sources: generator specs (`fcc:6`, `hcp-cell`), files, jittered cells.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use kepler_core::packing::{
    self, fcc_conventional_lattice, hcp_lattice, load_patch, periodic_cell, Lattice, PackingPatch,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Fcc,
    Hcp,
}

impl Kind {
    pub fn parse(name: &str) -> Result<Kind> {
        match name {
            "fcc" => Ok(Kind::Fcc),
            "hcp" => Ok(Kind::Hcp),
            other => Err(HarnessError::usage(format!("unknown packing `{other}` (expected fcc or hcp)"))),
        }
    }

    /// Periodic cell lattice: the 4-center cubic cell for FCC, the 2-center cell for HCP.
    pub fn cell_lattice(self) -> Lattice {
        match self {
            Kind::Fcc => fcc_conventional_lattice(),
            Kind::Hcp => hcp_lattice(),
        }
    }
}

pub fn generate(kind: Kind, radius: f64) -> Result<PackingPatch> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(HarnessError::usage(format!("bad patch radius {radius}")));
    }
    Ok(match kind {
        Kind::Fcc => packing::gen_fcc(radius),
        Kind::Hcp => packing::gen_hcp(radius),
    })
}

/// Dilate by `1 + amplitude`, then move every offset by at most `amplitude`.
/// Distances change by at most `2·amplitude`, so the minimum distance stays >= 2.
pub fn jitter_lattice(lattice: &Lattice, amplitude: f64, seed: u64) -> Lattice {
    let scale = 1.0 + amplitude;
    let basis = lattice.basis.map(|row| row.map(|x| x * scale));
    let max_row = basis
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let step = amplitude / (3.0 * max_row);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets = lattice
        .offsets
        .iter()
        .map(|o| o.map(|f| f + rng.gen_range(-step..=step)))
        .collect();
    Lattice::new(basis, offsets)
}

pub fn periodic(kind: Kind, supercell: usize, jitter: f64, seed: u64) -> Result<PackingPatch> {
    if supercell == 0 {
        return Err(HarnessError::usage("supercell factor must be at least 1"));
    }
    if !(jitter.is_finite() && (0.0..0.5).contains(&jitter)) {
        return Err(HarnessError::usage(format!("jitter {jitter} outside [0, 0.5)")));
    }
    let mut lattice = kind.cell_lattice().supercell(supercell);
    if jitter > 0.0 {
        lattice = jitter_lattice(&lattice, jitter, seed);
    }
    periodic_cell(lattice).map_err(HarnessError::usage)
}

/// A patch named on the command line: `fcc:R`, `hcp:R`, `fcc-cell`, `hcp-cell`
/// or a path to a patch document.
pub fn resolve(spec: &str) -> Result<PackingPatch> {
    if let Some((kind, radius)) = spec.split_once(':') {
        if let Ok(kind) = Kind::parse(kind) {
            let r: f64 = radius
                .parse()
                .map_err(|_| HarnessError::usage(format!("bad radius in `{spec}`")))?;
            return generate(kind, r);
        }
    }
    if let Some(kind) = spec.strip_suffix("-cell") {
        if let Ok(kind) = Kind::parse(kind) {
            return periodic(kind, 1, 0.0, 0);
        }
    }
    let path = Path::new(spec);
    let file = File::open(path).map_err(|e| HarnessError::usage(format!("{spec}: {e}")))?;
    load_patch(BufReader::new(file)).map_err(|e| HarnessError::usage(format!("{spec}: {e}")))
}

/// A lattice patch without a region is a fundamental-domain sample.
pub fn is_periodic_cell(p: &PackingPatch) -> bool {
    p.lattice().is_some() && p.region().is_none()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_generator_specs() {
        assert_eq!(resolve("fcc:2").unwrap().len(), 13);
        let cell = resolve("fcc-cell").unwrap();
        assert_eq!(cell.len(), 4);
        assert!(is_periodic_cell(&cell));
        assert!(resolve("xyz:3").is_err());
        assert!(resolve("fcc:abc").is_err());
    }

    #[test]
    fn jitter_keeps_minimum_distance() {
        for seed in 0..5 {
            let p = periodic(Kind::Fcc, 2, 0.01, seed).unwrap();
            let (ext, _) = p.periodic_extension(6.0).unwrap();
            assert!(ext.len() > 32);
        }
        assert!(periodic(Kind::Hcp, 0, 0.0, 0).is_err());
    }
}
