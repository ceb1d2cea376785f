use kepler_core::packing::{
    fcc_conventional_lattice, gen_fcc, gen_hcp, hcp_lattice, periodic_cell, triangles_s, triangles_t, Lattice,
    LongestEdgeRule, PackingPatch, Point,
};
use kepler_core::score::{epsilon_sum, mu_cancellation_residual, QuadPoly, SRuleKind, ScoreParams};
use kepler_core::voronoi::{cell_volume, voronoi_cell, DEFAULT_CUTOFF};
use kepler_core::Interval;
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

fn nu0_exact() -> f64 {
    4.0 * 2f64.sqrt()
}

fn rotation(ax: f64, ay: f64, az: f64) -> Matrix3<f64> {
    *Rotation3::from_euler_angles(ax, ay, az).matrix()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cell_volume_is_rigid_motion_invariant(
        ax in -3.2f64..3.2, ay in -1.5f64..1.5, az in -3.2f64..3.2,
        tx in -50f64..50.0, ty in -50f64..50.0, tz in -50f64..50.0,
    ) {
        let p = gen_fcc(6.0);
        let moved = p.transformed(&rotation(ax, ay, az), &Vector3::new(tx, ty, tz));
        let v0 = cell_volume(&voronoi_cell(&p, 0, DEFAULT_CUTOFF).unwrap()).unwrap();
        let v1 = cell_volume(&voronoi_cell(&moved, 0, DEFAULT_CUTOFF).unwrap()).unwrap();
        prop_assert!(v0.overlaps(&v1));
        prop_assert!(v1.contains(nu0_exact()));
        prop_assert!(v1.width() <= 1e-7);
    }
}

/// Sum of the Voronoi volumes of the fundamental-domain centers of a periodic patch.
fn domain_volume(lattice: Lattice) -> Interval {
    let cell = periodic_cell(lattice).unwrap();
    let (ext, domain) = cell.periodic_extension(14.0).unwrap();
    domain
        .iter()
        .map(|&i| cell_volume(&voronoi_cell(&ext, i, DEFAULT_CUTOFF).unwrap()).unwrap())
        .sum()
}

#[test]
fn voronoi_cells_tile_the_periodic_domain() {
    let fcc = fcc_conventional_lattice();
    let expected = fcc.cell_volume();
    let total = domain_volume(fcc);
    assert!(total.contains(16.0 * 2f64.sqrt()), "{total:?}");
    assert!((total.mid() - expected).abs() < 1e-9);

    let hcp = hcp_lattice();
    let expected = hcp.cell_volume();
    let total = domain_volume(hcp);
    assert!((total.mid() - expected).abs() < 1e-8, "{total:?} vs {expected}");
}

#[test]
fn jittered_periodic_cells_still_tile() {
    // Dilate by 1% so that small jitter keeps every distance above 2.
    let base = fcc_conventional_lattice();
    let basis = base.basis.map(|row| row.map(|x| x * 1.01));
    let shifts = [[0.0, 0.0, 0.0], [0.001, -0.0005, 0.0008], [-0.0007, 0.0009, 0.0], [0.0, 0.0006, -0.001]];
    let offsets = base
        .offsets
        .iter()
        .zip(shifts)
        .map(|(o, s)| [o[0] + s[0], o[1] + s[1], o[2] + s[2]])
        .collect();
    let lat = Lattice::new(basis, offsets);
    let expected = lat.cell_volume();
    let total = domain_volume(lat);
    assert!((total.mid() - expected).abs() < 1e-8, "{total:?} vs {expected}");
}

#[test]
fn census_counts_on_standard_patches() {
    for (name, p) in [("fcc", gen_fcc(6.0)), ("hcp", gen_hcp(6.0))] {
        let t = triangles_t(&p, 0, 2.5).unwrap();
        assert_eq!(t.len(), 24, "{name}");
        let s = triangles_s(&p, 0, 2.5, &LongestEdgeRule).unwrap();
        for tri in &s {
            assert_eq!(mu_cancellation_residual(tri).unwrap(), 0);
        }
    }
}

#[test]
fn periodic_epsilon_sum_vanishes() {
    let cell = periodic_cell(fcc_conventional_lattice()).unwrap();
    let (ext, domain) = cell.periodic_extension(12.0).unwrap();
    for (q2, q1, q0, m, r) in [(0.0, -1.0, 2.8, 1.0, 2.51), (1.3, -0.7, 0.2, 4.0, 2.8), (-2.0, 3.0, -1.0, 0.5, 2.0)] {
        let params = ScoreParams::new(QuadPoly::new(q2, q1, q0), m, r, SRuleKind::LongestEdge).unwrap();
        let total = epsilon_sum(&ext, &domain, &params).unwrap();
        assert!(total.lo() >= -1e-8 && total.hi() <= 1e-8, "{total:?}");
    }
}

#[test]
fn patches_survive_translation_of_all_centers() {
    let p = gen_hcp(5.0);
    let shift = Point::new(0.25, -3.0, 7.5);
    let moved = PackingPatch::new(p.centers().iter().map(|c| c + shift).collect()).unwrap();
    assert_eq!(moved.len(), p.len());
    let a = triangles_t(&p, 0, 2.5).unwrap().len();
    let b = triangles_t(&moved, 0, 2.5).unwrap().len();
    assert_eq!(a, b);
}
