//! The score `f = vol(Voronoi cell) + ε` and its correction term
//!
//! ```text
//! ε(λ) = Σ_T δ(T) + M Σ_S μ(S, λ) (√8 - w(S)),   δ(T) = 2L(c) - L(a) - L(b)
//! ```
//!
//! where `T` ranges over triangles through `λ` with all edges `<= r`, `c` is
//! the edge opposite `λ`, and `S` ranges over the triangles picked by the
//! S-rule, `w(S)` being the length of the distinguished edge. `μ` is `-1` when
//! `λ` is an endpoint of the distinguished edge and `2` otherwise.
//!
//! Summed over the three vertices of one triangle, both `δ` and `μ` vanish
//! identically; the functions here expose those identities so they can be
//! checked numerically.

use serde::{Deserialize, Serialize};

use crate::decimal::format_f64;
use crate::interval::Interval;
use crate::packing::{
    self, check_edge_cutoff, gen_fcc, LongestEdgeRule, NoSRule, PackingError, PackingPatch, SRule,
    Triangle,
};
use crate::voronoi::{self, VoronoiError, DEFAULT_CUTOFF};

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("triangle is not anchored")]
    NotAnchored,
    #[error("center {0} is not a vertex of the triangle")]
    NotAVertex(usize),
    #[error("triangle has no distinguished edge")]
    NoDistinguishedEdge,
    #[error("invalid score parameters: {0}")]
    InvalidParams(String),
    #[error("reference volume check failed: FCC cell volume {computed:?} does not overlap 4√2 {expected:?}")]
    ReferenceMismatch { computed: Interval, expected: Interval },
    #[error(transparent)]
    Packing(#[from] PackingError),
    #[error(transparent)]
    Voronoi(#[from] VoronoiError),
}

/// `L(x) = q2·x² + q1·x + q0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadPoly {
    pub q2: f64,
    pub q1: f64,
    pub q0: f64,
}

impl QuadPoly {
    pub fn new(q2: f64, q1: f64, q0: f64) -> Self {
        QuadPoly { q2, q1, q0 }
    }

    pub fn zero() -> Self {
        QuadPoly::default()
    }

    pub fn is_finite(&self) -> bool {
        self.q2.is_finite() && self.q1.is_finite() && self.q0.is_finite()
    }

    /// Coefficient-wise sum (rounded; exact for the small dyadic values used
    /// in tests).
    pub fn plus(&self, other: &QuadPoly) -> QuadPoly {
        QuadPoly::new(self.q2 + other.q2, self.q1 + other.q1, self.q0 + other.q0)
    }
}

/// Which S-rule a parameter set uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SRuleKind {
    #[default]
    LongestEdge,
    None,
}

impl SRuleKind {
    pub fn rule(&self) -> &'static dyn SRule {
        match self {
            SRuleKind::LongestEdge => &LongestEdgeRule,
            SRuleKind::None => &NoSRule,
        }
    }

    pub fn parse(name: &str) -> Option<SRuleKind> {
        match name {
            "longest-edge" => Some(SRuleKind::LongestEdge),
            "none" => Some(SRuleKind::None),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        self.rule().name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub l: QuadPoly,
    pub m: f64,
    pub r: f64,
    pub s_rule: SRuleKind,
}

impl ScoreParams {
    pub fn new(l: QuadPoly, m: f64, r: f64, s_rule: SRuleKind) -> Result<Self, ScoreError> {
        let params = ScoreParams { l, m, r, s_rule };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        if !self.l.is_finite() || !self.m.is_finite() {
            return Err(ScoreError::InvalidParams("non-finite coefficient".into()));
        }
        check_edge_cutoff(self.r).map_err(|e| ScoreError::InvalidParams(e.to_string()))
    }
}

impl Default for ScoreParams {
    /// `L(x) = √8 - x`, `M = 1`, `r = 2.51`, longest-edge S-rule.
    fn default() -> Self {
        ScoreParams {
            l: QuadPoly::new(0.0, -1.0, Interval::sqrt8().mid()),
            m: 1.0,
            r: 2.51,
            s_rule: SRuleKind::LongestEdge,
        }
    }
}

/// Interval enclosing `4√2`, the volume of the rhombic dodecahedron with
/// inradius 1.
pub fn nu0() -> Interval {
    Interval::sqrt8() * Interval::point(2.0)
}

/// Computes the FCC reference cell volume and checks it against [`nu0`].
pub fn cross_check_nu0() -> Result<Interval, ScoreError> {
    let patch = gen_fcc(DEFAULT_CUTOFF);
    let cell = voronoi::voronoi_cell(&patch, 0, DEFAULT_CUTOFF)?;
    let computed = voronoi::cell_volume(&cell)?;
    let expected = nu0();
    if computed.overlaps(&expected) {
        Ok(computed)
    } else {
        Err(ScoreError::ReferenceMismatch { computed, expected })
    }
}

/// `L` over `x`, in Horner form.
pub fn eval_l(l: &QuadPoly, x: Interval) -> Interval {
    (x * l.q2 + l.q1) * x + l.q0
}

/// `2L(c) - L(a) - L(b)` for an anchored triangle.
pub fn delta_t(l: &QuadPoly, tri: &Triangle) -> Result<Interval, ScoreError> {
    let (a, b, c) = tri.abc().ok_or(ScoreError::NotAnchored)?;
    let lc = eval_l(l, c.into());
    Ok(lc * 2.0 - eval_l(l, a.into()) - eval_l(l, b.into()))
}

/// `-1` if `i` is an endpoint of the distinguished edge, `2` otherwise.
pub fn mu(s_tri: &Triangle, i: usize) -> Result<i32, ScoreError> {
    let k = s_tri.distinguished.ok_or(ScoreError::NoDistinguishedEdge)?;
    let pos = s_tri.position(i).ok_or(ScoreError::NotAVertex(i))?;
    Ok(if pos == k { 2 } else { -1 })
}

/// Sum of the three anchored `δ` values; contains 0 for every triangle.
pub fn triangle_cancellation_residual(l: &QuadPoly, tri: &Triangle) -> Interval {
    tri.vertices
        .iter()
        .map(|&v| delta_t(l, &tri.anchored_at(v).expect("own vertex")).expect("anchored"))
        .sum()
}

/// Sum of `μ` over the three vertices; 0 for every S-triangle.
pub fn mu_cancellation_residual(s_tri: &Triangle) -> Result<i32, ScoreError> {
    s_tri.vertices.iter().map(|&v| mu(s_tri, v)).sum()
}

/// `(Σ_T δ(T), M Σ_S μ (√8 - w))` at center `i`.
pub fn epsilon(
    p: &PackingPatch,
    i: usize,
    params: &ScoreParams,
) -> Result<(Interval, Interval), ScoreError> {
    params.validate()?;
    let t_term = packing::triangles_t(p, i, params.r)?
        .iter()
        .map(|t| delta_t(&params.l, t))
        .sum::<Result<Interval, _>>()?;
    let sqrt8 = Interval::sqrt8();
    let mut s_sum = Interval::ZERO;
    for s in packing::triangles_s(p, i, params.r, params.s_rule.rule())? {
        let w = s.w().ok_or(ScoreError::NoDistinguishedEdge)?;
        s_sum = s_sum + (sqrt8 - w) * f64::from(mu(&s, i)?);
    }
    Ok((t_term, s_sum * params.m))
}

/// `Σ ε` over the given centers.
pub fn epsilon_sum(
    p: &PackingPatch,
    centers: &[usize],
    params: &ScoreParams,
) -> Result<Interval, ScoreError> {
    centers
        .iter()
        .map(|&i| epsilon(p, i, params).map(|(t, s)| t + s))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub center: usize,
    pub voronoi_volume: Interval,
    pub t_term: Interval,
    pub s_term: Interval,
    pub epsilon: Interval,
    pub f: Interval,
    /// `f - ν₀`.
    pub margin: Interval,
}

impl ScoreReport {
    pub fn from_parts(center: usize, voronoi_volume: Interval, t_term: Interval, s_term: Interval) -> Self {
        let epsilon = t_term + s_term;
        let f = voronoi_volume + epsilon;
        ScoreReport {
            center,
            voronoi_volume,
            t_term,
            s_term,
            epsilon,
            f,
            margin: f - nu0(),
        }
    }

    pub fn to_row(&self) -> ScoreRow {
        let pair = |x: &Interval| (format_f64(x.lo()), format_f64(x.hi()));
        let (voronoi_volume_lo, voronoi_volume_hi) = pair(&self.voronoi_volume);
        let (t_term_lo, t_term_hi) = pair(&self.t_term);
        let (s_term_lo, s_term_hi) = pair(&self.s_term);
        let (epsilon_lo, epsilon_hi) = pair(&self.epsilon);
        let (f_lo, f_hi) = pair(&self.f);
        let (margin_lo, margin_hi) = pair(&self.margin);
        ScoreRow {
            center: self.center,
            voronoi_volume_lo,
            voronoi_volume_hi,
            t_term_lo,
            t_term_hi,
            s_term_lo,
            s_term_hi,
            epsilon_lo,
            epsilon_hi,
            f_lo,
            f_hi,
            margin_lo,
            margin_hi,
        }
    }
}

/// Flat serialized form of a [`ScoreReport`]: decimal lo/hi per field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub center: usize,
    pub voronoi_volume_lo: String,
    pub voronoi_volume_hi: String,
    pub t_term_lo: String,
    pub t_term_hi: String,
    pub s_term_lo: String,
    pub s_term_hi: String,
    pub epsilon_lo: String,
    pub epsilon_hi: String,
    pub f_lo: String,
    pub f_hi: String,
    pub margin_lo: String,
    pub margin_hi: String,
}

/// Full score of an interior center.
pub fn f_score(
    p: &PackingPatch,
    i: usize,
    params: &ScoreParams,
    cutoff: f64,
) -> Result<ScoreReport, ScoreError> {
    let cell = voronoi::voronoi_cell(p, i, cutoff)?;
    let volume = voronoi::cell_volume(&cell)?;
    score_with_volume(p, i, params, volume)
}

/// Score when the cell volume is already known (it does not depend on the
/// parameters).
pub fn score_with_volume(
    p: &PackingPatch,
    i: usize,
    params: &ScoreParams,
    volume: Interval,
) -> Result<ScoreReport, ScoreError> {
    let (t, s) = epsilon(p, i, params)?;
    Ok(ScoreReport::from_parts(i, volume, t, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packing::{gen_hcp, Point};

    fn tri(lengths: [f64; 3]) -> Triangle {
        Triangle::new([0, 1, 2], lengths).unwrap()
    }

    #[test]
    fn eval_l_examples() {
        let sq = QuadPoly::new(1.0, 0.0, 0.0);
        assert_eq!(eval_l(&sq, Interval::point(2.0)), Interval::point(4.0));
        let wide = eval_l(&sq, Interval::new(-1.0, 2.0).unwrap());
        assert!(Interval::new(0.0, 4.0).unwrap().is_subset_of(&wide));
        assert_eq!(eval_l(&QuadPoly::zero(), Interval::new(-3.0, 5.0).unwrap()), Interval::ZERO);
    }

    #[test]
    fn delta_examples() {
        let sq = QuadPoly::new(1.0, 0.0, 0.0);
        // anchor vertex 0: c = lengths[0] is the edge opposite it
        let t = tri([2.2, 2.0, 2.0]).anchored_at(0).unwrap();
        let d = delta_t(&sq, &t).unwrap();
        // 2.2 is not a float; the enclosure is for the stored edge 2.2000000000000002.
        assert!((d.mid() - 1.68).abs() < 1e-14, "{d:?}");
        let c = Interval::from_decimal("2.2").unwrap();
        let exact = c * c * 2.0 - Interval::point(8.0);
        assert!(d.overlaps(&exact));
        assert!(d.width() < 1e-14);

        let eq = tri([2.3, 2.3, 2.3]).anchored_at(1).unwrap();
        let l = QuadPoly::new(0.7, -3.1, 11.0);
        let d = delta_t(&l, &eq).unwrap();
        assert!(d.contains_zero() && d.width() <= 1e-12);

        let lin = QuadPoly::new(0.0, 1.0, 0.0);
        let t = tri([2.1, 2.0, 2.5]).anchored_at(0).unwrap();
        let d = delta_t(&lin, &t).unwrap();
        assert!((d.mid() + 0.3).abs() < 1e-14, "{d:?}");
        assert!(matches!(delta_t(&lin, &tri([2.0, 2.0, 2.0])), Err(ScoreError::NotAnchored)));
    }

    #[test]
    fn mu_examples() {
        let mut t = tri([2.0, 2.0, 2.6]);
        // lengths[2] is opposite vertex 2, i.e. the edge (v0, v1)
        t.distinguished = Some(2);
        assert_eq!(mu(&t, 0).unwrap(), -1);
        assert_eq!(mu(&t, 1).unwrap(), -1);
        assert_eq!(mu(&t, 2).unwrap(), 2);
        assert_eq!(mu_cancellation_residual(&t).unwrap(), 0);
        assert!(matches!(mu(&t, 9), Err(ScoreError::NotAVertex(9))));
        assert!(matches!(mu(&tri([2.0; 3]), 0), Err(ScoreError::NoDistinguishedEdge)));
    }

    #[test]
    fn residual_examples() {
        let l = QuadPoly::new(-0.4, 2.5, 1.25);
        let res = triangle_cancellation_residual(&l, &tri([2.0, 2.3, 2.6]));
        assert!(res.contains_zero() && res.width() <= 1e-11);
        let eq = tri([2.2; 3]);
        for v in 0..3 {
            let d = delta_t(&l, &eq.anchored_at(v).unwrap()).unwrap();
            assert!(d.contains_zero());
        }
    }

    #[test]
    fn fcc_epsilon_vanishes() {
        let p = gen_fcc(6.0);
        for r in [2.0, 2.3, 2.5] {
            for (l, m) in [(QuadPoly::new(0.3, -1.0, 2.0), 1.0), (QuadPoly::new(-2.0, 0.5, 0.0), 7.5)] {
                let params = ScoreParams::new(l, m, r, SRuleKind::LongestEdge).unwrap();
                let (t, s) = epsilon(&p, 0, &params).unwrap();
                assert!(t.contains_zero() && t.width() <= 1e-10, "{t:?}");
                assert!(s.contains_zero() && s.width() <= 1e-10, "{s:?}");
            }
        }
    }

    #[test]
    fn empty_sums_and_zero_m() {
        let lone = PackingPatch::new(vec![Point::zeros()]).unwrap();
        let (t, s) = epsilon(&lone, 0, &ScoreParams::default()).unwrap();
        assert_eq!((t, s), (Interval::ZERO, Interval::ZERO));

        let h = (4.0f64 - 1.3 * 1.3).sqrt();
        let iso = PackingPatch::new(vec![
            Point::new(-1.3, 0.0, 0.0),
            Point::new(1.3, 0.0, 0.0),
            Point::new(0.0, h, 0.0),
        ])
        .unwrap();
        let mut params = ScoreParams { r: 2.5, ..ScoreParams::default() };
        let (_, s) = epsilon(&iso, 2, &params).unwrap();
        assert!(s.lo() > 0.0, "apex has μ = 2 and √8 - 2.6 > 0");
        params.m = 0.0;
        let (_, s) = epsilon(&iso, 2, &params).unwrap();
        assert_eq!(s, Interval::ZERO);
    }

    #[test]
    fn fcc_and_hcp_scores() {
        let fcc = gen_fcc(6.0);
        let report = f_score(&fcc, 0, &ScoreParams::default(), DEFAULT_CUTOFF).unwrap();
        assert!(report.f.overlaps(&nu0()));
        assert!(report.margin.contains_zero() && report.margin.width() <= 1e-7);

        let hcp = gen_hcp(6.0);
        let report = f_score(&hcp, 0, &ScoreParams { r: 2.5, ..ScoreParams::default() }, 6.0).unwrap();
        assert!(report.voronoi_volume.contains(4.0 * 2f64.sqrt()));
        assert!(report.t_term.contains_zero() && report.t_term.width() <= 1e-10);

        let boundary = fcc.len() - 1;
        assert!(matches!(
            f_score(&fcc, boundary, &ScoreParams::default(), 6.0),
            Err(ScoreError::Voronoi(VoronoiError::NotInterior(_)))
        ));
    }

    #[test]
    fn params_validation() {
        assert!(ScoreParams::new(QuadPoly::zero(), 1.0, 3.0, SRuleKind::LongestEdge).is_err());
        assert!(ScoreParams::new(QuadPoly::zero(), 1.0, 1.5, SRuleKind::LongestEdge).is_err());
        assert!(ScoreParams::new(QuadPoly::new(f64::NAN, 0.0, 0.0), 1.0, 2.5, SRuleKind::None).is_err());
        assert!(ScoreParams::new(QuadPoly::zero(), 0.0, 2.0, SRuleKind::None).is_ok());
        assert_eq!(SRuleKind::parse("longest-edge"), Some(SRuleKind::LongestEdge));
        assert_eq!(SRuleKind::parse("bogus"), None);
    }

    #[test]
    fn nu0_cross_check() {
        let v = cross_check_nu0().unwrap();
        assert!(v.overlaps(&nu0()));
        assert!(nu0().contains(4.0 * 2f64.sqrt()));
    }

    #[test]
    fn row_round_trips_bounds() {
        let r = ScoreReport::from_parts(3, nu0(), Interval::ZERO, Interval::point(0.5));
        let row = r.to_row();
        assert_eq!(row.center, 3);
        assert_eq!(row.s_term_lo.parse::<f64>().unwrap(), 0.5);
        assert_eq!(row.voronoi_volume_hi.parse::<f64>().unwrap(), nu0().hi());
    }
}
