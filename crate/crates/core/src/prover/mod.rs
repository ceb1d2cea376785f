//! Branch-and-bound proofs of lower bounds `e(x) >= target - slack` on a box.
//!
//! Each leaf of the search tree is closed by one of three witnesses:
//! a plain interval evaluation, an affine lower bound minimized over the
//! leaf (closed form on a pure box, exact rational LP under constraints),
//! or an exact proof that the leaf misses the constraint set. The resulting
//! [`ProofCertificate`] stores every box explicitly and can be replayed
//! without trusting the search.

pub mod domain;
pub mod dual;
pub mod expr;
pub mod lp;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::decimal::{bracket_rational, rational_from_f64, rational_to_f64_nearest};
use crate::interval::Interval;

pub use domain::{BoxDomain, Decimal, DomainError, LinearConstraint};
pub use dual::{eval_dual, Dual, Fallback};
pub use expr::{parse_expr, Constant, EvalError, Expr, ParseError};

type Rows = Vec<(Vec<BigRational>, BigRational)>;

pub const DEFAULT_SLACK: f64 = 1e-9;

// ---- affine bounds ---------------------------------------------------------------

/// `constant + Σ slopes_i (x_i - center_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineBound {
    pub center: Vec<f64>,
    pub slopes: Vec<f64>,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineEnclosure {
    pub lower: AffineBound,
    pub upper: AffineBound,
}

/// Rigorous constants `(lo, hi)` such that
/// `lo + s·(x - m) <= e(x) <= hi + s·(x - m)` on the box, for any slopes `s`.
/// The center must lie in the box.
pub fn affine_constants(e: &Expr, bounds: &[Interval], center: &[f64], slopes: &[f64]) -> Result<(f64, f64), Fallback> {
    let n = bounds.len();
    if center.len() != n || slopes.len() != n {
        return Err(Fallback);
    }
    if !bounds.iter().zip(center).all(|(b, m)| b.contains(*m)) || !slopes.iter().all(|s| s.is_finite()) {
        return Err(Fallback);
    }
    let em = e.eval_interval(&BoxDomain::point_box(center)).map_err(|_| Fallback)?;
    let grad = eval_dual(e, bounds)?.grad;
    let mut spread = Interval::ZERO;
    for i in 0..n {
        let w = (Interval::point(slopes[i]) - grad[i]).mag();
        let h = (bounds[i] - Interval::point(center[i])).mag();
        if !w.is_finite() || !h.is_finite() {
            return Err(Fallback);
        }
        spread = spread + Interval::point(w) * Interval::point(h);
    }
    let lo = (em - spread).lo();
    let hi = (em + spread).hi();
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Fallback);
    }
    Ok((lo, hi))
}

/// Mean-value affine enclosure of `e` on the box, centred at its midpoint
/// with slopes at the midpoint of the gradient enclosure.
pub fn affine_enclosure(e: &Expr, bounds: &[Interval]) -> Result<AffineEnclosure, Fallback> {
    let center: Vec<f64> = bounds.iter().map(Interval::mid).collect();
    let grad = eval_dual(e, bounds)?.grad;
    let slopes: Vec<f64> = grad.iter().map(Interval::mid).collect();
    let (lo, hi) = affine_constants(e, bounds, &center, &slopes)?;
    Ok(AffineEnclosure {
        lower: AffineBound {
            center: center.clone(),
            slopes: slopes.clone(),
            constant: lo,
        },
        upper: AffineBound {
            center,
            slopes,
            constant: hi,
        },
    })
}

impl AffineBound {
    /// A rigorous lower bound on the minimum over the box cut by `rows`,
    /// with an approximate minimizer. `None` when the region is empty.
    fn minimize(&self, bounds: &[Interval], rows: &Rows) -> Option<(f64, Vec<f64>)> {
        if rows.is_empty() {
            let vertex: Vec<f64> = bounds
                .iter()
                .zip(&self.slopes)
                .map(|(b, s)| if *s >= 0.0 { b.lo() } else { b.hi() })
                .collect();
            let mut v = Interval::point(self.constant);
            for i in 0..vertex.len() {
                v = v + Interval::point(self.slopes[i]) * (Interval::point(vertex[i]) - Interval::point(self.center[i]));
            }
            return Some((v.lo(), vertex));
        }
        let lower: Vec<BigRational> = bounds.iter().map(|b| rational_from_f64(b.lo())).collect();
        let upper: Vec<BigRational> = bounds.iter().map(|b| rational_from_f64(b.hi())).collect();
        let slopes: Vec<BigRational> = self.slopes.iter().map(|&s| rational_from_f64(s)).collect();
        let program = lp::LinearProgram {
            objective: slopes.clone(),
            rows: rows.clone(),
            lower,
            upper,
        };
        match lp::solve(&program) {
            lp::LpSolution::Infeasible => None,
            lp::LpSolution::Optimal { x, .. } => {
                let mut value = rational_from_f64(self.constant);
                for i in 0..x.len() {
                    value += &slopes[i] * (&x[i] - rational_from_f64(self.center[i]));
                }
                let vertex = x.iter().map(rational_to_f64_nearest).collect();
                Some((bracket_rational(&value).0, vertex))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpPrune {
    Proven { optimum: f64, vertex: Vec<f64> },
    Undecided { optimum: f64, vertex: Vec<f64> },
    Infeasible,
}

/// Minimize an affine lower bound over the domain and compare with `target`.
pub fn lp_prune(bound: &AffineBound, d: &BoxDomain, target: f64) -> LpPrune {
    match bound.minimize(&d.bounds, &constraint_rows(d)) {
        None => LpPrune::Infeasible,
        Some((optimum, vertex)) if optimum >= target => LpPrune::Proven { optimum, vertex },
        Some((optimum, vertex)) => LpPrune::Undecided { optimum, vertex },
    }
}

fn constraint_rows(d: &BoxDomain) -> Rows {
    d.constraints
        .iter()
        .map(|c| (c.coeffs.iter().map(|q| q.value().clone()).collect(), c.rhs.value().clone()))
        .collect()
}

fn region_feasible(bounds: &[Interval], rows: &Rows) -> bool {
    let lower: Vec<BigRational> = bounds.iter().map(|b| rational_from_f64(b.lo())).collect();
    let upper: Vec<BigRational> = bounds.iter().map(|b| rational_from_f64(b.hi())).collect();
    lp::feasible(rows, &lower, &upper)
}

// ---- certificates ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Witness {
    /// `claim <= inf e` by direct interval evaluation.
    Interval { claim: f64 },
    /// `bound` lies below `e` on the leaf and its minimum there is `optimum`.
    Affine {
        bound: AffineBound,
        optimum: f64,
        vertex: Vec<f64>,
    },
    /// The leaf does not meet the constraint set.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProofNode {
    Split {
        #[serde(with = "domain::exact_bounds")]
        bounds: Vec<Interval>,
        dim: usize,
        at: f64,
        children: Box<[ProofNode; 2]>,
    },
    Leaf {
        #[serde(with = "domain::exact_bounds")]
        bounds: Vec<Interval>,
        witness: Witness,
    },
}

impl ProofNode {
    pub fn bounds(&self) -> &[Interval] {
        match self {
            ProofNode::Split { bounds, .. } | ProofNode::Leaf { bounds, .. } => bounds,
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            ProofNode::Leaf { .. } => 1,
            ProofNode::Split { children, .. } => children[0].leaf_count() + children[1].leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ProofNode::Leaf { .. } => 0,
            ProofNode::Split { children, .. } => 1 + children[0].depth().max(children[1].depth()),
        }
    }

    /// Visit every leaf mutably together with its path (0 = left, 1 = right).
    pub fn for_each_leaf_mut(&mut self, f: &mut dyn FnMut(&[u8], &mut ProofNode)) {
        fn walk(node: &mut ProofNode, path: &mut Vec<u8>, f: &mut dyn FnMut(&[u8], &mut ProofNode)) {
            match node {
                ProofNode::Leaf { .. } => f(path, node),
                ProofNode::Split { children, .. } => {
                    for (k, child) in children.iter_mut().enumerate() {
                        path.push(k as u8);
                        walk(child, path, f);
                        path.pop();
                    }
                }
            }
        }
        walk(self, &mut Vec::new(), f);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofCertificate {
    pub expr: String,
    pub domain: BoxDomain,
    pub target: f64,
    pub slack: f64,
    pub tree: ProofNode,
}

impl ProofCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<ProofCertificate, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn leaf_count(&self) -> usize {
        self.tree.leaf_count()
    }
}

// ---- search ----------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProverOptions {
    pub max_depth: usize,
    pub max_leaves: usize,
    pub use_lp: bool,
    pub slack: f64,
}

impl Default for ProverOptions {
    fn default() -> Self {
        ProverOptions {
            max_depth: 48,
            max_leaves: 200_000,
            use_lp: true,
            slack: DEFAULT_SLACK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// A sample point rigorously evaluates below `target - slack`.
    SampleBelowTarget,
    /// Depth limit reached without closing the box.
    MaxDepth,
    /// Leaf budget exhausted.
    MaxLeaves,
    /// The box cannot be bisected further in floating point.
    Unsplittable,
}

impl FailureReason {
    pub fn is_resource_limit(self) -> bool {
        !matches!(self, FailureReason::SampleBelowTarget)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub reason: FailureReason,
    #[serde(with = "domain::exact_bounds")]
    pub bounds: Vec<Interval>,
    pub depth: usize,
    /// Best rigorous lower bound obtained on that box, if any.
    pub lower_bound: Option<f64>,
    /// Sample point with the smallest observed value.
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub leaves: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProofOutcome {
    Proven(ProofCertificate),
    Undecided(FailureReport),
}

impl ProofOutcome {
    pub fn is_proven(&self) -> bool {
        matches!(self, ProofOutcome::Proven(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProverError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("expression uses {needed} variables but the domain has {available}")]
    Dimension { needed: usize, available: usize },
    #[error("target and slack must be finite, slack non-negative")]
    BadTarget,
}

/// Smallest float that `e` must stay above for the claim `e >= target - slack`.
pub fn threshold(target: f64, slack: f64) -> f64 {
    (Interval::point(target) - Interval::point(slack)).hi()
}

struct Search<'a> {
    e: &'a Expr,
    rows: Rows,
    opts: ProverOptions,
    threshold: f64,
    leaves: usize,
    best_point: Vec<f64>,
    best_value: f64,
}

impl Search<'_> {
    /// Records the sample and reports whether it rigorously violates the claim.
    fn sample(&mut self, x: &[f64]) -> bool {
        if !self.rows.is_empty() && !self.rows_hold_approx(x) {
            return false;
        }
        let v = self.e.eval_f64(x);
        if v < self.best_value || self.best_point.is_empty() {
            self.best_value = v;
            self.best_point = x.to_vec();
        }
        match self.e.eval_interval(&BoxDomain::point_box(x)) {
            Ok(iv) => iv.hi() < self.threshold,
            Err(_) => false,
        }
    }

    fn rows_hold_approx(&self, x: &[f64]) -> bool {
        self.rows.iter().all(|(a, b)| {
            let lhs: f64 = a.iter().zip(x).map(|(ai, xi)| rational_to_f64_nearest(ai) * xi).sum();
            let rhs = rational_to_f64_nearest(b);
            lhs <= rhs + 1e-12 * (1.0 + rhs.abs())
        })
    }

    fn leaf(&mut self, bounds: Vec<Interval>, witness: Witness) -> ProofNode {
        self.leaves += 1;
        ProofNode::Leaf { bounds, witness }
    }

    fn fail(&self, reason: FailureReason, bounds: Vec<Interval>, depth: usize, lower_bound: Option<f64>) -> FailureReport {
        FailureReport {
            reason,
            bounds,
            depth,
            lower_bound,
            best_point: self.best_point.clone(),
            best_value: self.best_value,
            leaves: self.leaves,
        }
    }

    fn explore(&mut self, bounds: Vec<Interval>, depth: usize) -> Result<ProofNode, FailureReport> {
        if !self.rows.is_empty() && !region_feasible(&bounds, &self.rows) {
            return Ok(self.leaf(bounds, Witness::Infeasible));
        }
        let range = self.e.eval_interval(&bounds).ok();
        if let Some(r) = range {
            if r.lo() >= self.threshold {
                return Ok(self.leaf(bounds, Witness::Interval { claim: r.lo() }));
            }
        }
        let mut lower_bound = range.map(|r| r.lo());
        let mid: Vec<f64> = bounds.iter().map(Interval::mid).collect();
        if self.sample(&mid) {
            return Err(self.fail(FailureReason::SampleBelowTarget, bounds, depth, lower_bound));
        }
        if self.opts.use_lp {
            if let Ok(enc) = affine_enclosure(self.e, &bounds) {
                match enc.lower.minimize(&bounds, &self.rows) {
                    None => return Ok(self.leaf(bounds, Witness::Infeasible)),
                    Some((optimum, vertex)) => {
                        if optimum >= self.threshold {
                            let witness = Witness::Affine {
                                bound: enc.lower,
                                optimum,
                                vertex,
                            };
                            return Ok(self.leaf(bounds, witness));
                        }
                        lower_bound = Some(lower_bound.map_or(optimum, |l| l.max(optimum)));
                        if self.sample(&vertex) {
                            return Err(self.fail(FailureReason::SampleBelowTarget, bounds, depth, lower_bound));
                        }
                    }
                }
            }
        }
        if self.leaves >= self.opts.max_leaves {
            return Err(self.fail(FailureReason::MaxLeaves, bounds, depth, lower_bound));
        }
        if depth >= self.opts.max_depth {
            return Err(self.fail(FailureReason::MaxDepth, bounds, depth, lower_bound));
        }
        let domain = BoxDomain::new(bounds.clone());
        let dim = domain.widest_dim();
        let Some((at, left, right)) = domain.split(dim) else {
            return Err(self.fail(FailureReason::Unsplittable, bounds, depth, lower_bound));
        };
        let l = self.explore(left.bounds, depth + 1)?;
        let r = self.explore(right.bounds, depth + 1)?;
        Ok(ProofNode::Split {
            bounds,
            dim,
            at,
            children: Box::new([l, r]),
        })
    }
}

/// Try to prove `e(x) >= target - slack` for every `x` in the domain.
pub fn prove_lower_bound(e: &Expr, d: &BoxDomain, target: f64, opts: &ProverOptions) -> Result<ProofOutcome, ProverError> {
    d.validate()?;
    if e.dimension() > d.dim() {
        return Err(ProverError::Dimension {
            needed: e.dimension(),
            available: d.dim(),
        });
    }
    if !target.is_finite() || !opts.slack.is_finite() || opts.slack < 0.0 {
        return Err(ProverError::BadTarget);
    }
    let mut search = Search {
        e,
        rows: constraint_rows(d),
        opts: *opts,
        threshold: threshold(target, opts.slack),
        leaves: 0,
        best_point: Vec::new(),
        best_value: f64::INFINITY,
    };
    Ok(match search.explore(d.bounds.clone(), 0) {
        Ok(tree) => ProofOutcome::Proven(ProofCertificate {
            expr: e.to_string(),
            domain: d.clone(),
            target,
            slack: opts.slack,
            tree,
        }),
        Err(report) => ProofOutcome::Undecided(report),
    })
}

// ---- replay ----------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("certificate rejected at path {path:?}: {reason}")]
pub struct ReplayError {
    /// Child indices from the root (0 = left, 1 = right).
    pub path: Vec<u8>,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayStats {
    pub leaves: usize,
    pub depth: usize,
}

/// Independently re-check a certificate for `e >= target - slack`.
pub fn replay_certificate(e: &Expr, cert: &ProofCertificate, target: f64) -> Result<ReplayStats, ReplayError> {
    let reject = |path: &[u8], reason: String| ReplayError {
        path: path.to_vec(),
        reason,
    };
    if e.to_string() != cert.expr {
        return Err(reject(&[], "expression does not match the certificate".into()));
    }
    cert.domain.validate().map_err(|err| reject(&[], err.to_string()))?;
    if e.dimension() > cert.domain.dim() {
        return Err(reject(&[], "expression dimension exceeds the domain".into()));
    }
    if !target.is_finite() || !cert.slack.is_finite() || cert.slack < 0.0 {
        return Err(reject(&[], "bad target or slack".into()));
    }
    let ctx = Replay {
        e,
        rows: constraint_rows(&cert.domain),
        threshold: threshold(target, cert.slack),
    };
    let mut path = Vec::new();
    ctx.check(&cert.tree, &cert.domain.bounds, &mut path)?;
    Ok(ReplayStats {
        leaves: cert.tree.leaf_count(),
        depth: cert.tree.depth(),
    })
}

struct Replay<'a> {
    e: &'a Expr,
    rows: Rows,
    threshold: f64,
}

impl Replay<'_> {
    fn check(&self, node: &ProofNode, expected: &[Interval], path: &mut Vec<u8>) -> Result<(), ReplayError> {
        let reject = |path: &[u8], reason: &str| ReplayError {
            path: path.to_vec(),
            reason: reason.to_string(),
        };
        if node.bounds() != expected {
            return Err(reject(path, "box does not match its parent's split"));
        }
        match node {
            ProofNode::Split { bounds, dim, at, children } => {
                let b = *bounds.get(*dim).ok_or_else(|| reject(path, "split dimension out of range"))?;
                if !(b.lo() < *at && *at < b.hi()) {
                    return Err(reject(path, "split point outside the open interval"));
                }
                let parent = BoxDomain::new(bounds.clone());
                let (left, right) = parent.split_at(*dim, *at).ok_or_else(|| reject(path, "bad split"))?;
                for (k, child_box) in [left.bounds, right.bounds].iter().enumerate() {
                    path.push(k as u8);
                    self.check(&children[k], child_box, path)?;
                    path.pop();
                }
                Ok(())
            }
            ProofNode::Leaf { bounds, witness } => match witness {
                Witness::Interval { claim } => {
                    if !(*claim >= self.threshold) {
                        return Err(reject(path, "claim is below the target"));
                    }
                    let r = self
                        .e
                        .eval_interval(bounds)
                        .map_err(|err| reject(path, &format!("evaluation failed: {err}")))?;
                    if r.lo() < *claim {
                        return Err(reject(path, "interval evaluation does not support the claim"));
                    }
                    Ok(())
                }
                Witness::Affine { bound, optimum, vertex } => {
                    if !(*optimum >= self.threshold) {
                        return Err(reject(path, "affine optimum is below the target"));
                    }
                    let (lo, _) = affine_constants(self.e, bounds, &bound.center, &bound.slopes)
                        .map_err(|_| reject(path, "affine bound cannot be re-derived"))?;
                    if bound.constant > lo {
                        return Err(reject(path, "affine constant exceeds the rigorous bound"));
                    }
                    let (min, _) = bound
                        .minimize(bounds, &self.rows)
                        .ok_or_else(|| reject(path, "leaf is infeasible but claims an optimum"))?;
                    if min < *optimum {
                        return Err(reject(path, "recorded optimum exceeds the recomputed minimum"));
                    }
                    if !BoxDomain::new(bounds.clone()).contains_point(vertex) {
                        return Err(reject(path, "recorded vertex lies outside the leaf"));
                    }
                    Ok(())
                }
                Witness::Infeasible => {
                    if self.rows.is_empty() || region_feasible(bounds, &self.rows) {
                        return Err(reject(path, "leaf is not infeasible"));
                    }
                    Ok(())
                }
            },
        }
    }
}
