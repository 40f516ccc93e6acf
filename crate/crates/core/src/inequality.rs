//! Determinant inequality checks.
//!
//! The central check compares two kernel covariance matrices `G1 >= G2`:
//!
//! ```text
//! det G1 >= det G2 + det(G1 - G2) + Σ_{k=1}^{N-1} C(N,k) det(G2)^{k/N} det(G1 - G2)^{(N-k)/N}
//! ```
//!
//! which is the binomial expansion of the Minkowski determinant inequality
//! `det(G2 + (G1-G2))^{1/N} >= det(G2)^{1/N} + det(G1-G2)^{1/N}`. Reports also
//! carry the variant whose remainder uses `det G1` as its base, which does not
//! hold in general.
//!
//! Pointwise hypotheses ("for all t > 0") are checked on a finite log grid plus
//! the eigenvalue pairs of the state; reports mark them as sampled.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covariance::{commutator_bound_matrix, cov_matrix, psd_determinant, symmetric_eigenvalues, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::monotone::{FopSpec, Kernel};
use crate::states::{DensityMatrix, ObservableTuple};

/// Tolerances used by every check. Defaults are the pinned contract values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Determinant slack relative to `max(1, |lhs|, |rhs|)`.
    pub det_rel: f64,
    /// Slack on sampled pointwise hypotheses, relative to the compared values.
    pub hypothesis: f64,
    /// Slack on the smallest eigenvalue of `G1 - G2`, relative to its scale.
    pub diff_psd: f64,
    /// Condition number above which a failing margin is downgraded to WARN.
    pub ill_conditioned: f64,
    /// Eigenvalues within `det_clamp * max|λ|` of zero count as zero in the
    /// determinants that enter N-th roots, and negative determinants are
    /// clamped to zero.
    pub det_clamp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            det_rel: 1e-9,
            hypothesis: 1e-12,
            diff_psd: 1e-8,
            ill_conditioned: 1e12,
            det_clamp: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn det_tol(&self, lhs: f64, rhs: f64) -> f64 {
        self.det_rel * 1f64.max(lhs.abs()).max(rhs.abs())
    }
}

/// Log-spaced sample of `t` in `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisGrid {
    pub points: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for HypothesisGrid {
    fn default() -> Self {
        HypothesisGrid {
            points: 200,
            lo: 1e-6,
            hi: 1e6,
        }
    }
}

impl HypothesisGrid {
    pub fn with_points(points: usize) -> Self {
        HypothesisGrid {
            points,
            ..Default::default()
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        match self.points {
            0 => vec![],
            1 => vec![1.0],
            p => (0..p)
                .map(|i| (a + (b - a) * i as f64 / (p - 1) as f64).exp())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    HypothesisNotMet,
    /// Margin below tolerance on an ill-conditioned instance.
    Warn,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::HypothesisNotMet => "HYPOTHESIS_NOT_MET",
            Verdict::Warn => "WARN",
        })
    }
}

/// Outcome of sampling a pointwise hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub holds: bool,
    /// True when the hypothesis was checked on finitely many points only.
    pub sampled: bool,
    pub points_checked: usize,
    /// Smallest normalized margin seen; `>= -tol` when the hypothesis holds.
    pub min_margin: f64,
    /// Where `min_margin` was attained: `(x, y)` for kernels, `(t, 0)` for
    /// ratio conditions.
    pub witness: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl HypothesisReport {
    fn trivial() -> Self {
        HypothesisReport {
            holds: true,
            sampled: false,
            points_checked: 0,
            min_margin: 0.0,
            witness: None,
            note: None,
        }
    }

    fn and(mut self, other: &HypothesisReport) -> Self {
        self.points_checked += other.points_checked;
        if other.min_margin < self.min_margin {
            self.min_margin = other.min_margin;
            self.witness = other.witness;
        }
        self.holds &= other.holds;
        self.sampled |= other.sampled;
        if self.note.is_none() {
            self.note = other.note.clone();
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiReport {
    /// `det(P + Q)^{1/N}`
    pub lhs: f64,
    /// `det(P)^{1/N} + det(Q)^{1/N}`
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

/// One evaluated inequality `lhs >= rhs` with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub check: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub g1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub g2: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f2: Option<String>,
    /// Hilbert-space dimension.
    pub n: usize,
    /// Number of observables.
    #[serde(rename = "N")]
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub hypothesis: HypothesisReport,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub remainder: Option<f64>,
    /// Remainder with `det G1` as base, as sometimes stated.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub remainder_printed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub margin_printed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub minkowski: Option<MinkowskiReport>,
    pub components: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
    pub verdict: Verdict,
}

impl InequalityReport {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// True when the variant with `det G1` as remainder base fails here while
    /// the Minkowski-derived variant passes.
    pub fn is_printed_remainder_counterexample(&self) -> bool {
        matches!(self.verdict, Verdict::Pass)
            && self.margin_printed.is_some_and(|m| m < -self.tol)
    }
}

/// `Σ_{k=1}^{N-1} C(N,k) base^{k/N} diff^{(N-k)/N}`.
pub fn remainder_r(det_base: f64, det_diff: f64, count: usize) -> Result<f64> {
    if !(det_base >= 0.0) || !(det_diff >= 0.0) {
        return Err(Error::Domain(format!(
            "remainder needs nonnegative determinants, got {det_base:e} and {det_diff:e}"
        )));
    }
    if count == 0 {
        return Err(Error::Domain("remainder needs N >= 1".into()));
    }
    let nf = count as f64;
    let a = det_base.powf(1.0 / nf);
    let b = det_diff.powf(1.0 / nf);
    let mut binom = 1.0;
    let mut sum = 0.0;
    for k in 1..count {
        binom = binom * (count - k + 1) as f64 / k as f64;
        sum += binom * a.powi(k as i32) * b.powi((count - k) as i32);
    }
    Ok(sum)
}

/// Samples `g1 >= g2` at every eigenvalue pair and at `(1, t)` for grid `t`.
/// Catalog kernels are homogeneous of degree one, so the ray `(1, t)` covers
/// the quadrant.
pub fn kernel_dominance(
    g1: &Kernel,
    g2: &Kernel,
    spectrum: &[f64],
    grid: &HypothesisGrid,
    tol: &Tolerances,
) -> Result<HypothesisReport> {
    let mut points: Vec<(f64, f64)> = Vec::new();
    for &x in spectrum {
        for &y in spectrum {
            points.push((x, y));
        }
    }
    points.extend(grid.ratios().into_iter().map(|t| (1.0, t)));

    let mut report = HypothesisReport {
        holds: true,
        sampled: true,
        points_checked: points.len(),
        min_margin: f64::INFINITY,
        witness: None,
        note: None,
    };
    for (x, y) in points {
        let a = g1.eval(x, y)?;
        let b = g2.eval(x, y)?;
        let margin = (a - b) / 1f64.max(a.abs()).max(b.abs());
        if margin < report.min_margin {
            report.min_margin = margin;
            report.witness = Some((x, y));
        }
    }
    report.holds = report.min_margin >= -tol.hypothesis;
    Ok(report)
}

fn clamp_det(det: f64) -> f64 {
    det.max(0.0)
}

fn nth_root(det: f64, count: usize) -> f64 {
    clamp_det(det).powf(1.0 / count as f64)
}

/// `det G1 >= det G2 + det(G1 - G2) + R` for kernels with `g1 >= g2`.
pub fn check_main_inequality(
    d: &DensityMatrix,
    g1: &Kernel,
    g2: &Kernel,
    obs: &ObservableTuple,
    grid: &HypothesisGrid,
    tol: &Tolerances,
) -> Result<InequalityReport> {
    let hypothesis = kernel_dominance(g1, g2, d.eigenvalues(), grid, tol)?;
    let m1 = cov_matrix(d, obs, g1)?;
    let m2 = cov_matrix(d, obs, g2)?;
    let diff = m1.minus(&m2)?;
    let count = obs.len();

    let mut warnings = Vec::new();
    let diff_min = diff.min_eigenvalue();
    if diff_min < -tol.diff_psd * m1.scale().max(m2.scale()) {
        if hypothesis.holds {
            return Err(Error::InternalConsistency(format!(
                "G1 - G2 has eigenvalue {diff_min:e} although {g1} >= {g2} holds on the spectrum"
            )));
        }
        warnings.push(format!("G1 - G2 is not PSD (min eigenvalue {diff_min:e})"));
    }

    let (det1, det2, det_diff) = (m1.psd_det(tol.det_clamp), m2.psd_det(tol.det_clamp), diff.psd_det(tol.det_clamp));
    for (name, v) in [("det_G1", det1), ("det_G2", det2), ("det_G1_minus_G2", det_diff)] {
        if v < 0.0 {
            warnings.push(format!("{name} = {v:e} is negative beyond clamp"));
        }
    }
    let remainder = remainder_r(clamp_det(det2), clamp_det(det_diff), count)?;
    let remainder_printed = remainder_r(clamp_det(det1), clamp_det(det_diff), count)?;
    let lhs = det1;
    let rhs = det2 + det_diff + remainder;
    let margin = lhs - rhs;
    let t = tol.det_tol(lhs, rhs);
    let margin_printed = lhs - (det2 + det_diff + remainder_printed);

    let mk_lhs = nth_root(det1, count);
    let mk_rhs = nth_root(det2, count) + nth_root(det_diff, count);
    let minkowski = MinkowskiReport {
        lhs: mk_lhs,
        rhs: mk_rhs,
        margin: mk_lhs - mk_rhs,
        pass: mk_lhs - mk_rhs >= -tol.det_rel * mk_lhs.max(1.0),
    };
    if !minkowski.pass {
        warnings.push(format!("Minkowski step margin {:e}", minkowski.margin));
    }

    let verdict = decide(&hypothesis, margin, t, &[&m1, &m2], tol, &mut warnings);

    let mut components = BTreeMap::new();
    components.insert("det_G1".into(), det1);
    components.insert("det_G2".into(), det2);
    components.insert("det_G1_minus_G2".into(), det_diff);
    components.insert("min_eig_G1_minus_G2".into(), diff_min);

    Ok(InequalityReport {
        check: "main".into(),
        g1: Some(g1.to_string()),
        g2: Some(g2.to_string()),
        f1: None,
        f2: None,
        n: d.dim(),
        count,
        seed: None,
        hypothesis,
        lhs,
        rhs,
        margin,
        tol: t,
        remainder: Some(remainder),
        remainder_printed: Some(remainder_printed),
        margin_printed: Some(margin_printed),
        minkowski: Some(minkowski),
        components,
        warnings,
        verdict,
    })
}

fn decide(
    hypothesis: &HypothesisReport,
    margin: f64,
    t: f64,
    mats: &[&CovarianceMatrix],
    tol: &Tolerances,
    warnings: &mut Vec<String>,
) -> Verdict {
    if !hypothesis.holds {
        return Verdict::HypothesisNotMet;
    }
    if margin >= -t {
        return Verdict::Pass;
    }
    let worst = mats
        .iter()
        .map(|m| m.condition_number())
        .fold(0.0, f64::max);
    if worst > tol.ill_conditioned {
        warnings.push(format!("ill-conditioned covariance (condition number {worst:e})"));
        Verdict::Warn
    } else {
        Verdict::Fail
    }
}

/// Samples `f1(0)/f1(t) >= f2(0)/f2(t)` on the grid.
pub fn check_fop_ordering(f1: FopSpec, f2: FopSpec, grid: &HypothesisGrid) -> HypothesisReport {
    let tol = Tolerances::default();
    sample_ratio_condition(grid, &tol, |t| {
        let a = f1.f_zero() / f1.eval_unchecked(t);
        let b = f2.f_zero() / f2.eval_unchecked(t);
        (a, b)
    })
}

/// Samples `lhs(t) >= rhs(t)` where `cond` returns `(lhs, rhs)`.
fn sample_ratio_condition(
    grid: &HypothesisGrid,
    tol: &Tolerances,
    cond: impl Fn(f64) -> (f64, f64),
) -> HypothesisReport {
    let mut report = HypothesisReport {
        holds: true,
        sampled: true,
        points_checked: 0,
        min_margin: f64::INFINITY,
        witness: None,
        note: None,
    };
    for t in grid.ratios() {
        let (a, b) = cond(t);
        report.points_checked += 1;
        let margin = (a - b) / 1f64.max(a.abs()).max(b.abs());
        if margin < report.min_margin {
            report.min_margin = margin;
            report.witness = Some((t, 0.0));
        }
    }
    report.holds = report.min_margin >= -tol.hypothesis;
    report
}

/// `det Cov >= det qCov^s_f >= det qCov^as_f`, plus the outer comparison
/// `det Cov >= det qCov^as_f`.
pub fn check_hierarchy(
    d: &DensityMatrix,
    f: FopSpec,
    obs: &ObservableTuple,
    grid: &HypothesisGrid,
    tol: &Tolerances,
) -> Result<Vec<InequalityReport>> {
    let cl = Kernel::Classical;
    let s = Kernel::SymmetricF(f);
    let a = Kernel::AsymmetricF(f);
    [("hierarchy:cl>=s", &cl, &s), ("hierarchy:s>=as", &s, &a), ("hierarchy:cl>=as", &cl, &a)]
        .into_iter()
        .map(|(name, g1, g2)| {
            let mut r = check_main_inequality(d, g1, g2, obs, grid, tol)?;
            r.check = name.into();
            r.f1 = Some(f.to_string());
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossDirection {
    /// `det qCov^as_{f1} >= det qCov^s_{f2}`
    AsGeqS,
    /// `det qCov^s_{f1} >= det qCov^as_{f2}`
    SGeqAs,
}

impl std::str::FromStr for CrossDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "as-geq-s" | "asgeqs" | "as>=s" => Ok(CrossDirection::AsGeqS),
            "s-geq-as" | "sgeqas" | "s>=as" => Ok(CrossDirection::SGeqAs),
            _ => Err(Error::InvalidSpec(s.into(), "direction must be as-geq-s or s-geq-as".into())),
        }
    }
}

/// Excluded neighbourhood of `t = 1` where `(t+1)^2/(t-1)^2` diverges.
const CROSS_WINDOW: f64 = 1e-6;

/// Mixed comparison of asymmetric and symmetric covariances of two functions.
///
/// For `AsGeqS` the sampled condition is
/// `f1(0)/f1(t) >= f2(0)/f2(t) * (t+1)^2/(t-1)^2`, equivalent to
/// `g^as_{f1} >= g^s_{f2}`. For `SGeqAs` it is
/// `f2(0)/f2(t) <= f1(0)/f1(t) * (t+1)^2/(t-1)^2`, equivalent to
/// `g^s_{f1} >= g^as_{f2}`. At `t = 1` the kernels are compared directly.
pub fn check_cross_theorem(
    f1: FopSpec,
    f2: FopSpec,
    d: &DensityMatrix,
    obs: &ObservableTuple,
    direction: CrossDirection,
    grid: &HypothesisGrid,
    tol: &Tolerances,
) -> Result<InequalityReport> {
    let factor = |t: f64| ((t + 1.0) / (t - 1.0)).powi(2);
    let r1 = |t: f64| f1.f_zero() / f1.eval_unchecked(t);
    let r2 = |t: f64| f2.f_zero() / f2.eval_unchecked(t);
    let grid_pts: Vec<f64> = grid
        .ratios()
        .into_iter()
        .filter(|t| (t - 1.0).abs() >= CROSS_WINDOW)
        .collect();

    let (g1, g2, name) = match direction {
        CrossDirection::AsGeqS => (Kernel::AsymmetricF(f1), Kernel::SymmetricF(f2), "cross:as>=s"),
        CrossDirection::SGeqAs => (Kernel::SymmetricF(f1), Kernel::AsymmetricF(f2), "cross:s>=as"),
    };

    let mut hyp = HypothesisReport {
        holds: true,
        sampled: true,
        points_checked: 0,
        min_margin: f64::INFINITY,
        witness: None,
        note: Some(format!("|t - 1| < {CROSS_WINDOW:e} checked on the kernels at x = y")),
    };
    for &t in &grid_pts {
        let (a, b) = match direction {
            CrossDirection::AsGeqS => (r1(t), r2(t) * factor(t)),
            CrossDirection::SGeqAs => (r1(t) * factor(t), r2(t)),
        };
        hyp.points_checked += 1;
        let margin = (a - b) / 1f64.max(a.abs()).max(b.abs());
        if margin < hyp.min_margin {
            hyp.min_margin = margin;
            hyp.witness = Some((t, 0.0));
        }
    }
    // the divergent point, in the kernel parametrization
    let (a, b) = (g1.eval(1.0, 1.0)?, g2.eval(1.0, 1.0)?);
    hyp.points_checked += 1;
    let margin = (a - b) / 1f64.max(a.abs()).max(b.abs());
    if margin < hyp.min_margin {
        hyp.min_margin = margin;
        hyp.witness = Some((1.0, 1.0));
    }
    hyp.holds = hyp.min_margin >= -tol.hypothesis;

    let mut r = check_main_inequality(d, &g1, &g2, obs, grid, tol)?;
    r.hypothesis = hyp.and(&r.hypothesis);
    if !r.hypothesis.holds {
        r.verdict = Verdict::HypothesisNotMet;
    }
    r.check = name.into();
    r.f1 = Some(f1.to_string());
    r.f2 = Some(f2.to_string());
    Ok(r)
}

/// `det Cov >= det(-(i/2) Tr(D[A_h, A_j]))`.
pub fn check_robertson_schrodinger(
    d: &DensityMatrix,
    obs: &ObservableTuple,
    tol: &Tolerances,
) -> Result<InequalityReport> {
    let c = cov_matrix(d, obs, &Kernel::Classical)?;
    let k = commutator_bound_matrix(d, obs)?;
    let (lhs, rhs) = (c.det(), k.det());
    let margin = lhs - rhs;
    let t = tol.det_tol(lhs, rhs);
    let mut warnings = Vec::new();
    let verdict = decide(&HypothesisReport::trivial(), margin, t, &[&c], tol, &mut warnings);
    let mut components = BTreeMap::new();
    components.insert("det_Cov".into(), lhs);
    components.insert("det_commutator".into(), rhs);
    Ok(InequalityReport {
        check: if obs.len() == 2 { "schrodinger" } else { "robertson" }.into(),
        g1: Some(Kernel::Classical.to_string()),
        g2: None,
        f1: None,
        f2: None,
        n: d.dim(),
        count: obs.len(),
        seed: None,
        hypothesis: HypothesisReport::trivial(),
        lhs,
        rhs,
        margin,
        tol: t,
        remainder: None,
        remainder_printed: None,
        margin_printed: None,
        minkowski: None,
        components,
        warnings,
        verdict,
    })
}

/// `det(P + Q)^{1/N} >= det(P)^{1/N} + det(Q)^{1/N}` for symmetric PSD `P, Q`.
pub fn minkowski_check(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<MinkowskiReport> {
    let size = p.nrows();
    if p.ncols() != size || q.nrows() != size || q.ncols() != size || size == 0 {
        return Err(Error::DimensionMismatch {
            expected: size,
            got: q.nrows(),
        });
    }
    let scale = p.amax().max(q.amax()).max(1.0);
    for (name, m) in [("P", p), ("Q", q)] {
        if (m - m.transpose()).amax() > 1e-12 * scale {
            return Err(Error::Validation {
                invariant: "symmetry",
                index: None,
                detail: format!("{name} is not symmetric"),
            });
        }
        let min = symmetric_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-9 * scale {
            return Err(Error::Validation {
                invariant: "positive semidefiniteness",
                index: None,
                detail: format!("{name} has eigenvalue {min:e}"),
            });
        }
    }
    let det = |m: &DMatrix<f64>| psd_determinant(m, Tolerances::default().det_clamp);
    let lhs = nth_root(det(&(p + q)), size);
    let rhs = nth_root(det(p), size) + nth_root(det(q), size);
    let margin = lhs - rhs;
    Ok(MinkowskiReport {
        lhs,
        rhs,
        margin,
        pass: margin >= -1e-9 * scale,
    })
}

/// Classical kernel plus the symmetric and asymmetric kernels of every
/// catalog function.
pub fn catalog_kernels() -> Vec<Kernel> {
    let mut ks = vec![Kernel::Classical];
    for f in FopSpec::catalog() {
        ks.push(Kernel::SymmetricF(f));
        ks.push(Kernel::AsymmetricF(f));
    }
    ks
}

/// Ordered pairs of distinct catalog kernels whose dominance `g1 >= g2`
/// holds on the grid ray.
pub fn catalog_kernel_pairs(grid: &HypothesisGrid, tol: &Tolerances) -> Vec<(Kernel, Kernel)> {
    let ks = catalog_kernels();
    let mut pairs = Vec::new();
    for (i, g1) in ks.iter().enumerate() {
        for (j, g2) in ks.iter().enumerate() {
            if i == j {
                continue;
            }
            let ok = kernel_dominance(g1, g2, &[], grid, tol)
                .map(|h| h.holds)
                .unwrap_or(false);
            if ok {
                pairs.push((g1.clone(), g2.clone()));
            }
        }
    }
    pairs
}
