//! Operator monotone functions, their means, and the covariance kernels built
//! from them.
//!
//! Every function here is normalized (`f(1) = 1`) and symmetric in the sense
//! `f(x) = x f(1/x)`. The associated mean is `m_f(x, y) = y f(x / y)`, which is
//! symmetric in its arguments and lies between `min(x, y)` and `max(x, y)`.
//!
//! Kernels are symmetric positive functions on the positive quadrant. Evaluated
//! at pairs of eigenvalues of a state they give the weights of the spectral
//! inner products in [`crate::covariance`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this relative gap the logarithmic mean switches to its Taylor series.
const LOG_MEAN_SERIES_GAP: f64 = 1e-8;

/// Slack allowed on a difference kernel before it is reported as a dominance
/// violation, relative to `max(1, g1)`.
pub const DOMINANCE_SLACK: f64 = 1e-12;

/// An operator monotone function from the built-in catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FopSpec {
    /// `(1 + x) / 2`, the symmetric logarithmic derivative (Bures) function.
    Sld,
    /// `(sqrt(x) + 1)^2 / 4`, Wigner–Yanase.
    Wy,
    /// Wigner–Yanase–Dyson family, `beta` in `[-1, 2]`. The endpoints 0 and 1
    /// are the Kubo–Mori limit.
    Wyd(f64),
    /// `(x - 1) / ln x`, Kubo–Mori.
    KuboMori,
}

impl FopSpec {
    /// Validated constructor for the Wigner–Yanase–Dyson family.
    pub fn wyd(beta: f64) -> Result<Self> {
        if !beta.is_finite() || !(-1.0..=2.0).contains(&beta) {
            return Err(Error::InvalidSpec(
                format!("wyd:{beta}"),
                "beta must lie in [-1, 2]".into(),
            ));
        }
        Ok(FopSpec::Wyd(beta))
    }

    /// The catalog swept by the hierarchy checks.
    pub fn catalog() -> Vec<FopSpec> {
        vec![
            FopSpec::Sld,
            FopSpec::Wy,
            FopSpec::Wyd(-1.0),
            FopSpec::Wyd(0.3),
            FopSpec::Wyd(0.5),
            FopSpec::Wyd(1.5),
            FopSpec::KuboMori,
        ]
    }

    /// Evaluates `f(x)` for `x > 0`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_positive("x", x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        match *self {
            FopSpec::Sld => 0.5 * (1.0 + x),
            FopSpec::Wy => {
                let s = x.sqrt() + 1.0;
                0.25 * s * s
            }
            FopSpec::Wyd(beta) if is_km_limit(beta) => reflect(x, km_unit),
            FopSpec::Wyd(beta) => reflect(x, |t| wyd_unit(beta, t)),
            FopSpec::KuboMori => reflect(x, km_unit),
        }
    }

    /// `lim_{x -> 0+} f(x)`.
    pub fn f_zero(&self) -> f64 {
        match *self {
            FopSpec::Sld => 0.5,
            FopSpec::Wy => 0.25,
            FopSpec::Wyd(beta) if beta > 0.0 && beta < 1.0 => beta * (1.0 - beta),
            FopSpec::Wyd(_) | FopSpec::KuboMori => 0.0,
        }
    }

    /// Regular functions have `f(0) > 0`; only those give nontrivial
    /// commutator/anticommutator covariances.
    pub fn is_regular(&self) -> bool {
        self.f_zero() > 0.0
    }

    /// The operator mean `m_f(x, y) = y f(x / y)`.
    pub fn mean(&self, x: f64, y: f64) -> Result<f64> {
        check_positive("x", x)?;
        check_positive("y", y)?;
        Ok(self.mean_unchecked(x, y))
    }

    /// Evaluated as `hi * f(lo / hi)`, which keeps the argument of `f` in
    /// `(0, 1]` and makes the mean exactly symmetric.
    pub(crate) fn mean_unchecked(&self, x: f64, y: f64) -> f64 {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        match *self {
            FopSpec::Sld => 0.5 * (x + y),
            FopSpec::KuboMori => log_mean(lo, hi),
            FopSpec::Wyd(beta) if is_km_limit(beta) => log_mean(lo, hi),
            _ => hi * self.eval_unchecked(lo / hi),
        }
    }
}

fn is_km_limit(beta: f64) -> bool {
    beta == 0.0 || beta == 1.0
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Applies `f(x) = x f(1/x)` so `unit` only ever sees arguments in `(0, 1]`.
fn reflect(x: f64, unit: impl Fn(f64) -> f64) -> f64 {
    if x > 1.0 {
        x * unit(1.0 / x)
    } else {
        unit(x)
    }
}

fn km_unit(x: f64) -> f64 {
    let d = x - 1.0;
    if d.abs() < LOG_MEAN_SERIES_GAP {
        1.0 + d / 2.0 - d * d / 12.0
    } else {
        d / x.ln()
    }
}

fn wyd_unit(beta: f64, x: f64) -> f64 {
    if x == 1.0 {
        return 1.0;
    }
    let u = x.ln();
    let d = x - 1.0;
    let den = (beta * u).exp_m1() * ((1.0 - beta) * u).exp_m1();
    let v = beta * (1.0 - beta) * d * d / den;
    if v.is_finite() {
        v
    } else {
        // x^(1-beta) overflowed for tiny x with beta > 1 or beta < 0: f -> 0.
        0.0
    }
}

/// `(hi - lo) / (ln hi - ln lo)` with a series fallback near the diagonal.
fn log_mean(lo: f64, hi: f64) -> f64 {
    let gap = hi - lo;
    if gap < LOG_MEAN_SERIES_GAP * hi {
        // hi * km(r) with r = lo / hi close to 1
        let d = lo / hi - 1.0;
        hi * (1.0 + d / 2.0 - d * d / 12.0)
    } else {
        gap / (gap / lo).ln_1p()
    }
}

impl fmt::Display for FopSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FopSpec::Sld => write!(f, "sld"),
            FopSpec::Wy => write!(f, "wy"),
            FopSpec::Wyd(beta) => write!(f, "wyd:{beta}"),
            FopSpec::KuboMori => write!(f, "km"),
        }
    }
}

impl FromStr for FopSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "sld" => Ok(FopSpec::Sld),
            "wy" => Ok(FopSpec::Wy),
            "km" => Ok(FopSpec::KuboMori),
            _ => {
                let beta = t
                    .strip_prefix("wyd:")
                    .ok_or_else(|| Error::InvalidSpec(s.into(), "unknown function".into()))?;
                let beta: f64 = beta
                    .parse()
                    .map_err(|_| Error::InvalidSpec(s.into(), "beta is not a number".into()))?;
                FopSpec::wyd(beta)
            }
        }
    }
}

impl TryFrom<String> for FopSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FopSpec> for String {
    fn from(f: FopSpec) -> String {
        f.to_string()
    }
}

/// A user-supplied kernel. The closure must be symmetric and nonnegative on
/// the positive quadrant; [`Kernel::eval`] only checks finiteness.
#[derive(Clone)]
pub struct CustomKernel {
    pub name: String,
    func: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl CustomKernel {
    pub fn new(name: impl Into<String>, func: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        CustomKernel {
            name: name.into(),
            func: Arc::new(func),
        }
    }
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel").field("name", &self.name).finish()
    }
}

/// A symmetric positive kernel `g(x, y)` inducing a spectral inner product.
#[derive(Debug, Clone)]
pub enum Kernel {
    /// `(x + y) / 2`; reproduces the symmetrized covariance.
    Classical,
    /// `f(0) (x + y)^2 / (2 m_f(x, y))`.
    SymmetricF(FopSpec),
    /// `f(0) (x - y)^2 / (2 m_f(x, y))`.
    AsymmetricF(FopSpec),
    /// `1 / m_f(x, y)`; the monotone metric itself.
    InverseMean(FopSpec),
    /// `g1 - g2`, only meaningful where `g1 >= g2`.
    Difference(Box<Kernel>, Box<Kernel>),
    Custom(CustomKernel),
}

impl Kernel {
    pub fn difference(g1: Kernel, g2: Kernel) -> Kernel {
        Kernel::Difference(Box::new(g1), Box::new(g2))
    }

    /// The function this kernel was derived from, if any.
    pub fn fop(&self) -> Option<FopSpec> {
        match self {
            Kernel::SymmetricF(f) | Kernel::AsymmetricF(f) | Kernel::InverseMean(f) => Some(*f),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        check_positive("x", x)?;
        check_positive("y", y)?;
        let v = self.eval_unchecked(x, y)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { x, y })
        }
    }

    fn eval_unchecked(&self, x: f64, y: f64) -> Result<f64> {
        Ok(match self {
            Kernel::Classical => 0.5 * (x + y),
            Kernel::SymmetricF(f) => {
                let s = x + y;
                f.f_zero() * s * s / (2.0 * f.mean_unchecked(x, y))
            }
            Kernel::AsymmetricF(f) => {
                let d = x - y;
                f.f_zero() * d * d / (2.0 * f.mean_unchecked(x, y))
            }
            Kernel::InverseMean(f) => 1.0 / f.mean_unchecked(x, y),
            Kernel::Difference(g1, g2) => {
                let a = g1.eval_unchecked(x, y)?;
                let b = g2.eval_unchecked(x, y)?;
                let v = a - b;
                if v < -DOMINANCE_SLACK * a.abs().max(1.0) {
                    return Err(Error::DominanceViolation { x, y, value: v });
                }
                v
            }
            Kernel::Custom(c) => (c.func)(x, y),
        })
    }
}

impl PartialEq for Kernel {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Kernel::Classical, Kernel::Classical) => true,
            (Kernel::SymmetricF(a), Kernel::SymmetricF(b))
            | (Kernel::AsymmetricF(a), Kernel::AsymmetricF(b))
            | (Kernel::InverseMean(a), Kernel::InverseMean(b)) => a == b,
            (Kernel::Difference(a1, a2), Kernel::Difference(b1, b2)) => a1 == b1 && a2 == b2,
            (Kernel::Custom(a), Kernel::Custom(b)) => Arc::ptr_eq(&a.func, &b.func),
            _ => false,
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Classical => write!(f, "cl"),
            Kernel::SymmetricF(fop) => write!(f, "s:{fop}"),
            Kernel::AsymmetricF(fop) => write!(f, "as:{fop}"),
            Kernel::InverseMean(fop) => write!(f, "inv:{fop}"),
            Kernel::Difference(a, b) => write!(f, "({a})-({b})"),
            Kernel::Custom(c) => write!(f, "custom:{}", c.name),
        }
    }
}

/// Parses `cl`, `s:<f>`, `as:<f>` and `inv:<f>`.
impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("cl") {
            return Ok(Kernel::Classical);
        }
        let (kind, fop) = t
            .split_once(':')
            .ok_or_else(|| Error::InvalidSpec(s.into(), "expected cl, s:<f>, as:<f> or inv:<f>".into()))?;
        let fop: FopSpec = fop.parse()?;
        match kind.to_ascii_lowercase().as_str() {
            "s" => Ok(Kernel::SymmetricF(fop)),
            "as" => Ok(Kernel::AsymmetricF(fop)),
            "inv" => Ok(Kernel::InverseMean(fop)),
            _ => Err(Error::InvalidSpec(s.into(), format!("unknown kernel kind `{kind}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let (a, b) = (lo.ln(), hi.ln());
        (0..n)
            .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }

    /// The product formula as printed, with no reflection or special cases.
    fn wyd_raw(beta: f64, x: f64) -> f64 {
        beta * (1.0 - beta) * (x - 1.0).powi(2) / ((x.powf(beta) - 1.0) * (x.powf(1.0 - beta) - 1.0))
    }

    #[test]
    fn eval_examples() {
        assert_eq!(FopSpec::Sld.eval(3.0).unwrap(), 2.0);
        assert_eq!(FopSpec::Wy.eval(1.0).unwrap(), 1.0);
        // 2x/(1+x) at x=4
        assert_relative_eq!(FopSpec::Wyd(2.0).eval(4.0).unwrap(), 1.6, max_relative = 1e-14);
        let near = 0.5 * (wyd_raw(2.0 + 1e-7, 4.0) + wyd_raw(2.0 - 1e-7, 4.0));
        assert_relative_eq!(near, 1.6, max_relative = 1e-6);
    }

    #[test]
    fn eval_rejects_nonpositive() {
        assert!(matches!(FopSpec::Sld.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(FopSpec::Wy.eval(-1.0), Err(Error::Domain(_))));
        assert!(FopSpec::KuboMori.eval(f64::NAN).is_err());
    }

    #[test]
    fn wyd_limits_are_kubo_mori() {
        for x in [0.01, 0.5, 1.0, 2.0, 100.0] {
            let km = FopSpec::KuboMori.eval(x).unwrap();
            assert_eq!(FopSpec::Wyd(0.0).eval(x).unwrap(), km);
            assert_eq!(FopSpec::Wyd(1.0).eval(x).unwrap(), km);
            let near = FopSpec::Wyd(1e-6).eval(x).unwrap();
            assert!((near - km).abs() < 1e-4, "x={x}: {near} vs {km}");
        }
        assert_eq!(FopSpec::KuboMori.eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn wyd_half_is_wigner_yanase() {
        for x in log_grid(1e-4, 1e4, 50) {
            assert_relative_eq!(
                FopSpec::Wyd(0.5).eval(x).unwrap(),
                FopSpec::Wy.eval(x).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn f_zero_values() {
        assert_eq!(FopSpec::Sld.f_zero(), 0.5);
        assert_eq!(FopSpec::Wy.f_zero(), 0.25);
        assert_relative_eq!(FopSpec::Wyd(0.3).f_zero(), 0.21, max_relative = 1e-15);
        // numerical limit of the raw formula
        for x in [1e-9, 1e-12] {
            assert!((wyd_raw(0.3, x) - 0.21).abs() < 1e-2);
        }
        assert!((wyd_raw(0.3, 1e-12) - 0.21).abs() < 1e-4);
        assert_eq!(FopSpec::Wyd(1.5).f_zero(), 0.0);
        assert_eq!(FopSpec::Wyd(-1.0).f_zero(), 0.0);
        assert_eq!(FopSpec::KuboMori.f_zero(), 0.0);
        assert!(!FopSpec::KuboMori.is_regular());
    }

    #[test]
    fn f_zero_matches_small_x() {
        for f in FopSpec::catalog() {
            // Kubo-Mori approaches 0 like 1 / |ln x|
            let v = f.eval(1e-300).unwrap();
            assert!((v - f.f_zero()).abs() < 2e-3, "{f}: {v} vs {}", f.f_zero());
        }
    }

    #[test]
    fn mean_examples() {
        assert_eq!(FopSpec::Sld.mean(2.0, 4.0).unwrap(), 3.0);
        assert_eq!(FopSpec::Wy.mean(1.0, 1.0).unwrap(), 1.0);
        let e = std::f64::consts::E;
        assert_relative_eq!(FopSpec::KuboMori.mean(1.0, e).unwrap(), e - 1.0, max_relative = 1e-14);
        // cross-check against y f(x/y)
        assert_relative_eq!(
            FopSpec::KuboMori.mean(1.0, e).unwrap(),
            e * FopSpec::KuboMori.eval(1.0 / e).unwrap(),
            max_relative = 1e-14
        );
        assert!(FopSpec::Sld.mean(0.0, 1.0).is_err());
    }

    #[test]
    fn log_mean_series_is_continuous() {
        let x = 0.37;
        for eps in [1e-6, 1e-8, 1e-9, 1e-11, 0.0] {
            let m = FopSpec::KuboMori.mean(x, x * (1.0 + eps)).unwrap();
            assert_relative_eq!(m, x * (1.0 + eps / 2.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn normalization_and_symmetry() {
        let grid = log_grid(1e-6, 1e6, 97);
        for f in FopSpec::catalog().into_iter().chain([FopSpec::Wyd(2.0), FopSpec::Wyd(0.9)]) {
            assert_eq!(f.eval(1.0).unwrap(), 1.0, "{f}");
            let mut prev = 0.0;
            for &x in &grid {
                let v = f.eval(x).unwrap();
                let w = x * f.eval(1.0 / x).unwrap();
                assert!((v - w).abs() <= 1e-12 * v.max(1.0), "{f} at {x}: {v} vs {w}");
                assert!(v >= prev, "{f} not monotone at {x}");
                prev = v;
            }
        }
    }

    #[test]
    fn mean_is_symmetric_and_bracketed() {
        let grid = log_grid(1e-5, 1e5, 23);
        for f in FopSpec::catalog() {
            for &x in &grid {
                for &y in &grid {
                    let m = f.mean(x, y).unwrap();
                    let r = f.mean(y, x).unwrap();
                    assert!((m - r).abs() <= 1e-12 * m);
                    assert!(m >= x.min(y) * (1.0 - 1e-12) && m <= x.max(y) * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let g_as = Kernel::AsymmetricF(FopSpec::Sld);
        let g_s = Kernel::SymmetricF(FopSpec::Sld);
        for x in [1e-3, 0.4, 7.0] {
            assert_eq!(g_as.eval(x, x).unwrap(), 0.0);
        }
        assert_eq!(g_s.eval(2.0, 4.0).unwrap(), 3.0);
        assert_eq!(Kernel::Classical.eval(2.0, 4.0).unwrap(), 3.0);
        assert_eq!(g_as.eval(1.0, 3.0).unwrap(), 0.5);
        assert_eq!(Kernel::InverseMean(FopSpec::Sld).eval(0.7, 0.3).unwrap(), 2.0);
    }

    #[test]
    fn kernel_hierarchy_and_ratio() {
        let grid = log_grid(1e-6, 1e6, 41);
        for f in FopSpec::catalog() {
            let (s, a) = (Kernel::SymmetricF(f), Kernel::AsymmetricF(f));
            for &x in &grid {
                for &y in &grid {
                    let cl = Kernel::Classical.eval(x, y).unwrap();
                    let gs = s.eval(x, y).unwrap();
                    let ga = a.eval(x, y).unwrap();
                    let tol = 1e-12 * cl;
                    assert!(cl - gs >= -tol && gs - ga >= -tol && ga >= 0.0, "{f} at ({x},{y})");
                    if f.is_regular() && x != y {
                        let want = ((x + y) / (x - y)).powi(2);
                        assert!((gs / ga - want).abs() <= 1e-10 * want);
                    }
                }
            }
        }
    }

    #[test]
    fn kernels_survive_skewed_ratios() {
        for f in FopSpec::catalog() {
            for (x, y) in [(1e-7, 1e7), (1e-300, 1.0), (1.0, 1e150)] {
                for k in [Kernel::SymmetricF(f), Kernel::AsymmetricF(f), Kernel::InverseMean(f)] {
                    let v = k.eval(x, y).unwrap();
                    assert!(v >= 0.0, "{k} at ({x},{y}) = {v}");
                }
            }
        }
    }

    #[test]
    fn difference_kernel_dominance() {
        let ok = Kernel::difference(Kernel::Classical, Kernel::AsymmetricF(FopSpec::Wy));
        assert!(ok.eval(0.2, 0.8).unwrap() > 0.0);
        let bad = Kernel::difference(Kernel::AsymmetricF(FopSpec::Wy), Kernel::Classical);
        assert!(matches!(bad.eval(0.2, 0.8), Err(Error::DominanceViolation { .. })));
        let same = Kernel::difference(Kernel::Classical, Kernel::SymmetricF(FopSpec::Sld));
        assert!(same.eval(0.2, 0.8).unwrap().abs() < 1e-15);
    }

    #[test]
    fn custom_kernel_non_finite() {
        let k = Kernel::Custom(CustomKernel::new("bad", |x, y| 1.0 / (x - y)));
        assert!(matches!(k.eval(1.0, 1.0), Err(Error::NonFinite { .. })));
        assert_eq!(k.to_string(), "custom:bad");
    }

    #[test]
    fn spec_strings() {
        for s in ["sld", "wy", "km", "wyd:0.3", "wyd:-1", "wyd:2"] {
            let f: FopSpec = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("wyd:3".parse::<FopSpec>().is_err());
        assert!("wyd:x".parse::<FopSpec>().is_err());
        assert!("bures".parse::<FopSpec>().is_err());
        for s in ["cl", "s:wy", "as:km", "inv:wyd:0.25"] {
            assert_eq!(s.parse::<Kernel>().unwrap().to_string(), s);
        }
        assert!("x:sld".parse::<Kernel>().is_err());
        let json = serde_json::to_string(&FopSpec::Wyd(0.3)).unwrap();
        assert_eq!(json, "\"wyd:0.3\"");
        assert_eq!(serde_json::from_str::<FopSpec>(&json).unwrap(), FopSpec::Wyd(0.3));
    }
}
