//! Closed-form intersection exponents and the relations among them.
//!
//! Plane exponents ξ, half-plane exponents ξ̃, time exponents ζ = ξ/2 and
//! the function η linking ξ̃ to ξ are all expressed through the quantity
//! `√(24λ + 1)`. When every input is rational and each `24λ + 1` is a
//! perfect square, evaluation stays in exact rational arithmetic and
//! [`ExponentValue::exact`] carries the reduced fraction.
//!
//! Values outside the parameter region where a formula is established are
//! still returned, with `in_region == false`. Only hard domain violations
//! (negative packs, `n < 2`, too few packs of size at least one) are errors.

use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub type Rational = Ratio<i64>;

/// A real number that is kept exact while that remains possible.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Num {
    Exact(Rational),
    Real(f64),
}

impl Num {
    pub fn int(n: i64) -> Num {
        Num::Exact(Rational::from_integer(n))
    }

    pub fn frac(p: i64, q: i64) -> Num {
        Num::Exact(Rational::new(p, q))
    }

    pub fn value(&self) -> f64 {
        match *self {
            Num::Exact(r) => ratio_to_f64(r),
            Num::Real(x) => x,
        }
    }

    pub fn exact(&self) -> Option<Rational> {
        match *self {
            Num::Exact(r) => Some(r),
            Num::Real(_) => None,
        }
    }

    fn add(self, o: Num) -> Num {
        match (self, o) {
            (Num::Exact(a), Num::Exact(b)) => a
                .checked_add(&b)
                .map_or(Num::Real(self.value() + o.value()), Num::Exact),
            _ => Num::Real(self.value() + o.value()),
        }
    }

    fn sub(self, o: Num) -> Num {
        match (self, o) {
            (Num::Exact(a), Num::Exact(b)) => a
                .checked_sub(&b)
                .map_or(Num::Real(self.value() - o.value()), Num::Exact),
            _ => Num::Real(self.value() - o.value()),
        }
    }

    fn mul(self, o: Num) -> Num {
        match (self, o) {
            (Num::Exact(a), Num::Exact(b)) => a
                .checked_mul(&b)
                .map_or(Num::Real(self.value() * o.value()), Num::Exact),
            _ => Num::Real(self.value() * o.value()),
        }
    }

    fn div_int(self, d: i64) -> Num {
        match self {
            Num::Exact(a) => Num::Exact(a / d),
            Num::Real(x) => Num::Real(x / d as f64),
        }
    }

    /// Square root, exact when the argument is the square of a rational.
    fn sqrt(self) -> Num {
        if let Num::Exact(r) = self {
            if let (Some(p), Some(q)) = (exact_isqrt(*r.numer()), exact_isqrt(*r.denom())) {
                return Num::Exact(Rational::new(p, q));
            }
        }
        Num::Real(self.value().sqrt())
    }
}

impl From<f64> for Num {
    fn from(x: f64) -> Num {
        Num::Real(x)
    }
}

impl From<Rational> for Num {
    fn from(r: Rational) -> Num {
        Num::Exact(r)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Exact(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Num::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Num::Real(x) => write!(f, "{x}"),
        }
    }
}

fn ratio_to_f64(r: Rational) -> f64 {
    r.numer().to_f64().unwrap() / r.denom().to_f64().unwrap()
}

fn exact_isqrt(n: i64) -> Option<i64> {
    if n < 0 {
        return None;
    }
    let mut s = (n as f64).sqrt() as i64;
    while s * s > n {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= n {
        s += 1;
    }
    (s * s == n).then_some(s)
}

/// `√(24λ + 1)`, the common building block of every formula here.
fn root24(lambda: Num) -> Num {
    Num::int(24).mul(lambda).add(Num::int(1)).sqrt()
}

/// Whether λ lies in `{ l(l+1)/6 : l ∈ ℕ }`, i.e. `√(24λ+1)` is an odd integer.
pub fn is_triangular_sixth(lambda: Num) -> bool {
    match root24(lambda) {
        Num::Exact(r) => *r.denom() == 1 && r.numer() % 2 == 1,
        Num::Real(x) => {
            let l = x.round();
            (x - l).abs() < 1e-12 && (l as i64) % 2 == 1
        }
    }
}

/// Which closed form produced an [`ExponentValue`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    /// ζₙ = (4n² − 1)/24.
    ZetaN,
    /// ζ(2, λ) = ((5 + √(24λ+1))² − 4)/96.
    ZetaTwoLambda,
    /// ξ(1, λ) = ((3 + √(24λ+1))² − 4)/48.
    XiOneLambda,
    /// ξ̃(λ₁,…,λₘ) = ((Σ√(24λⱼ+1) − (m−1))² − 1)/24.
    XiTilde,
    /// η(x) = ((√(24x+1) − 1)² − 4)/48.
    Eta,
    /// ξ(λ₁,…,λₘ) = ((Σ√(24λⱼ+1) − m)² − 4)/48.
    Xi,
    /// 2 − 2ζ₂, 2 − η₂ or 2 − η₁.
    Dimension,
}

impl Formula {
    pub fn name(&self) -> &'static str {
        match self {
            Formula::ZetaN => "zeta_n",
            Formula::ZetaTwoLambda => "zeta_2_lambda",
            Formula::XiOneLambda => "xi_1_lambda",
            Formula::XiTilde => "xi_tilde",
            Formula::Eta => "eta",
            Formula::Xi => "xi",
            Formula::Dimension => "dimension",
        }
    }
}

/// An evaluated exponent with provenance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentValue {
    pub value: f64,
    pub exact: Option<Rational>,
    pub formula: Formula,
    pub in_region: bool,
}

impl ExponentValue {
    fn new(n: Num, formula: Formula, in_region: bool) -> Self {
        ExponentValue {
            value: n.value(),
            exact: n.exact(),
            formula,
            in_region,
        }
    }

    pub fn as_num(&self) -> Num {
        self.exact.map_or(Num::Real(self.value), Num::Exact)
    }

    /// Exact fraction as `p/q`, or the decimal value.
    pub fn display(&self) -> String {
        self.as_num().to_string()
    }
}

/// The pack sizes (λ₁, …, λₘ) of a non-intersection exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct PackVector {
    lambdas: Vec<Num>,
}

impl PackVector {
    pub fn new(lambdas: Vec<Num>) -> Result<Self> {
        for l in &lambdas {
            let v = l.value();
            ensure(v.is_finite() && v >= 0.0, "lambdas", || {
                format!("pack sizes must be non-negative, got {v}")
            })?;
        }
        Ok(PackVector { lambdas })
    }

    pub fn integers(ns: &[i64]) -> Result<Self> {
        Self::new(ns.iter().map(|&n| Num::int(n)).collect())
    }

    pub fn reals(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| Num::Real(x)).collect())
    }

    pub fn lambdas(&self) -> &[Num] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// All entries except the last lie in `{l(l+1)/6}`.
    pub fn leading_triangular(&self) -> bool {
        let m = self.lambdas.len();
        self.lambdas[..m.saturating_sub(1)]
            .iter()
            .all(|&l| is_triangular_sixth(l))
    }

    pub fn count_at_least_one(&self) -> usize {
        self.lambdas.iter().filter(|l| l.value() >= 1.0).count()
    }
}

fn root_sum(packs: &[Num]) -> Num {
    packs.iter().fold(Num::int(0), |acc, &l| acc.add(root24(l)))
}

/// ζₙ, the exponent for mutual non-intersection of n paths in time.
pub fn zeta_n(n: i64) -> Result<ExponentValue> {
    ensure(n >= 2, "n", || format!("need at least two paths, got {n}"))?;
    let v = Num::int(4)
        .mul(Num::int(n))
        .mul(Num::int(n))
        .sub(Num::int(1))
        .div_int(24);
    Ok(ExponentValue::new(v, Formula::ZetaN, true))
}

/// ζ(2, λ) = ξ(2, λ)/2, established for λ ≥ 2.
pub fn zeta_2_lambda(lambda: impl Into<Num>) -> Result<ExponentValue> {
    let lambda = lambda.into();
    ensure(lambda.value() >= 0.0, "lambda", || {
        format!("must be non-negative, got {}", lambda.value())
    })?;
    let s = Num::int(5).add(root24(lambda));
    let v = s.mul(s).sub(Num::int(4)).div_int(96);
    Ok(ExponentValue::new(
        v,
        Formula::ZetaTwoLambda,
        lambda.value() >= 2.0,
    ))
}

/// ξ(1, λ), established for λ ≥ 10/3; used at λ → 0 for the pioneer exponent.
pub fn xi_1_lambda(lambda: impl Into<Num>) -> Result<ExponentValue> {
    let lambda = lambda.into();
    ensure(lambda.value() >= 0.0, "lambda", || {
        format!("must be non-negative, got {}", lambda.value())
    })?;
    let s = Num::int(3).add(root24(lambda));
    let v = s.mul(s).sub(Num::int(4)).div_int(48);
    Ok(ExponentValue::new(
        v,
        Formula::XiOneLambda,
        lambda.value() >= 10.0 / 3.0,
    ))
}

/// Half-plane exponent ξ̃(λ₁,…,λₘ).
pub fn xi_tilde(packs: &PackVector) -> Result<ExponentValue> {
    let m = packs.len();
    ensure(m >= 2, "packs", || {
        format!("need at least two packs, got {m}")
    })?;
    let s = root_sum(packs.lambdas()).sub(Num::int(m as i64 - 1));
    let v = s.mul(s).sub(Num::int(1)).div_int(24);
    Ok(ExponentValue::new(
        v,
        Formula::XiTilde,
        packs.leading_triangular(),
    ))
}

/// η(x) with ξ = η(ξ̃); the closed form is established for x ≥ 7.
pub fn eta(x: impl Into<Num>) -> Result<ExponentValue> {
    let x = x.into();
    ensure(x.value() >= 10.0 / 3.0 - 1e-12, "x", || {
        format!("η is defined from ξ̃(1,1) = 10/3 on, got {}", x.value())
    })?;
    let s = root24(x).sub(Num::int(1));
    let v = s.mul(s).sub(Num::int(4)).div_int(48);
    Ok(ExponentValue::new(v, Formula::Eta, x.value() >= 7.0))
}

/// Plane exponent ξ(λ₁,…,λₘ).
///
/// In-region when the closed form is proven: the leading entries are in
/// `{l(l+1)/6}` and the value is at least 35/12, or the input is `(1, 1)`.
pub fn xi(packs: &PackVector) -> Result<ExponentValue> {
    let m = packs.len();
    ensure(packs.count_at_least_one() >= 2, "packs", || {
        "ξ needs at least two packs of size at least one".into()
    })?;
    let s = root_sum(packs.lambdas()).sub(Num::int(m as i64));
    let v = s.mul(s).sub(Num::int(4)).div_int(48);
    let one_one = m == 2 && packs.lambdas().iter().all(|&l| l == Num::int(1));
    let in_region = one_one || (packs.leading_triangular() && v.value() >= 35.0 / 12.0 - 1e-12);
    Ok(ExponentValue::new(v, Formula::Xi, in_region))
}

/// Residual of the cascade relation
/// `ξ(λ₁,…,λₘ) = ξ(λ₁,…,λ_q, ξ̃(λ_{q+1},…,λₘ))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CascadeCheck {
    pub lhs: ExponentValue,
    pub rhs: ExponentValue,
    pub residual: f64,
    /// Both sides and the inner ξ̃ are in their established regions.
    pub in_region: bool,
}

pub fn check_cascade(packs: &PackVector, q: usize) -> Result<CascadeCheck> {
    let m = packs.len();
    ensure(q >= 1 && q + 2 <= m, "q", || {
        format!("split must satisfy 1 ≤ q ≤ m−2 (m = {m}), got {q}")
    })?;
    let l = packs.lambdas();
    ensure(
        l[0].value() >= 1.0 && l[1..].iter().any(|x| x.value() >= 1.0),
        "packs",
        || "cascade needs λ₁ ≥ 1 and some later λ ≥ 1".into(),
    )?;
    let lhs = xi(packs)?;
    let tail = xi_tilde(&PackVector::new(l[q..].to_vec())?)?;
    let mut head = l[..q].to_vec();
    head.push(tail.as_num());
    let rhs = xi(&PackVector::new(head)?)?;
    let residual = match (lhs.exact, rhs.exact) {
        (Some(a), Some(b)) => ratio_to_f64(a - b).abs(),
        _ => (lhs.value - rhs.value).abs(),
    };
    Ok(CascadeCheck {
        lhs,
        rhs,
        residual,
        in_region: lhs.in_region && rhs.in_region && tail.in_region,
    })
}

/// One row of the fractal-dimension table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionEntry {
    pub name: &'static str,
    pub exponent_symbol: &'static str,
    pub exponent: ExponentValue,
    pub dimension: ExponentValue,
    /// The value relies on analytic continuation of a formula below its
    /// established region.
    pub requires_analyticity: bool,
}

/// Cut-point, frontier and pioneer-point dimensions of planar Brownian motion.
pub fn dimensions() -> Vec<DimensionEntry> {
    let two = Num::int(2);
    let zeta2 = zeta_n(2).expect("n = 2 is valid");
    let cut = ExponentValue::new(two.sub(two.mul(zeta2.as_num())), Formula::Dimension, true);

    let eta2 = zeta_2_lambda(Num::int(0)).expect("λ = 0 is valid");
    let eta2 = ExponentValue::new(two.mul(eta2.as_num()), Formula::ZetaTwoLambda, false);
    let frontier = ExponentValue::new(two.sub(eta2.as_num()), Formula::Dimension, false);

    // ζ(1, λ) = ξ(1, λ)/2, so η₁ = lim 2ζ(1, λ) = ξ(1, 0).
    let eta1 = xi_1_lambda(Num::int(0)).expect("λ = 0 is valid");
    let pioneer = ExponentValue::new(two.sub(eta1.as_num()), Formula::Dimension, false);

    vec![
        DimensionEntry {
            name: "cut",
            exponent_symbol: "zeta_2",
            exponent: zeta2,
            dimension: cut,
            requires_analyticity: false,
        },
        DimensionEntry {
            name: "frontier",
            exponent_symbol: "eta_2",
            exponent: eta2,
            dimension: frontier,
            requires_analyticity: true,
        },
        DimensionEntry {
            name: "pioneer",
            exponent_symbol: "eta_1",
            exponent: eta1,
            dimension: pioneer,
            requires_analyticity: true,
        },
    ]
}

/// Named landmark values, as emitted by `exponents table`.
pub fn landmark_table() -> Vec<(String, ExponentValue)> {
    let ints = |v: &[i64]| PackVector::integers(v).expect("valid packs");
    let mut rows = Vec::new();
    for n in 2..=5 {
        rows.push((format!("zeta_{n}"), zeta_n(n).unwrap()));
    }
    rows.push(("zeta(2,2)".into(), zeta_2_lambda(Num::int(2)).unwrap()));
    rows.push(("xi(1,1)".into(), xi(&ints(&[1, 1])).unwrap()));
    rows.push(("xi(2,1)".into(), xi(&ints(&[2, 1])).unwrap()));
    rows.push(("xi(2,2)".into(), xi(&ints(&[2, 2])).unwrap()));
    rows.push(("xi(1,1,1)".into(), xi(&ints(&[1, 1, 1])).unwrap()));
    rows.push(("xi(1,1,1,1)".into(), xi(&ints(&[1, 1, 1, 1])).unwrap()));
    rows.push(("xi_tilde(1,1)".into(), xi_tilde(&ints(&[1, 1])).unwrap()));
    rows.push((
        "xi_tilde(1,1,1)".into(),
        xi_tilde(&ints(&[1, 1, 1])).unwrap(),
    ));
    rows.push((
        "xi_tilde(1,1,2)".into(),
        xi_tilde(&ints(&[1, 1, 2])).unwrap(),
    ));
    rows.push(("eta(7)".into(), eta(Num::int(7)).unwrap()));
    for d in dimensions() {
        rows.push((format!("{}_dimension", d.name), d.dimension));
    }
    rows
}

/// Parses `"p/q"`, an integer, or a decimal into a [`Num`].
pub fn parse_num(s: &str) -> Result<Num> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p
            .trim()
            .parse()
            .map_err(|_| Error::domain("value", format!("bad numerator in {s:?}")))?;
        let q: i64 = q
            .trim()
            .parse()
            .map_err(|_| Error::domain("value", format!("bad denominator in {s:?}")))?;
        ensure(q != 0, "value", || format!("zero denominator in {s:?}"))?;
        return Ok(Num::Exact(Rational::new(p, q)));
    }
    if let Ok(n) = s.parse::<i64>() {
        return Ok(Num::int(n));
    }
    s.parse::<f64>()
        .map(Num::Real)
        .map_err(|_| Error::domain("value", format!("cannot parse {s:?} as a number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> Option<Rational> {
        Some(Rational::new(p, q))
    }

    #[test]
    fn zeta_values() {
        assert_eq!(zeta_n(2).unwrap().exact, r(5, 8));
        assert_eq!(zeta_n(3).unwrap().exact, r(35, 24));
        assert!(zeta_n(1).is_err());
        for n in 2..=10 {
            assert_eq!(zeta_n(n).unwrap().exact, r(4 * n * n - 1, 24));
        }
    }

    #[test]
    fn zeta_two_lambda() {
        let z = zeta_2_lambda(Num::int(2)).unwrap();
        assert_eq!(z.exact, r(35, 24));
        assert!(z.in_region);
        let z0 = zeta_2_lambda(Num::int(0)).unwrap();
        assert_eq!(z0.exact, r(1, 3));
        assert!(!z0.in_region);
        assert!(zeta_2_lambda(-1.0).is_err());
        for l in [2, 3, 10] {
            let z = zeta_2_lambda(Num::int(l)).unwrap();
            let x = xi(&PackVector::integers(&[2, l]).unwrap()).unwrap();
            assert!((2.0 * z.value - x.value).abs() < 1e-12);
        }
    }

    #[test]
    fn half_plane_values() {
        let ints = |v: &[i64]| PackVector::integers(v).unwrap();
        assert_eq!(xi_tilde(&ints(&[1, 1])).unwrap().exact, r(10, 3));
        assert_eq!(xi_tilde(&ints(&[1, 1, 1])).unwrap().exact, r(7, 1));
        assert_eq!(xi_tilde(&ints(&[1, 1, 2])).unwrap().exact, r(28, 3));
        assert!(xi_tilde(&ints(&[1])).is_err());
        assert!(PackVector::reals(&[1.0, -0.5]).is_err());
    }

    #[test]
    fn eta_values() {
        assert_eq!(eta(Num::int(7)).unwrap().exact, r(35, 12));
        assert!(eta(Num::int(7)).unwrap().value < eta(Num::int(8)).unwrap().value);
        assert!(eta(Num::int(3)).is_err());
        assert!(!eta(Num::frac(10, 3)).unwrap().in_region);
    }

    #[test]
    fn eta_of_half_plane_matches_plane() {
        for lambda in [0, 1, 2] {
            let tx = xi_tilde(&PackVector::integers(&[1, 1, 1, lambda]).unwrap()).unwrap();
            let lhs = eta(tx.as_num()).unwrap();
            let rhs = xi(&PackVector::integers(&[1, 1, 1, lambda]).unwrap()).unwrap();
            let s = (24.0 * lambda as f64 + 1.0).sqrt();
            let closed = ((11.0 + s).powi(2) - 4.0) / 48.0;
            assert_eq!(lhs.exact, rhs.exact);
            assert!((lhs.value - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_values() {
        let ints = |v: &[i64]| PackVector::integers(v).unwrap();
        let x11 = xi(&ints(&[1, 1])).unwrap();
        assert_eq!(x11.exact, r(5, 4));
        assert!(x11.in_region);
        assert_eq!(xi(&ints(&[1, 1, 1])).unwrap().exact, r(35, 12));
        assert_eq!(xi(&ints(&[1, 1, 1, 1])).unwrap().exact, r(21, 4));
        for m in 2..=6usize {
            let v = vec![1; m];
            let m = m as i64;
            assert_eq!(xi(&ints(&v)).unwrap().exact, r(4 * m * m - 1, 12));
        }
        assert!(xi(&ints(&[1, 0])).is_err());
        let cascade = xi(&PackVector::new(vec![Num::int(1), Num::frac(10, 3)]).unwrap()).unwrap();
        assert_eq!(cascade.exact, r(35, 12));
        assert_eq!(xi(&ints(&[2, 2])).unwrap().exact, r(35, 12));
    }

    #[test]
    fn irrational_inputs_fall_back_to_floats() {
        let v = xi(&PackVector::reals(&[1.0, 1.5]).unwrap()).unwrap();
        assert!(v.exact.is_none());
        let s = (37.0f64).sqrt();
        assert!((v.value - ((5.0 + s - 2.0).powi(2) - 4.0) / 48.0).abs() < 1e-14);
    }

    #[test]
    fn cascade_residuals() {
        let c = check_cascade(&PackVector::integers(&[1, 1, 1]).unwrap(), 1).unwrap();
        assert!(c.residual < 1e-12);
        for l in [1, 2, 5] {
            let c = check_cascade(&PackVector::integers(&[1, 1, 1, l]).unwrap(), 2).unwrap();
            assert!(c.residual < 1e-12, "λ = {l}: {}", c.residual);
        }
        let c = check_cascade(&PackVector::reals(&[1.0, 1.0, 1.0, 0.7]).unwrap(), 2).unwrap();
        assert!(c.residual < 1e-12);
        assert!(check_cascade(&PackVector::integers(&[1, 1]).unwrap(), 1).is_err());
        assert!(check_cascade(&PackVector::integers(&[0, 1, 1]).unwrap(), 1).is_err());
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = xi(&PackVector::integers(&[1, 2]).unwrap()).unwrap();
        let b = xi(&PackVector::integers(&[2, 1]).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn triangular_membership() {
        for (l, expect) in [
            (0, true),
            (1, true),
            (2, true),
            (3, false),
            (5, true),
            (7, true),
        ] {
            assert_eq!(is_triangular_sixth(Num::int(l)), expect, "{l}");
        }
        assert!(is_triangular_sixth(Num::frac(1, 3)));
        assert!(is_triangular_sixth(Num::frac(10, 3)));
    }

    #[test]
    fn dimension_table() {
        let d = dimensions();
        let get = |n: &str| d.iter().find(|e| e.name == n).unwrap();
        assert_eq!(get("cut").dimension.exact, r(3, 4));
        assert_eq!(get("frontier").dimension.exact, r(4, 3));
        assert_eq!(get("frontier").exponent.exact, r(2, 3));
        assert_eq!(get("pioneer").dimension.exact, r(7, 4));
        assert_eq!(get("pioneer").exponent.exact, r(1, 4));
        assert!(!get("cut").requires_analyticity);
        assert!(get("frontier").requires_analyticity && get("pioneer").requires_analyticity);
    }

    #[test]
    fn parses_numbers() {
        assert_eq!(parse_num("10/3").unwrap(), Num::frac(10, 3));
        assert_eq!(parse_num("7").unwrap(), Num::int(7));
        assert_eq!(parse_num("0.5").unwrap(), Num::Real(0.5));
        assert!(parse_num("x").is_err());
        assert!(parse_num("1/0").is_err());
    }

    proptest::proptest! {
        #[test]
        fn xi_permutation_invariant(mut v in proptest::collection::vec(1i64..6, 2..6), seed in 0u64..1000) {
            let a = xi(&PackVector::integers(&v).unwrap()).unwrap();
            let n = v.len();
            v.rotate_left((seed as usize) % n);
            v.swap(0, (seed as usize / 7) % n);
            let b = xi(&PackVector::integers(&v).unwrap()).unwrap();
            proptest::prop_assert_eq!(a.exact, b.exact);
        }

        #[test]
        fn zeta_is_half_xi(n in 1i64..8, m in 1i64..8) {
            let x = xi(&PackVector::integers(&[n, m]).unwrap()).unwrap();
            let s = ((24 * n + 1) as f64).sqrt() + ((24 * m + 1) as f64).sqrt() - 2.0;
            proptest::prop_assert!((x.value / 2.0 - (s * s - 4.0) / 96.0).abs() < 1e-12);
        }
    }
}
