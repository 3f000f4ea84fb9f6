//! Weight algebras.
//!
//! A [`Semiring`] is a small runtime descriptor; weights are plain [`Weight`]
//! values tagged with the kind of semiring they belong to. The checked
//! operations ([`Semiring::plus`], [`Semiring::times`], [`Semiring::star`])
//! reject operands from a different semiring. The engines use the unchecked
//! [`Semiring::add`] and [`Semiring::mul`] on values they produced themselves.

use std::fmt;

use thiserror::Error;

/// Default saturation point of the counting semiring.
pub const DEFAULT_COUNT_CAP: u64 = 1 << 62;

/// Default relative tolerance used by [`Semiring::approx_eq_default`].
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SemiringKind {
    /// `({false, true}, or, and)`.
    Boolean,
    /// Nonnegative reals extended with +inf.
    Real,
    /// Natural numbers extended with inf; values above the cap become inf.
    Counting,
    /// `([0,1], max, *)`, used for best derivations.
    Viterbi,
}

impl SemiringKind {
    pub fn name(self) -> &'static str {
        match self {
            SemiringKind::Boolean => "boolean",
            SemiringKind::Real => "real",
            SemiringKind::Counting => "counting",
            SemiringKind::Viterbi => "viterbi",
        }
    }

    pub fn parse(s: &str) -> Option<SemiringKind> {
        match s {
            "boolean" | "bool" => Some(SemiringKind::Boolean),
            "real" => Some(SemiringKind::Real),
            "counting" | "count" => Some(SemiringKind::Counting),
            "viterbi" => Some(SemiringKind::Viterbi),
            _ => None,
        }
    }
}

impl fmt::Display for SemiringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A count: finite or infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Count {
    Finite(u64),
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Bool(bool),
    Real(f64),
    Count(Count),
    Viterbi(f64),
}

impl Weight {
    pub fn kind(&self) -> SemiringKind {
        match self {
            Weight::Bool(_) => SemiringKind::Boolean,
            Weight::Real(_) => SemiringKind::Real,
            Weight::Count(_) => SemiringKind::Counting,
            Weight::Viterbi(_) => SemiringKind::Viterbi,
        }
    }

    /// Numeric view, used for printing and tolerance checks. Infinity maps to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        match *self {
            Weight::Bool(b) => {
                if b {
                    1.0
                } else {
                    0.0
                }
            }
            Weight::Real(x) | Weight::Viterbi(x) => x,
            Weight::Count(Count::Finite(n)) => n as f64,
            Weight::Count(Count::Inf) => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        match *self {
            Weight::Real(x) => x.is_infinite(),
            Weight::Count(Count::Inf) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Weight::Bool(b) => write!(f, "{b}"),
            Weight::Count(Count::Finite(n)) => write!(f, "{n}"),
            Weight::Count(Count::Inf) => f.write_str("inf"),
            Weight::Real(x) | Weight::Viterbi(x) => f.write_str(&format_real(x, 12)),
        }
    }
}

/// Formats a real with `digits` significant digits, trimming trailing zeros.
pub fn format_real(x: f64, digits: usize) -> String {
    if x.is_infinite() {
        return "inf".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let exp = x.abs().log10().floor() as i32;
    if !(-5..16).contains(&exp) {
        let s = format!("{:.*e}", digits - 1, x);
        let (mantissa, e) = s.split_once('e').unwrap();
        return format!("{}e{}", trim_zeros(mantissa), e);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemiringError {
    #[error("mixed semirings: expected {expected} weight, got {found}")]
    Mixed {
        expected: SemiringKind,
        found: SemiringKind,
    },
    #[error("operation `{op}` is not supported by the {semiring} semiring")]
    Unsupported { op: &'static str, semiring: String },
    #[error("invalid {semiring} weight `{text}`: {reason}")]
    InvalidWeight {
        semiring: SemiringKind,
        text: String,
        reason: &'static str,
    },
}

/// A semiring instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Semiring {
    kind: SemiringKind,
    count_cap: u64,
    omega_continuous: bool,
}

impl Semiring {
    pub fn new(kind: SemiringKind) -> Semiring {
        Semiring {
            kind,
            count_cap: DEFAULT_COUNT_CAP,
            omega_continuous: true,
        }
    }

    pub fn boolean() -> Semiring {
        Semiring::new(SemiringKind::Boolean)
    }

    pub fn real() -> Semiring {
        Semiring::new(SemiringKind::Real)
    }

    pub fn counting() -> Semiring {
        Semiring::new(SemiringKind::Counting)
    }

    pub fn viterbi() -> Semiring {
        Semiring::new(SemiringKind::Viterbi)
    }

    /// Counting semiring saturating at `cap` instead of 2^62.
    pub fn counting_with_cap(cap: u64) -> Semiring {
        Semiring {
            count_cap: cap.max(1),
            ..Semiring::counting()
        }
    }

    /// The natural numbers without the infinite element. Sums and products
    /// still saturate at the cap, but infinite sums (star, allsums) are
    /// refused because the carrier has no limit points.
    pub fn naturals() -> Semiring {
        Semiring {
            omega_continuous: false,
            ..Semiring::counting()
        }
    }

    pub fn kind(&self) -> SemiringKind {
        self.kind
    }

    pub fn name(&self) -> String {
        if self.omega_continuous {
            self.kind.name().to_string()
        } else {
            format!("{} (finite)", self.kind.name())
        }
    }

    pub fn count_cap(&self) -> u64 {
        self.count_cap
    }

    pub fn is_idempotent(&self) -> bool {
        matches!(self.kind, SemiringKind::Boolean | SemiringKind::Viterbi)
    }

    pub fn is_omega_continuous(&self) -> bool {
        self.omega_continuous
    }

    /// True when equality should be checked exactly rather than with a tolerance.
    pub fn is_exact(&self) -> bool {
        matches!(self.kind, SemiringKind::Boolean | SemiringKind::Counting)
    }

    pub fn zero(&self) -> Weight {
        match self.kind {
            SemiringKind::Boolean => Weight::Bool(false),
            SemiringKind::Real => Weight::Real(0.0),
            SemiringKind::Counting => Weight::Count(Count::Finite(0)),
            SemiringKind::Viterbi => Weight::Viterbi(0.0),
        }
    }

    pub fn one(&self) -> Weight {
        match self.kind {
            SemiringKind::Boolean => Weight::Bool(true),
            SemiringKind::Real => Weight::Real(1.0),
            SemiringKind::Counting => Weight::Count(Count::Finite(1)),
            SemiringKind::Viterbi => Weight::Viterbi(1.0),
        }
    }

    pub fn is_zero(&self, w: Weight) -> bool {
        w == self.zero()
    }

    pub fn is_one(&self, w: Weight) -> bool {
        w == self.one()
    }

    fn check(&self, w: Weight) -> Result<(), SemiringError> {
        if w.kind() == self.kind {
            Ok(())
        } else {
            Err(SemiringError::Mixed {
                expected: self.kind,
                found: w.kind(),
            })
        }
    }

    /// `a ⊕ b`, rejecting weights from another semiring.
    pub fn plus(&self, a: Weight, b: Weight) -> Result<Weight, SemiringError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.add(a, b))
    }

    /// `a ⊗ b`, rejecting weights from another semiring.
    pub fn times(&self, a: Weight, b: Weight) -> Result<Weight, SemiringError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.mul(a, b))
    }

    fn count(&self, n: u128) -> Count {
        if n > self.count_cap as u128 {
            if self.omega_continuous {
                Count::Inf
            } else {
                Count::Finite(self.count_cap)
            }
        } else {
            Count::Finite(n as u64)
        }
    }

    /// Unchecked `a ⊕ b`.
    #[inline]
    pub fn add(&self, a: Weight, b: Weight) -> Weight {
        match (a, b) {
            (Weight::Bool(x), Weight::Bool(y)) => Weight::Bool(x || y),
            (Weight::Real(x), Weight::Real(y)) => Weight::Real(x + y),
            (Weight::Viterbi(x), Weight::Viterbi(y)) => Weight::Viterbi(x.max(y)),
            (Weight::Count(x), Weight::Count(y)) => match (x, y) {
                (Count::Finite(m), Count::Finite(n)) => {
                    Weight::Count(self.count(m as u128 + n as u128))
                }
                _ => Weight::Count(Count::Inf),
            },
            _ => panic!("mixed semiring operands: {a:?} and {b:?}"),
        }
    }

    /// Unchecked `a ⊗ b`. Zero is absorbing even against infinity.
    #[inline]
    pub fn mul(&self, a: Weight, b: Weight) -> Weight {
        match (a, b) {
            (Weight::Bool(x), Weight::Bool(y)) => Weight::Bool(x && y),
            (Weight::Real(x), Weight::Real(y)) => {
                if x == 0.0 || y == 0.0 {
                    Weight::Real(0.0)
                } else {
                    Weight::Real(x * y)
                }
            }
            (Weight::Viterbi(x), Weight::Viterbi(y)) => Weight::Viterbi(x * y),
            (Weight::Count(x), Weight::Count(y)) => match (x, y) {
                (Count::Finite(0), _) | (_, Count::Finite(0)) => Weight::Count(Count::Finite(0)),
                (Count::Finite(m), Count::Finite(n)) => {
                    Weight::Count(self.count(m as u128 * n as u128))
                }
                _ => Weight::Count(Count::Inf),
            },
            _ => panic!("mixed semiring operands: {a:?} and {b:?}"),
        }
    }

    pub fn sum<I: IntoIterator<Item = Weight>>(&self, it: I) -> Weight {
        it.into_iter().fold(self.zero(), |acc, w| self.add(acc, w))
    }

    pub fn product<I: IntoIterator<Item = Weight>>(&self, it: I) -> Weight {
        it.into_iter().fold(self.one(), |acc, w| self.mul(acc, w))
    }

    /// Kleene star: the least `w` with `w = 1 ⊕ a ⊗ w`.
    pub fn star(&self, a: Weight) -> Result<Weight, SemiringError> {
        self.check(a)?;
        if !self.omega_continuous {
            return Err(SemiringError::Unsupported {
                op: "star",
                semiring: self.name(),
            });
        }
        Ok(match a {
            Weight::Bool(_) => Weight::Bool(true),
            Weight::Viterbi(_) => Weight::Viterbi(1.0),
            Weight::Real(x) => {
                if x < 1.0 {
                    Weight::Real(1.0 / (1.0 - x))
                } else {
                    Weight::Real(f64::INFINITY)
                }
            }
            Weight::Count(Count::Finite(0)) => self.one(),
            Weight::Count(_) => Weight::Count(Count::Inf),
        })
    }

    /// Natural order `a ≤ b`, i.e. there is some `c` with `a ⊕ c = b`.
    pub fn leq(&self, a: Weight, b: Weight) -> bool {
        match (a, b) {
            (Weight::Bool(x), Weight::Bool(y)) => !x || y,
            (Weight::Real(x), Weight::Real(y)) | (Weight::Viterbi(x), Weight::Viterbi(y)) => x <= y,
            (Weight::Count(x), Weight::Count(y)) => x <= y,
            _ => false,
        }
    }

    /// Equality up to `tol` relative error for reals, exact otherwise.
    pub fn approx_eq(&self, a: Weight, b: Weight, tol: f64) -> bool {
        match (a, b) {
            (Weight::Real(x), Weight::Real(y)) | (Weight::Viterbi(x), Weight::Viterbi(y)) => {
                reals_close(x, y, tol)
            }
            _ => a == b,
        }
    }

    pub fn approx_eq_default(&self, a: Weight, b: Weight) -> bool {
        self.approx_eq(a, b, DEFAULT_TOLERANCE)
    }

    /// Builds a weight from a decimal value, enforcing the carrier's range.
    pub fn from_f64(&self, x: f64) -> Result<Weight, SemiringError> {
        let bad = |reason| SemiringError::InvalidWeight {
            semiring: self.kind,
            text: format_real(x, 17),
            reason,
        };
        if x.is_nan() {
            return Err(bad("not a number"));
        }
        if x < 0.0 {
            return Err(bad("weights must be nonnegative"));
        }
        match self.kind {
            SemiringKind::Real => Ok(Weight::Real(x)),
            SemiringKind::Viterbi => {
                if x > 1.0 {
                    Err(bad("viterbi weights must lie in [0, 1]"))
                } else {
                    Ok(Weight::Viterbi(x))
                }
            }
            SemiringKind::Boolean | SemiringKind::Counting => {
                if x == 1.0 {
                    Ok(self.one())
                } else if x == 0.0 {
                    Ok(self.zero())
                } else {
                    Err(bad("only 1.0 and 0.0 are allowed in this semiring"))
                }
            }
        }
    }

    /// Parses a decimal literal (or `inf`) as a weight.
    pub fn parse_weight(&self, text: &str) -> Result<Weight, SemiringError> {
        let x: f64 = match text {
            "inf" | "+inf" | "infinity" => f64::INFINITY,
            _ => text.parse().map_err(|_| SemiringError::InvalidWeight {
                semiring: self.kind,
                text: text.to_string(),
                reason: "not a decimal literal",
            })?,
        };
        self.from_f64(x).map_err(|e| match e {
            SemiringError::InvalidWeight {
                semiring, reason, ..
            } => SemiringError::InvalidWeight {
                semiring,
                text: text.to_string(),
                reason,
            },
            e => e,
        })
    }

    /// Decimal literal that [`Semiring::parse_weight`] maps back to `w`.
    pub fn weight_literal(&self, w: Weight) -> String {
        match w {
            Weight::Bool(b) => if b { "1.0" } else { "0.0" }.to_string(),
            Weight::Count(Count::Finite(1)) => "1.0".to_string(),
            Weight::Count(Count::Finite(0)) => "0.0".to_string(),
            Weight::Count(Count::Finite(n)) => format!("{n}.0"),
            Weight::Count(Count::Inf) => "inf".to_string(),
            Weight::Real(x) | Weight::Viterbi(x) => {
                if x.is_infinite() {
                    "inf".to_string()
                } else {
                    let s = format!("{x:?}");
                    if s.contains('.') || s.contains('e') {
                        s
                    } else {
                        format!("{s}.0")
                    }
                }
            }
        }
    }
}

/// `|a-b| <= tol * max(1, |a|, |b|)`, with equal infinities considered close.
pub fn reals_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    if a.is_infinite() || b.is_infinite() || a.is_nan() || b.is_nan() {
        return false;
    }
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
