//! Exact symbolic scalar calculus over chart coordinates.
//!
//! [`Expr`] trees are built from rationals, coordinates, sums, products,
//! integer powers, quotients and `sinh`/`cosh`/`exp`/`sin`/`cos`.
//! [`canonicalize`] maps a tree to its canonical representative;
//! [`zero_test`] decides zero-ness symbolically where the rewrite system
//! allows and numerically otherwise.

mod calculus;
mod expr;
mod normal;
mod parse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use calculus::{differentiate, evaluate, EvalPoint};
pub use expr::{Expr, Func};
pub use normal::canonicalize;
pub use parse::{parse, parse_in_chart, parse_raw};

/// Default number of random probe points for numeric zero tests.
pub const DEFAULT_PROBES: usize = 8;
/// Default absolute tolerance for numeric zero tests.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Probes are drawn uniformly from `[-PROBE_RADIUS, PROBE_RADIUS]` per coordinate.
pub const PROBE_RADIUS: f64 = 2.0;

const MAX_RESAMPLES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("no value supplied for coordinate `{0}`")]
    MissingCoordinate(String),
}

/// Outcome of a zero test.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ZeroVerdict {
    /// The canonical form is the constant zero.
    SymbolicZero,
    /// Not decided symbolically, but every probe stayed within tolerance.
    NumericZero { max_abs: f64 },
    /// A probe exceeded tolerance.
    NonZero { point: Vec<(String, f64)>, value: f64 },
}

impl ZeroVerdict {
    pub fn is_zero(&self) -> bool {
        !matches!(self, ZeroVerdict::NonZero { .. })
    }

    fn rank(&self) -> u8 {
        match self {
            ZeroVerdict::SymbolicZero => 0,
            ZeroVerdict::NumericZero { .. } => 1,
            ZeroVerdict::NonZero { .. } => 2,
        }
    }

    /// The less favourable of two verdicts (NonZero > NumericZero > SymbolicZero).
    /// Two numeric verdicts merge by taking the larger deviation.
    pub fn worst(self, other: ZeroVerdict) -> ZeroVerdict {
        match (&self, &other) {
            (ZeroVerdict::NumericZero { max_abs: a }, ZeroVerdict::NumericZero { max_abs: b }) => {
                ZeroVerdict::NumericZero { max_abs: a.max(*b) }
            }
            _ if other.rank() > self.rank() => other,
            _ => self,
        }
    }
}

/// Deterministic probe generator shared by all numeric checks.
pub struct ProbeSampler {
    rng: ChaCha8Rng,
    radius: f64,
}

impl ProbeSampler {
    pub fn new(seed: u64) -> Self {
        Self::with_radius(seed, PROBE_RADIUS)
    }

    pub fn with_radius(seed: u64, radius: f64) -> Self {
        ProbeSampler { rng: ChaCha8Rng::seed_from_u64(seed), radius }
    }

    pub fn point(&mut self, coords: &[String]) -> EvalPoint {
        let mut p = EvalPoint::new();
        for c in coords {
            let v = self.rng.gen_range(-self.radius..=self.radius);
            p.set(c, v);
        }
        p
    }
}

/// Decides whether `e` is identically zero.
///
/// Returns `SymbolicZero` when the canonical form is `0`; otherwise evaluates
/// at `probes` seeded points in `[-2, 2]^k` over the coordinates occurring in
/// `e`. A probe that hits a division by zero is redrawn up to ten times.
pub fn zero_test(e: &Expr, probes: usize, seed: u64, tol: f64) -> Result<ZeroVerdict, ExprError> {
    assert!(probes >= 1, "zero_test needs at least one probe");
    assert!(tol > 0.0, "zero_test needs a positive tolerance");
    let canon = e.canonical();
    if canon.is_zero() {
        return Ok(ZeroVerdict::SymbolicZero);
    }
    let vars = canon.variables();
    let mut sampler = ProbeSampler::new(seed);
    let mut max_abs: f64 = 0.0;
    for _ in 0..probes {
        let mut attempt = 0;
        let (point, value) = loop {
            let point = sampler.point(&vars);
            match evaluate(&canon, &point) {
                Ok(v) => break (point, v),
                Err(ExprError::DivisionByZero(_)) if attempt < MAX_RESAMPLES => attempt += 1,
                Err(err) => return Err(err),
            }
        };
        if !(value.abs() <= tol) {
            return Ok(ZeroVerdict::NonZero { point: point.to_pairs(), value });
        }
        max_abs = max_abs.max(value.abs());
    }
    Ok(ZeroVerdict::NumericZero { max_abs })
}
