use std::collections::BTreeMap;
use std::sync::Arc;

use num::ToPrimitive;

use super::expr::{Expr, Func};
use super::ExprError;

/// Partial derivative of `e` with respect to the coordinate `v`, canonicalized.
pub fn differentiate(e: &Expr, v: &str) -> Expr {
    diff_raw(e, v).canonical()
}

/// Derivative tree before canonicalization.
pub(crate) fn diff_raw(e: &Expr, v: &str) -> Expr {
    if !e.depends_on(v) {
        return Expr::zero();
    }
    match e {
        Expr::RationalConst(_) => Expr::zero(),
        Expr::CoordVar(name) => {
            if &**name == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Sum(terms) => Expr::sum(terms.iter().map(|t| diff_raw(t, v))),
        Expr::Product(factors) => Expr::sum((0..factors.len()).map(|i| {
            let d = diff_raw(&factors[i], v);
            if d.is_zero() {
                return Expr::zero();
            }
            Expr::product(
                factors
                    .iter()
                    .enumerate()
                    .map(|(j, f)| if i == j { d.clone() } else { f.clone() }),
            )
        })),
        Expr::IntPower(base, k) => {
            Expr::product([Expr::int(*k), base.pow(k - 1), diff_raw(base, v)])
        }
        Expr::Quotient(n, d) => {
            let dn = diff_raw(n, v);
            let dd = diff_raw(d, v);
            let numer = Expr::sum([
                Expr::product([dn, (**d).clone()]),
                -Expr::product([(**n).clone(), dd]),
            ]);
            numer / d.pow(2)
        }
        Expr::Func(f, arg) => {
            let inner = diff_raw(arg, v);
            let a = (**arg).clone();
            let outer = match f {
                Func::Sinh => Expr::cosh(a),
                Func::Cosh => Expr::sinh(a),
                Func::Exp => Expr::exp(a),
                Func::Sin => Expr::cos(a),
                Func::Cos => -Expr::sin(a),
            };
            outer * inner
        }
    }
}

/// Assignment of a real value to each chart coordinate.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct EvalPoint {
    values: BTreeMap<Arc<str>, f64>,
}

impl EvalPoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<S: AsRef<str>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        let mut p = EvalPoint::new();
        for (k, v) in pairs {
            p.set(k.as_ref(), v);
        }
        p
    }

    /// Point with `coords[i] = values[i]`.
    pub fn on(coords: &[String], values: &[f64]) -> Self {
        assert_eq!(coords.len(), values.len(), "coordinate/value count mismatch");
        EvalPoint::from_pairs(coords.iter().map(String::as_str).zip(values.iter().copied()))
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(Arc::from(name), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (&**k, *v))
    }

    pub fn to_pairs(&self) -> Vec<(String, f64)> {
        self.iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

/// Evaluates `e` at `p` in double precision.
pub fn evaluate(e: &Expr, p: &EvalPoint) -> Result<f64, ExprError> {
    Ok(match e {
        Expr::RationalConst(r) => r.to_f64().unwrap_or(f64::NAN),
        Expr::CoordVar(v) => p.get(v).ok_or_else(|| ExprError::MissingCoordinate(v.to_string()))?,
        Expr::Sum(terms) => {
            let mut acc = 0.0;
            for t in terms.iter() {
                acc += evaluate(t, p)?;
            }
            acc
        }
        Expr::Product(factors) => {
            let mut acc = 1.0;
            for f in factors.iter() {
                acc *= evaluate(f, p)?;
            }
            acc
        }
        Expr::IntPower(base, k) => {
            let b = evaluate(base, p)?;
            if *k < 0 && b == 0.0 {
                return Err(ExprError::DivisionByZero(e.to_string()));
            }
            b.powi(*k as i32)
        }
        Expr::Quotient(n, d) => {
            let den = evaluate(d, p)?;
            if den == 0.0 {
                return Err(ExprError::DivisionByZero(e.to_string()));
            }
            evaluate(n, p)? / den
        }
        Expr::Func(f, arg) => f.apply(evaluate(arg, p)?),
    })
}
