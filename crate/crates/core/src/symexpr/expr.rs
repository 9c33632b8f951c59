use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::{Serialize, Serializer};

/// Elementary functions admitted by the expression grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sinh,
    Cosh,
    Exp,
    Sin,
    Cos,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    /// Resolves a function name, accepting `ch`/`sh` as aliases.
    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sinh" | "sh" => Some(Func::Sinh),
            "cosh" | "ch" => Some(Func::Cosh),
            "exp" => Some(Func::Exp),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            _ => None,
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Exp => x.exp(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
        }
    }
}

/// Symbolic scalar expression over chart coordinates.
///
/// Values built through the arithmetic operators are *raw* trees; call
/// [`Expr::canonical`] (or [`super::canonicalize`]) to obtain the unique
/// canonical representative. Structural equality (`==`) is only meaningful
/// between canonical trees.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    RationalConst(Arc<BigRational>),
    CoordVar(Arc<str>),
    Sum(Arc<[Expr]>),
    Product(Arc<[Expr]>),
    IntPower(Arc<Expr>, i64),
    Quotient(Arc<Expr>, Arc<Expr>),
    Func(Func, Arc<Expr>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::rational(BigRational::zero())
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn int(value: i64) -> Expr {
        Expr::rational(BigRational::from_integer(BigInt::from(value)))
    }

    /// `numer/denom` in lowest terms. Panics if `denom == 0`.
    pub fn ratio(numer: i64, denom: i64) -> Expr {
        assert!(denom != 0, "zero denominator in rational constant");
        Expr::rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn rational(value: BigRational) -> Expr {
        Expr::RationalConst(Arc::new(value))
    }

    pub fn var(name: &str) -> Expr {
        Expr::CoordVar(Arc::from(name))
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        Expr::Func(f, Arc::new(arg))
    }

    pub fn sinh(arg: Expr) -> Expr {
        Expr::func(Func::Sinh, arg)
    }

    pub fn cosh(arg: Expr) -> Expr {
        Expr::func(Func::Cosh, arg)
    }

    pub fn exp(arg: Expr) -> Expr {
        Expr::func(Func::Exp, arg)
    }

    pub fn sin(arg: Expr) -> Expr {
        Expr::func(Func::Sin, arg)
    }

    pub fn cos(arg: Expr) -> Expr {
        Expr::func(Func::Cos, arg)
    }

    pub fn pow(&self, k: i64) -> Expr {
        match k {
            0 => Expr::one(),
            1 => self.clone(),
            _ if self.is_zero() && k > 0 => Expr::zero(),
            _ => Expr::IntPower(Arc::new(self.clone()), k),
        }
    }

    /// Sum of the given terms; zero terms are dropped.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let terms: Vec<Expr> = terms.into_iter().filter(|t| !t.is_zero()).collect();
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.into_iter().next().unwrap(),
            _ => Expr::Sum(terms.into()),
        }
    }

    /// Product of the given factors; short-circuits on a zero factor.
    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut out = Vec::new();
        for f in factors {
            if f.is_zero() {
                return Expr::zero();
            }
            if !f.is_one() {
                out.push(f);
            }
        }
        match out.len() {
            0 => Expr::one(),
            1 => out.into_iter().next().unwrap(),
            _ => Expr::Product(out.into()),
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Expr::RationalConst(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::RationalConst(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::RationalConst(r) if r.is_one())
    }

    pub fn canonical(&self) -> Expr {
        super::normal::canonicalize(self)
    }

    /// True when the coordinate `name` occurs anywhere in the tree.
    pub fn depends_on(&self, name: &str) -> bool {
        match self {
            Expr::RationalConst(_) => false,
            Expr::CoordVar(v) => &**v == name,
            Expr::Sum(xs) | Expr::Product(xs) => xs.iter().any(|x| x.depends_on(name)),
            Expr::IntPower(b, _) => b.depends_on(name),
            Expr::Quotient(n, d) => n.depends_on(name) || d.depends_on(name),
            Expr::Func(_, a) => a.depends_on(name),
        }
    }

    /// Sorted, deduplicated coordinate names occurring in the tree.
    pub fn variables(&self) -> Vec<String> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_vars(&mut out);
        out.into_iter().collect()
    }

    fn collect_vars(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Expr::RationalConst(_) => {}
            Expr::CoordVar(v) => {
                out.insert(v.to_string());
            }
            Expr::Sum(xs) | Expr::Product(xs) => xs.iter().for_each(|x| x.collect_vars(out)),
            Expr::IntPower(b, _) => b.collect_vars(out),
            Expr::Quotient(n, d) => {
                n.collect_vars(out);
                d.collect_vars(out);
            }
            Expr::Func(_, a) => a.collect_vars(out),
        }
    }

    /// Simultaneous substitution of coordinates by expressions (raw result).
    pub fn substitute(&self, map: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::RationalConst(_) => self.clone(),
            Expr::CoordVar(v) => map(v).unwrap_or_else(|| self.clone()),
            Expr::Sum(xs) => Expr::Sum(xs.iter().map(|x| x.substitute(map)).collect()),
            Expr::Product(xs) => Expr::Product(xs.iter().map(|x| x.substitute(map)).collect()),
            Expr::IntPower(b, k) => Expr::IntPower(Arc::new(b.substitute(map)), *k),
            Expr::Quotient(n, d) => {
                Expr::Quotient(Arc::new(n.substitute(map)), Arc::new(d.substitute(map)))
            }
            Expr::Func(f, a) => Expr::Func(*f, Arc::new(a.substitute(map))),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + match self {
            Expr::RationalConst(_) | Expr::CoordVar(_) => 0,
            Expr::Sum(xs) | Expr::Product(xs) => xs.iter().map(Expr::size).sum(),
            Expr::IntPower(b, _) => b.size(),
            Expr::Quotient(n, d) => n.size() + d.size(),
            Expr::Func(_, a) => a.size(),
        }
    }

    /// Whether the printed form of this node starts with a minus sign that
    /// belongs to the whole term.
    fn is_negative_term(&self) -> bool {
        match self {
            Expr::RationalConst(r) => r.is_negative(),
            Expr::Product(xs) => xs.first().is_some_and(Expr::is_negative_term),
            Expr::Quotient(n, _) => n.is_negative_term(),
            _ => false,
        }
    }

    fn negate_term(&self) -> Expr {
        match self {
            Expr::RationalConst(r) => Expr::rational(-(**r).clone()),
            Expr::Product(xs) => {
                let mut v: Vec<Expr> = xs.to_vec();
                v[0] = v[0].negate_term();
                if v[0].is_one() {
                    v.remove(0);
                }
                if v.len() == 1 {
                    v.pop().unwrap()
                } else {
                    Expr::Product(v.into())
                }
            }
            Expr::Quotient(n, d) => Expr::Quotient(Arc::new(n.negate_term()), d.clone()),
            _ => -self.clone(),
        }
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::int(v)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum([self, rhs])
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        if rhs.is_zero() {
            return self;
        }
        Expr::sum([self, -rhs])
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product([self, rhs])
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        if rhs.is_one() {
            return self;
        }
        if self.is_zero() && !rhs.is_zero() {
            return Expr::zero();
        }
        Expr::Quotient(Arc::new(self), Arc::new(rhs))
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match &self {
            Expr::RationalConst(r) => Expr::rational(-(**r).clone()),
            _ => Expr::product([Expr::int(-1), self]),
        }
    }
}

impl Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        self.clone() + rhs.clone()
    }
}

impl Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        self.clone() - rhs.clone()
    }
}

impl Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        self.clone() * rhs.clone()
    }
}

macro_rules! mixed_ops {
    ($($trait:ident $method:ident),*) => {$(
        impl<'a> $trait<&'a Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &'a Expr) -> Expr {
                $trait::$method(self, rhs.clone())
            }
        }

        impl<'a> $trait<Expr> for &'a Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $trait::$method(self.clone(), rhs)
            }
        }
    )*};
}

mixed_ops!(Add add, Sub sub, Mul mul);

fn write_rational(f: &mut fmt::Formatter<'_>, r: &BigRational) -> fmt::Result {
    if r.denom().is_one() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

fn is_atomic(e: &Expr) -> bool {
    match e {
        Expr::CoordVar(_) | Expr::Func(..) => true,
        Expr::RationalConst(r) => r.denom().is_one() && !r.is_negative(),
        _ => false,
    }
}

fn write_factor(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Sum(_) | Expr::Quotient(..) => write!(f, "({e})"),
        _ => write!(f, "{e}"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::RationalConst(r) => write_rational(f, r),
            Expr::CoordVar(v) => f.write_str(v),
            Expr::Sum(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    if i == 0 {
                        write!(f, "{t}")?;
                    } else if t.is_negative_term() {
                        write!(f, " - {}", t.negate_term())?;
                    } else {
                        write!(f, " + {t}")?;
                    }
                }
                Ok(())
            }
            Expr::Product(factors) => {
                let mut rest: &[Expr] = factors;
                if let Some(Expr::RationalConst(r)) = factors.first() {
                    let minus_one = -BigRational::one();
                    let next_plain = matches!(factors.get(1), Some(Expr::CoordVar(_) | Expr::Func(..)));
                    if **r == minus_one && next_plain && factors.len() > 1 {
                        f.write_str("-")?;
                        rest = &factors[1..];
                    }
                }
                for (i, x) in rest.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write_factor(f, x)?;
                }
                Ok(())
            }
            Expr::IntPower(base, k) => {
                if is_atomic(base) {
                    write!(f, "{base}^{k}")
                } else {
                    write!(f, "({base})^{k}")
                }
            }
            Expr::Quotient(n, d) => {
                match &**n {
                    Expr::Sum(_) => write!(f, "({n})")?,
                    _ => write!(f, "{n}")?,
                }
                f.write_str("/")?;
                if is_atomic(d) || matches!(&**d, Expr::IntPower(..)) {
                    write!(f, "{d}")
                } else {
                    write!(f, "({d})")
                }
            }
            Expr::Func(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}
