//! Canonical normal form.
//!
//! Every expression is mapped to a quotient `num / den` of Laurent
//! polynomials over *atoms* (coordinates and elementary-function
//! applications with canonical arguments), with these rewrites applied
//! throughout:
//!
//! - `cosh(u)^k` for `k >= 2` becomes `cosh(u)^(k mod 2) * (1 + sinh(u)^2)^(k div 2)`,
//!   and likewise `cos(u)^k` with `1 - sin(u)^2`;
//! - all `exp` factors of a monomial merge into one `exp` of the summed
//!   argument, so `exp(u) * exp(-u)` is `1`;
//! - odd/even symmetry pulls signs out of `sinh`, `sin` and drops them
//!   from `cosh`, `cos`;
//! - monomial denominators are absorbed as negative exponents; the
//!   remaining denominator is content-free with leading coefficient one.
//!
//! Within that rewrite closure two expressions denoting the same function
//! have the same numerator up to the denominator they carry, so an
//! expression is identically zero exactly when its numerator is empty.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

use super::expr::{Expr, Func};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Atom {
    Var(Arc<str>),
    Func(Func, Expr),
    /// A subterm with no normal form (a division by an identically zero
    /// expression). Kept verbatim so evaluation can report it.
    Opaque(Expr),
}

impl Atom {
    fn to_expr(&self) -> Expr {
        match self {
            Atom::Var(v) => Expr::CoordVar(v.clone()),
            Atom::Func(f, a) => Expr::Func(*f, Arc::new(a.clone())),
            Atom::Opaque(e) => e.clone(),
        }
    }
}

/// Sorted list of `(atom, exponent)` with nonzero exponents.
type Mono = Vec<(Atom, i64)>;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub(crate) struct Poly {
    terms: BTreeMap<Mono, BigRational>,
}

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn binomial(n: i64, k: i64) -> BigRational {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    BigRational::from_integer(acc)
}

fn mono_merge(a: &Mono, b: &Mono) -> Mono {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let k = a[i].1 + b[j].1;
                if k != 0 {
                    out.push((a[i].0.clone(), k));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn degree(m: &Mono) -> i64 {
    m.iter().map(|(_, k)| k).sum()
}

/// Total degree first, then lexicographic with larger atoms dominating.
fn graded_cmp(a: &Mono, b: &Mono) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    degree(a).cmp(&degree(b)).then_with(|| {
        let (mut i, mut j) = (a.len(), b.len());
        while i > 0 || j > 0 {
            let ord = match (i.checked_sub(1).map(|x| &a[x]), j.checked_sub(1).map(|x| &b[x])) {
                (Some(x), Some(y)) => match x.0.cmp(&y.0) {
                    Ordering::Greater => x.1.cmp(&0),
                    Ordering::Less => 0.cmp(&y.1),
                    Ordering::Equal => x.1.cmp(&y.1),
                },
                (Some(x), None) => x.1.cmp(&0),
                (None, Some(y)) => 0.cmp(&y.1),
                (None, None) => unreachable!(),
            };
            if ord != Ordering::Equal {
                return ord;
            }
            match (i.checked_sub(1).map(|x| &a[x]), j.checked_sub(1).map(|x| &b[x])) {
                (Some(x), Some(y)) => match x.0.cmp(&y.0) {
                    Ordering::Greater => i -= 1,
                    Ordering::Less => j -= 1,
                    Ordering::Equal => {
                        i -= 1;
                        j -= 1;
                    }
                },
                (Some(_), None) => i -= 1,
                (None, Some(_)) => j -= 1,
                (None, None) => unreachable!(),
            }
        }
        Ordering::Equal
    })
}

fn mono_inverse(m: &Mono) -> Mono {
    m.iter().map(|(a, k)| (a.clone(), -k)).collect()
}

/// Applies the exp-merging and Pythagorean rewrites to a monomial.
fn reduce_mono(m: Mono) -> Poly {
    let exp_count = m.iter().filter(|(a, _)| matches!(a, Atom::Func(Func::Exp, _))).count();
    let needs_exp = exp_count > 1
        || m.iter().any(|(a, k)| matches!(a, Atom::Func(Func::Exp, _)) && *k != 1);
    let m = if needs_exp { merge_exps(m) } else { m };

    let pos = m.iter().position(|(a, k)| {
        *k >= 2 && matches!(a, Atom::Func(Func::Cosh | Func::Cos, _))
    });
    let Some(pos) = pos else {
        return Poly::from_mono(m, BigRational::one());
    };
    let (atom, k) = m[pos].clone();
    let (partner, sign) = match &atom {
        Atom::Func(Func::Cosh, arg) => (Atom::Func(Func::Sinh, arg.clone()), 1),
        Atom::Func(Func::Cos, arg) => (Atom::Func(Func::Sin, arg.clone()), -1),
        _ => unreachable!(),
    };
    let mut rest = m;
    if k % 2 == 1 {
        rest[pos].1 = 1;
    } else {
        rest.remove(pos);
    }
    // (1 + sign * s^2)^(k div 2), expanded binomially.
    let half = k / 2;
    let mut out = Poly::zero();
    for j in 0..=half {
        let mut coeff = binomial(half, j);
        if sign < 0 && j % 2 == 1 {
            coeff = -coeff;
        }
        let factor: Mono = if j == 0 { Vec::new() } else { vec![(partner.clone(), 2 * j)] };
        let merged = mono_merge(&rest, &factor);
        out.add_assign_scaled(&reduce_mono(merged), &coeff);
    }
    out
}

fn merge_exps(m: Mono) -> Mono {
    let mut arg = Normal::zero();
    let mut rest = Vec::with_capacity(m.len());
    for (a, k) in m {
        match a {
            Atom::Func(Func::Exp, inner) => {
                arg = arg.add(&Normal::from_expr(&inner).scale(&rat(k)));
            }
            other => rest.push((other, k)),
        }
    }
    if arg.is_zero() {
        return rest;
    }
    let atom = Atom::Func(Func::Exp, arg.to_expr());
    let idx = rest.binary_search_by(|(a, _)| a.cmp(&atom)).unwrap_err();
    rest.insert(idx, (atom, 1));
    rest
}

impl Poly {
    pub(crate) fn zero() -> Poly {
        Poly::default()
    }

    fn constant(c: BigRational) -> Poly {
        Poly::from_mono(Vec::new(), c)
    }

    fn from_mono(m: Mono, c: BigRational) -> Poly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self.terms.iter().next().is_some_and(|(m, c)| m.is_empty() && c.is_one())
    }

    fn leading(&self) -> Option<(&Mono, &BigRational)> {
        self.terms.iter().next_back()
    }

    /// Leading term under a graded lexicographic monomial order.
    fn leading_graded(&self) -> Option<(&Mono, &BigRational)> {
        self.terms.iter().max_by(|a, b| graded_cmp(a.0, b.0))
    }

    fn add_assign_scaled(&mut self, other: &Poly, s: &BigRational) {
        for (m, c) in &other.terms {
            let v = c * s;
            let slot = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
            *slot += v;
            if slot.is_zero() {
                self.terms.remove(m);
            }
        }
    }

    fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        out.add_assign_scaled(other, &BigRational::one());
        out
    }

    fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        out.add_assign_scaled(other, &-BigRational::one());
        out
    }

    fn scale(&self, s: &BigRational) -> Poly {
        if s.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect() }
    }

    fn mul_mono(&self, m: &Mono, c: &BigRational) -> Poly {
        let mut out = Poly::zero();
        for (m2, c2) in &self.terms {
            out.add_assign_scaled(&reduce_mono(mono_merge(m2, m)), &(c2 * c));
        }
        out
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        let (small, large) = if self.terms.len() <= other.terms.len() {
            (self, other)
        } else {
            (other, self)
        };
        for (m, c) in &small.terms {
            out = out.add(&large.mul_mono(m, c));
        }
        out
    }

    /// Exact division by `den` when the quotient is a Laurent polynomial
    /// reachable by leading-term elimination.
    fn try_divide(&self, den: &Poly) -> Option<Poly> {
        let (lm, lc) = den.leading_graded()?;
        let (lm, lc) = (lm.clone(), lc.clone());
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        for _ in 0..(4 * self.terms.len() + 16) {
            let Some((rm, rc)) = rem.leading_graded() else {
                return Some(quot);
            };
            let tm = mono_merge(rm, &mono_inverse(&lm));
            // Leaving the polynomial ring means the division is not exact.
            if tm.iter().any(|(_, k)| *k < 0) && !rm.iter().any(|(_, k)| *k < 0) {
                return None;
            }
            let tc = rc / &lc;
            let prev_lead = rm.clone();
            rem = rem.sub(&den.mul_mono(&tm, &tc));
            quot.add_assign_scaled(&Poly::from_mono(tm, BigRational::one()), &tc);
            if rem
                .leading_graded()
                .is_some_and(|(m, _)| graded_cmp(m, &prev_lead) != std::cmp::Ordering::Less)
            {
                return None;
            }
        }
        None
    }

    fn to_expr(&self) -> Expr {
        let mut terms: Vec<Expr> = self.terms.iter().map(|(m, c)| term_expr(m, c)).collect();
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.pop().unwrap(),
            _ => Expr::Sum(terms.into()),
        }
    }
}

fn factor_list(atoms: Vec<Expr>) -> Expr {
    if atoms.len() == 1 {
        atoms.into_iter().next().unwrap()
    } else {
        Expr::Product(atoms.into())
    }
}

fn term_expr(m: &Mono, c: &BigRational) -> Expr {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (a, k) in m {
        let base = a.to_expr();
        let (list, k) = if *k > 0 { (&mut pos, *k) } else { (&mut neg, -*k) };
        list.push(if k == 1 { base } else { Expr::IntPower(Arc::new(base), k) });
    }
    let numer = if pos.is_empty() {
        Expr::rational(c.clone())
    } else if c.is_one() {
        factor_list(pos)
    } else {
        let mut v = vec![Expr::rational(c.clone())];
        v.extend(pos);
        Expr::Product(v.into())
    };
    if neg.is_empty() {
        numer
    } else {
        Expr::Quotient(Arc::new(numer), Arc::new(factor_list(neg)))
    }
}

/// `num / den` with `den` either the constant one or a content-free,
/// leading-coefficient-one polynomial of at least two terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Normal {
    num: Poly,
    den: Poly,
}

impl Normal {
    pub(crate) fn zero() -> Normal {
        Normal { num: Poly::zero(), den: Poly::constant(BigRational::one()) }
    }

    fn constant(c: BigRational) -> Normal {
        Normal { num: Poly::constant(c), den: Poly::constant(BigRational::one()) }
    }

    fn atom(a: Atom) -> Normal {
        Normal {
            num: Poly::from_mono(vec![(a, 1)], BigRational::one()),
            den: Poly::constant(BigRational::one()),
        }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub(crate) fn add(&self, other: &Normal) -> Normal {
        if self.den == other.den {
            return Normal { num: self.num.add(&other.num), den: self.den.clone() }.normalize();
        }
        Normal {
            num: self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            den: self.den.mul(&other.den),
        }
        .normalize()
    }

    fn mul(&self, other: &Normal) -> Normal {
        Normal { num: self.num.mul(&other.num), den: self.den.mul(&other.den) }.normalize()
    }

    fn scale(&self, s: &BigRational) -> Normal {
        Normal { num: self.num.scale(s), den: self.den.clone() }.normalize()
    }

    fn neg(&self) -> Normal {
        self.scale(&-BigRational::one())
    }

    fn inverse(&self) -> Option<Normal> {
        if self.is_zero() {
            return None;
        }
        Some(Normal { num: self.den.clone(), den: self.num.clone() }.normalize())
    }

    fn pow(&self, k: i64) -> Option<Normal> {
        let base = if k < 0 { self.inverse()? } else { self.clone() };
        let mut acc = Normal::constant(BigRational::one());
        let mut sq = base;
        let mut e = k.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul(&sq);
            }
        }
        Some(acc)
    }

    /// Sign of the leading coefficient of the numerator.
    fn leading_negative(&self) -> bool {
        self.num.leading().is_some_and(|(_, c)| c.is_negative())
    }

    fn normalize(self) -> Normal {
        let Normal { mut num, mut den } = self;
        if num.is_zero() {
            return Normal::zero();
        }
        if den.is_one() {
            return Normal { num, den };
        }
        if den.terms.len() == 1 {
            let (m, c) = den.terms.into_iter().next().unwrap();
            let num = num.mul_mono(&mono_inverse(&m), &(BigRational::one() / c));
            return Normal { num, den: Poly::constant(BigRational::one()) };
        }
        // Strip the monomial content of the denominator.
        let mut content: BTreeMap<Atom, i64> = BTreeMap::new();
        for m in den.terms.keys() {
            for (a, _) in m {
                content.entry(a.clone()).or_insert(0);
            }
        }
        for (a, k) in content.iter_mut() {
            *k = den
                .terms
                .keys()
                .map(|m| m.iter().find(|(b, _)| b == a).map_or(0, |(_, e)| *e))
                .min()
                .unwrap_or(0);
        }
        let content: Mono = content.into_iter().filter(|(_, k)| *k != 0).collect();
        if !content.is_empty() {
            let inv = mono_inverse(&content);
            den = den.mul_mono(&inv, &BigRational::one());
            num = num.mul_mono(&inv, &BigRational::one());
            if den.terms.len() <= 1 {
                return Normal { num, den }.normalize();
            }
        }
        let lc = den.leading().map(|(_, c)| c.clone()).unwrap();
        if !lc.is_one() {
            let s = BigRational::one() / lc;
            den = den.scale(&s);
            num = num.scale(&s);
        }
        if let Some(q) = num.try_divide(&den) {
            return Normal { num: q, den: Poly::constant(BigRational::one()) };
        }
        Normal { num, den }
    }

    pub(crate) fn to_expr(&self) -> Expr {
        if self.den.is_one() {
            self.num.to_expr()
        } else {
            Expr::Quotient(Arc::new(self.num.to_expr()), Arc::new(self.den.to_expr()))
        }
    }

    pub(crate) fn from_expr(e: &Expr) -> Normal {
        match e {
            Expr::RationalConst(r) => Normal::constant((**r).clone()),
            Expr::CoordVar(v) => Normal::atom(Atom::Var(v.clone())),
            Expr::Sum(xs) => {
                // Group by denominator first so sums of polynomials stay cheap.
                let mut poly_part = Poly::zero();
                let mut other = Normal::zero();
                for x in xs.iter() {
                    let n = Normal::from_expr(x);
                    if n.den.is_one() {
                        poly_part = poly_part.add(&n.num);
                    } else {
                        other = other.add(&n);
                    }
                }
                Normal { num: poly_part, den: Poly::constant(BigRational::one()) }.add(&other)
            }
            Expr::Product(xs) => {
                let mut acc = Normal::constant(BigRational::one());
                for x in xs.iter() {
                    acc = acc.mul(&Normal::from_expr(x));
                    if acc.is_zero() {
                        break;
                    }
                }
                acc
            }
            Expr::IntPower(b, k) => {
                let base = Normal::from_expr(b);
                base.pow(*k).unwrap_or_else(|| {
                    Normal::atom(Atom::Opaque(Expr::IntPower(Arc::new(base.to_expr()), *k)))
                })
            }
            Expr::Quotient(n, d) => {
                let num = Normal::from_expr(n);
                let den = Normal::from_expr(d);
                match den.inverse() {
                    Some(inv) => num.mul(&inv),
                    None => Normal::atom(Atom::Opaque(Expr::Quotient(
                        Arc::new(num.to_expr()),
                        Arc::new(Expr::zero()),
                    ))),
                }
            }
            Expr::Func(f, a) => func_normal(*f, &Normal::from_expr(a)),
        }
    }
}

fn func_normal(f: Func, arg: &Normal) -> Normal {
    if arg.is_zero() {
        return match f {
            Func::Sinh | Func::Sin => Normal::zero(),
            Func::Cosh | Func::Cos | Func::Exp => Normal::constant(BigRational::one()),
        };
    }
    if f != Func::Exp && arg.leading_negative() {
        let flipped = Normal::atom(Atom::Func(f, arg.neg().to_expr()));
        return match f {
            Func::Sinh | Func::Sin => flipped.neg(),
            _ => flipped,
        };
    }
    Normal::atom(Atom::Func(f, arg.to_expr()))
}

/// Returns the canonical representative of `e`.
pub fn canonicalize(e: &Expr) -> Expr {
    Normal::from_expr(e).to_expr()
}
