//! Rational expressions in z and named parameters.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' ['-'] integer)?
//! atom  := number | number 'i' | 'z' | 'i' | 'pi' | param | '(' expr ')'
//! ```
//!
//! so `-z^2` is `-(z^2)` and `-2*z` is `(-2)*z`.

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::series::PuiseuxSeries;
use num_complex::Complex;
use std::collections::BTreeMap;
use std::fmt;

/// Polynomial in `nvars` variables; variable 0 is z.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T> {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Complex<T>>,
}

impl<T: Real> Poly<T> {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Complex<T>) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, Complex::new(T::one(), T::zero()));
        p
    }

    fn add_term(&mut self, e: Vec<u32>, c: Complex<T>) {
        let slot = self.terms.entry(e).or_insert(Complex::new(T::zero(), T::zero()));
        *slot = *slot + c;
        let zero = *slot == Complex::new(T::zero(), T::zero());
        if zero {
            self.terms.retain(|_, v| *v != Complex::new(T::zero(), T::zero()));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant value when the polynomial has no variables.
    pub fn as_constant(&self) -> Option<Complex<T>> {
        match self.terms.len() {
            0 => Some(Complex::new(T::zero(), T::zero())),
            1 => self.terms.get(&vec![0; self.nvars]).copied(),
            _ => None,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Complex<T>)> {
        self.terms.iter()
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(e.clone(), *c);
        }
        r
    }

    pub fn neg(&self) -> Self {
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect() }
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let mut r = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            r.add_term(e.clone(), c * s);
        }
        r
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                r.add_term(e, ca * cb);
            }
        }
        r
    }

    pub fn deriv(&self, i: usize) -> Self {
        let mut r = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                r.add_term(e2, c * T::from_u32(e[i]).unwrap());
            }
        }
        r
    }

    /// Value and the sum of term moduli, the latter used as a rounding scale.
    fn eval_scaled(&self, x: &[Complex<T>]) -> (Complex<T>, T) {
        let mut v = Complex::new(T::zero(), T::zero());
        let mut s = T::zero();
        for (e, c) in &self.terms {
            let mut t = *c;
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    t = t * xi.powu(k);
                }
            }
            v = v + t;
            s = s + t.norm();
        }
        (v, s)
    }

    pub fn eval(&self, x: &[Complex<T>]) -> Complex<T> {
        self.eval_scaled(x).0
    }

    /// Coefficients in z after substituting the parameter values.
    pub fn in_z(&self, t: &[Complex<T>]) -> Vec<Complex<T>> {
        let deg = self.terms.keys().map(|e| e[0] as usize).max().unwrap_or(0);
        let mut out = vec![Complex::new(T::zero(), T::zero()); deg + 1];
        for (e, c) in &self.terms {
            let mut v = *c;
            for (ti, &k) in t.iter().zip(&e[1..]) {
                if k > 0 {
                    v = v * ti.powu(k);
                }
            }
            out[e[0] as usize] = out[e[0] as usize] + v;
        }
        out
    }

    fn min_exponents(&self) -> Vec<u32> {
        let mut m = vec![u32::MAX; self.nvars];
        for e in self.terms.keys() {
            for (a, b) in m.iter_mut().zip(e) {
                *a = (*a).min(*b);
            }
        }
        m
    }

    fn divide_monomial(&self, m: &[u32]) -> Self {
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.iter().zip(m).map(|(a, b)| a - b).collect(), *c)).collect(),
        }
    }

    fn fmt_with(&self, names: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if c.im == T::zero() {
                write!(f, "{:e}", c.re)?;
            } else {
                write!(f, "({:e}+{:e}*i)", c.re, c.im)?;
            }
            for (i, &p) in e.iter().enumerate() {
                let name = if i == 0 { "z" } else { names[i - 1].as_str() };
                match p {
                    0 => {}
                    1 => write!(f, "*{name}")?,
                    _ => write!(f, "*{name}^{p}")?,
                }
            }
        }
        Ok(())
    }
}

/// Where a local expansion is taken.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Origin<T> {
    Point(Complex<T>),
    Infinity,
}

/// Derivative variable for [`ParamRational::partial`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Z,
    Param(usize),
}

/// Quotient of two polynomials in z and the declared parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamRational<T> {
    params: Vec<String>,
    num: Poly<T>,
    den: Poly<T>,
}

impl<T: Real> ParamRational<T> {
    pub fn parse(text: &str, params: &[&str]) -> Result<Self> {
        for p in params {
            if matches!(*p, "z" | "i" | "pi") || !is_ident(p) {
                return invalid(format!("'{p}' cannot be used as a parameter name"));
            }
        }
        let names: Vec<String> = params.iter().map(|s| s.to_string()).collect();
        let toks = tokenize(text)?;
        let mut p = Parser { toks, pos: 0, names, len: text.len() };
        let r = p.expr()?;
        if p.pos < p.toks.len() {
            return Err(Error::Syntax { pos: p.toks[p.pos].pos, msg: "unexpected trailing input".into() });
        }
        Ok(r)
    }

    pub fn constant(params: &[String], c: Complex<T>) -> Self {
        let n = params.len() + 1;
        ParamRational { params: params.to_vec(), num: Poly::constant(n, c), den: Poly::constant(n, one()) }
    }

    pub fn zero(params: &[String]) -> Self {
        Self::constant(params, Complex::new(T::zero(), T::zero()))
    }

    /// Rational function of z alone from coefficient lists.
    pub fn univariate(num: &[Complex<T>], den: &[Complex<T>]) -> Self {
        let mk = |c: &[Complex<T>]| {
            let mut p = Poly::zero(1);
            for (k, &a) in c.iter().enumerate() {
                p.add_term(vec![k as u32], a);
            }
            p
        };
        ParamRational { params: Vec::new(), num: mk(num), den: mk(den) }.tidy()
    }

    fn var(params: &[String], i: usize) -> Self {
        let n = params.len() + 1;
        ParamRational { params: params.to_vec(), num: Poly::var(n, i), den: Poly::constant(n, one()) }
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn numerator(&self) -> &Poly<T> {
        &self.num
    }

    pub fn denominator(&self) -> &Poly<T> {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn tidy(mut self) -> Self {
        if self.num.is_zero() {
            self.den = Poly::constant(self.den.nvars, one());
            return self;
        }
        if let Some(c) = self.den.as_constant() {
            self.num = self.num.scale(one::<T>() / c);
            self.den = Poly::constant(self.den.nvars, one());
            return self;
        }
        let mn = self.num.min_exponents();
        let md = self.den.min_exponents();
        let m: Vec<u32> = mn.iter().zip(&md).map(|(a, b)| *a.min(b)).collect();
        if m.iter().any(|&k| k > 0) {
            self.num = self.num.divide_monomial(&m);
            self.den = self.den.divide_monomial(&m);
        }
        self
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.den == o.den {
            return ParamRational { params: self.params.clone(), num: self.num.add(&o.num), den: self.den.clone() }.tidy();
        }
        ParamRational {
            params: self.params.clone(),
            num: self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
        .tidy()
    }

    pub fn neg(&self) -> Self {
        ParamRational { num: self.num.neg(), ..self.clone() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        ParamRational { params: self.params.clone(), num: self.num.mul(&o.num), den: self.den.mul(&o.den) }.tidy()
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        ParamRational { num: self.num.scale(c), ..self.clone() }.tidy()
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        if o.num.is_zero() {
            return invalid("division by the zero expression");
        }
        Ok(ParamRational { params: self.params.clone(), num: self.num.mul(&o.den), den: self.den.mul(&o.num) }.tidy())
    }

    pub fn powi(&self, k: i32) -> Result<Self> {
        let base = if k < 0 { Self::constant(&self.params, one()).div(self)? } else { self.clone() };
        let mut r = Self::constant(&self.params, one());
        for _ in 0..k.unsigned_abs() {
            r = r.mul(&base);
        }
        Ok(r)
    }

    /// Exact symbolic partial derivative.
    pub fn partial(&self, v: Var) -> Self {
        let i = match v {
            Var::Z => 0,
            Var::Param(k) => k + 1,
        };
        let n = self.num.deriv(i).mul(&self.den).add(&self.num.mul(&self.den.deriv(i)).neg());
        ParamRational { params: self.params.clone(), num: n, den: self.den.mul(&self.den) }.tidy()
    }

    fn point(&self, t: &[Complex<T>], z: Complex<T>) -> Result<Vec<Complex<T>>> {
        if t.len() != self.params.len() {
            return invalid(format!("expected {} parameter values, got {}", self.params.len(), t.len()));
        }
        let mut x = Vec::with_capacity(t.len() + 1);
        x.push(z);
        x.extend_from_slice(t);
        Ok(x)
    }

    pub fn eval(&self, t: &[Complex<T>], z: Complex<T>) -> Result<Complex<T>> {
        let x = self.point(t, z)?;
        let (d, ds) = self.den.eval_scaled(&x);
        if d.norm() <= T::lit(8.0) * T::epsilon() * ds || d.norm() == T::zero() {
            return Err(Error::Pole { re: z.re.to_f64().unwrap_or(f64::NAN), im: z.im.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(self.num.eval(&x) / d)
    }

    /// Numerator and denominator coefficients in z at a parameter sample.
    pub fn in_z(&self, t: &[Complex<T>]) -> Result<(Vec<Complex<T>>, Vec<Complex<T>>)> {
        self.point(t, Complex::new(T::zero(), T::zero()))?;
        Ok((self.num.in_z(t), self.den.in_z(t)))
    }

    /// Laurent expansion through `order` in w = z - z0, or in w = 1/z at infinity.
    pub fn laurent_expand(&self, t: &[Complex<T>], origin: Origin<T>, order: i64) -> Result<PuiseuxSeries<T>> {
        let (n, d) = self.in_z(t)?;
        let local = |p: Vec<Complex<T>>| -> (Vec<Complex<T>>, i64) {
            match origin {
                Origin::Point(z0) => (taylor_shift(p, z0), 0),
                Origin::Infinity => {
                    let deg = p.len() as i64 - 1;
                    (p.into_iter().rev().collect(), -deg)
                }
            }
        };
        let (n, sn) = strip_low(local(n));
        let (d, sd) = strip_low(local(d));
        if d.is_empty() {
            return invalid("denominator vanishes identically at this sample");
        }
        if n.is_empty() {
            return Ok(PuiseuxSeries::zero(1, order));
        }
        let v = sn - sd;
        if order < v {
            return Ok(PuiseuxSeries::zero(1, order));
        }
        let count = (order - v + 1) as usize;
        let zero = Complex::new(T::zero(), T::zero());
        let mut q: Vec<Complex<T>> = Vec::with_capacity(count);
        for k in 0..count {
            let mut s = n.get(k).copied().unwrap_or(zero);
            for j in 1..=k.min(d.len() - 1) {
                s = s - d[j] * q[k - j];
            }
            q.push(s / d[0]);
        }
        Ok(PuiseuxSeries::from_complex(1, v, &q))
    }
}

impl<T: Real> fmt::Display for ParamRational<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num.is_zero() {
            return write!(f, "0");
        }
        write!(f, "(")?;
        self.num.fmt_with(&self.params, f)?;
        write!(f, ")/(")?;
        self.den.fmt_with(&self.params, f)?;
        write!(f, ")")
    }
}

fn one<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

/// Coefficients of p(z0 + w) in w.
fn taylor_shift<T: Real>(mut a: Vec<Complex<T>>, z0: Complex<T>) -> Vec<Complex<T>> {
    let n = a.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let t = a[j + 1];
            a[j] = a[j] + z0 * t;
        }
    }
    a
}

/// Drops coefficients that are zero up to rounding at the low end.
fn strip_low<T: Real>((a, s): (Vec<Complex<T>>, i64)) -> (Vec<Complex<T>>, i64) {
    let mx = a.iter().fold(T::zero(), |m, c| m.max(c.norm()));
    let tol = mx * T::lit(1e-12);
    match a.iter().position(|c| c.norm() > tol) {
        None => (Vec::new(), s),
        Some(k) => {
            let mut b = a[k..].to_vec();
            while b.last().is_some_and(|c| c.norm() <= tol) {
                b.pop();
            }
            (b, s + k as i64)
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String, bool),
    Ident(String),
    Op(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let st = i;
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    while j < b.len() && b[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = text[st..i].to_string();
            if lit.matches('.').count() > 1 || lit == "." {
                return Err(Error::Syntax { pos: st, msg: format!("malformed number '{lit}'") });
            }
            let mut imag = false;
            if i < b.len() && b[i] == b'i' && !(i + 1 < b.len() && (b[i + 1].is_ascii_alphanumeric() || b[i + 1] == b'_')) {
                imag = true;
                i += 1;
            } else if i < b.len() && (b[i].is_ascii_alphabetic() || b[i] == b'_') {
                return Err(Error::Syntax { pos: i, msg: "missing operator between number and identifier".into() });
            }
            out.push(Token { tok: Tok::Num(lit, imag), pos: st });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let st = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(text[st..i].to_string()), pos: st });
        } else if "+-*/^()".contains(c) {
            out.push(Token { tok: Tok::Op(c), pos: i });
            i += 1;
        } else {
            return Err(Error::Syntax { pos: i, msg: format!("unexpected character '{c}'") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    names: Vec<String>,
    len: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some(Token { tok: Tok::Op(c), .. }) => Some(*c),
            _ => None,
        }
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |t| t.pos)
    }

    fn err<X>(&self, msg: &str) -> Result<X> {
        Err(Error::Syntax { pos: self.here(), msg: msg.into() })
    }

    fn expr<T: Real>(&mut self) -> Result<ParamRational<T>> {
        let mut acc = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let r = self.term()?;
            acc = if op == '+' { acc.add(&r) } else { acc.sub(&r) };
        }
        Ok(acc)
    }

    fn term<T: Real>(&mut self) -> Result<ParamRational<T>> {
        let mut acc = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            let at = self.here();
            self.pos += 1;
            let r = self.unary()?;
            acc = if op == '*' {
                acc.mul(&r)
            } else {
                acc.div(&r).map_err(|_| Error::Syntax { pos: at, msg: "division by zero".into() })?
            };
        }
        Ok(acc)
    }

    fn unary<T: Real>(&mut self) -> Result<ParamRational<T>> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power<T: Real>(&mut self) -> Result<ParamRational<T>> {
        let base = self.atom()?;
        if self.peek_op() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let at = self.here();
        let mut sign = 1i32;
        let paren = self.peek_op() == Some('(');
        if paren {
            self.pos += 1;
        }
        if self.peek_op() == Some('-') {
            sign = -1;
            self.pos += 1;
        }
        let k = match self.toks.get(self.pos) {
            Some(Token { tok: Tok::Num(s, false), .. }) => s.parse::<i32>().ok(),
            _ => None,
        };
        let Some(k) = k else {
            return self.err("exponent must be an integer literal");
        };
        self.pos += 1;
        if paren {
            if self.peek_op() != Some(')') {
                return self.err("expected ')'");
            }
            self.pos += 1;
        }
        base.powi(sign * k).map_err(|_| Error::Syntax { pos: at, msg: "negative power of zero".into() })
    }

    fn atom<T: Real>(&mut self) -> Result<ParamRational<T>> {
        let Some(tok) = self.toks.get(self.pos).cloned() else {
            return self.err("unexpected end of input");
        };
        self.pos += 1;
        let nv = self.names.len() + 1;
        let k = |c: Complex<T>| ParamRational::constant(&self.names, c);
        match tok.tok {
            Tok::Num(s, imag) => {
                let v = <T as num_traits::Num>::from_str_radix(&s, 10)
                    .map_err(|_| Error::Syntax { pos: tok.pos, msg: format!("malformed number '{s}'") })?;
                Ok(k(if imag { Complex::new(T::zero(), v) } else { Complex::new(v, T::zero()) }))
            }
            Tok::Ident(name) => match name.as_str() {
                "z" => Ok(ParamRational::var(&self.names, 0)),
                "i" => Ok(k(Complex::new(T::zero(), T::one()))),
                "pi" => Ok(k(Complex::new(T::PI(), T::zero()))),
                _ => match self.names.iter().position(|n| *n == name) {
                    Some(p) if p + 1 < nv => Ok(ParamRational::var(&self.names, p + 1)),
                    _ => Err(Error::UnknownIdent { pos: tok.pos, name }),
                },
            },
            Tok::Op('(') => {
                let e = self.expr()?;
                if self.peek_op() != Some(')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Tok::Op(c) => {
                self.pos -= 1;
                self.err(&format!("unexpected '{c}'"))
            }
        }
    }
}

/// Named parameters and the finite list of sample points standing in for
/// the parameter domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterGrid {
    names: Vec<String>,
    samples: Vec<Vec<Complex<f64>>>,
}

impl ParameterGrid {
    pub fn new(names: Vec<String>, samples: Vec<Vec<Complex<f64>>>) -> Result<Self> {
        if samples.is_empty() {
            return invalid("parameter grid needs at least one sample");
        }
        if let Some(s) = samples.iter().find(|s| s.len() != names.len()) {
            return invalid(format!("sample has {} values but {} parameters are declared", s.len(), names.len()));
        }
        Ok(ParameterGrid { names, samples })
    }

    /// Grid with one parameter `t`.
    pub fn single(values: &[Complex<f64>]) -> Result<Self> {
        Self::new(vec!["t".into()], values.iter().map(|&v| vec![v]).collect())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn samples(&self) -> &[Vec<Complex<f64>>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;
    type R = ParamRational<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn sibuya_pole_order() {
        let r = R::parse("(1+t*z^3)/z^7", &["t"]).unwrap();
        let s = r.laurent_expand(&[c(1.0, 0.0)], Origin::Point(c(0.0, 0.0)), 0).unwrap();
        assert_eq!(s.valuation(), Some(-7));
        assert!((r.eval(&[c(1.0, 0.0)], c(1.0, 0.0)).unwrap() - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn simple_pole_and_zero() {
        let r = R::parse("t/z", &["t"]).unwrap();
        let s = r.laurent_expand(&[c(0.3, 0.0)], Origin::Point(c(0.0, 0.0)), 2).unwrap();
        assert_eq!(s.valuation(), Some(-1));
        assert!((s.coeff_c(-1) - c(0.3, 0.0)).norm() < 1e-15);
        for n in 0..=2 {
            assert!(s.coeff_c(n).norm() == 0.0);
        }
        assert!(R::parse("0", &[]).unwrap().is_zero());
        assert!(matches!(R::parse("1/z", &[]).unwrap().eval(&[], c(0.0, 0.0)), Err(Error::Pole { .. })));
    }

    #[test]
    fn direct_evaluation() {
        let r = R::parse("(t^2-z^2)/z^2", &["t"]).unwrap();
        assert!((r.eval(&[c(0.3, 0.0)], c(2.0, 0.0)).unwrap() - c(-0.9775, 0.0)).norm() < 1e-15);
        let s = r.laurent_expand(&[c(0.3, 0.0)], Origin::Point(c(0.0, 0.0)), 0).unwrap();
        assert!((s.coeff_c(-2) - c(0.09, 0.0)).norm() < 1e-15);
        assert!((s.coeff_c(0) - c(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(s.order(), 0);
    }

    #[test]
    fn geometric_expansion_and_infinity() {
        let r = R::parse("1/(1-z)", &[]).unwrap();
        let s = r.laurent_expand(&[], Origin::Point(c(0.0, 0.0)), 3).unwrap();
        for n in 0..=3 {
            assert!((s.coeff_c(n) - c(1.0, 0.0)).norm() < 1e-15);
        }
        // 1/(1-z) = -w/(1-w) with w = 1/z
        let s = r.laurent_expand(&[], Origin::Infinity, 4).unwrap();
        assert_eq!(s.valuation(), Some(1));
        for n in 1..=4 {
            assert!((s.coeff_c(n) + c(1.0, 0.0)).norm() < 1e-15);
        }
        let s = r.laurent_expand(&[], Origin::Point(c(2.0, 0.0)), 2).unwrap();
        // 1/(1-z) = -1/(1+w) at z = 2
        assert!((s.coeff_c(1) - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn precedence_and_literals() {
        let r = R::parse("-z^2 + 2i*pi - 3*-z", &[]).unwrap();
        let z = c(0.5, 0.25);
        let want = -(z * z) + c(0.0, 2.0 * std::f64::consts::PI) + 3.0 * z;
        assert!((r.eval(&[], z).unwrap() - want).norm() < 1e-14);
        let r = R::parse("z^-2 * 1.5e1", &[]).unwrap();
        assert!((r.eval(&[], c(2.0, 0.0)).unwrap() - c(3.75, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(R::parse("z + q", &["t"]), Err(Error::UnknownIdent { pos: 4, name: "q".into() }));
        assert!(matches!(R::parse("(z + 1", &[]), Err(Error::Syntax { pos: 6, .. })));
        assert!(matches!(R::parse("z ^ t", &["t"]), Err(Error::Syntax { pos: 4, .. })));
        assert!(matches!(R::parse("2z", &[]), Err(Error::Syntax { pos: 1, .. })));
        assert!(matches!(R::parse("1/0", &[]), Err(Error::Syntax { pos: 1, .. })));
    }

    #[test]
    fn print_round_trip() {
        let r = R::parse("(1+ (0.3-2i)*t*z^3)/(z^7 - t^2*z + pi)", &["t"]).unwrap();
        let back = R::parse(&r.to_string(), &["t"]).unwrap();
        let t = [c(0.7, -0.2)];
        let z = c(0.9, 0.4);
        assert!((back.eval(&t, z).unwrap() - r.eval(&t, z).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn symbolic_derivative() {
        let r = R::parse("t/z^2 + t^2*z", &["t"]).unwrap();
        let dz = r.partial(Var::Z);
        let dt = r.partial(Var::Param(0));
        let (t, z) = (c(0.4, 0.1), c(1.3, -0.2));
        assert!((dz.eval(&[t], z).unwrap() - (-2.0 * t / (z * z * z) + t * t)).norm() < 1e-14);
        assert!((dt.eval(&[t], z).unwrap() - (1.0 / (z * z) + 2.0 * t * z)).norm() < 1e-14);
    }

    #[test]
    fn single_precision_parse() {
        let r = ParamRational::<f32>::parse("1/(1-z)", &[]).unwrap();
        let v = r.eval(&[], Complex::new(0.5f32, 0.0)).unwrap();
        assert!((v.re - 2.0).abs() < 1e-6);
    }

    #[test]
    fn grid_validation() {
        assert!(ParameterGrid::new(vec!["t".into()], vec![]).is_err());
        assert!(ParameterGrid::new(vec!["t".into()], vec![vec![]]).is_err());
        assert_eq!(ParameterGrid::single(&[c(1.0, 0.0)]).unwrap().len(), 1);
    }
}
