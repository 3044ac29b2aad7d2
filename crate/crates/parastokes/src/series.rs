//! Truncated Puiseux series in z^{1/nu}, Borel transform, Gevrey fit and Padé.

use crate::error::{invalid, numerical, Result};
use crate::expr::ParamRational;
use crate::scalar::{Real, Scaled};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use num_integer::Integer;
use num_rational::Ratio;
use std::collections::HashMap;

pub type Rational = Ratio<i64>;

/// Default truncation order, in units of z^{1/nu}.
pub const DEFAULT_ORDER: i64 = 80;

/// `sum_{n=val}^{order} c_n z^{n/nu} + O(z^{(order+1)/nu})`.
#[derive(Clone, Debug, PartialEq)]
pub struct PuiseuxSeries<T> {
    nu: u32,
    val: i64,
    coeffs: Vec<Scaled<T>>,
    order: i64,
}

impl<T: Real> PuiseuxSeries<T> {
    pub fn new(nu: u32, val: i64, coeffs: Vec<Scaled<T>>) -> Self {
        assert!(nu > 0, "ramification must be positive");
        let order = val + coeffs.len() as i64 - 1;
        PuiseuxSeries { nu, val, coeffs, order }
    }

    /// Pads with zeros or truncates so the series is known through `order`.
    pub fn with_order(nu: u32, val: i64, mut coeffs: Vec<Scaled<T>>, order: i64) -> Self {
        assert!(nu > 0, "ramification must be positive");
        if order < val {
            return Self::zero(nu, order);
        }
        coeffs.resize((order - val + 1) as usize, Scaled::zero());
        PuiseuxSeries { nu, val, coeffs, order }
    }

    pub fn from_complex(nu: u32, val: i64, cs: &[Complex<T>]) -> Self {
        Self::new(nu, val, cs.iter().map(|&c| Scaled::from_complex(c)).collect())
    }

    pub fn zero(nu: u32, order: i64) -> Self {
        PuiseuxSeries { nu, val: order + 1, coeffs: Vec::new(), order }
    }

    pub fn monomial(nu: u32, n: i64, c: Complex<T>, order: i64) -> Self {
        Self::with_order(nu, n, vec![Scaled::from_complex(c)], order)
    }

    pub fn constant(c: Complex<T>, order: i64) -> Self {
        Self::monomial(1, 0, c, order)
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    /// Index of the first stored coefficient.
    pub fn val(&self) -> i64 {
        self.val
    }

    pub fn order(&self) -> i64 {
        self.order
    }

    pub fn coeffs(&self) -> &[Scaled<T>] {
        &self.coeffs
    }

    /// Coefficient of z^{n/nu}; zero outside the stored range.
    pub fn coeff(&self, n: i64) -> Scaled<T> {
        if n < self.val || n > self.order {
            Scaled::zero()
        } else {
            self.coeffs[(n - self.val) as usize]
        }
    }

    pub fn coeff_c(&self, n: i64) -> Complex<T> {
        self.coeff(n).to_complex()
    }

    /// Index of the first nonzero coefficient.
    pub fn valuation(&self) -> Option<i64> {
        self.coeffs.iter().position(|c| !c.is_zero()).map(|p| self.val + p as i64)
    }

    pub fn is_zero(&self) -> bool {
        self.valuation().is_none()
    }

    /// Valuation as an exponent of z.
    pub fn exponent(&self) -> Option<Rational> {
        self.valuation().map(|v| Rational::new(v, self.nu as i64))
    }

    pub fn trimmed(&self) -> Self {
        match self.valuation() {
            None => Self::zero(self.nu, self.order),
            Some(v) => PuiseuxSeries {
                nu: self.nu,
                val: v,
                coeffs: self.coeffs[(v - self.val) as usize..].to_vec(),
                order: self.order,
            },
        }
    }

    /// Same series written in z^{1/nu2}; `nu2` must be a multiple of `nu`.
    pub fn with_nu(&self, nu2: u32) -> Self {
        assert!(nu2 % self.nu == 0, "ramification must divide the target");
        let k = (nu2 / self.nu) as i64;
        if k == 1 {
            return self.clone();
        }
        let val = self.val * k;
        let order = (self.order + 1) * k - 1;
        let coeffs = (val..=order)
            .map(|n| if (n - val) % k == 0 { self.coeffs[((n - val) / k) as usize] } else { Scaled::zero() })
            .collect();
        PuiseuxSeries { nu: nu2, val, coeffs, order }
    }

    /// Smallest ramification compatible with the nonzero support.
    ///
    /// The truncation order is rounded down when it is not representable.
    pub fn normalize_nu(&self) -> Self {
        let support: Vec<i64> =
            (self.val..=self.order).filter(|&n| !self.coeff(n).is_zero()).collect();
        let mut g = self.nu as i64;
        for &n in &support {
            g = g.gcd(&n);
        }
        if g <= 1 {
            return self.clone();
        }
        let nu = self.nu / g as u32;
        let order = Integer::div_floor(&(self.order + 1), &g) - 1;
        let val = Integer::div_ceil(&self.val, &g);
        let coeffs = (val..=order).map(|n| self.coeff(n * g)).collect();
        PuiseuxSeries::with_order(nu, val, coeffs, order)
    }

    fn align(&self, o: &Self) -> (Self, Self) {
        let nu = self.nu.lcm(&o.nu);
        (self.with_nu(nu), o.with_nu(nu))
    }

    pub fn add(&self, o: &Self) -> Self {
        let (a, b) = self.align(o);
        let order = a.order.min(b.order);
        let val = a.val.min(b.val);
        if val > order {
            return Self::zero(a.nu, order);
        }
        let coeffs = (val..=order).map(|n| a.coeff(n) + b.coeff(n)).collect();
        PuiseuxSeries { nu: a.nu, val, coeffs, order }
    }

    pub fn neg(&self) -> Self {
        PuiseuxSeries { coeffs: self.coeffs.iter().map(|&c| -c).collect(), ..self.clone() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        PuiseuxSeries { coeffs: self.coeffs.iter().map(|x| x.scale(c)).collect(), ..self.clone() }
    }

    pub fn scale_scaled(&self, c: Scaled<T>) -> Self {
        PuiseuxSeries { coeffs: self.coeffs.iter().map(|&x| x * c).collect(), ..self.clone() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (a, b) = self.align(o);
        let va = a.valuation().unwrap_or(a.order + 1);
        let vb = b.valuation().unwrap_or(b.order + 1);
        let order = (a.order + vb).min(b.order + va);
        let val = va + vb;
        if val > order {
            return Self::zero(a.nu, order);
        }
        let coeffs = (val..=order)
            .map(|n| {
                let lo = va.max(n - b.order);
                let hi = (n - vb).min(a.order);
                (lo..=hi).map(|i| a.coeff(i) * b.coeff(n - i)).sum()
            })
            .collect();
        PuiseuxSeries { nu: a.nu, val, coeffs, order }
    }

    /// Multiplicative inverse; relative precision is preserved.
    pub fn invert(&self) -> Result<Self> {
        let v = match self.valuation() {
            Some(v) => v,
            None => return numerical("inversion of a series with zero leading coefficient"),
        };
        let a0 = self.coeff(v).recip();
        let rel = self.order - v;
        let mut b: Vec<Scaled<T>> = Vec::with_capacity(rel as usize + 1);
        b.push(a0);
        for k in 1..=rel {
            let s: Scaled<T> = (1..=k).map(|j| self.coeff(v + j) * b[(k - j) as usize]).sum();
            b.push(-(s * a0));
        }
        Ok(PuiseuxSeries { nu: self.nu, val: -v, coeffs: b, order: -v + rel })
    }

    /// Termwise d/dz.
    pub fn differentiate(&self) -> Self {
        let nu = self.nu as i64;
        let fnu = T::from_i64(nu).unwrap();
        let coeffs = (self.val..=self.order)
            .map(|n| self.coeff(n).scale_real(T::from_i64(n).unwrap() / fnu))
            .collect();
        PuiseuxSeries { nu: self.nu, val: self.val - nu, coeffs, order: self.order - nu }
    }

    /// Termwise z d/dz.
    pub fn theta(&self) -> Self {
        let fnu = T::from_u32(self.nu).unwrap();
        let coeffs = (self.val..=self.order)
            .map(|n| self.coeff(n).scale_real(T::from_i64(n).unwrap() / fnu))
            .collect();
        PuiseuxSeries { coeffs, ..self.clone() }
    }

    /// Multiplication by z^{s/nu}.
    pub fn shift(&self, s: i64) -> Self {
        PuiseuxSeries { val: self.val + s, order: self.order + s, ..self.clone() }
    }

    pub fn truncate(&self, order: i64) -> Self {
        if order >= self.order {
            return self.clone();
        }
        let coeffs = self.coeffs.clone();
        Self::with_order(self.nu, self.val, coeffs, order)
    }

    /// Coefficient n multiplied by rho^{n/nu}.
    pub fn rescale(&self, rho: T) -> Self {
        let l = rho.log10() / T::from_u32(self.nu).unwrap();
        let coeffs = (self.val..=self.order)
            .map(|n| self.coeff(n) * Scaled::from_polar_log10(l * T::from_i64(n).unwrap(), T::zero()))
            .collect();
        PuiseuxSeries { coeffs, ..self.clone() }
    }

    /// Partial sum at z = r e^{i arg} on the Riemann surface of log.
    pub fn eval_polar(&self, r: T, arg: T) -> Complex<T> {
        let fnu = T::from_u32(self.nu).unwrap();
        let lr = r.log10();
        let mut acc = Scaled::zero();
        for n in self.val..=self.order {
            let c = self.coeff(n);
            if c.is_zero() {
                continue;
            }
            let x = T::from_i64(n).unwrap() / fnu;
            acc = acc + c * Scaled::from_polar_log10(lr * x, arg * x);
        }
        acc.to_complex()
    }

    /// Partial sum on the principal branch.
    pub fn eval(&self, z: Complex<T>) -> Complex<T> {
        self.eval_polar(z.norm(), z.arg())
    }

    /// Formal Borel transform of order k: a_n -> a_n / Gamma(1 + n/(nu k)).
    pub fn borel_transform(&self, k: Rational) -> Result<Self> {
        if k <= Rational::from(0) {
            return invalid("Borel order must be positive");
        }
        if let Some(v) = self.valuation() {
            if v < 0 {
                return invalid("Borel transform of a series with negative leading exponent");
            }
        }
        // x_n = n kd / p; classes r = n kd mod p share Gamma ratios
        let p = self.nu as i64 * *k.numer();
        let kd = *k.denom();
        let mut classes: HashMap<i64, (i64, Scaled<T>)> = HashMap::new();
        let coeffs = (self.val..=self.order)
            .map(|n| {
                let c = self.coeff(n);
                if n < 0 || c.is_zero() {
                    return c;
                }
                let num = n * kd;
                let (r, j) = (num % p, num / p);
                let frac = r as f64 / p as f64;
                let e = classes
                    .entry(r)
                    .or_insert_with(|| (0, Scaled::from_real(T::lit(statrs::function::gamma::gamma(1.0 + frac)))));
                while e.0 < j {
                    e.1 = e.1.scale_real(T::lit(1.0 + frac + e.0 as f64));
                    e.0 += 1;
                }
                c / e.1
            })
            .collect();
        Ok(PuiseuxSeries { coeffs, ..self.clone() })
    }

    /// Fits log|a_n| ~ alpha n log n + beta n + gamma log n + delta.
    pub fn gevrey_order_estimate(&self) -> Result<GevreyFit> {
        let have = self.coeffs.len();
        if have < 40 {
            return invalid(format!("Gevrey estimate needs at least 40 coefficients, have {have}"));
        }
        let mut pts: Vec<(f64, f64)> = (self.val.max(1)..=self.order)
            .filter_map(|n| {
                let c = self.coeff(n);
                (!c.is_zero()).then(|| (n as f64, c.ln_abs().to_f64().unwrap()))
            })
            .collect();
        if pts.len() < 8 {
            return Ok(GevreyFit { verdict: Gevrey::Convergent, slope: 0.0, fitted_k: f64::INFINITY, points: pts.len() });
        }
        let mut beta = lsq_fit(&pts);
        // rounding noise where exact zeros are expected sits far below the envelope
        for _ in 0..3 {
            let before = pts.len();
            pts.retain(|&(n, y)| y - model(&beta, n) > -11.5);
            if pts.len() == before || pts.len() < 8 {
                break;
            }
            beta = lsq_fit(&pts);
        }
        let alpha = beta[0];
        if alpha < 0.05 {
            return Ok(GevreyFit { verdict: Gevrey::Convergent, slope: alpha, fitted_k: f64::INFINITY, points: pts.len() });
        }
        let k = 1.0 / (self.nu as f64 * alpha);
        Ok(GevreyFit { verdict: Gevrey::Order(snap_rational(k, 12)), slope: alpha, fitted_k: k, points: pts.len() })
    }

    /// [m/n] Padé approximant; requires nu = 1 and no negative powers.
    pub fn pade_approximant(&self, m: usize, n: usize) -> Result<Pade<T>> {
        if self.nu != 1 {
            return invalid("Padé approximant needs an unramified series");
        }
        if self.valuation().is_some_and(|v| v < 0) {
            return invalid("Padé approximant needs a series without negative powers");
        }
        if self.order < (m + n) as i64 {
            return invalid(format!("Padé [{m}/{n}] needs {} coefficients", m + n + 1));
        }
        let c: Vec<Complex<T>> = (0..=(m + n) as i64).map(|i| self.coeff_c(i)).collect();
        let cmax = c.iter().fold(T::zero(), |a, x| a.max(x.norm()));
        if cmax == T::zero() && n > 0 {
            return invalid("Padé approximant of the zero series");
        }
        let tol = T::epsilon() * cmax;
        let at = |i: i64| if i < 0 { Complex::new(T::zero(), T::zero()) } else { c[i as usize] };
        let mut nn = n;
        let q = loop {
            if nn == 0 {
                break vec![Complex::new(T::one(), T::zero())];
            }
            let mut a = vec![vec![Complex::new(T::zero(), T::zero()); nn]; nn];
            let mut rhs = vec![Complex::new(T::zero(), T::zero()); nn];
            for r in 0..nn {
                let k = (m + 1 + r) as i64;
                for j in 1..=nn {
                    a[r][j - 1] = at(k - j as i64);
                }
                rhs[r] = -at(k);
            }
            let (x, rank) = pivoted_solve(a, rhs, tol);
            if rank == nn {
                let mut q = vec![Complex::new(T::one(), T::zero())];
                q.extend(x);
                break q;
            }
            nn = rank;
        };
        let p: Vec<Complex<T>> = (0..=m)
            .map(|i| (0..=i.min(nn)).fold(Complex::new(T::zero(), T::zero()), |s, j| s + q[j] * c[i - j]))
            .collect();
        Ok(Pade { num: p, den: q, requested: (m, n), degrees: (m, nn) })
    }
}

/// Gaussian elimination with complete pivoting; returns solution and rank.
fn pivoted_solve<T: Real>(mut a: Vec<Vec<Complex<T>>>, mut b: Vec<Complex<T>>, tol: T) -> (Vec<Complex<T>>, usize) {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rank = n;
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, T::zero());
        for (i, row) in a.iter().enumerate().skip(k) {
            for (j, v) in row.iter().enumerate().skip(k) {
                if v.norm() > best {
                    best = v.norm();
                    pi = i;
                    pj = j;
                }
            }
        }
        if best <= tol {
            rank = k;
            break;
        }
        a.swap(k, pi);
        b.swap(k, pi);
        for row in a.iter_mut() {
            row.swap(k, pj);
        }
        perm.swap(k, pj);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                let t = a[k][j];
                a[i][j] = a[i][j] - f * t;
            }
            let t = b[k];
            b[i] = b[i] - f * t;
        }
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut y = vec![zero; n];
    if rank == n {
        for k in (0..n).rev() {
            let s = (k + 1..n).fold(b[k], |s, j| s - a[k][j] * y[j]);
            y[k] = s / a[k][k];
        }
    }
    let mut x = vec![zero; n];
    for k in 0..n {
        x[perm[k]] = y[k];
    }
    (x, rank)
}

fn model(beta: &[f64; 4], n: f64) -> f64 {
    beta[0] * n * n.ln() + beta[1] * n + beta[2] * n.ln() + beta[3]
}

fn lsq_fit(pts: &[(f64, f64)]) -> [f64; 4] {
    let a = DMatrix::from_fn(pts.len(), 4, |i, j| {
        let n = pts[i].0;
        match j {
            0 => n * n.ln(),
            1 => n,
            2 => n.ln(),
            _ => 1.0,
        }
    });
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let x = a.svd(true, true).solve(&y, 1e-12).expect("svd solve");
    [x[0], x[1], x[2], x[3]]
}

/// Nearest rational with denominator at most `qmax`, preferring small
/// denominators within 0.2% relative.
pub fn snap_rational(x: f64, qmax: i64) -> Rational {
    let mut best = Rational::from(x.round() as i64);
    let mut err = (x - x.round()).abs();
    for q in 1..=qmax {
        let p = (x * q as f64).round() as i64;
        let e = (x - p as f64 / q as f64).abs();
        if e <= 2e-3 * x.abs().max(1e-300) {
            return Rational::new(p, q);
        }
        if e < err {
            err = e;
            best = Rational::new(p, q);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gevrey {
    Convergent,
    Order(Rational),
}

#[derive(Clone, Debug)]
pub struct GevreyFit {
    pub verdict: Gevrey,
    /// Fitted coefficient of n log n.
    pub slope: f64,
    pub fitted_k: f64,
    pub points: usize,
}

/// Rational approximant `num(z)/den(z)` with `den(0) = 1`.
#[derive(Clone, Debug)]
pub struct Pade<T> {
    pub num: Vec<Complex<T>>,
    pub den: Vec<Complex<T>>,
    pub requested: (usize, usize),
    pub degrees: (usize, usize),
}

impl<T: Real> Pade<T> {
    pub fn reduced(&self) -> bool {
        self.requested != self.degrees
    }

    pub fn eval(&self, z: Complex<T>) -> Complex<T> {
        horner(&self.num, z) / horner(&self.den, z)
    }

    pub fn to_rational(&self) -> ParamRational<T> {
        ParamRational::univariate(&self.num, &self.den)
    }
}

pub(crate) fn horner<T: Real>(c: &[Complex<T>], z: Complex<T>) -> Complex<T> {
    c.iter().rev().fold(Complex::new(T::zero(), T::zero()), |s, &a| s * z + a)
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;
    type S = PuiseuxSeries<f64>;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn product_of_conjugate_binomials() {
        let a = S::with_order(1, 0, vec![Scaled::one(), Scaled::one()], 5);
        let b = S::with_order(1, 0, vec![Scaled::one(), -Scaled::one()], 5);
        let p = a.mul(&b);
        assert_eq!(p.order(), 5);
        let want = [1.0, 0.0, -1.0, 0.0, 0.0, 0.0];
        for (n, w) in want.iter().enumerate() {
            assert!(close(p.coeff_c(n as i64), c(*w), 1e-15));
        }
    }

    #[test]
    fn geometric_inverse() {
        let a = S::with_order(1, 0, vec![Scaled::one(), -Scaled::one()], 3);
        let b = a.invert().unwrap();
        assert_eq!((b.val(), b.order()), (0, 3));
        for n in 0..=3 {
            assert!(close(b.coeff_c(n), c(1.0), 1e-15));
        }
        assert!(S::zero(1, 3).invert().is_err());
    }

    #[test]
    fn derivative_of_square_root() {
        let s = S::monomial(2, 1, c(1.0), 6);
        let d = s.differentiate();
        assert_eq!(d.exponent(), Some(Rational::new(-1, 2)));
        assert!(close(d.coeff_c(-1), c(0.5), 1e-15));
    }

    #[test]
    fn lcm_alignment() {
        let a = S::monomial(2, 1, c(1.0), 6);
        let b = S::monomial(3, 1, c(1.0), 6);
        let s = a.add(&b);
        assert_eq!(s.nu(), 6);
        assert!(close(s.coeff_c(3), c(1.0), 0.0));
        assert!(close(s.coeff_c(2), c(1.0), 0.0));
        assert_eq!(s.order(), 13);
        let n = S::monomial(4, 2, c(3.0), 9).normalize_nu();
        assert_eq!((n.nu(), n.val(), n.order()), (2, 1, 4));
    }

    #[test]
    fn euler_borel_is_log() {
        // -sum n! z^{n+1} -> -z^{n+1}/(n+1)
        let mut cs = vec![Scaled::zero()];
        let mut f = Scaled::<f64>::one();
        for n in 0..70 {
            if n > 0 {
                f = f.scale_real(n as f64);
            }
            cs.push(-f);
        }
        let s = S::new(1, 0, cs);
        let b = s.borel_transform(Rational::from(1)).unwrap();
        for n in 0..=60 {
            let want = -1.0 / (n as f64 + 1.0);
            assert!(close(b.coeff_c(n + 1), c(want), 1e-12), "n={n}");
        }
    }

    #[test]
    fn borel_exp_and_constant() {
        let s = S::new(1, 0, vec![Scaled::one(); 30]);
        let b = s.borel_transform(Rational::from(1)).unwrap();
        let mut f = 1.0;
        for n in 0..30 {
            if n > 0 {
                f *= n as f64;
            }
            assert!(close(b.coeff_c(n), c(1.0 / f), 1e-13));
        }
        let one = S::constant(c(1.0), 0).borel_transform(Rational::from(1)).unwrap();
        assert!(close(one.coeff_c(0), c(1.0), 1e-15));
        assert!(S::monomial(1, -1, c(1.0), 3).borel_transform(Rational::from(1)).is_err());
    }

    #[test]
    fn borel_fractional_order_matches_gamma() {
        let s = S::new(2, 0, vec![Scaled::one(); 50]);
        let b = s.borel_transform(Rational::new(5, 2)).unwrap();
        for n in 0..50i64 {
            let g = statrs::function::gamma::gamma(1.0 + n as f64 / 5.0);
            assert!(close(b.coeff_c(n), c(1.0 / g), 1e-12), "n={n}");
        }
    }

    #[test]
    fn gevrey_fits() {
        let mut cs = vec![Scaled::zero()];
        let mut f = Scaled::<f64>::one();
        for n in 0..80 {
            if n > 0 {
                f = f.scale_real(n as f64);
            }
            cs.push(-f);
        }
        let euler = S::new(1, 0, cs);
        assert_eq!(euler.gevrey_order_estimate().unwrap().verdict, Gevrey::Order(Rational::from(1)));
        let geo = S::new(1, 0, vec![Scaled::one(); 60]);
        assert_eq!(geo.gevrey_order_estimate().unwrap().verdict, Gevrey::Convergent);
        let syn = S::new(
            1,
            0,
            (0..80)
                .map(|n| {
                    let l = statrs::function::gamma::ln_gamma(1.0 + 2.0 * n as f64 / 5.0);
                    Scaled::from_polar_log10(l / std::f64::consts::LN_10, 0.0)
                })
                .collect(),
        );
        assert_eq!(syn.gevrey_order_estimate().unwrap().verdict, Gevrey::Order(Rational::new(5, 2)));
        assert!(S::new(1, 0, vec![Scaled::one(); 10]).gevrey_order_estimate().is_err());
    }

    #[test]
    fn pade_of_log() {
        let cs: Vec<C> = (0..=6).map(|n| if n == 0 { c(0.0) } else { c(-1.0 / n as f64) }).collect();
        let s = S::from_complex(1, 0, &cs);
        let p = s.pade_approximant(3, 3).unwrap();
        assert!((p.eval(c(0.5)) - c(0.5f64.ln())).norm() < 1e-4);
    }

    #[test]
    fn pade_reproduces_rationals() {
        let s = S::from_complex(1, 0, &[c(1.0), c(2.0), c(3.0)]);
        let p = s.pade_approximant(2, 0).unwrap();
        assert_eq!(p.num, vec![c(1.0), c(2.0), c(3.0)]);
        let g = S::from_complex(1, 0, &[c(1.0); 4]);
        let p = g.pade_approximant(0, 1).unwrap();
        assert!(close(p.den[1], c(-1.0), 1e-15) && close(p.num[0], c(1.0), 1e-15));
        let p = g.pade_approximant(1, 2).unwrap();
        assert!(p.reduced());
        assert!(close(p.eval(c(0.3)), c(1.0 / 0.7), 1e-13));
        assert!(S::from_complex(1, 0, &[c(0.0); 4]).pade_approximant(1, 1).is_err());
    }

    #[test]
    fn snapping() {
        assert_eq!(snap_rational(2.4999, 12), Rational::new(5, 2));
        assert_eq!(snap_rational(27.0 / 11.0, 12), Rational::new(27, 11));
        assert_eq!(snap_rational(1.003, 12), Rational::from(1));
    }
}
