//! Tanh-sinh quadrature for complex integrands on finite intervals and on
//! the half line split into dyadic panels.
//!
//! Integrands return `N` components at once so that an integral and its
//! derivative in a parameter share the same nodes.

use crate::C64;
use num_traits::Zero;
use std::f64::consts::FRAC_PI_2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quad<const N: usize = 1> {
    pub value: [C64; N],
    /// Per component, difference between the last two refinement levels.
    pub err: [f64; N],
    pub evals: usize,
}

impl Quad<1> {
    pub fn scalar(&self) -> C64 {
        self.value[0]
    }
}

const T_MAX: f64 = 4.0;
const MAX_LEVEL: usize = 9;

fn converged<const N: usize>(err: &[f64; N], est: &[C64; N], tol: f64) -> bool {
    (0..N).all(|i| err[i] <= tol * est[i].norm())
}

/// Integrates `f` over `[a, b]`. `f` receives the abscissa and its distance to
/// the nearest endpoint, so integrable endpoint singularities can be
/// evaluated without cancellation.
pub fn tanh_sinh<const N: usize, F: FnMut(f64, f64) -> [C64; N]>(mut f: F, a: f64, b: f64, tol: f64) -> Quad<N> {
    let half = 0.5 * (b - a);
    let mut evals = 0usize;
    let mut sum = [C64::zero(); N];
    let mut add = |t: f64, sum: &mut [C64; N], f: &mut F| {
        let s = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * s.abs()).exp();
        // 1 - tanh|s| computed as 2e/(1+e)
        let gap = half * 2.0 * e / (1.0 + e);
        if gap <= 0.0 {
            return;
        }
        let x = if s >= 0.0 { b - gap } else { a + gap };
        let ch = s.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (ch * ch);
        evals += 1;
        let v = f(x, gap);
        for i in 0..N {
            sum[i] += v[i] * w;
        }
    };
    let mut h = 1.0;
    add(0.0, &mut sum, &mut f);
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        let t = k as f64 * h;
        add(t, &mut sum, &mut f);
        add(-t, &mut sum, &mut f);
        k += 1;
    }
    let mut est = sum.map(|s| s * h);
    let mut err = [f64::INFINITY; N];
    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            let t = k as f64 * h;
            add(t, &mut sum, &mut f);
            add(-t, &mut sum, &mut f);
            k += 2;
        }
        let next = sum.map(|s| s * h);
        for i in 0..N {
            err[i] = (next[i] - est[i]).norm();
        }
        est = next;
        if converged(&err, &est, tol) {
            break;
        }
    }
    Quad { value: est, err, evals }
}

/// Integrates `f` over `[0, inf)` on the panels `[0,1], [1,2], [2,4], ...`
/// until two consecutive panels fall below `tol` relative. Returns `None`
/// when the panels grow again before `tau_max`, i.e. the integral diverges.
pub fn half_line<const N: usize, F: FnMut(f64) -> [C64; N]>(mut f: F, tol: f64, tau_max: f64) -> Option<Quad<N>> {
    let mut total = Quad { value: [C64::zero(); N], err: [0.0; N], evals: 0 };
    let (mut a, mut b) = (0.0, 1.0);
    let mut small = 0;
    let mut prev = f64::INFINITY;
    let mut rising = 0;
    while a < tau_max {
        let p = tanh_sinh(|x, _| f(x), a, b, tol);
        let mut m: f64 = 0.0;
        let mut tiny = true;
        for i in 0..N {
            total.value[i] += p.value[i];
            total.err[i] += p.err[i];
            m = m.max(p.value[i].norm());
            tiny &= p.value[i].norm() <= tol * total.value[i].norm();
        }
        total.evals += p.evals;
        if tiny {
            small += 1;
            if small >= 2 {
                return Some(total);
            }
        } else {
            small = 0;
        }
        if a >= 8.0 && m > prev {
            rising += 1;
            if rising >= 2 {
                return None;
            }
        }
        prev = m;
        a = b;
        b *= 2.0;
    }
    total.value.iter().all(|v| v.is_zero()).then_some(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_endpoint_singularity() {
        let q = tanh_sinh(|x, _| [C64::new(x * x, 0.0)], 0.0, 2.0, 1e-12);
        assert!((q.scalar().re - 8.0 / 3.0).abs() < 1e-12);
        // x^{-1/2} on [0,1] using the endpoint distance
        let q = tanh_sinh(|x, g| [C64::new(if x < 0.5 { g } else { x }.powf(-0.5), 0.0)], 0.0, 1.0, 1e-12);
        assert!((q.scalar().re - 2.0).abs() < 1e-10, "{q:?}");
    }

    #[test]
    fn exponential_half_line() {
        let q = half_line(|t| [C64::new((-t).exp(), 0.0)], 1e-12, 4096.0).unwrap();
        assert!((q.scalar().re - 1.0).abs() < 1e-12);
        let q = half_line(|t| [C64::new(t, 0.0) * C64::new(-t, 0.5 * t).exp(), C64::new(-t, 0.0).exp()], 1e-12, 4096.0)
            .unwrap();
        let exact = C64::new(1.0, -0.5).powi(-2);
        assert!((q.value[0] - exact).norm() < 1e-11);
        assert!((q.value[1].re - 1.0).abs() < 1e-12);
        assert!(half_line(|t| [C64::new((0.1 * t).exp(), 0.0)], 1e-12, 4096.0).is_none());
    }
}
