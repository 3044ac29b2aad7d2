//! Borel-Laplace (multi)summation of formal solutions along rays.
//!
//! A series in `z^{1/nu}` is summed in the variable `x = z^{1/nu}`, where it
//! is an ordinary power series and every level is multiplied by `nu`. The
//! Borel germ is continued along the ray by a diagonal Padé approximant.

use crate::error::{invalid, numerical, Error, Result};
use crate::formal::{r2f, FormalSolution};
use crate::linalg::{c, inverse, max_abs, poly_roots, z_power, CMat};
use crate::series::{Pade, Rational};
use crate::{Series, C64};
use nalgebra::DVector;
use num_traits::Zero;
use rayon::prelude::*;
use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

pub const DEFAULT_OFFSET: f64 = 0.05;
pub const QUAD_TOL: f64 = 1e-9;
/// Lateral sums whose residual exceeds this are rejected by callers.
pub const RESIDUAL_TOL: f64 = 1e-5;
const TAU_MAX: f64 = 1e5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Minus,
    Plus,
    OnRay,
}

#[derive(Clone, Debug)]
pub struct SummationPlan {
    pub levels: Vec<Rational>,
    /// Orders of the iterated Laplace transforms, innermost first.
    pub kappa: Vec<Rational>,
    pub direction: f64,
    pub side: Side,
    pub offset: f64,
    pub tol: f64,
}

impl SummationPlan {
    /// Direction of the integration ray.
    pub fn ray(&self) -> f64 {
        match self.side {
            Side::Minus => self.direction - self.offset,
            Side::Plus => self.direction + self.offset,
            Side::OnRay => self.direction,
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn top_level(&self) -> Rational {
        *self.levels.last().expect("plan without levels")
    }
}

/// `1/kappa_i = 1/k_i - 1/k_{i+1}` with `k_{r+1} = inf`.
pub fn make_plan(levels: &[Rational], direction: f64, side: Side) -> Result<SummationPlan> {
    if levels.is_empty() {
        return invalid("summation plan needs at least one level");
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) || levels[0] <= Rational::zero() {
        return invalid("levels must be positive and strictly increasing");
    }
    let mut kappa = Vec::with_capacity(levels.len());
    for i in 0..levels.len() {
        let inv = match levels.get(i + 1) {
            Some(&next) => levels[i].recip() - next.recip(),
            None => levels[i].recip(),
        };
        kappa.push(inv.recip());
    }
    Ok(SummationPlan { levels: levels.to_vec(), kappa, direction, side, offset: DEFAULT_OFFSET, tol: QUAD_TOL })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Laplace {
    pub value: C64,
    /// d/dz of the value.
    pub deriv: C64,
    pub err: f64,
}

/// `∫_0^{∞ e^{id}} h(u) e^{-(u/z)^k} d((u/z)^k)` at `z = r e^{i arg}`,
/// together with its z-derivative.
pub fn laplace_along_ray<F: FnMut(C64) -> C64>(mut h: F, k: f64, d: f64, r: f64, arg: f64, tol: f64) -> Result<Laplace> {
    if (k * (d - arg)).abs() >= 0.5 * PI {
        return invalid(format!("arg z = {arg:.4} is not within pi/(2k) of the ray {d:.4}"));
    }
    let om = C64::from_polar(1.0, k * (d - arg));
    let z = C64::from_polar(r, arg);
    let dk = c(k, 0.0) / z;
    let ray = C64::from_polar(1.0, d);
    let q = crate::quad::half_line(
        |tau| {
            let u = ray * (r * tau.powf(1.0 / k));
            let v = om * h(u) * (-om * tau).exp();
            [v, dk * v * (om * tau - 1.0)]
        },
        tol,
        TAU_MAX,
    )
    .ok_or_else(|| Error::Numerical("Laplace integral does not converge: |z| too large for the Borel growth".into()))?;
    Ok(Laplace { value: q.value[0], deriv: q.value[1], err: q.err[0] })
}

/// Borel germ of one series, continued by Padé in `x = z^{1/nu}`.
#[derive(Clone, Debug)]
pub struct BorelGerm {
    nu: u32,
    /// Laplace orders in x, innermost first.
    kappa_x: Vec<f64>,
    /// The approximant acts on `u / rho`.
    rho: f64,
    main: Option<Pade<f64>>,
    check: Option<Pade<f64>>,
    /// Padé poles in u with the modulus of their residue.
    pub poles: Vec<(C64, f64)>,
}

impl BorelGerm {
    pub fn new(s: &Series, kappa: &[Rational]) -> Result<Self> {
        let nu = s.nu();
        let kappa_x: Vec<f64> = kappa.iter().map(|&k| r2f(k) * nu as f64).collect();
        if s.is_zero() {
            return Ok(BorelGerm { nu, kappa_x, rho: 1.0, main: None, check: None, poles: Vec::new() });
        }
        if s.valuation().is_some_and(|v| v < 0) {
            return invalid("cannot sum a series with a pole");
        }
        let mut b = Series::with_order(1, s.val(), s.coeffs().to_vec(), s.order());
        for &k in kappa {
            b = b.borel_transform(k * Rational::from(nu as i64))?;
        }
        let n = b.order().max(0) as usize;
        // radius of convergence from the tail of the Borel coefficients
        let mut roots: Vec<f64> = (n / 2..=n)
            .filter(|&i| i > 0)
            .filter_map(|i| {
                let c = b.coeff(i as i64);
                (!c.is_zero()).then(|| 10f64.powf(-c.log10_abs() / i as f64))
            })
            .collect();
        roots.sort_by(f64::total_cmp);
        let rho = roots.get(roots.len() / 2).copied().unwrap_or(1.0).clamp(1e-3, 1e3);
        let scaled = b.rescale(rho);
        let m = n / 2;
        let main = scaled.pade_approximant(m, m)?;
        let check = if m >= 6 { Some(scaled.pade_approximant(m - 2, m - 2)?) } else { None };
        let scale = (0..=n).map(|i| scaled.coeff_c(i as i64).norm()).fold(0.0, f64::max);
        let mut poles = Vec::new();
        if main.den.len() > 1 {
            let dden: Vec<C64> = main.den.iter().enumerate().skip(1).map(|(i, a)| a * i as f64).collect();
            for p in poles_of(&main.den) {
                let res = (crate::linalg::horner(&main.num, p) / crate::linalg::horner(&dden, p)).norm();
                poles.push((p * rho, res / scale.max(1e-300)));
            }
        }
        Ok(BorelGerm { nu, kappa_x, rho, main: Some(main), check, poles })
    }

    pub fn is_zero(&self) -> bool {
        self.main.is_none()
    }

    /// Fails when a Padé pole with a non-negligible residue lies within
    /// `exclusion` radians of the ray (an angle in the z-plane).
    pub fn check_ray(&self, ray: f64, exclusion: f64) -> Result<()> {
        let dx = ray / self.nu as f64;
        let ex = exclusion / self.nu as f64;
        for &(p, res) in &self.poles {
            if res < 1e-8 {
                continue;
            }
            let a = (p.arg() - dx).rem_euclid(2.0 * PI);
            if a.min(2.0 * PI - a) < ex {
                return numerical(format!("Borel-plane pole at {:.4}{:+.4}i lies on the summation ray", p.re, p.im));
            }
        }
        Ok(())
    }

    pub fn eval_main(&self, u: C64) -> C64 {
        self.main.as_ref().map_or(C64::zero(), |p| self.eval(p, u))
    }

    fn eval(&self, pade: &Pade<f64>, u: C64) -> C64 {
        pade.eval(u / self.rho)
    }

    fn sum_with(&self, pade: &Pade<f64>, ray: f64, r: f64, arg: f64, tol: f64) -> Result<Laplace> {
        let nu = self.nu as f64;
        let (rx, ax, dx) = (r.powf(1.0 / nu), arg / nu, ray / nu);
        let outer = *self.kappa_x.last().expect("no Laplace stage");
        let inner = &self.kappa_x[..self.kappa_x.len() - 1];
        let memo: RefCell<HashMap<(usize, u64), C64>> = RefCell::new(HashMap::new());
        let failed = RefCell::new(None);
        let lx = if inner.is_empty() {
            laplace_along_ray(|u| self.eval(pade, u), outer, dx, rx, ax, tol)?
        } else {
            let top = inner.len();
            laplace_along_ray(|u| self.stage(pade, top, u.norm(), dx, tol, &memo, &failed), outer, dx, rx, ax, tol)?
        };
        if let Some(e) = failed.into_inner() {
            return Err(e);
        }
        // d/dz = d/dx * x / (nu z)
        let x = C64::from_polar(rx, ax);
        let z = C64::from_polar(r, arg);
        Ok(Laplace { value: lx.value, deriv: lx.deriv * x / (z * nu), err: lx.err })
    }

    /// h_{j+1}(u) for u on the ray, `j` inner Laplace stages applied.
    fn stage(
        &self,
        pade: &Pade<f64>,
        j: usize,
        s: f64,
        dx: f64,
        tol: f64,
        memo: &RefCell<HashMap<(usize, u64), C64>>,
        failed: &RefCell<Option<Error>>,
    ) -> C64 {
        if j == 0 {
            return self.eval(pade, C64::from_polar(s, dx));
        }
        if let Some(v) = memo.borrow().get(&(j, s.to_bits())) {
            return *v;
        }
        let v = match laplace_along_ray(|u| self.stage(pade, j - 1, u.norm(), dx, tol, memo, failed), self.kappa_x[j - 1], dx, s, dx, tol) {
            Ok(l) => l.value,
            Err(e) => {
                failed.borrow_mut().get_or_insert(e);
                C64::zero()
            }
        };
        memo.borrow_mut().insert((j, s.to_bits()), v);
        v
    }

    /// Value and z-derivative of the sum on the ray `ray` at `r e^{i arg}`.
    ///
    /// The error adds the quadrature estimate and the change against a
    /// lower-order approximant.
    pub fn sum(&self, ray: f64, r: f64, arg: f64, tol: f64) -> Result<Laplace> {
        let Some(main) = &self.main else {
            return Ok(Laplace::default());
        };
        let mut out = self.sum_with(main, ray, r, arg, tol)?;
        if let Some(chk) = &self.check {
            if self.kappa_x.len() == 1 {
                let alt = self.sum_with(chk, ray, r, arg, tol)?;
                out.err += (alt.value - out.value).norm();
            }
        }
        Ok(out)
    }
}

fn poles_of(den: &[C64]) -> Vec<C64> {
    let mut d = den.to_vec();
    while d.len() > 1 && d.last().is_some_and(|x| x.norm() == 0.0) {
        d.pop();
    }
    if d.len() < 2 {
        return Vec::new();
    }
    poly_roots(&d)
}

/// Sum of one series on the plan's ray at `z = r e^{i arg}`.
pub fn multisum_entry(s: &Series, plan: &SummationPlan, r: f64, arg: f64) -> Result<Laplace> {
    let g = BorelGerm::new(s, &plan.kappa)?;
    g.check_ray(plan.ray(), 0.1 * plan.offset)?;
    g.sum(plan.ray(), r, arg, plan.tol)
}

/// Values `F^{d±}(z) = H^{d±}(z) z^L e^{Q(z)}` at points `(r, arg)`.
#[derive(Clone, Debug)]
pub struct LateralSum {
    pub direction: f64,
    pub side: Side,
    pub ray: f64,
    pub points: Vec<(f64, f64)>,
    pub h: Vec<CMat>,
    pub f: Vec<CMat>,
    /// Absolute error estimate per entry of `h`.
    pub errors: Vec<CMat>,
    /// `|F' - B F| / |F|`, using the exact z-derivative of the sums.
    pub residuals: Vec<f64>,
}

impl LateralSum {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Summation of every entry of `Ĥ` for one plan, reusable across points.
pub struct LateralSummer<'a> {
    sol: &'a FormalSolution,
    plan: Option<SummationPlan>,
    germs: Vec<BorelGerm>,
}

impl<'a> LateralSummer<'a> {
    /// `plan = None` evaluates `Ĥ` directly, for systems without levels.
    pub fn new(sol: &'a FormalSolution, plan: Option<SummationPlan>) -> Result<Self> {
        let mut germs = Vec::new();
        if let Some(p) = &plan {
            for s in sol.hhat.entries() {
                let g = BorelGerm::new(s, &p.kappa)?;
                g.check_ray(p.ray(), 0.1 * p.offset)?;
                germs.push(g);
            }
        }
        Ok(LateralSummer { sol, plan, germs })
    }

    /// `(H, H', err)` at one point.
    pub fn h_at(&self, r: f64, arg: f64) -> Result<(CMat, CMat, CMat)> {
        let (rows, cols) = (self.sol.hhat.rows(), self.sol.hhat.cols());
        let mut h = CMat::zeros(rows, cols);
        let mut dh = CMat::zeros(rows, cols);
        let mut err = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let s = self.sol.hhat.get(i, j);
                let l = match &self.plan {
                    Some(p) => self.germs[i * cols + j].sum(p.ray(), r, arg, p.tol)?,
                    None => Laplace { value: s.eval_polar(r, arg), deriv: s.differentiate().eval_polar(r, arg), err: 0.0 },
                };
                h[(i, j)] = l.value;
                dh[(i, j)] = l.deriv;
                err[(i, j)] = c(l.err, 0.0);
            }
        }
        Ok((h, dh, err))
    }
}

/// `F`, `F'` from `H`, `H'` at `z = r e^{i arg}`.
pub fn assemble_f(sol: &FormalSolution, h: &CMat, dh: &CMat, r: f64, arg: f64) -> Result<(CMat, CMat)> {
    let m = sol.dim();
    let z = C64::from_polar(r, arg);
    let zl = z_power(&sol.l, c(r.ln(), arg))?;
    let e = DVector::from_fn(m, |j, _| sol.q[j].eval_polar(r, arg).exp());
    let dq = DVector::from_fn(m, |j, _| {
        sol.q[j].terms().iter().map(|&(k, v)| v * r2f(k) * C64::from_polar(r.powf(r2f(k) - 1.0), arg * (r2f(k) - 1.0))).sum::<C64>()
    });
    let ez = CMat::from_diagonal(&e);
    let f = h * &zl * &ez;
    let hl = h * &sol.l / z;
    let df = (dh + hl) * &zl * &ez + &f * CMat::from_diagonal(&dq);
    Ok((f, df))
}

/// Lateral sums of the formal solution at the given points.
///
/// `b` evaluates the local matrix of the system at a point of the local
/// coordinate; it is used for the residual check only.
pub fn lateral_solution(
    sol: &FormalSolution,
    b: &(dyn Fn(C64) -> Result<CMat> + Sync),
    plan: &SummationPlan,
    points: &[(f64, f64)],
) -> Result<LateralSum> {
    let levels = sol.levels();
    let summer = LateralSummer::new(sol, (!levels.is_empty()).then(|| plan.clone()))?;
    let rows: Vec<Result<(CMat, CMat, CMat, f64)>> = points
        .par_iter()
        .map(|&(r, arg)| {
            let (h, dh, err) = summer.h_at(r, arg)?;
            let (f, df) = assemble_f(sol, &h, &dh, r, arg)?;
            let bz = b(C64::from_polar(r, arg))?;
            let res = residual_cols(&f, &(df - bz * &f));
            Ok((h, f, err, res))
        })
        .collect();
    let mut out = LateralSum {
        direction: plan.direction,
        side: plan.side,
        ray: plan.ray(),
        points: points.to_vec(),
        h: Vec::new(),
        f: Vec::new(),
        errors: Vec::new(),
        residuals: Vec::new(),
    };
    for row in rows {
        let (h, f, err, res) = row?;
        out.h.push(h);
        out.f.push(f);
        out.errors.push(err);
        out.residuals.push(res);
    }
    Ok(out)
}

/// Largest column-wise relative defect.
fn residual_cols(f: &CMat, defect: &CMat) -> f64 {
    (0..f.ncols())
        .map(|j| defect.column(j).norm() / f.column(j).norm().max(1e-300))
        .fold(0.0, f64::max)
}

/// `(F^-)^{-1} F^+` computed through `H`, so that the exponential factors
/// are applied once: `e^{-Q} z^{-L} (H^-)^{-1} H^+ z^L e^{Q}`.
pub fn stokes_from_h(sol: &FormalSolution, hm: &CMat, hp: &CMat, r: f64, arg: f64) -> Result<CMat> {
    let g = inverse(hm)? * hp;
    let m = sol.dim();
    let zl = z_power(&sol.l, c(r.ln(), arg))?;
    let zli = inverse(&zl)?;
    let q: Vec<C64> = (0..m).map(|j| sol.q[j].eval_polar(r, arg)).collect();
    let inner = zli * g * zl;
    let mut st = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            st[(i, j)] = inner[(i, j)] * (q[j] - q[i]).exp();
        }
    }
    if !st.iter().all(|x| x.re.is_finite() && x.im.is_finite()) || max_abs(&st) > 1e12 {
        return numerical("Stokes estimate overflowed");
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scaled;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn kappa_chain() {
        let p = make_plan(&[r(1, 1)], 0.0, Side::OnRay).unwrap();
        assert_eq!(p.kappa, vec![r(1, 1)]);
        let p = make_plan(&[r(1, 1), r(2, 1)], 0.0, Side::OnRay).unwrap();
        assert_eq!(p.kappa, vec![r(2, 1), r(2, 1)]);
        let p = make_plan(&[r(5, 2)], 0.0, Side::Plus).unwrap();
        assert_eq!(p.kappa, vec![r(5, 2)]);
        assert!((p.ray() - 0.05).abs() < 1e-15);
        assert!(make_plan(&[], 0.0, Side::Plus).is_err());
        assert!(make_plan(&[r(2, 1), r(1, 1)], 0.0, Side::Plus).is_err());
    }

    #[test]
    fn laplace_moments() {
        for &(k, z) in &[(1.0, C64::new(0.3, 0.1)), (2.5, C64::new(0.2, 0.0))] {
            let one = laplace_along_ray(|_| c(1.0, 0.0), k, z.arg(), z.norm(), z.arg(), 1e-12).unwrap();
            assert!((one.value - 1.0).norm() < 1e-12);
            assert!(one.deriv.norm() < 1e-10);
        }
        let z = C64::new(0.2, 0.1);
        let l = laplace_along_ray(|u| u, 1.0, 0.2, z.norm(), z.arg(), 1e-12).unwrap();
        assert!((l.value - z).norm() < 1e-12);
        assert!((l.deriv - 1.0).norm() < 1e-10);
        assert!(laplace_along_ray(|u| u, 1.0, 2.0, 0.1, 0.0, 1e-9).is_err());
    }

    #[test]
    fn laplace_of_the_stieltjes_kernel() {
        // ∫_0^∞ e^{-u/z}/(1+u) du / z at z = 0.1, against an independent value
        let l = laplace_along_ray(|u| (1.0 + u).inv(), 1.0, 0.0, 0.1, 0.0, 1e-12).unwrap();
        assert!((l.value.re - 0.915633339397880).abs() < 1e-12, "{l:?}");
    }

    #[test]
    fn geometric_series_is_its_sum() {
        let cs: Vec<Scaled<f64>> = (0..40).map(|_| Scaled::one()).collect();
        let s = Series::with_order(1, 0, cs, 39);
        let p = make_plan(&[r(1, 1)], 2.0, Side::OnRay).unwrap();
        let z = C64::from_polar(0.2, 2.0);
        let v = multisum_entry(&s, &p, 0.2, 2.0).unwrap();
        assert!((v.value - (1.0 - z).inv()).norm() < 1e-8, "{v:?}");
        assert!((v.deriv - (1.0 - z).powi(-2)).norm() < 1e-7);
    }
}
