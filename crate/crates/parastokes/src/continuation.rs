//! Analytic continuation of fundamental solutions by Taylor stepping:
//! loop monodromy, connection matrices and transport of local generators to
//! a common base point.

use crate::directions::{circ_dist, singular_directions, DirectionSet};
use crate::error::{invalid, numerical, Error, Result};
use crate::expr::Origin;
use crate::formal::{formal_at, FormalSolution};
use crate::linalg::{c, cond, expm, inverse, max_abs, CMat};
use crate::series::Rational;
use crate::stokes::{torus_generators, LocalProblem, StokesData};
use crate::summation::{lateral_solution, make_plan, Side, RESIDUAL_TOL};
use crate::system::ParamSystem;
use crate::C64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Order of the local Taylor expansions.
pub const TAYLOR_ORDER: usize = 20;
const CAUCHY_POINTS: usize = 48;
/// Fraction of the distance to the nearest singularity used as step bound.
const STEP_FRACTION: f64 = 0.45;
const MIN_STEP: f64 = 1e-12;
/// Default clearance as a fraction of the smallest singularity distance.
pub const CLEARANCE_FRACTION: f64 = 0.3;

/// A matrix function `A(z)` with known singular points.
pub struct Field<'a> {
    eval: Box<dyn Fn(C64) -> Result<CMat> + Send + Sync + 'a>,
    pub singular: Vec<C64>,
    pub dim: usize,
}

impl<'a> Field<'a> {
    pub fn new(dim: usize, singular: Vec<C64>, f: impl Fn(C64) -> Result<CMat> + Send + Sync + 'a) -> Self {
        Field { eval: Box::new(f), singular, dim }
    }

    /// `A(z, t)` in the z-plane.
    pub fn global(sys: &'a ParamSystem, t: &[C64]) -> Result<Self> {
        let singular = sys
            .singularities(t)?
            .into_iter()
            .filter_map(|s| match s.point {
                Origin::Point(p) => Some(p),
                Origin::Infinity => None,
            })
            .collect();
        let t = t.to_vec();
        Ok(Field::new(sys.dim(), singular, move |z| sys.eval(&t, z)))
    }

    /// The local system `dY/dw = B(w) Y` at `origin`.
    pub fn local(sys: &'a ParamSystem, t: &[C64], origin: Origin<f64>) -> Result<Self> {
        let mut singular = vec![c(0.0, 0.0)];
        for s in sys.singularities(t)? {
            match (origin, s.point) {
                (Origin::Point(a), Origin::Point(p)) if (p - a).norm() > 1e-12 => singular.push(p - a),
                (Origin::Infinity, Origin::Point(p)) if p.norm() > 1e-12 => singular.push(p.inv()),
                _ => {}
            }
        }
        let t = t.to_vec();
        Ok(Field::new(sys.dim(), singular, move |w| sys.local_matrix(&t, origin, w)))
    }

    pub fn eval(&self, z: C64) -> Result<CMat> {
        (self.eval)(z)
    }

    pub fn distance(&self, z: C64) -> f64 {
        self.singular.iter().map(|s| (s - z).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Taylor coefficients of `A` at `z` from a Cauchy integral on a circle
    /// of radius `rho`.
    fn taylor(&self, z: C64, rho: f64) -> Result<Vec<CMat>> {
        let n = CAUCHY_POINTS;
        let vals: Vec<CMat> =
            (0..n).map(|j| self.eval(z + C64::from_polar(rho, 2.0 * PI * j as f64 / n as f64))).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(TAYLOR_ORDER + 1);
        for k in 0..=TAYLOR_ORDER {
            let mut a = CMat::zeros(self.dim, self.dim);
            for (j, v) in vals.iter().enumerate() {
                a += v * C64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64);
            }
            out.push(a / c(n as f64 * rho.powi(k as i32), 0.0));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Segment {
    Line(C64, C64),
    /// Angles in radians; `to < from` runs clockwise.
    Arc { center: C64, radius: f64, from: f64, to: f64 },
}

impl Segment {
    pub fn start(&self) -> C64 {
        match *self {
            Segment::Line(a, _) => a,
            Segment::Arc { center, radius, from, .. } => center + C64::from_polar(radius, from),
        }
    }

    pub fn end(&self) -> C64 {
        match *self {
            Segment::Line(_, b) => b,
            Segment::Arc { center, radius, to, .. } => center + C64::from_polar(radius, to),
        }
    }

    pub fn reversed(&self) -> Segment {
        match *self {
            Segment::Line(a, b) => Segment::Line(b, a),
            Segment::Arc { center, radius, from, to } => Segment::Arc { center, radius, from: to, to: from },
        }
    }

    fn length(&self) -> f64 {
        match *self {
            Segment::Line(a, b) => (b - a).norm(),
            Segment::Arc { radius, from, to, .. } => radius * (to - from).abs(),
        }
    }

    /// Point at arclength fraction `s` in `[0, 1]`.
    fn at(&self, s: f64) -> C64 {
        match *self {
            Segment::Line(a, b) => a + (b - a) * s,
            Segment::Arc { center, radius, from, to } => center + C64::from_polar(radius, from + (to - from) * s),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Path {
    pub segments: Vec<Segment>,
}

impl Path {
    pub fn new(segments: Vec<Segment>) -> Self {
        Path { segments }
    }

    pub fn line(a: C64, b: C64) -> Self {
        Path::new(vec![Segment::Line(a, b)])
    }

    /// Positively oriented circle through `start` around `center`.
    pub fn circle(center: C64, start: C64) -> Self {
        let d = start - center;
        Path::new(vec![Segment::Arc { center, radius: d.norm(), from: d.arg(), to: d.arg() + 2.0 * PI }])
    }

    pub fn then(mut self, other: Path) -> Self {
        self.segments.extend(other.segments);
        self
    }

    pub fn reversed(&self) -> Path {
        Path::new(self.segments.iter().rev().map(|s| s.reversed()).collect())
    }

    pub fn start(&self) -> Option<C64> {
        self.segments.first().map(|s| s.start())
    }

    pub fn end(&self) -> Option<C64> {
        self.segments.last().map(|s| s.end())
    }

    /// Smallest distance from the path to the points, sampled densely.
    pub fn clearance(&self, points: &[C64]) -> f64 {
        let mut best = f64::INFINITY;
        for s in &self.segments {
            let n = ((s.length() * 200.0) as usize).clamp(50, 20000);
            for i in 0..=n {
                let z = s.at(i as f64 / n as f64);
                for p in points {
                    best = best.min((z - p).norm());
                }
            }
        }
        best
    }
}

/// Shortest of a few polylines from `a` to `b` keeping `clearance` from
/// every point.
pub fn route(a: C64, b: C64, points: &[C64], clearance: f64) -> Result<Path> {
    let direct = Path::line(a, b);
    if direct.clearance(points) >= clearance {
        return Ok(direct);
    }
    let mid = (a + b) * 0.5;
    let dir = b - a;
    let perp = if dir.norm() > 0.0 { c(0.0, 1.0) * dir / dir.norm() } else { c(0.0, 1.0) };
    let scale = dir.norm().max(clearance);
    for k in [0.25, 0.5, 1.0, 2.0] {
        for s in [1.0, -1.0] {
            let w = mid + perp * (s * k * scale);
            let p = Path::new(vec![Segment::Line(a, w), Segment::Line(w, b)]);
            if p.clearance(points) >= clearance {
                return Ok(p);
            }
        }
    }
    invalid(format!("no path from {a} to {b} with clearance {clearance:.3e}"))
}

#[derive(Clone, Debug)]
pub struct Integration {
    pub y: CMat,
    /// Relative difference against a run with a looser step tolerance.
    pub err: f64,
    pub steps: usize,
    /// `∫ tr A dz` along the path.
    pub trace_integral: C64,
}

fn column_norms(y: &CMat) -> Vec<f64> {
    (0..y.ncols()).map(|j| y.column(j).norm()).collect()
}

fn run(field: &Field, path: &Path, y0: &CMat, step_tol: f64) -> Result<Integration> {
    let mut y = y0.clone();
    let mut tr = c(0.0, 0.0);
    let mut steps = 0usize;
    for seg in &path.segments {
        let len = seg.length();
        let mut s = 0.0;
        let mut z = seg.start();
        while s < 1.0 {
            let rho = field.distance(z);
            if rho < MIN_STEP {
                return numerical(format!("path runs into a singular point near {z}"));
            }
            let a = field.taylor(z, 0.5 * rho)?;
            let mut ys = vec![y.clone()];
            for k in 0..TAYLOR_ORDER {
                let mut acc = CMat::zeros(field.dim, y.ncols());
                for j in 0..=k {
                    acc += &a[j] * &ys[k - j];
                }
                ys.push(acc / c((k + 1) as f64, 0.0));
            }
            // step from the decay of the last two terms, column by column
            let base = column_norms(&y);
            let mut h = STEP_FRACTION * rho;
            for k in [TAYLOR_ORDER - 1, TAYLOR_ORDER] {
                let cn = column_norms(&ys[k]);
                for j in 0..cn.len() {
                    if cn[j] > 0.0 {
                        h = h.min((step_tol * base[j].max(1e-300) / cn[j]).powf(1.0 / k as f64));
                    }
                }
            }
            if h < MIN_STEP {
                return numerical(format!("step size collapsed near {z}"));
            }
            let ds = if len > 0.0 { (h / len).min(1.0 - s) } else { 1.0 - s };
            let s_next = if ds >= 1.0 - s - 1e-15 { 1.0 } else { s + ds };
            // the chord of an arc is shorter than the arclength
            let z_next = if s_next >= 1.0 { seg.end() } else { seg.at(s_next) };
            let dz = z_next - z;
            let mut next = CMat::zeros(field.dim, y.ncols());
            let mut p = c(1.0, 0.0);
            for (k, yk) in ys.iter().enumerate() {
                next += yk * p;
                tr += a.get(k).map_or(c(0.0, 0.0), |ak| ak.trace()) * p * dz / (k + 1) as f64;
                p *= dz;
            }
            y = next;
            z = z_next;
            s = s_next;
            steps += 1;
            if steps > 2_000_000 {
                return numerical("too many integration steps");
            }
        }
    }
    Ok(Integration { y, err: 0.0, steps, trace_integral: tr })
}

/// Continues `y0` along `path`. The error estimate compares runs whose step
/// tolerances differ by a factor 1000; the tighter run is returned.
pub fn integrate_path(field: &Field, path: &Path, y0: &CMat, tol: f64) -> Result<Integration> {
    let mut step_tol = (tol * 1e-2).max(1e-15);
    let mut coarse = run(field, path, y0, step_tol)?;
    for _ in 0..4 {
        let fine_tol = (step_tol * 1e-3).max(1e-16);
        let fine = run(field, path, y0, fine_tol)?;
        let scale = max_abs(&fine.y).max(1e-300);
        let err = max_abs(&(&fine.y - &coarse.y)) / scale;
        if err <= tol {
            return Ok(Integration { err, ..fine });
        }
        if fine_tol <= 1e-16 {
            return numerical(format!("integration error {err:.2e} above tolerance {tol:.1e}"));
        }
        step_tol = fine_tol;
        coarse = fine;
    }
    numerical("integration tolerance not met")
}

#[derive(Clone, Debug)]
pub struct MonodromyData {
    pub matrix: CMat,
    /// Basis: the fundamental solution equal to `basis_at_base` at `base`.
    pub base: C64,
    pub singularity: C64,
    pub path: Path,
    pub err: f64,
}

/// Monodromy of the solution with `Y(base) = I` along a positive loop
/// around `singularity` of radius `eps`, entered on the segment from the
/// base.
pub fn loop_monodromy(field: &Field, singularity: C64, base: C64, eps: f64, tol: f64) -> Result<MonodromyData> {
    let others: Vec<C64> = field.singular.iter().copied().filter(|p| (p - singularity).norm() > 1e-12).collect();
    if others.iter().any(|p| (p - singularity).norm() <= eps) {
        return invalid("loop radius encloses another singular point");
    }
    let dir = base - singularity;
    let entry = singularity + if dir.norm() > 0.0 { dir / dir.norm() * eps } else { c(eps, 0.0) };
    let approach = route(base, entry, &others, 0.5 * eps)?;
    loop_along(field, singularity, &approach, tol)
}

/// Loop made of `approach`, a positive circle around `singularity` through
/// its end point, and `approach` backwards.
pub fn loop_along(field: &Field, singularity: C64, approach: &Path, tol: f64) -> Result<MonodromyData> {
    let (Some(base), Some(entry)) = (approach.start(), approach.end()) else {
        return invalid("empty approach path");
    };
    let path = approach.clone().then(Path::circle(singularity, entry)).then(approach.reversed());
    let m = field.dim;
    let out = integrate_path(field, &path, &CMat::identity(m, m), tol)?;
    Ok(MonodromyData { matrix: out.y, base, singularity, path, err: out.err })
}

#[derive(Clone, Debug)]
pub struct ConnectionData {
    pub matrix: CMat,
    pub labels: (String, String),
    pub sample: usize,
    /// Largest deviation of `U_i^{-1} U_j` over the check points.
    pub deviation: f64,
    pub condition: f64,
}

/// `C = U_i^{-1} U_j` at `z`, checked for constancy at two nearby points
/// reached by continuing both solutions.
pub fn connection_matrix(
    field: &Field,
    ui: &CMat,
    uj: &CMat,
    z: C64,
    labels: (&str, &str),
    sample: usize,
) -> Result<ConnectionData> {
    let k = cond(ui);
    let inv = inverse(ui).map_err(|_| Error::Numerical(format!("connection: condition number {k:.3e}")))?;
    let cm = &inv * uj;
    let h = 0.25 * field.distance(z).min(1.0);
    let mut dev: f64 = 0.0;
    for dir in [c(1.0, 0.0), c(-0.5, 0.8)] {
        let p = Path::line(z, z + dir * h);
        let a = integrate_path(field, &p, ui, 1e-11)?.y;
        let b = integrate_path(field, &p, uj, 1e-11)?.y;
        let cc = inverse(&a)? * b;
        dev = dev.max(max_abs(&(&cc - &cm)) / max_abs(&cm).max(1.0));
    }
    Ok(ConnectionData { matrix: cm, labels: (labels.0.into(), labels.1.into()), sample, deviation: dev, condition: k })
}

/// Midpoint of the widest gap between singular angles.
pub fn nonsingular_direction(dirs: Option<&DirectionSet>) -> f64 {
    let Some(d) = dirs else { return 0.0 };
    let p = d.period();
    let mut a = d.angles();
    a.sort_by(f64::total_cmp);
    a.dedup_by(|x, y| circ_dist(*x, *y, p) < 1e-9);
    if a.is_empty() {
        return 0.0;
    }
    let mut best = (0.0, a[0] + 0.5 * p);
    for i in 0..a.len() {
        let next = if i + 1 < a.len() { a[i + 1] } else { a[0] + p };
        if next - a[i] > best.0 {
            best = (next - a[i], 0.5 * (a[i] + next));
        }
    }
    best.1.rem_euclid(p)
}

/// Order of the Stokes factors in the product formula: directions increasing
/// in `(theta0, theta0 + 2 pi]`, the part of `[0, period)` swept by one turn
/// of `z`.
pub fn stokes_order(stokes: &[StokesData], theta0: f64, period: f64) -> Vec<usize> {
    let key = |i: usize| {
        let a = (stokes[i].angle - theta0).rem_euclid(period);
        if a == 0.0 {
            period
        } else {
            a
        }
    };
    let mut idx: Vec<usize> = (0..stokes.len()).filter(|&i| key(i) <= 2.0 * PI + 1e-12).collect();
    idx.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
    idx
}

/// Monodromy of `F^{theta0}` predicted from the formal monodromy and the
/// Stokes matrices: `M = M̂ St_n^{-1} ... St_1^{-1}` with `d_1 < ... < d_n`
/// in `(theta0, theta0 + 2 pi]`.
pub fn stokes_product(formal_monodromy: &CMat, stokes: &[StokesData], theta0: f64, period: f64) -> Result<CMat> {
    let m = formal_monodromy.nrows();
    let mut prod = CMat::identity(m, m);
    for i in stokes_order(stokes, theta0, period) {
        prod *= &stokes[i].matrix;
    }
    Ok(formal_monodromy * inverse(&prod)?)
}

/// A fundamental solution evaluated at one point of the local coordinate.
#[derive(Clone, Debug)]
pub struct LocalValue {
    /// `(r, arg)` of the point in the local coordinate.
    pub at: (f64, f64),
    pub value: CMat,
    pub residual: f64,
    pub direction: f64,
}

/// `F^{d}(w)` on the non-singular ray `d` at the largest radius from the
/// ladder whose residual is below [`RESIDUAL_TOL`].
pub fn local_value(sys: &ParamSystem, t: &[C64], sol: &FormalSolution, d: f64, r_max: f64) -> Result<LocalValue> {
    let levels = sol.levels();
    let plan = if levels.is_empty() {
        make_plan(&[Rational::from(1)], d, Side::OnRay)?
    } else {
        make_plan(&levels, d, Side::OnRay)?.with_tol(1e-12)
    };
    let b = |w: C64| sys.local_matrix(t, sol.origin, w);
    let mut r = r_max;
    let mut last = None;
    for _ in 0..40 {
        match lateral_solution(sol, &b, &plan, &[(r, d)]) {
            Ok(l) if l.max_residual() <= RESIDUAL_TOL => {
                return Ok(LocalValue { at: (r, d), value: l.f[0].clone(), residual: l.max_residual(), direction: d });
            }
            Ok(l) => last = Some(Error::Numerical(format!("residual {:.1e} at radius {r:.3e}", l.max_residual()))),
            Err(e) => last = Some(e),
        }
        r *= 0.85;
    }
    Err(last.unwrap_or_else(|| Error::Numerical("no radius with a converged local solution".into())))
}

#[derive(Clone, Debug)]
pub struct PathPlan {
    pub base: C64,
    pub eps: f64,
    /// Per singularity: local ray `d_alpha` and the path from the base to the
    /// entry point.
    pub entries: Vec<PlanEntry>,
}

#[derive(Clone, Debug)]
pub struct PlanEntry {
    pub point: Origin<f64>,
    pub direction: f64,
    pub entry: C64,
    pub path: Path,
}

#[derive(Clone, Debug)]
pub struct LocalGenerators {
    pub point: Origin<f64>,
    /// `U_alpha(x0)`: the local solution continued to the base.
    pub transport: CMat,
    /// Radius in the local coordinate where the local solution was matched.
    pub matching_radius: f64,
    pub formal_monodromy: CMat,
    pub torus: Vec<CMat>,
    pub stokes: Vec<CMat>,
    /// Local Stokes data in the basis of the formal solution.
    pub stokes_local: Vec<StokesData>,
    pub directions: Option<DirectionSet>,
    /// Local ray of the solution that was transported.
    pub direction: f64,
    pub solution: FormalSolution,
    /// Loop monodromy from the base against the conjugated prediction
    /// `M̂ St_n^{-1} ... St_1^{-1}`; finite points only.
    pub loop_check: Option<LoopCheck>,
}

#[derive(Clone, Debug)]
pub struct LoopCheck {
    pub measured: CMat,
    pub predicted: CMat,
    pub deviation: f64,
}

impl LocalGenerators {
    /// All generators in the order monodromy, torus, Stokes.
    pub fn all(&self) -> Vec<CMat> {
        let mut v = vec![self.formal_monodromy.clone()];
        v.extend(self.torus.iter().cloned());
        v.extend(self.stokes.iter().cloned());
        v
    }
}

#[derive(Clone, Debug)]
pub struct GlobalGenerators {
    pub base: C64,
    pub sample: usize,
    pub local: Vec<LocalGenerators>,
}

impl GlobalGenerators {
    pub fn matrices(&self) -> Vec<CMat> {
        self.local.iter().flat_map(|l| l.all()).collect()
    }
}

fn to_global(origin: Origin<f64>, w: C64) -> C64 {
    match origin {
        Origin::Point(a) => a + w,
        Origin::Infinity => w.inv(),
    }
}

/// Base point, clearance and entry paths for every singular point.
/// `clearance` is the loop radius as a fraction of the smallest distance
/// between finite singular points, [`CLEARANCE_FRACTION`] by default.
pub fn plan_paths(
    sys: &ParamSystem,
    t: &[C64],
    base: Option<C64>,
    order: i64,
    clearance: Option<f64>,
) -> Result<(PathPlan, Vec<FormalSolution>)> {
    let frac = clearance.unwrap_or(CLEARANCE_FRACTION);
    let sing = sys.singularities(t)?;
    let finite: Vec<C64> = sing
        .iter()
        .filter_map(|s| match s.point {
            Origin::Point(p) => Some(p),
            Origin::Infinity => None,
        })
        .collect();
    let mut dmin = f64::INFINITY;
    for i in 0..finite.len() {
        for j in 0..i {
            dmin = dmin.min((finite[i] - finite[j]).norm());
        }
    }
    let scale = finite.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let eps = if dmin.is_finite() { frac * dmin } else { frac * scale };
    let base = match base {
        Some(b) => b,
        None => {
            // a point at distance at least 2 eps from every finite singularity
            let mut b = c(0.0, 0.0);
            'outer: for k in 0..64 {
                let cand = C64::from_polar(0.5 * scale + 0.25 * k as f64 * eps, 0.7 + 0.9 * k as f64);
                if finite.iter().all(|p| (p - cand).norm() >= 2.0 * eps) {
                    b = cand;
                    break 'outer;
                }
            }
            b
        }
    };
    if finite.iter().any(|p| (p - base).norm() < eps) {
        return invalid("base point lies within the clearance of a singular point");
    }
    let mut entries = Vec::new();
    let mut sols = Vec::new();
    for s in &sing {
        let sol = formal_at(sys, t, s.point, order)?;
        let dirs = singular_directions(&sol.q, sol.nu, 0).ok();
        let d = nonsingular_direction(dirs.as_ref());
        // local radius: eps at finite points, 1/(scale + 2 eps)-ish at infinity
        let rloc = match s.point {
            Origin::Point(_) => eps,
            Origin::Infinity => 1.0 / (scale + 4.0 * eps).max(base.norm() + eps),
        };
        let entry = to_global(s.point, C64::from_polar(rloc, d));
        let others: Vec<C64> = finite.iter().copied().filter(|p| Origin::Point(*p) != s.point).collect();
        let path = route(base, entry, &others, 0.5 * eps)?;
        entries.push(PlanEntry { point: s.point, direction: d, entry, path });
        sols.push(sol);
    }
    Ok((PathPlan { base, eps, entries }, sols))
}

/// Local generators at every singular point conjugated to the base point by
/// continuing the local solution `U_alpha` along its entry path:
/// `G -> C G C^{-1}` with `C = U_alpha(x0)`.
pub fn global_generators(
    sys: &ParamSystem,
    t: &[C64],
    sample: usize,
    base: Option<C64>,
    order: i64,
    clearance: Option<f64>,
) -> Result<GlobalGenerators> {
    let (plan, sols) = plan_paths(sys, t, base, order, clearance)?;
    let field = Field::global(sys, t)?;
    let local: Vec<Result<LocalGenerators>> = plan
        .entries
        .par_iter()
        .zip(sols.par_iter())
        .map(|(e, sol)| {
            let rloc = match e.point {
                Origin::Point(a) => (e.entry - a).norm(),
                Origin::Infinity => 1.0 / e.entry.norm(),
            };
            let lv = local_value(sys, t, sol, e.direction, rloc)?;
            // the local solution lives at radius lv.at.0 <= rloc; join it to the
            // entry point along the ray first
            let w0 = C64::from_polar(lv.at.0, lv.at.1);
            let start = to_global(e.point, w0);
            let lead = Path::line(start, e.entry);
            let path = if (start - e.entry).norm() > 0.0 { lead.then(e.path.reversed()) } else { e.path.reversed() };
            // a column of a 1/z-type coordinate change: Y(z) = Y_local(w) as functions
            let cont = integrate_path(&field, &path, &lv.value, 1e-10)?;
            let transport = cont.y;
            let cinv = inverse(&transport)?;
            let conj = |g: &CMat| &transport * g * &cinv;
            let mono = sol.formal_monodromy()?;
            let torus: Vec<CMat> = torus_generators(&sol.q).iter().map(|g| conj(&g.matrix)).collect();
            let dirs = singular_directions(&sol.q, sol.nu, sample).ok();
            let stokes_local = match &dirs {
                Some(d) if !d.directions.is_empty() => {
                    LocalProblem { sys, t: t.to_vec(), sol, dirs: d }.all_stokes()?
                }
                _ => Vec::new(),
            };
            let period = dirs.as_ref().map_or(2.0 * PI, |d| d.period());
            let loop_check = match e.point {
                Origin::Point(a) => {
                    let m = loop_along(&field, a, &e.path, 1e-9)?;
                    let predicted = conj(&stokes_product(&mono, &stokes_local, e.direction, period)?);
                    let deviation = max_abs(&(&m.matrix - &predicted)) / max_abs(&predicted);
                    Some(LoopCheck { measured: m.matrix, predicted, deviation })
                }
                Origin::Infinity => None,
            };
            Ok(LocalGenerators {
                point: e.point,
                transport: transport.clone(),
                matching_radius: lv.at.0,
                formal_monodromy: conj(&mono),
                torus,
                stokes: stokes_local.iter().map(|s| conj(&s.matrix)).collect(),
                stokes_local,
                directions: dirs,
                direction: e.direction,
                solution: sol.clone(),
                loop_check,
            })
        })
        .collect();
    Ok(GlobalGenerators { base: plan.base, sample, local: local.into_iter().collect::<Result<_>>()? })
}

/// `exp(2 i pi L)` helper for callers comparing against `formal_monodromy`.
pub fn exp_2pii(l: &CMat) -> CMat {
    expm(&(l * c(0.0, 2.0 * PI)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigenvalues;

    #[test]
    fn trivial_and_power_solutions() {
        let zero = Field::new(2, vec![], |_| Ok(CMat::zeros(2, 2)));
        let y0 = CMat::from_fn(2, 2, |i, j| c((i + 2 * j) as f64, 1.0));
        let out = integrate_path(&zero, &Path::line(c(0.0, 0.0), c(3.0, 1.0)), &y0, 1e-10).unwrap();
        assert!(max_abs(&(out.y - &y0)) < 1e-14);
        let inv = Field::new(1, vec![c(0.0, 0.0)], |z| Ok(CMat::from_element(1, 1, z.inv())));
        let one = CMat::identity(1, 1);
        let out = integrate_path(&inv, &Path::line(c(1.0, 0.0), c(2.0, 0.0)), &one, 1e-10).unwrap();
        assert!((out.y[(0, 0)] - 2.0).norm() < 1e-10);
    }

    #[test]
    fn monodromy_of_z_to_the_t() {
        let t = 0.3;
        let f = Field::new(1, vec![c(0.0, 0.0)], move |z| Ok(CMat::from_element(1, 1, c(t, 0.0) / z)));
        let m = loop_monodromy(&f, c(0.0, 0.0), c(1.0, 0.0), 0.5, 1e-10).unwrap();
        let want = C64::from_polar(1.0, 2.0 * PI * t);
        assert!((m.matrix[(0, 0)] - want).norm() < 1e-9, "{}", m.matrix);
        // a loop around a regular point
        let r = loop_monodromy(&f, c(3.0, 0.0), c(1.5, 0.0), 0.5, 1e-10);
        assert!(r.is_err() || max_abs(&(r.unwrap().matrix - CMat::identity(1, 1))) < 1e-9);
    }

    #[test]
    fn reversal_abel_and_homotopy() {
        let sys = ParamSystem::parse(&["0", "1", "(t^2-z^2)/z^2", "-1/z"], &["t"]).unwrap();
        let t = [c(0.3, 0.1)];
        let f = Field::global(&sys, &t).unwrap();
        let y0 = CMat::from_fn(2, 2, |i, j| c(1.0 + i as f64, j as f64 - 0.5));
        let p = Path::new(vec![
            Segment::Line(c(1.0, 0.0), c(2.0, 1.0)),
            Segment::Arc { center: c(0.0, 0.0), radius: 5f64.sqrt(), from: (0.5f64).atan(), to: 2.0 },
        ]);
        let fwd = integrate_path(&f, &p, &y0, 1e-10).unwrap();
        let back = integrate_path(&f, &p.reversed(), &fwd.y, 1e-10).unwrap();
        assert!(max_abs(&(&back.y - &y0)) / max_abs(&y0) < 2e-10 * 10.0);
        // Abel: det Y = det Y0 exp(∫ tr A)
        let lhs = fwd.y.determinant();
        let rhs = y0.determinant() * fwd.trace_integral.exp();
        assert!((lhs - rhs).norm() < 1e-8 * rhs.norm());
        // homotopic path: straight chord to the same end point
        let q = Path::new(vec![Segment::Line(c(1.0, 0.0), p.end().unwrap())]);
        let alt = integrate_path(&f, &q, &y0, 1e-10).unwrap();
        assert!(max_abs(&(&alt.y - &fwd.y)) / max_abs(&fwd.y) < 2e-9);
    }

    #[test]
    fn bessel_monodromy_at_zero() {
        let sys = ParamSystem::parse(&["0", "1", "(t^2-z^2)/z^2", "-1/z"], &["t"]).unwrap();
        let t = [c(0.3, 0.0)];
        let f = Field::global(&sys, &t).unwrap();
        let m = loop_monodromy(&f, c(0.0, 0.0), c(1.0, 0.5), 0.5, 1e-10).unwrap();
        let mut ev = eigenvalues(&m.matrix);
        ev.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        let e = C64::from_polar(1.0, 2.0 * PI * 0.3);
        assert!((ev[0] - e.conj()).norm() < 1e-6 && (ev[1] - e).norm() < 1e-6, "{ev:?}");
    }

    #[test]
    fn connection_branches() {
        let t = 0.3;
        let f = Field::new(1, vec![c(0.0, 0.0)], move |z| Ok(CMat::from_element(1, 1, c(t, 0.0) / z)));
        let z = c(1.0, 0.0);
        let u = CMat::from_element(1, 1, c(1.0, 0.0));
        let same = connection_matrix(&f, &u, &u, z, ("a", "a"), 0).unwrap();
        assert!((same.matrix[(0, 0)] - 1.0).norm() < 1e-14 && same.deviation < 1e-9);
        // the same branch continued once around the origin
        let turned = integrate_path(&f, &Path::circle(c(0.0, 0.0), z), &u, 1e-11).unwrap().y;
        let cm = connection_matrix(&f, &u, &turned, z, ("z^t", "z^t turned"), 0).unwrap();
        assert!((cm.matrix[(0, 0)] - C64::from_polar(1.0, 2.0 * PI * t)).norm() < 1e-9);
        assert!(cm.deviation < 1e-6);
    }

    #[test]
    fn stokes_ordering() {
        let mk = |a: f64| StokesData {
            angle: a,
            directions: vec![],
            matrix: CMat::identity(1, 1),
            samples: vec![],
            constancy: 0.0,
            offset: 0.1,
            max_residual: 0.0,
            sample: 0,
        };
        let s = vec![mk(0.5), mk(5.0), mk(2.0)];
        assert_eq!(stokes_order(&s, 1.0, 2.0 * PI), vec![2, 1, 0]);
    }

    /// Numerical monodromy of `F^{theta0}` around the local origin against
    /// the formal monodromy and Stokes product.
    fn product_check(sys: &ParamSystem, t: &[C64], origin: Origin<f64>, r: f64) -> f64 {
        let sol = formal_at(sys, t, origin, 60).unwrap();
        let dirs = singular_directions(&sol.q, sol.nu, 0).unwrap();
        let lp = LocalProblem { sys, t: t.to_vec(), sol: &sol, dirs: &dirs };
        let stokes = lp.all_stokes().unwrap();
        let theta0 = nonsingular_direction(Some(&dirs));
        let lv = local_value(sys, t, &sol, theta0, r).unwrap();
        let field = Field::local(sys, t, origin).unwrap();
        let w0 = C64::from_polar(lv.at.0, theta0);
        let end = integrate_path(&field, &Path::circle(c(0.0, 0.0), w0), &lv.value, 1e-9).unwrap().y;
        let measured = inverse(&lv.value).unwrap() * end;
        let predicted = stokes_product(&sol.formal_monodromy().unwrap(), &stokes, theta0, dirs.period()).unwrap();
        max_abs(&(&measured - &predicted)) / max_abs(&predicted)
    }

    #[test]
    fn product_formula_euler() {
        let sys = ParamSystem::parse(&["0", "1", "-1/(t*z^3)", "1/(t*z^2)-1/z"], &["t"]).unwrap();
        let err = product_check(&sys, &[c(1.0, 0.3)], Origin::Point(c(0.0, 0.0)), 0.3);
        assert!(err < 1e-4, "{err:.3e}");
    }

    #[test]
    fn product_formula_bessel_at_infinity() {
        let sys = ParamSystem::parse(&["0", "1", "(t^2-z^2)/z^2", "-1/z"], &["t"]).unwrap();
        let err = product_check(&sys, &[c(0.3, 0.1)], Origin::Infinity, 0.3);
        assert!(err < 1e-4, "{err:.3e}");
    }

    #[test]
    fn transported_generator_matches_loop() {
        let sys = ParamSystem::parse(&["0", "1", "(t^2-z^2)/z^2", "-1/z"], &["t"]).unwrap();
        let t = [c(0.3, 0.1)];
        let g = global_generators(&sys, &t, 0, Some(c(0.8, 0.6)), 40, None).unwrap();
        let at0 = g.local.iter().find(|l| l.point == Origin::Point(c(0.0, 0.0))).unwrap();
        let f = Field::global(&sys, &t).unwrap();
        let m = loop_monodromy(&f, c(0.0, 0.0), g.base, 0.4, 1e-10).unwrap();
        let err = max_abs(&(&m.matrix - &at0.formal_monodromy)) / max_abs(&m.matrix);
        assert!(err < 1e-7, "{err:.3e}\n{}\n{}", m.matrix, at0.formal_monodromy);
        assert!(at0.loop_check.as_ref().unwrap().deviation < 1e-7);
        let inf = g.local.iter().find(|l| l.point == Origin::Infinity).unwrap();
        assert_eq!(inf.stokes.len(), 2);
        assert_eq!(inf.torus.len(), 1);
    }
}
