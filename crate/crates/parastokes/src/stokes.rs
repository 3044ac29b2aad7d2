//! Stokes matrices from the mismatch of lateral sums, the convergence
//! diagnosis built on them, and generators of the exponential torus.

use crate::directions::{circ_dist, DirectionSet, SingularDirection, COLLISION_TOL};
use crate::error::{numerical, Error, Result};
use crate::expr::Origin;
use crate::formal::{r2f, FormalSolution, QExp};
use crate::linalg::{c, eigenvalues, integer_relations, max_abs, CMat};
use crate::series::{Gevrey, Rational};
use crate::summation::{lateral_solution, make_plan, stokes_from_h, Side, SummationPlan, RESIDUAL_TOL};
use crate::system::ParamSystem;
use crate::C64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Pairwise agreement required of the per-sample estimates.
pub const CONSTANCY_TOL: f64 = 1e-5;
/// Above this the summation is considered failed.
pub const CONSTANCY_FAIL: f64 = 1e-3;
pub const STOKES_QUAD_TOL: f64 = 1e-12;
/// Off-diagonal entries below this count as zero.
pub const ENTRY_TOL: f64 = 1e-6;

/// Values of `|Δc| / r^k` tried, largest radius first. Small values leave
/// the Padé continuation far from the origin, large ones amplify rounding
/// by `e^{|Δc|/r^k}`.
const EXPONENT_LADDER: [f64; 12] = [5.0, 6.0, 7.5, 9.0, 11.0, 13.0, 15.5, 18.5, 22.0, 26.0, 31.0, 37.0];
const SAMPLE_SCALES: [f64; 3] = [1.0, 0.93, 0.86];

#[derive(Clone, Debug)]
pub struct StokesData {
    pub angle: f64,
    /// The singular directions sharing this angle; empty off the singular set.
    pub directions: Vec<SingularDirection>,
    /// `(F^{d-})^{-1} F^{d+}`, mean over the samples.
    pub matrix: CMat,
    /// `(r, arg)` in the local coordinate.
    pub samples: Vec<(f64, f64)>,
    /// Largest pairwise deviation of the per-sample estimates.
    pub constancy: f64,
    pub offset: f64,
    pub max_residual: f64,
    pub sample: usize,
}

impl StokesData {
    pub fn is_identity(&self, tol: f64) -> bool {
        let m = self.matrix.nrows();
        max_abs(&(&self.matrix - CMat::identity(m, m))) <= tol
    }

    pub fn is_unipotent(&self, tol: f64) -> bool {
        eigenvalues(&self.matrix).iter().all(|e| (e - 1.0).norm() <= tol)
    }

    /// Off-diagonal entries above [`ENTRY_TOL`] not allowed by the pairs
    /// singular at this angle.
    pub fn ordering_violations(&self) -> Vec<(usize, usize)> {
        let m = self.matrix.nrows();
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..m {
                if i != j && self.matrix[(i, j)].norm() > ENTRY_TOL && !self.directions.iter().any(|d| d.pair == (j, i)) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Local data needed to sum the formal solution of one system at one point.
pub struct LocalProblem<'a> {
    pub sys: &'a ParamSystem,
    pub t: Vec<C64>,
    pub sol: &'a FormalSolution,
    pub dirs: &'a DirectionSet,
}

impl LocalProblem<'_> {
    fn b(&self, w: C64) -> Result<CMat> {
        self.sys.local_matrix(&self.t, self.sol.origin, w)
    }

    /// Distance in the local coordinate to the nearest other singular point.
    pub fn radius_limit(&self) -> Result<f64> {
        let mut lim = f64::INFINITY;
        for s in self.sys.singularities(&self.t)? {
            let d = match (self.sol.origin, s.point) {
                (Origin::Point(a), Origin::Point(b)) => (b - a).norm(),
                (Origin::Point(a), Origin::Infinity) if a.norm() > 0.0 => f64::INFINITY,
                (Origin::Infinity, Origin::Point(b)) if b.norm() > 0.0 => 1.0 / b.norm(),
                _ => f64::INFINITY,
            };
            if d > 1e-12 {
                lim = lim.min(d);
            }
        }
        Ok(lim)
    }

    /// Directions of the set within [`COLLISION_TOL`] of `angle`.
    pub fn directions_at(&self, angle: f64) -> Vec<SingularDirection> {
        let p = self.dirs.period();
        self.dirs.directions.iter().filter(|d| circ_dist(d.angle, angle, p) < COLLISION_TOL).cloned().collect()
    }

    /// Half the distance to the nearest other singular angle, capped below
    /// `pi/(2k)` for the top level `k`.
    pub fn default_offset(&self, angle: f64) -> f64 {
        let p = self.dirs.period();
        let gap = self
            .dirs
            .directions
            .iter()
            .map(|d| circ_dist(d.angle, angle, p))
            .filter(|&g| g >= COLLISION_TOL)
            .fold(p, f64::min);
        let k = self.sol.levels().last().map_or(1.0, |&k| r2f(k));
        (0.5 * gap).min(0.45 * PI / (2.0 * k))
    }

    fn plans(&self, angle: f64, offset: f64) -> Result<Option<(SummationPlan, SummationPlan)>> {
        let levels = self.sol.levels();
        if levels.is_empty() {
            return Ok(None);
        }
        let pm = make_plan(&levels, angle, Side::Minus)?.with_offset(offset).with_tol(STOKES_QUAD_TOL);
        let pp = make_plan(&levels, angle, Side::Plus)?.with_offset(offset).with_tol(STOKES_QUAD_TOL);
        Ok(Some((pm, pp)))
    }

    /// Stokes estimates at explicit points, without choosing radii.
    pub fn stokes_at_points(&self, angle: f64, offset: f64, points: &[(f64, f64)]) -> Result<StokesData> {
        let m = self.sol.dim();
        let directions = self.directions_at(angle);
        let Some((pm, pp)) = self.plans(angle, offset)? else {
            return Ok(StokesData {
                angle,
                directions,
                matrix: CMat::identity(m, m),
                samples: points.to_vec(),
                constancy: 0.0,
                offset,
                max_residual: 0.0,
                sample: self.dirs.sample,
            });
        };
        let b = |w: C64| self.b(w);
        let lm = lateral_solution(self.sol, &b, &pm, points)?;
        let lp = lateral_solution(self.sol, &b, &pp, points)?;
        let mut per = Vec::with_capacity(points.len());
        for (i, &(r, arg)) in points.iter().enumerate() {
            per.push(stokes_from_h(self.sol, &lm.h[i], &lp.h[i], r, arg)?);
        }
        let mean = per.iter().fold(CMat::zeros(m, m), |a, s| a + s) / c(per.len() as f64, 0.0);
        let scale = max_abs(&mean).max(1.0);
        let mut constancy: f64 = 0.0;
        for a in 0..per.len() {
            for b in a + 1..per.len() {
                constancy = constancy.max(max_abs(&(&per[a] - &per[b])) / scale);
            }
        }
        Ok(StokesData {
            angle,
            directions,
            matrix: mean,
            samples: points.to_vec(),
            constancy,
            offset,
            max_residual: lm.max_residual().max(lp.max_residual()),
            sample: self.dirs.sample,
        })
    }

    /// Radii at which `|Δc|/r^k` runs through the ladder, for the dominant pair
    /// at `angle` (or the strongest pair overall off the singular set).
    fn radius_ladder(&self, angle: f64) -> Result<Vec<f64>> {
        let q = &self.sol.q;
        let dirs = self.directions_at(angle);
        let pairs: Vec<(usize, usize)> = if dirs.is_empty() {
            self.dirs.directions.iter().map(|d| d.pair).collect()
        } else {
            dirs.iter().map(|d| d.pair).collect()
        };
        let (mut k, mut delta) = (0.0, 0.0);
        for (i, j) in pairs {
            let d: QExp = q[i].sub(&q[j]);
            let kk = r2f(d.degree());
            if kk > k || (kk == k && d.leading().norm() > delta) {
                k = kk;
                delta = d.leading().norm();
            }
        }
        let lim = 0.5 * self.radius_limit()?;
        Ok(EXPONENT_LADDER.iter().map(|s| (delta / s).powf(1.0 / k)).filter(|&r| r < lim).collect())
    }

    /// Stokes matrix at `angle`, picking the radius where the per-sample
    /// estimates agree best among those with converged lateral sums.
    pub fn stokes_at(&self, angle: f64, offset: Option<f64>) -> Result<StokesData> {
        let offset = offset.unwrap_or_else(|| self.default_offset(angle));
        if self.sol.levels().is_empty() {
            return self.stokes_at_points(angle, offset, &[(0.5, angle), (0.4, angle), (0.3, angle)]);
        }
        let mut best: Option<StokesData> = None;
        let mut last_err: Option<Error> = None;
        let mut worse = 0;
        for r in self.radius_ladder(angle)? {
            let pts: Vec<(f64, f64)> = SAMPLE_SCALES.iter().map(|s| (r * s, angle)).collect();
            let st = match self.stokes_at_points(angle, offset, &pts) {
                Ok(st) if st.max_residual <= RESIDUAL_TOL => st,
                Ok(st) => {
                    last_err = Some(Error::Numerical(format!("lateral-sum residual {:.1e} at |z| = {r:.3e}", st.max_residual)));
                    continue;
                }
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            };
            match &best {
                Some(b) if st.constancy >= b.constancy => {
                    worse += 1;
                    if worse >= 2 {
                        break;
                    }
                }
                _ => {
                    worse = 0;
                    best = Some(st);
                }
            }
        }
        let Some(best) = best else {
            return Err(last_err.unwrap_or_else(|| Error::Numerical("no admissible radius for the lateral sums".into())));
        };
        if best.constancy > CONSTANCY_FAIL {
            return numerical(format!(
                "Stokes estimate at angle {angle:.6} varies by {:.1e} across z-samples",
                best.constancy
            ));
        }
        Ok(best)
    }

    pub fn stokes_matrix(&self, d: &SingularDirection) -> Result<StokesData> {
        self.stokes_at(d.angle, None)
    }

    /// One Stokes matrix per distinct singular angle in `[0, 2 pi nu)`.
    pub fn all_stokes(&self) -> Result<Vec<StokesData>> {
        let p = self.dirs.period();
        let mut angles: Vec<f64> = Vec::new();
        for d in &self.dirs.directions {
            if !angles.iter().any(|&a| circ_dist(a, d.angle, p) < COLLISION_TOL) {
                angles.push(d.angle);
            }
        }
        angles.par_iter().map(|&a| self.stokes_at(a, None)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convergence {
    Convergent,
    Divergent,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub verdict: Convergence,
    /// Largest `|St_d - Id|` over the supplied matrices.
    pub max_stokes_deviation: f64,
    /// Angles with a nontrivial Stokes matrix.
    pub nontrivial: Vec<f64>,
    /// Gevrey estimate of each entry of `Ĥ`, row-major.
    pub gevrey: Vec<Gevrey>,
}

/// Convergent exactly when every Stokes matrix is the identity; the Gevrey
/// estimate of the entries of `Ĥ` must agree.
pub fn convergence_check(sol: &FormalSolution, stokes: &[StokesData]) -> Result<ConvergenceReport> {
    let m = sol.dim();
    let mut dev: f64 = 0.0;
    let mut nontrivial = Vec::new();
    for s in stokes {
        let d = max_abs(&(&s.matrix - CMat::identity(m, m)));
        dev = dev.max(d);
        if d > CONSTANCY_TOL {
            nontrivial.push(s.angle);
        }
    }
    let mut gevrey = Vec::new();
    for s in sol.hhat.entries() {
        let g = if s.order() - s.val() + 1 < 40 {
            Gevrey::Convergent
        } else {
            s.normalize_nu().gevrey_order_estimate().map(|f| f.verdict).unwrap_or(Gevrey::Convergent)
        };
        gevrey.push(g);
    }
    let by_stokes = if nontrivial.is_empty() { Convergence::Convergent } else { Convergence::Divergent };
    let by_gevrey =
        if gevrey.iter().all(|g| *g == Gevrey::Convergent) { Convergence::Convergent } else { Convergence::Divergent };
    if by_stokes != by_gevrey {
        return numerical(format!(
            "Stokes matrices say {by_stokes:?} (max |St - Id| = {dev:.2e}) but the Gevrey estimates say {by_gevrey:?} ({gevrey:?})"
        ));
    }
    Ok(ConvergenceReport { verdict: by_stokes, max_stokes_deviation: dev, nontrivial, gevrey })
}

/// Default scalar of a torus generator, not a root of unity.
pub const TORUS_SCALAR: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TorusGenerator {
    pub matrix: CMat,
    /// `alpha(q_i)` for every column.
    pub action: Vec<C64>,
    /// Column whose exponential part this generator scales by the scalar.
    pub basis: usize,
}

fn coefficient_vector(q: &QExp, exps: &[Rational]) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * exps.len());
    for e in exps {
        let x = q.terms().iter().find(|t| t.0 == *e).map_or(C64::new(0.0, 0.0), |t| t.1);
        v.push(x.re);
        v.push(x.im);
    }
    v
}

/// Rational coefficients of `v` in terms of `basis`, if there are any.
fn rational_coords(basis: &[Vec<f64>], v: &[f64]) -> Option<Vec<Rational>> {
    let mut vecs = basis.to_vec();
    vecs.push(v.to_vec());
    let rels = integer_relations(&vecs, 1_000_000, 1e-9);
    let rel = rels.into_iter().find(|a| a[basis.len()] != 0)?;
    let den = rel[basis.len()];
    Some(rel[..basis.len()].iter().map(|&a| Rational::new(-a, den)).collect())
}

/// One generator per member of a Q-independent subset of the exponential
/// parts. The generator multiplies `e^{q}` by `2^{r}` where `q = sum r_j b_j`
/// over the basis and `r` is the coefficient of its own basis element.
pub fn torus_generators(q: &[QExp]) -> Vec<TorusGenerator> {
    torus_generators_joint(std::slice::from_ref(&q.to_vec()))
}

/// Torus generators from the relations that hold at every sample at once,
/// i.e. the parameterized torus. `q_by_sample[s][i]` is part `i` at sample `s`.
pub fn torus_generators_joint(q_by_sample: &[Vec<QExp>]) -> Vec<TorusGenerator> {
    let Some(first) = q_by_sample.first() else { return Vec::new() };
    let mut exps: Vec<Rational> = q_by_sample.iter().flatten().flat_map(|x| x.terms().iter().map(|t| t.0)).collect();
    exps.sort();
    exps.dedup();
    let vecs: Vec<Vec<f64>> = (0..first.len())
        .map(|i| q_by_sample.iter().flat_map(|q| coefficient_vector(&q[i], &exps)).collect())
        .collect();
    let mut basis_idx: Vec<usize> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (i, v) in vecs.iter().enumerate() {
        if v.iter().all(|x| x.abs() < 1e-12) {
            continue;
        }
        if basis.is_empty() || rational_coords(&basis, v).is_none() {
            basis.push(v.clone());
            basis_idx.push(i);
        }
    }
    let coords: Vec<Vec<Rational>> = vecs
        .iter()
        .map(|v| {
            if v.iter().all(|x| x.abs() < 1e-12) {
                vec![Rational::from(0); basis.len()]
            } else {
                rational_coords(&basis, v).expect("every exponential part is a combination of the basis")
            }
        })
        .collect();
    let m = first.len();
    (0..basis.len())
        .map(|j| {
            let action: Vec<C64> = coords.iter().map(|r| c(TORUS_SCALAR.powf(r2f(r[j])), 0.0)).collect();
            let mut matrix = CMat::zeros(m, m);
            for i in 0..m {
                matrix[(i, i)] = action[i];
            }
            TorusGenerator { matrix, action, basis: basis_idx[j] }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::singular_directions;
    use crate::formal::formal_at;

    fn q1(c: C64) -> QExp {
        QExp::new(vec![(Rational::from(-1), c)])
    }

    #[test]
    fn torus_of_examples() {
        // Euler: diag(alpha, 1)
        let g = torus_generators(&[q1(c(-1.0, 0.2)), QExp::zero()]);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].action, vec![c(2.0, 0.0), c(1.0, 0.0)]);
        // Bessel at infinity: diag(alpha, 1/alpha)
        let g = torus_generators(&[q1(c(0.0, 1.0)), q1(c(0.0, -1.0))]);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].action, vec![c(2.0, 0.0), c(0.5, 0.0)]);
        // independent ratio: two generators
        let g = torus_generators(&[q1(c(1.0, 0.0)), q1(c(2f64.sqrt(), 0.0))]);
        assert_eq!(g.len(), 2);
        // rational ratio: one
        let g = torus_generators(&[q1(c(1.0, 0.0)), q1(c(1.5, 0.0))]);
        assert_eq!(g.len(), 1);
        assert!((g[0].action[1].re - 2f64.powf(1.5)).abs() < 1e-15);
        assert!(torus_generators(&[QExp::zero(), QExp::zero()]).is_empty());
    }

    #[test]
    fn convergent_irregular_fixture_has_trivial_stokes() {
        let sys = ParamSystem::parse(&["-1/z^2", "0", "0", "0"], &[]).unwrap();
        let sol = formal_at(&sys, &[], Origin::Point(c(0.0, 0.0)), 40).unwrap();
        let dirs = singular_directions(&sol.q, sol.nu, 0).unwrap();
        let lp = LocalProblem { sys: &sys, t: vec![], sol: &sol, dirs: &dirs };
        let all = lp.all_stokes().unwrap();
        assert!(!all.is_empty());
        for s in &all {
            assert!(s.is_identity(1e-6), "{}", s.matrix);
        }
        let rep = convergence_check(&sol, &all).unwrap();
        assert_eq!(rep.verdict, Convergence::Convergent);
    }

    #[test]
    fn euler_stokes_entry() {
        let sys = ParamSystem::parse(&["0", "1", "-1/(t*z^3)", "1/(t*z^2)-1/z"], &["t"]).unwrap();
        let t = c(1.0, 0.3);
        let sol = formal_at(&sys, &[t], Origin::Point(c(0.0, 0.0)), 60).unwrap();
        let dirs = singular_directions(&sol.q, sol.nu, 0).unwrap();
        let lp = LocalProblem { sys: &sys, t: vec![t], sol: &sol, dirs: &dirs };
        let d = dirs.directions.iter().find(|d| (d.angle - t.inv().arg().rem_euclid(2.0 * PI)).abs() < 1e-9).unwrap();
        let st = lp.stokes_matrix(d).unwrap();
        // columns are (t z^2, 1) e^{-1/(tz)} z^{-2} and (F, F'): the jump of
        // log(1 - tu) across its cut is -2 i pi, divided by t
        let want = c(0.0, -2.0 * PI) / t;
        assert!((st.matrix[(0, 1)] - want).norm() < 1e-6 * want.norm(), "{}", st.matrix);
        assert!(st.constancy < CONSTANCY_TOL);
        assert!(st.is_unipotent(1e-6));
        assert!(st.ordering_violations().is_empty());
        let rep = convergence_check(&sol, &lp.all_stokes().unwrap()).unwrap();
        assert_eq!(rep.verdict, Convergence::Divergent);
        assert_eq!(rep.nontrivial.len(), 1);
    }

    #[test]
    fn joint_torus_uses_generic_relations() {
        // ratio 2 at the first sample only: jointly the parts are independent
        let a = vec![q1(c(1.0, 0.0)), q1(c(2.0, 0.0))];
        let b = vec![q1(c(1.0, 0.0)), q1(c(3.0, 0.5))];
        assert_eq!(torus_generators(&a).len(), 1);
        assert_eq!(torus_generators_joint(&[a, b]).len(), 2);
    }
}
