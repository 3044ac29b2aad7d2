//! Levels and singular directions of the exponential parts, with the
//! collision and degeneracy diagnostics across a parameter grid.

use crate::error::{invalid, Result};
use crate::formal::{r2f, QExp};
use crate::series::Rational;
use std::f64::consts::PI;

/// Leading coefficients below this modulus are treated as vanished.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Directions of distinct pairs closer than this coincide.
pub const COLLISION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SingularDirection {
    pub angle: f64,
    /// Singular for `q_i - q_j`; the Stokes entry `(j, i)` may be nonzero here.
    pub pair: (usize, usize),
    pub level: Rational,
    pub sample: usize,
}

/// Directions of one sample inside `[0, 2 pi nu)`.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    pub sample: usize,
    pub nu: u32,
    pub directions: Vec<SingularDirection>,
    /// Pairs whose leading coefficient fell below the degeneracy threshold.
    pub dropped_terms: Vec<(usize, usize)>,
}

impl DirectionSet {
    pub fn period(&self) -> f64 {
        2.0 * PI * self.nu as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        self.directions.iter().map(|d| d.angle).collect()
    }

    pub fn level_of(&self, pair: (usize, usize)) -> Option<Rational> {
        self.directions.iter().find(|d| d.pair == pair).map(|d| d.level)
    }

    /// Directions singular for `q_i - q_j` with the given pair.
    pub fn for_pair(&self, pair: (usize, usize)) -> impl Iterator<Item = &SingularDirection> {
        self.directions.iter().filter(move |d| d.pair == pair)
    }
}

/// `q` without leading terms whose coefficient is below [`DEGENERACY_TOL`].
fn strip(q: &QExp) -> (QExp, bool) {
    let mut terms = q.terms().to_vec();
    let mut dropped = false;
    while terms.first().is_some_and(|t| t.1.norm() < DEGENERACY_TOL) {
        terms.remove(0);
        dropped = true;
    }
    (QExp::new(terms), dropped)
}

/// Angles θ in `[0, 2 pi nu)` with `c e^{-i θ k} > 0` for the leading term
/// `c z^{-k}` of `q`.
pub fn directions_of(q: &QExp, nu: u32) -> Vec<f64> {
    if q.is_zero() {
        return Vec::new();
    }
    let k = r2f(q.degree());
    let period = 2.0 * PI * nu as f64;
    let a = q.leading().arg();
    let mut out = Vec::new();
    let mut m = ((-a) / (2.0 * PI)).floor() as i64 - 1;
    loop {
        let th = (a + 2.0 * PI * m as f64) / k;
        if th >= period - 1e-13 {
            break;
        }
        if th >= -1e-13 {
            out.push(th.max(0.0));
        }
        m += 1;
    }
    out
}

/// All singular directions of the exponential parts at one sample.
pub fn singular_directions(q: &[QExp], nu: u32, sample: usize) -> Result<DirectionSet> {
    let mut directions = Vec::new();
    let mut dropped_terms = Vec::new();
    let nu = q.iter().fold(nu, |a, x| num_integer::lcm(a, x.nu()));
    for i in 0..q.len() {
        for j in 0..q.len() {
            if i == j {
                continue;
            }
            let (d, dropped) = strip(&q[i].sub(&q[j]));
            if dropped {
                dropped_terms.push((i, j));
            }
            for angle in directions_of(&d, nu) {
                directions.push(SingularDirection { angle, pair: (i, j), level: d.degree(), sample });
            }
        }
    }
    if directions.is_empty() {
        return invalid("all exponential parts coincide; there are no singular directions");
    }
    directions.sort_by(|a, b| a.angle.total_cmp(&b.angle).then(a.pair.cmp(&b.pair)));
    Ok(DirectionSet { sample, nu, directions, dropped_terms })
}

/// Checks `c e^{-i θ k}` is positive to within `tol` of the real axis.
pub fn satisfies_invariant(q: &[QExp], d: &SingularDirection, tol: f64) -> bool {
    let (diff, _) = strip(&q[d.pair.0].sub(&q[d.pair.1]));
    let v = diff.leading() * crate::C64::from_polar(1.0, -d.angle * r2f(diff.degree()));
    v.re > 0.0 && v.im.abs() <= tol * v.norm()
}

#[derive(Clone, Debug)]
pub struct Coincidence {
    pub sample: usize,
    pub angle: f64,
    pub pairs: ((usize, usize), (usize, usize)),
}

#[derive(Clone, Debug)]
pub struct Degeneracy {
    pub sample: usize,
    pub pair: (usize, usize),
    pub level: Rational,
    pub generic_level: Rational,
}

#[derive(Clone, Debug, Default)]
pub struct CollisionReport {
    pub coincidences: Vec<Coincidence>,
    pub degeneracies: Vec<Degeneracy>,
    /// Some sample lies in the collision set.
    pub in_collision_set: bool,
}

impl CollisionReport {
    pub fn is_clean(&self) -> bool {
        self.coincidences.is_empty() && self.degeneracies.is_empty()
    }
}

/// Coincident directions of distinct pair differences and samples where a
/// level drops below the largest level seen for that pair on the grid.
///
/// `q_by_sample` supplies the exponential parts that produced each set so
/// that pairs with identical differences count as one family.
pub fn collision_check(sets: &[DirectionSet], q_by_sample: &[Vec<QExp>]) -> CollisionReport {
    let mut rep = CollisionReport::default();
    for (set, q) in sets.iter().zip(q_by_sample) {
        let period = set.period();
        let ds = &set.directions;
        for a in 0..ds.len() {
            for b in a + 1..ds.len() {
                let (x, y) = (&ds[a], &ds[b]);
                if x.pair == y.pair {
                    continue;
                }
                let gap = (x.angle - y.angle).rem_euclid(period);
                if gap.min(period - gap) > COLLISION_TOL {
                    continue;
                }
                let dx = q[x.pair.0].sub(&q[x.pair.1]);
                let dy = q[y.pair.0].sub(&q[y.pair.1]);
                if dx.approx_eq(&dy, 1e-12) {
                    continue;
                }
                rep.coincidences.push(Coincidence { sample: set.sample, angle: x.angle, pairs: (x.pair, y.pair) });
            }
        }
    }
    let mut generic: Vec<((usize, usize), Rational)> = Vec::new();
    for set in sets {
        for d in &set.directions {
            match generic.iter_mut().find(|g| g.0 == d.pair) {
                Some(g) if g.1 < d.level => g.1 = d.level,
                Some(_) => {}
                None => generic.push((d.pair, d.level)),
            }
        }
    }
    for set in sets {
        for &(pair, lvl) in &generic {
            let here = set.level_of(pair).unwrap_or_else(|| Rational::from(0));
            if here < lvl || set.dropped_terms.contains(&pair) {
                rep.degeneracies.push(Degeneracy { sample: set.sample, pair, level: here, generic_level: lvl });
            }
        }
    }
    rep.in_collision_set = !rep.is_clean();
    rep
}

/// Largest jump of matched directions between adjacent samples, per
/// adjacency; directions are matched within the same pair.
pub fn continuity_jumps(sets: &[DirectionSet], adjacency: &[(usize, usize)]) -> Vec<f64> {
    adjacency
        .iter()
        .map(|&(a, b)| {
            let (sa, sb) = (&sets[a], &sets[b]);
            let period = sa.period().max(sb.period());
            let mut worst: f64 = 0.0;
            for d in &sa.directions {
                let best = sb
                    .for_pair(d.pair)
                    .map(|e| {
                        let g = (d.angle - e.angle).rem_euclid(period);
                        g.min(period - g)
                    })
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(best);
            }
            worst
        })
        .collect()
}

/// Angular distance on the circle of length `period`.
pub fn circ_dist(a: f64, b: f64, period: f64) -> f64 {
    let g = (a - b).rem_euclid(period);
    g.min(period - g)
}

/// Ray closest to `target` at distance at least `delta` from every angle.
pub fn admissible_ray(angles: &[f64], period: f64, target: f64, delta: f64) -> Result<f64> {
    let ok = |x: f64| angles.iter().all(|&a| circ_dist(a, x, period) >= delta - 1e-15);
    if ok(target) {
        return Ok(target);
    }
    let mut best: Option<(f64, f64)> = None;
    for &a in angles {
        for s in [-1.0, 1.0] {
            // candidate on the same sheet as the target
            let mut x = a + s * delta;
            x += ((target - x) / period).round() * period;
            if ok(x) {
                let d = (x - target).abs();
                if best.map_or(true, |b| d < b.0 - 1e-15) {
                    best = Some((d, x));
                }
            }
        }
    }
    best.map(|b| b.1).ok_or_else(|| crate::error::Error::Invalid("no admissible ray".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn q1(c: C64) -> QExp {
        QExp::new(vec![(Rational::from(-1), c)])
    }

    #[test]
    fn euler_directions() {
        // q = -1/(f z) and 0 with f = 1 + i
        let f = C64::new(1.0, 1.0);
        let q = vec![q1(-f.inv()), QExp::zero()];
        let set = singular_directions(&q, 1, 0).unwrap();
        assert_eq!(set.directions.len(), 2);
        let d = set.for_pair((1, 0)).next().unwrap();
        assert!((d.angle - f.inv().arg().rem_euclid(2.0 * PI)).abs() < 1e-12);
        assert!(set.directions.iter().all(|d| satisfies_invariant(&q, d, 1e-10)));
    }

    #[test]
    fn ramified_domain() {
        let r = |n, d| Rational::new(n, d);
        let q = vec![
            QExp::new(vec![(r(-5, 2), C64::new(0.4, 0.0))]),
            QExp::new(vec![(r(-5, 2), C64::new(-0.4, 0.0))]),
        ];
        let set = singular_directions(&q, 2, 0).unwrap();
        assert_eq!(set.directions.len(), 10);
        for (k, d) in set.directions.iter().enumerate() {
            assert!((d.angle - 2.0 * PI * k as f64 / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_parts_are_rejected() {
        assert!(singular_directions(&[QExp::zero(), QExp::zero()], 1, 0).is_err());
    }

    #[test]
    fn admissible_rays() {
        let a = [0.0, PI];
        let x = admissible_ray(&a, 2.0 * PI, 0.0, 0.05).unwrap();
        assert!((x.abs() - 0.05).abs() < 1e-15);
        assert_eq!(admissible_ray(&[PI / 2.0, 1.5 * PI], 2.0 * PI, PI / 4.0, 0.05).unwrap(), PI / 4.0);
    }

    fn sets_for(entries: &[&str], grid: &[f64]) -> (Vec<DirectionSet>, Vec<Vec<QExp>>) {
        let sys = crate::ParamSystem::parse(entries, &["t"]).unwrap();
        let mut sets = Vec::new();
        let mut qs = Vec::new();
        for (k, &t) in grid.iter().enumerate() {
            let sol = crate::formal_at(&sys, &[C64::new(t, 0.0)], crate::Origin::Point(C64::new(0.0, 0.0)), 4).unwrap();
            sets.push(singular_directions(&sol.q, sol.nu, k).unwrap());
            qs.push(sol.q);
        }
        (sets, qs)
    }

    #[test]
    fn level_degeneracy_is_flagged() {
        let (sets, qs) = sets_for(&["-2*t/z^3-1/z^2", "0", "0", "2*t/z^3+1/z^2"], &[0.0, 0.5]);
        let rep = collision_check(&sets, &qs);
        assert!(rep.coincidences.is_empty());
        assert!(!rep.degeneracies.is_empty());
        assert!(rep.degeneracies.iter().all(|d| d.sample == 0));
        assert!(rep.in_collision_set);
    }

    #[test]
    fn coinciding_families_are_flagged() {
        let (sets, qs) = sets_for(&["1/z^2", "0", "0", "0", "t/z^2", "0", "0", "0", "-t/z^2"], &[0.7]);
        let rep = collision_check(&sets, &qs);
        assert!(!rep.coincidences.is_empty());
        assert!(rep.coincidences.iter().all(|c| c.angle.abs() < 1e-12 || (c.angle - PI).abs() < 1e-12));
        // complex t separates the families
        let (sets, qs) = sets_for(&["1/z^2", "0", "0", "0", "t/z^2", "0", "0", "0", "-t/z^2"], &[0.7, 1.3]);
        assert_eq!(continuity_jumps(&sets, &[(0, 1)]).len(), 1);
        let _ = qs;
    }
}
