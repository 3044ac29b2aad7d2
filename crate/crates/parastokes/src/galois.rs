//! Generator reports over a parameter grid, the complete-integrability
//! verdicts and the isomonodromy check.

use crate::continuation::{connection_matrix, global_generators, Field, GlobalGenerators};
use crate::directions::{circ_dist, collision_check, CollisionReport, DirectionSet};
use crate::error::{invalid, Error, Result};
use crate::expr::{Origin, Var};
use crate::formal::QExp;
use crate::linalg::{c, cond, eigenvalues, inverse, max_abs, nullspace, CMat};
use crate::stokes::torus_generators_joint;
use crate::system::ParamSystem;
use crate::{Expr, ParameterGrid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Default relative tolerance of the verdicts.
pub const GALOIS_TOL: f64 = 1e-5;
/// Conjugators with a larger condition number are not trusted.
const MAX_CONJUGATOR_COND: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportOptions {
    pub order: i64,
    pub base: Option<C64>,
    /// Loop radius as a fraction of the smallest singular-point distance.
    pub clearance: Option<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { order: 40, base: None, clearance: None }
    }
}

/// What a generator is, independent of the sample.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorKind {
    Monodromy,
    Torus(usize),
    /// Stokes matrix of the direction family with the given pairs; `index`
    /// separates several directions of the same family.
    Stokes { pairs: Vec<(usize, usize)>, index: usize },
}

#[derive(Clone, Debug)]
pub struct GeneratorFamily {
    pub singularity: usize,
    pub kind: GeneratorKind,
    /// One matrix per sample, in the base-point frame.
    pub matrices: Vec<CMat>,
    /// Direction of a Stokes family at every sample.
    pub angles: Vec<Option<f64>>,
    /// Self-check per sample: z-constancy for Stokes matrices, loop
    /// cross-check for monodromy, zero for torus elements.
    pub checks: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SingularityTrack {
    pub label: String,
    pub points: Vec<Origin<f64>>,
    pub transports: Vec<CMat>,
    pub matching_radii: Vec<f64>,
    pub collisions: CollisionReport,
    /// Samples whose own torus rank differs from the parameterized one.
    pub torus_degenerate: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct GeneratorReport {
    pub params: Vec<String>,
    pub samples: Vec<Vec<C64>>,
    pub per_sample: Vec<GlobalGenerators>,
    pub singularities: Vec<SingularityTrack>,
    pub families: Vec<GeneratorFamily>,
}

impl GeneratorReport {
    pub fn has_degeneracy(&self) -> bool {
        self.singularities.iter().any(|s| !s.collisions.is_clean() || !s.torus_degenerate.is_empty())
    }

    /// All generators of one sample in family order.
    pub fn sample_generators(&self, s: usize) -> Vec<&CMat> {
        self.families.iter().map(|f| &f.matrices[s]).collect()
    }
}

fn origin_dist(a: Origin<f64>, b: Origin<f64>) -> f64 {
    match (a, b) {
        (Origin::Point(x), Origin::Point(y)) => (x - y).norm(),
        (Origin::Infinity, Origin::Infinity) => 0.0,
        _ => f64::INFINITY,
    }
}

fn label(o: Origin<f64>) -> String {
    match o {
        Origin::Infinity => "inf".into(),
        Origin::Point(p) => format!("{:.6}{:+.6}i", p.re, p.im),
    }
}

/// `perm[i]` is the column of `q` carrying the exponential part closest to
/// `q0[i]`; the column order of formal solutions may differ between samples.
fn column_match(q0: &[QExp], q: &[QExp]) -> Vec<usize> {
    let dist = |a: &QExp, b: &QExp| a.sub(b).terms().iter().map(|t| t.1.norm()).fold(0.0, f64::max);
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in q0.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            cand.push((dist(a, b), i, j));
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut perm = vec![usize::MAX; q0.len()];
    let mut used = vec![false; q.len()];
    for (_, i, j) in cand {
        if perm[i] == usize::MAX && !used[j] {
            perm[i] = j;
            used[j] = true;
        }
    }
    perm
}

/// Direction set with pairs renamed through `inv` (sample column -> reference column).
fn relabel(d: &DirectionSet, inv: &[usize]) -> DirectionSet {
    let mut out = d.clone();
    for x in &mut out.directions {
        x.pair = (inv[x.pair.0], inv[x.pair.1]);
    }
    for p in &mut out.dropped_terms {
        *p = (inv[p.0], inv[p.1]);
    }
    out
}

fn pairs_of(d: &DirectionSet, angle: f64) -> Vec<(usize, usize)> {
    let mut p: Vec<(usize, usize)> =
        d.directions.iter().filter(|x| circ_dist(x.angle, angle, d.period()) < 1e-9).map(|x| x.pair).collect();
    p.sort();
    p.dedup();
    p
}

/// Global generators at every grid sample, aligned across samples: the
/// singular points by continuity from the first sample, Stokes directions
/// by their pair family and nearest angle.
pub fn generator_report(sys: &ParamSystem, grid: &ParameterGrid, opts: ReportOptions) -> Result<GeneratorReport> {
    if grid.names() != sys.params() {
        return invalid("grid parameters do not match the system parameters");
    }
    let per_sample: Vec<GlobalGenerators> = grid
        .samples()
        .par_iter()
        .enumerate()
        .map(|(i, t)| global_generators(sys, t, i, opts.base, opts.order, opts.clearance))
        .collect::<Result<_>>()?;
    let n = per_sample.len();
    let n_sing = per_sample[0].local.len();
    if let Some(bad) = per_sample.iter().position(|g| g.local.len() != n_sing) {
        return Err(Error::Collision(format!(
            "sample {bad} has {} singular points, sample 0 has {n_sing}",
            per_sample[bad].local.len()
        )));
    }
    // order[s][k]: index into per_sample[s].local of the k-th tracked point
    let mut order: Vec<Vec<usize>> = vec![(0..n_sing).collect()];
    for g in &per_sample[1..] {
        let mut used = vec![false; n_sing];
        let mut o = Vec::with_capacity(n_sing);
        for k in 0..n_sing {
            let p0 = per_sample[0].local[k].point;
            let j = (0..n_sing)
                .filter(|&j| !used[j])
                .min_by(|&a, &b| origin_dist(g.local[a].point, p0).total_cmp(&origin_dist(g.local[b].point, p0)))
                .expect("counts match");
            used[j] = true;
            o.push(j);
        }
        order.push(o);
    }
    let mut singularities = Vec::new();
    let mut families = Vec::new();
    for k in 0..n_sing {
        let locs: Vec<_> = (0..n).map(|s| &per_sample[s].local[order[s][k]]).collect();
        let q0 = &locs[0].solution.q;
        let perms: Vec<Vec<usize>> = locs.iter().map(|l| column_match(q0, &l.solution.q)).collect();
        let invs: Vec<Vec<usize>> = perms
            .iter()
            .map(|p| {
                let mut inv = vec![0; p.len()];
                for (i, &j) in p.iter().enumerate() {
                    inv[j] = i;
                }
                inv
            })
            .collect();
        // directions and exponential parts in the column order of sample 0
        let dirs: Vec<Option<DirectionSet>> =
            locs.iter().zip(&invs).map(|(l, inv)| l.directions.as_ref().map(|d| relabel(d, inv))).collect();
        let qs: Vec<Vec<QExp>> =
            locs.iter().zip(&perms).map(|(l, p)| p.iter().map(|&j| l.solution.q[j].clone()).collect()).collect();
        let collisions = match dirs.iter().cloned().collect::<Option<Vec<_>>>() {
            Some(d) => collision_check(&d, &qs),
            None => CollisionReport::default(),
        };
        // parameterized torus from the relations shared by all samples
        let joint = torus_generators_joint(&qs);
        let torus_degenerate: Vec<usize> = (0..n).filter(|&s| locs[s].torus.len() != joint.len()).collect();
        for (j, g) in joint.iter().enumerate() {
            let matrices = locs
                .iter()
                .zip(&perms)
                .map(|(l, p)| {
                    let mut d = CMat::identity(g.matrix.nrows(), g.matrix.nrows());
                    for (i, &col) in p.iter().enumerate() {
                        d[(col, col)] = g.action[i];
                    }
                    &l.transport * d * inverse(&l.transport).expect("transport")
                })
                .collect();
            families.push(GeneratorFamily {
                singularity: k,
                kind: GeneratorKind::Torus(j),
                matrices,
                angles: vec![None; n],
                checks: vec![0.0; n],
            });
        }
        families.push(GeneratorFamily {
            singularity: k,
            kind: GeneratorKind::Monodromy,
            matrices: locs.iter().map(|l| l.formal_monodromy.clone()).collect(),
            angles: vec![None; n],
            checks: locs.iter().map(|l| l.loop_check.as_ref().map_or(0.0, |c| c.deviation)).collect(),
        });
        // Stokes families keyed on sample 0
        let ref_loc = locs[0];
        let mut keys: Vec<(Vec<(usize, usize)>, usize, f64)> = Vec::new();
        for st in &ref_loc.stokes_local {
            let pairs = dirs[0].as_ref().map(|d| pairs_of(d, st.angle)).unwrap_or_default();
            let index = keys.iter().filter(|k| k.0 == pairs).count();
            keys.push((pairs, index, st.angle));
        }
        let mut fams: Vec<GeneratorFamily> = keys
            .iter()
            .map(|(pairs, index, _)| GeneratorFamily {
                singularity: k,
                kind: GeneratorKind::Stokes { pairs: pairs.clone(), index: *index },
                matrices: Vec::with_capacity(n),
                angles: Vec::with_capacity(n),
                checks: Vec::with_capacity(n),
            })
            .collect();
        for (s, l) in locs.iter().enumerate() {
            if l.stokes_local.len() != keys.len() {
                return Err(Error::Collision(format!(
                    "{} Stokes directions at sample {s} against {} at sample 0 for {}",
                    l.stokes_local.len(),
                    keys.len(),
                    label(l.point)
                )));
            }
            let period = l.directions.as_ref().map_or(2.0 * std::f64::consts::PI, |d| d.period());
            let dset = dirs[s].as_ref();
            let mut taken = vec![false; keys.len()];
            for (f, key) in keys.iter().enumerate() {
                let cand = (0..l.stokes_local.len())
                    .filter(|&i| !taken[i])
                    .filter(|&i| {
                        dset.map(|d| pairs_of(d, l.stokes_local[i].angle)).unwrap_or_default() == key.0
                    })
                    .min_by(|&a, &b| {
                        circ_dist(l.stokes_local[a].angle, key.2, period)
                            .total_cmp(&circ_dist(l.stokes_local[b].angle, key.2, period))
                    });
                let Some(i) = cand else {
                    return Err(Error::Collision(format!("Stokes family {:?} missing at sample {s}", key.0)));
                };
                taken[i] = true;
                fams[f].matrices.push(l.stokes[i].clone());
                fams[f].angles.push(Some(l.stokes_local[i].angle));
                fams[f].checks.push(l.stokes_local[i].constancy);
            }
        }
        families.extend(fams);
        singularities.push(SingularityTrack {
            label: label(locs[0].point),
            points: locs.iter().map(|l| l.point).collect(),
            transports: locs.iter().map(|l| l.transport.clone()).collect(),
            matching_radii: locs.iter().map(|l| l.matching_radius).collect(),
            collisions,
            torus_degenerate,
        });
    }
    Ok(GeneratorReport {
        params: grid.names().to_vec(),
        samples: grid.samples().to_vec(),
        per_sample,
        singularities,
        families,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    ConstantGenerators,
    /// One conjugator per sample taking its generators to those of sample 0.
    ConjugateConstant(Vec<CMat>),
    NonConstant(String),
    Inconclusive(String),
}

#[derive(Clone, Debug)]
pub struct IntegrabilityVerdict {
    pub verdict: Verdict,
    /// Per family, the largest relative deviation from sample 0.
    pub deviations: Vec<f64>,
    /// Largest verified residual `|B^{-1} G(s) B - G(0)| / |G(0)|` of the
    /// reported conjugators.
    pub conjugation_residual: Option<f64>,
    pub witness_residual: Option<f64>,
}

/// Candidate fields `A_1, ..., A_n` for the compatibility conditions
/// `d_i A_j - d_j A_i = A_i A_j - A_j A_i` with `A_0` the system and
/// `d_0 = d/dz`.
#[derive(Clone, Debug)]
pub struct Witnesses {
    pub fields: Vec<ParamSystem>,
}

fn rel(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1e-300)
}

fn sorted_spectrum(m: &CMat) -> Vec<C64> {
    let mut e = eigenvalues(m);
    e.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    e
}

/// Greedy matching distance between two spectra, relative to their size.
fn spectrum_gap(a: &[C64], b: &[C64]) -> f64 {
    let scale = a.iter().chain(b).map(|x| x.norm()).fold(1.0, f64::max);
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("same size");
        used[j] = true;
        worst = worst.max(d);
    }
    worst / scale
}

/// Solves `G_k(s) B = B G_k(0)` for all `k` in the least-squares sense and
/// returns a verified invertible solution.
fn conjugator(gs: &[&CMat], g0: &[&CMat], tol: f64, rng: &mut ChaCha8Rng) -> std::result::Result<CMat, Verdict> {
    let m = g0[0].nrows();
    let mm = m * m;
    let mut big = CMat::zeros(gs.len() * mm, mm);
    for (k, (a, b)) in gs.iter().zip(g0).enumerate() {
        let scale = max_abs(b).max(1e-300);
        // vec(A B - B C) = (I ⊗ A - C^T ⊗ I) vec(B), column-major vec
        for p in 0..m {
            for q in 0..m {
                let col = q * m + p;
                for i in 0..m {
                    big[(k * mm + q * m + i, col)] += a[(i, p)] / scale;
                    for j in 0..m {
                        if i == p {
                            big[(k * mm + j * m + i, col)] -= b[(q, j)] / scale;
                        }
                    }
                }
            }
        }
    }
    let ns = nullspace(&big, tol);
    if ns.ncols() == 0 {
        return Err(Verdict::NonConstant("no matrix intertwines the generators with those of sample 0".into()));
    }
    let mut v = CMat::zeros(mm, 1);
    if ns.ncols() == 1 {
        v = ns.columns(0, 1).into_owned();
    } else {
        for j in 0..ns.ncols() {
            v += ns.column(j) * c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let b = CMat::from_fn(m, m, |i, j| v[(j * m + i, 0)]);
    if cond(&b) > MAX_CONJUGATOR_COND {
        return Err(Verdict::Inconclusive("intertwiners found are singular".into()));
    }
    let bi = inverse(&b).map_err(|_| Verdict::Inconclusive("singular conjugator".into()))?;
    let res = gs.iter().zip(g0).map(|(a, c0)| rel(&(&bi * *a * &b), c0)).fold(0.0, f64::max);
    if res > tol {
        return Err(Verdict::Inconclusive(format!("conjugator residual {res:.2e} above tolerance")));
    }
    Ok(b)
}

/// Largest entry of the compatibility residuals over random `(z, t)`.
pub fn witness_residual(sys: &ParamSystem, w: &Witnesses, points: usize, seed: u64) -> Result<f64> {
    let m = sys.dim();
    let np = sys.params().len();
    if w.fields.len() != np {
        return invalid(format!("{} witnesses for {np} parameters", w.fields.len()));
    }
    if w.fields.iter().any(|f| f.dim() != m || f.params() != sys.params()) {
        return invalid("witness shape or parameters differ from the system");
    }
    let mut all: Vec<&ParamSystem> = vec![sys];
    all.extend(w.fields.iter());
    let var = |i: usize| if i == 0 { Var::Z } else { Var::Param(i - 1) };
    // symbolic residual entries for every pair i < j
    let mut res: Vec<Vec<Expr>> = Vec::new();
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let mut e = Vec::with_capacity(m * m);
            for r in 0..m {
                for col in 0..m {
                    let mut x = all[j].entry(r, col).partial(var(i)).sub(&all[i].entry(r, col).partial(var(j)));
                    for k in 0..m {
                        let ab = all[i].entry(r, k).mul(all[j].entry(k, col));
                        let ba = all[j].entry(r, k).mul(all[i].entry(k, col));
                        x = x.sub(&ab.sub(&ba));
                    }
                    e.push(x);
                }
            }
            res.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < points {
        let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let t: Vec<C64> = (0..np).map(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect();
        let vals: Result<Vec<C64>> = res.iter().flatten().map(|e| e.eval(&t, z)).collect();
        // skip points that land on a pole
        if let Ok(v) = vals {
            worst = v.iter().fold(worst, |a, x| a.max(x.norm()));
            done += 1;
        }
    }
    Ok(worst)
}

/// Tiered complete-integrability verdict: direct constancy, then an
/// eigenvalue obstruction, then a per-sample conjugator solve that is
/// verified before it is reported.
pub fn integrability_check(
    report: &GeneratorReport,
    witnesses: Option<(&ParamSystem, &Witnesses)>,
    tol: f64,
    seed: u64,
) -> Result<IntegrabilityVerdict> {
    let n = report.samples.len();
    if n < 3 {
        return invalid(format!("integrability check needs at least 3 samples, got {n}"));
    }
    let witness_residual = match witnesses {
        Some((sys, w)) => Some(witness_residual(sys, w, 20, seed)?),
        None => None,
    };
    let deviations: Vec<f64> = report
        .families
        .iter()
        .map(|f| (1..n).map(|s| rel(&f.matrices[s], &f.matrices[0])).fold(0.0, f64::max))
        .collect();
    let out = |verdict, conjugation_residual| IntegrabilityVerdict {
        verdict,
        deviations: deviations.clone(),
        conjugation_residual,
        witness_residual,
    };
    if deviations.iter().all(|&d| d <= tol) {
        return Ok(out(Verdict::ConstantGenerators, Some(0.0)));
    }
    for (f, fam) in report.families.iter().enumerate() {
        let s0 = sorted_spectrum(&fam.matrices[0]);
        for s in 1..n {
            let gap = spectrum_gap(&sorted_spectrum(&fam.matrices[s]), &s0);
            if gap > tol {
                let what = format!("spectrum of generator {f} ({:?}) moves by {gap:.3e} at sample {s}", fam.kind);
                return Ok(out(Verdict::NonConstant(what), None));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g0 = report.sample_generators(0);
    let mut conj = vec![CMat::identity(g0[0].nrows(), g0[0].nrows())];
    let mut worst: f64 = 0.0;
    for s in 1..n {
        match conjugator(&report.sample_generators(s), &g0, tol, &mut rng) {
            Ok(b) => {
                let bi = inverse(&b)?;
                let r = report
                    .sample_generators(s)
                    .iter()
                    .zip(&g0)
                    .map(|(a, c0)| rel(&(&bi * *a * &b), c0))
                    .fold(0.0, f64::max);
                worst = worst.max(r);
                conj.push(b);
            }
            Err(v) => return Ok(out(v, None)),
        }
    }
    Ok(out(Verdict::ConjugateConstant(conj), Some(worst)))
}

#[derive(Clone, Debug)]
pub struct IsomonodromyVerdict {
    pub isomonodromic: bool,
    /// Largest deviation from sample 0 over local monodromies and connection
    /// matrices.
    pub deviation: f64,
    pub monodromy_deviation: f64,
    pub connection_deviation: f64,
    /// `C_{ij}` per sample, with `(i, j)` indices of the singular points.
    pub connections: Vec<Vec<((usize, usize), CMat)>>,
    /// Largest z-constancy deviation of the connection matrices.
    pub constancy: f64,
}

/// Local monodromies and connection matrices `C_ij = U_i^{-1} U_j` of a
/// regular singular system compared across the grid.
pub fn isomonodromy_check(sys: &ParamSystem, grid: &ParameterGrid, opts: ReportOptions, tol: f64) -> Result<IsomonodromyVerdict> {
    if grid.len() < 2 {
        return invalid("isomonodromy check needs at least 2 samples");
    }
    let report = generator_report(sys, grid, opts)?;
    for g in &report.per_sample {
        for l in &g.local {
            if !l.solution.levels().is_empty() {
                return invalid(format!("irregular singular point at {}: no regular singular covering", label(l.point)));
            }
        }
    }
    let n = grid.len();
    let k = report.singularities.len();
    let mut connections = Vec::with_capacity(n);
    let mut constancy: f64 = 0.0;
    for (s, t) in grid.samples().iter().enumerate() {
        let field = Field::global(sys, t)?;
        let base = report.per_sample[s].base;
        let tr = &report.singularities;
        let mut cs = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let cd = connection_matrix(&field, &tr[i].transports[s], &tr[j].transports[s], base, (&tr[i].label, &tr[j].label), s)?;
                constancy = constancy.max(cd.deviation);
                cs.push(((i, j), cd.matrix));
            }
        }
        connections.push(cs);
    }
    let mut conn_dev: f64 = 0.0;
    for s in 1..n {
        for (a, b) in connections[s].iter().zip(&connections[0]) {
            conn_dev = conn_dev.max(rel(&a.1, &b.1));
        }
    }
    // local monodromies in the local bases
    let mut mono_dev: f64 = 0.0;
    let by_sample: Vec<Vec<CMat>> = report
        .per_sample
        .iter()
        .map(|g| g.local.iter().map(|l| l.solution.formal_monodromy()).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    for s in 1..n {
        for (a, b) in by_sample[s].iter().zip(&by_sample[0]) {
            mono_dev = mono_dev.max(rel(a, b));
        }
    }
    let deviation = conn_dev.max(mono_dev);
    Ok(IsomonodromyVerdict {
        isomonodromic: deviation <= tol,
        deviation,
        monodromy_deviation: mono_dev,
        connection_deviation: conn_dev,
        connections,
        constancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(v: &[C64]) -> ParameterGrid {
        ParameterGrid::single(v).unwrap()
    }

    #[test]
    fn intertwiner_of_scaled_stokes() {
        // [[1, b t], [0, 1]] is conjugate to [[1, b], [0, 1]] by diag(t, 1)
        let st = |x: C64| CMat::from_row_slice(2, 2, &[c(1.0, 0.0), x, c(0.0, 0.0), c(1.0, 0.0)]);
        let tor = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
        let a = [st(c(0.0, 3.0)), tor.clone()];
        let b = [st(c(0.0, 1.0)), tor];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bm = conjugator(&[&a[0], &a[1]], &[&b[0], &b[1]], 1e-9, &mut rng).unwrap();
        let bi = inverse(&bm).unwrap();
        assert!(rel(&(&bi * &a[0] * &bm), &b[0]) < 1e-12);
        // different spectra cannot be intertwined
        let d = |x: f64| CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(x, 0.0), c(1.0 / x, 0.0)]));
        let r = conjugator(&[&d(2.0)], &[&d(3.0)], 1e-9, &mut rng);
        assert!(matches!(r, Err(Verdict::NonConstant(_))));
    }

    #[test]
    fn diagonal_irregular_system_is_integrable() {
        let sys = ParamSystem::parse(&["-t1/z^2", "0", "0", "-t2/z^2"], &["t1", "t2"]).unwrap();
        let grid = ParameterGrid::new(
            vec!["t1".into(), "t2".into()],
            vec![vec![c(1.0, 0.0), c(0.5, 1.0)], vec![c(1.2, 0.3), c(0.4, 0.9)], vec![c(0.9, -0.2), c(0.7, 1.1)]],
        )
        .unwrap();
        let rep = generator_report(&sys, &grid, ReportOptions::default()).unwrap();
        let w = Witnesses {
            fields: vec![
                ParamSystem::parse(&["1/z", "0", "0", "0"], &["t1", "t2"]).unwrap(),
                ParamSystem::parse(&["0", "0", "0", "1/z"], &["t1", "t2"]).unwrap(),
            ],
        };
        let v = integrability_check(&rep, Some((&sys, &w)), GALOIS_TOL, 7).unwrap();
        assert_eq!(v.verdict, Verdict::ConstantGenerators, "{:?}", v.deviations);
        assert!(v.witness_residual.unwrap() <= 1e-12);
        // a wrong witness leaves a residual
        let bad = Witnesses { fields: vec![w.fields[1].clone(), w.fields[0].clone()] };
        assert!(witness_residual(&sys, &bad, 5, 1).unwrap() > 1e-3);
    }

    #[test]
    fn isomonodromy_of_simple_fuchsian_systems() {
        let grid = grid1(&[c(0.2, 0.0), c(0.35, 0.1), c(0.5, -0.1)]);
        let cst = ParamSystem::parse(&["0.3/z", "1/z", "0", "-0.2/z"], &["t"]).unwrap();
        let v = isomonodromy_check(&cst, &grid, ReportOptions::default(), 1e-6).unwrap();
        assert!(v.isomonodromic && v.deviation <= 1e-6, "{}", v.deviation);
        let var = ParamSystem::parse(&["t/z"], &["t"]).unwrap();
        let v = isomonodromy_check(&var, &grid, ReportOptions::default(), 1e-6).unwrap();
        let bound = (C64::from_polar(1.0, 2.0 * std::f64::consts::PI * 0.2)
            - (c(0.0, 2.0 * std::f64::consts::PI) * c(0.35, 0.1)).exp())
        .norm();
        assert!(!v.isomonodromic && v.deviation >= 0.5 * bound);
        assert!(isomonodromy_check(&var, &grid1(&[c(0.2, 0.0)]), ReportOptions::default(), 1e-6).is_err());
    }

    #[test]
    fn bessel_is_not_integrable() {
        let sys = ParamSystem::parse(&["0", "1", "(t^2-z^2)/z^2", "-1/z"], &["t"]).unwrap();
        let grid = grid1(&[c(0.3, 0.0), c(0.3, 0.1), c(0.35, 0.0)]);
        let rep = generator_report(&sys, &grid, ReportOptions::default()).unwrap();
        let v = integrability_check(&rep, None, GALOIS_TOL, 1).unwrap();
        assert!(matches!(v.verdict, Verdict::NonConstant(_)), "{:?}", v.verdict);
        for f in &rep.families {
            for m in &f.matrices {
                assert!((m.determinant() - 1.0).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn euler_generators_are_conjugate_to_constants() {
        // solutions depend on t z only, so A_1 = (z/t) A_0 + diag(0, 1/t) is a witness
        let sys = ParamSystem::parse(&["0", "1", "-1/(t*z^3)", "1/(t*z^2)-1/z"], &["t"]).unwrap();
        let grid = grid1(&[c(1.0, 0.0), c(1.0, 1.0), C64::from_polar(2.0, std::f64::consts::FRAC_PI_3)]);
        let rep = generator_report(&sys, &grid, ReportOptions::default()).unwrap();
        for f in &rep.families {
            assert!(f.checks.iter().all(|&x| x < 1e-4), "{:?} {:?}", f.kind, f.checks);
        }
        let w = Witnesses { fields: vec![ParamSystem::parse(&["0", "z/t", "-1/(t^2*z^2)", "1/(t^2*z)"], &["t"]).unwrap()] };
        let v = integrability_check(&rep, Some((&sys, &w)), GALOIS_TOL, 3).unwrap();
        assert!(v.witness_residual.unwrap() < 1e-12, "{:?}", v.witness_residual);
        assert!(v.deviations.iter().any(|&d| d > 0.1));
        assert!(matches!(v.verdict, Verdict::ConjugateConstant(_)), "{:?}", v.verdict);
    }
}
