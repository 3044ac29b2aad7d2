//! One function per command. Each returns the structured result, the
//! human-readable lines and the CSV rows of sampled lateral sums.

use crate::job::{Command, Job};
use num_complex::Complex64 as C64;
use parastokes::directions::{collision_check, singular_directions, CollisionReport, DirectionSet};
use parastokes::galois::{
    generator_report, integrability_check, isomonodromy_check, GeneratorKind, GeneratorReport, ReportOptions, Verdict,
    Witnesses,
};
use parastokes::linalg::CMat;
use parastokes::stokes::{convergence_check, Convergence, LocalProblem, StokesData};
use parastokes::summation::{lateral_solution, make_plan, Side};
use parastokes::{formal_at, FormalSolution, Origin, Result};
use serde_json::{json, Value};

pub const FORMAT_VERSION: u32 = 1;

pub struct Outcome {
    pub json: Value,
    pub text: Vec<String>,
    pub csv: Vec<CsvRow>,
    /// Collision or degeneracy that aborts without `--force`.
    pub degenerate: Option<String>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CsvRow {
    pub z_re: f64,
    pub z_im: f64,
    pub entry: String,
    pub side: String,
    pub value_re: f64,
    pub value_im: f64,
    pub err: f64,
}

pub fn cjson(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn mjson(m: &CMat) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| cjson(m[(i, j)])).collect())).collect())
}

fn origin_json(o: Origin<f64>) -> Value {
    match o {
        Origin::Infinity => json!("inf"),
        Origin::Point(p) => cjson(p),
    }
}

fn origin_text(o: Origin<f64>) -> String {
    match o {
        Origin::Infinity => "inf".into(),
        Origin::Point(p) => format!("{:.6}{:+.6}i", p.re, p.im),
    }
}

fn to_global(o: Origin<f64>, w: C64) -> C64 {
    match o {
        Origin::Point(a) => a + w,
        Origin::Infinity => w.inv(),
    }
}

fn fmt_c(z: C64) -> String {
    format!("{:.10}{:+.10}i", z.re, z.im)
}

fn fmt_m(m: &CMat) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| fmt_c(m[(i, j)])).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[[{}]]", rows.join("], ["))
}

fn report_options(job: &Job) -> ReportOptions {
    ReportOptions { order: job.options.order, base: job.options.base, clearance: job.options.clearance }
}

/// Formal solutions at every singular point of one sample.
fn local_solutions(job: &Job, t: &[C64]) -> Result<Vec<(usize, FormalSolution)>> {
    job.system
        .singularities(t)?
        .into_iter()
        .map(|s| Ok((s.pole_order, formal_at(&job.system, t, s.point, job.options.order)?)))
        .collect()
}

fn collisions_json(c: &CollisionReport) -> Value {
    json!({
        "clean": c.is_clean(),
        "coincidences": c.coincidences.iter().map(|x| json!({
            "sample": x.sample, "angle": x.angle, "pairs": [[x.pairs.0.0, x.pairs.0.1], [x.pairs.1.0, x.pairs.1.1]],
        })).collect::<Vec<_>>(),
        "degeneracies": c.degeneracies.iter().map(|x| json!({
            "sample": x.sample, "pair": [x.pair.0, x.pair.1], "level": x.level.to_string(),
            "generic_level": x.generic_level.to_string(),
        })).collect::<Vec<_>>(),
    })
}

fn directions_json(d: &DirectionSet) -> Value {
    json!({
        "nu": d.nu,
        "period": d.period(),
        "directions": d.directions.iter().map(|x| json!({
            "angle": x.angle, "pair": [x.pair.0, x.pair.1], "level": x.level.to_string(),
        })).collect::<Vec<_>>(),
        "dropped_terms": d.dropped_terms.iter().map(|p| json!([p.0, p.1])).collect::<Vec<_>>(),
    })
}

pub fn analyze(job: &Job) -> Result<Outcome> {
    let mut text = vec![format!("analyze: {} samples", job.grid.len())];
    let mut per_sample = Vec::new();
    // (point, sample, directions, q) for the collision check per point
    let mut tracks: Vec<(Origin<f64>, Vec<DirectionSet>, Vec<Vec<parastokes::QExp>>)> = Vec::new();
    let mut csv = Vec::new();
    for (s, t) in job.grid.samples().iter().enumerate() {
        let mut pts = Vec::new();
        for (pole, sol) in local_solutions(job, t)? {
            let dirs = directions_or_empty(&sol, s);
            let levels: Vec<String> = sol.levels().iter().map(|l| l.to_string()).collect();
            text.push(format!(
                "  sample {s} point {}: pole order {pole}, levels [{}], {} singular directions, residual {:.2e}",
                origin_text(sol.origin),
                levels.join(", "),
                dirs.directions.len(),
                sol.residual
            ));
            for d in &dirs.directions {
                text.push(format!("    direction {:.12} pair ({}, {}) level {}", d.angle, d.pair.0, d.pair.1, d.level));
            }
            csv.extend(on_ray_rows(job, t, &sol, Some(&dirs)));
            pts.push(json!({
                "point": origin_json(sol.origin),
                "pole_order": pole,
                "levels": levels,
                "ramification": sol.nu,
                "exponential_parts": sol.q.iter().map(|q| q.terms().iter().map(|(e, c)| json!({
                    "exponent": e.to_string(), "coefficient": cjson(*c),
                })).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "l": mjson(&sol.l),
                "formal_residual": sol.residual,
                "directions": directions_json(&dirs),
            }));
            match tracks.iter_mut().find(|x| origin_close(x.0, sol.origin)) {
                Some(tr) => {
                    tr.1.push(dirs);
                    tr.2.push(sol.q.clone());
                }
                None => tracks.push((sol.origin, vec![dirs], vec![sol.q.clone()])),
            }
        }
        per_sample.push(json!({ "sample": s, "t": t.iter().map(|x| cjson(*x)).collect::<Vec<_>>(), "points": pts }));
    }
    let mut coll = Vec::new();
    let mut degenerate = None;
    for (o, dirs, qs) in &tracks {
        let rep = collision_check(dirs, qs);
        let partial = dirs.len() != job.grid.len();
        if !rep.is_clean() || partial {
            let why = if partial {
                format!("point {} is singular at only {} of {} samples", origin_text(*o), dirs.len(), job.grid.len())
            } else {
                format!(
                    "point {}: {} coincidences, {} level degeneracies",
                    origin_text(*o),
                    rep.coincidences.len(),
                    rep.degeneracies.len()
                )
            };
            text.push(format!("  flag: {why}"));
            degenerate.get_or_insert(why);
        }
        coll.push(json!({ "point": origin_json(*o), "report": collisions_json(&rep) }));
    }
    Ok(Outcome {
        json: json!({ "samples": per_sample, "collisions": coll, "degeneracy": degenerate.is_some() }),
        text,
        csv,
        degenerate,
    })
}

/// Directions of a point whose exponential parts all coincide are empty.
fn directions_or_empty(sol: &FormalSolution, sample: usize) -> DirectionSet {
    singular_directions(&sol.q, sol.nu, sample).unwrap_or(DirectionSet {
        sample,
        nu: sol.nu,
        directions: Vec::new(),
        dropped_terms: Vec::new(),
    })
}

fn origin_close(a: Origin<f64>, b: Origin<f64>) -> bool {
    match (a, b) {
        (Origin::Point(x), Origin::Point(y)) => (x - y).norm() < 1e-8,
        (Origin::Infinity, Origin::Infinity) => true,
        _ => false,
    }
}

/// Lateral sums on a non-singular ray at three radii, for plotting.
fn on_ray_rows(job: &Job, t: &[C64], sol: &FormalSolution, dirs: Option<&DirectionSet>) -> Vec<CsvRow> {
    let d = parastokes::continuation::nonsingular_direction(dirs);
    let levels = sol.levels();
    let lv = if levels.is_empty() { vec![parastokes::Rational::from(1)] } else { levels };
    let Ok(plan) = make_plan(&lv, d, Side::OnRay) else { return Vec::new() };
    let b = |w: C64| job.system.local_matrix(t, sol.origin, w);
    let pts: Vec<(f64, f64)> = [0.05, 0.1, 0.2].iter().map(|&r| (r, d)).collect();
    match lateral_solution(sol, &b, &plan, &pts) {
        Ok(l) => rows_of(sol.origin, &l.points, &l.f, &l.errors, "on"),
        Err(_) => Vec::new(),
    }
}

fn rows_of(o: Origin<f64>, pts: &[(f64, f64)], f: &[CMat], err: &[CMat], side: &str) -> Vec<CsvRow> {
    let mut out = Vec::new();
    for ((p, m), e) in pts.iter().zip(f).zip(err) {
        let z = to_global(o, C64::from_polar(p.0, p.1));
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.push(CsvRow {
                    z_re: z.re,
                    z_im: z.im,
                    entry: format!("{i}{j}"),
                    side: side.into(),
                    value_re: m[(i, j)].re,
                    value_im: m[(i, j)].im,
                    err: e[(i, j)].norm(),
                });
            }
        }
    }
    out
}

/// The two lateral sums behind one Stokes matrix.
fn stokes_rows(job: &Job, t: &[C64], sol: &FormalSolution, st: &StokesData) -> Vec<CsvRow> {
    let b = |w: C64| job.system.local_matrix(t, sol.origin, w);
    let mut out = Vec::new();
    for (side, name) in [(Side::Minus, "minus"), (Side::Plus, "plus")] {
        let Ok(plan) = make_plan(&sol.levels(), st.angle, side) else { continue };
        if let Ok(l) = lateral_solution(sol, &b, &plan.with_offset(st.offset), &st.samples) {
            out.extend(rows_of(sol.origin, &l.points, &l.f, &l.errors, name));
        }
    }
    out
}

fn stokes_json(st: &StokesData) -> Value {
    json!({
        "angle": st.angle,
        "pairs": st.directions.iter().map(|d| json!([d.pair.0, d.pair.1])).collect::<Vec<_>>(),
        "matrix": mjson(&st.matrix),
        "constancy": st.constancy,
        "max_residual": st.max_residual,
        "offset": st.offset,
        "z_samples": st.samples.iter().map(|p| json!([p.0, p.1])).collect::<Vec<_>>(),
        "unipotent": st.is_unipotent(1e-6),
        "ordering_violations": st.ordering_violations().iter().map(|p| json!([p.0, p.1])).collect::<Vec<_>>(),
    })
}

pub fn stokes(job: &Job) -> Result<Outcome> {
    let mut text = vec![format!("stokes: {} samples", job.grid.len())];
    let mut per_sample = Vec::new();
    let mut csv = Vec::new();
    for (s, t) in job.grid.samples().iter().enumerate() {
        let mut pts = Vec::new();
        for (_, sol) in local_solutions(job, t)? {
            if sol.levels().is_empty() {
                continue;
            }
            let dirs = singular_directions(&sol.q, sol.nu, s)?;
            let lp = LocalProblem { sys: &job.system, t: t.to_vec(), sol: &sol, dirs: &dirs };
            let all: Vec<StokesData> = match (&job.options.radii, job.options.offset) {
                (None, None) => lp.all_stokes()?,
                (radii, offset) => {
                    let mut angles: Vec<f64> = dirs.angles();
                    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
                    angles
                        .iter()
                        .map(|&a| match radii {
                            Some(r) => {
                                let pts: Vec<(f64, f64)> = r.iter().map(|&x| (x, a)).collect();
                                lp.stokes_at_points(a, offset.unwrap_or_else(|| lp.default_offset(a)), &pts)
                            }
                            None => lp.stokes_at(a, offset),
                        })
                        .collect::<Result<_>>()?
                }
            };
            let conv = convergence_check(&sol, &all)?;
            text.push(format!(
                "  sample {s} point {}: {} Stokes matrices, {}",
                origin_text(sol.origin),
                all.len(),
                if conv.verdict == Convergence::Convergent { "convergent" } else { "divergent" }
            ));
            for st in &all {
                text.push(format!(
                    "    angle {:.12}: {} constancy {:.2e} residual {:.2e}",
                    st.angle,
                    fmt_m(&st.matrix),
                    st.constancy,
                    st.max_residual
                ));
                csv.extend(stokes_rows(job, t, &sol, st));
            }
            pts.push(json!({
                "point": origin_json(sol.origin),
                "stokes": all.iter().map(stokes_json).collect::<Vec<_>>(),
                "convergence": if conv.verdict == Convergence::Convergent { "convergent" } else { "divergent" },
                "max_stokes_deviation": conv.max_stokes_deviation,
                "nontrivial_angles": conv.nontrivial,
            }));
        }
        per_sample.push(json!({ "sample": s, "t": t.iter().map(|x| cjson(*x)).collect::<Vec<_>>(), "points": pts }));
    }
    Ok(Outcome { json: json!({ "samples": per_sample }), text, csv, degenerate: None })
}

fn run_report(job: &Job) -> Result<GeneratorReport> {
    generator_report(&job.system, &job.grid, report_options(job))
}

fn report_flag(rep: &GeneratorReport) -> Option<String> {
    rep.has_degeneracy().then(|| {
        let s: Vec<String> = rep
            .singularities
            .iter()
            .filter(|s| !s.collisions.is_clean() || !s.torus_degenerate.is_empty())
            .map(|s| s.label.clone())
            .collect();
        format!("collision or torus degeneracy at {}", s.join(", "))
    })
}

fn report_rows(job: &Job, rep: &GeneratorReport) -> Vec<CsvRow> {
    let mut out = Vec::new();
    for (t, g) in rep.samples.iter().zip(&rep.per_sample) {
        for l in &g.local {
            out.extend(on_ray_rows(job, t, &l.solution, l.directions.as_ref()));
        }
    }
    out
}

fn kind_json(k: &GeneratorKind) -> Value {
    match k {
        GeneratorKind::Monodromy => json!({ "type": "monodromy" }),
        GeneratorKind::Torus(i) => json!({ "type": "torus", "index": i }),
        GeneratorKind::Stokes { pairs, index } => json!({
            "type": "stokes", "pairs": pairs.iter().map(|p| json!([p.0, p.1])).collect::<Vec<_>>(), "index": index,
        }),
    }
}

fn report_json(rep: &GeneratorReport) -> Value {
    json!({
        "base": rep.per_sample.iter().map(|g| cjson(g.base)).collect::<Vec<_>>(),
        "singularities": rep.singularities.iter().map(|s| json!({
            "label": s.label,
            "points": s.points.iter().map(|p| origin_json(*p)).collect::<Vec<_>>(),
            "transports": s.transports.iter().map(mjson).collect::<Vec<_>>(),
            "matching_radii": s.matching_radii,
            "collisions": collisions_json(&s.collisions),
            "torus_degenerate_samples": s.torus_degenerate,
        })).collect::<Vec<_>>(),
        "generators": rep.families.iter().map(|f| json!({
            "singularity": f.singularity,
            "kind": kind_json(&f.kind),
            "matrices": f.matrices.iter().map(mjson).collect::<Vec<_>>(),
            "angles": f.angles,
            "checks": f.checks,
        })).collect::<Vec<_>>(),
    })
}

pub fn report(job: &Job) -> Result<Outcome> {
    let rep = run_report(job)?;
    let mut text = vec![format!("report: {} samples, {} generator families", rep.samples.len(), rep.families.len())];
    for f in &rep.families {
        let label = &rep.singularities[f.singularity].label;
        for (s, m) in f.matrices.iter().enumerate() {
            text.push(format!("  {label} {:?} sample {s}: {} check {:.2e}", f.kind, fmt_m(m), f.checks[s]));
        }
    }
    let degenerate = report_flag(&rep);
    Ok(Outcome { json: report_json(&rep), text, csv: report_rows(job, &rep), degenerate })
}

pub fn monodromy(job: &Job) -> Result<Outcome> {
    let mut text = vec![format!("monodromy: {} samples", job.grid.len())];
    let mut per_sample = Vec::new();
    let mut csv = Vec::new();
    for (s, t) in job.grid.samples().iter().enumerate() {
        let g = parastokes::continuation::global_generators(
            &job.system,
            t,
            s,
            job.options.base,
            job.options.order,
            job.options.clearance,
        )?;
        let mut pts = Vec::new();
        for l in &g.local {
            let local = l.solution.formal_monodromy()?;
            csv.extend(on_ray_rows(job, t, &l.solution, l.directions.as_ref()));
            let check = l.loop_check.as_ref();
            text.push(format!(
                "  sample {s} point {}: formal {} loop deviation {}",
                origin_text(l.point),
                fmt_m(&local),
                check.map_or("n/a".to_string(), |c| format!("{:.2e}", c.deviation))
            ));
            pts.push(json!({
                "point": origin_json(l.point),
                "formal_monodromy_local": mjson(&local),
                "formal_monodromy_base": mjson(&l.formal_monodromy),
                "loop_monodromy": check.map(|c| mjson(&c.measured)),
                "predicted_from_stokes": check.map(|c| mjson(&c.predicted)),
                "loop_deviation": check.map(|c| c.deviation),
                "matching_radius": l.matching_radius,
            }));
        }
        per_sample.push(json!({
            "sample": s, "t": t.iter().map(|x| cjson(*x)).collect::<Vec<_>>(), "base": cjson(g.base), "points": pts,
        }));
    }
    Ok(Outcome { json: json!({ "samples": per_sample }), text, csv, degenerate: None })
}

pub fn integrability(job: &Job, seed: u64) -> Result<Outcome> {
    let rep = run_report(job)?;
    let w = job.witnesses.as_ref().map(|f| Witnesses { fields: f.clone() });
    let v = integrability_check(&rep, w.as_ref().map(|w| (&job.system, w)), job.options.tol, seed)?;
    let (name, extra) = match &v.verdict {
        Verdict::ConstantGenerators => ("constant-generators", Value::Null),
        Verdict::ConjugateConstant(b) => ("conjugate-constant", json!(b.iter().map(mjson).collect::<Vec<_>>())),
        Verdict::NonConstant(why) => ("non-constant", json!(why)),
        Verdict::Inconclusive(why) => ("inconclusive", json!(why)),
    };
    let mut text = vec![format!("integrability: {name}")];
    if let Value::String(s) = &extra {
        text.push(format!("  {s}"));
    }
    if let Some(r) = v.witness_residual {
        text.push(format!("  witness residual {r:.2e}"));
    }
    let degenerate = report_flag(&rep);
    Ok(Outcome {
        json: json!({
            "verdict": name,
            "detail": extra,
            "deviations": v.deviations,
            "conjugation_residual": v.conjugation_residual,
            "witness_residual": v.witness_residual,
            "report": report_json(&rep),
        }),
        text,
        csv: report_rows(job, &rep),
        degenerate,
    })
}

pub fn isomonodromy(job: &Job) -> Result<Outcome> {
    let v = isomonodromy_check(&job.system, &job.grid, report_options(job), job.options.tol)?;
    let mut csv = Vec::new();
    for t in job.grid.samples() {
        for (_, sol) in local_solutions(job, t)? {
            csv.extend(on_ray_rows(job, t, &sol, None));
        }
    }
    let text = vec![
        format!("isomonodromy: {}", if v.isomonodromic { "isomonodromic" } else { "not isomonodromic" }),
        format!("  monodromy deviation {:.3e}", v.monodromy_deviation),
        format!("  connection deviation {:.3e}", v.connection_deviation),
        format!("  connection z-constancy {:.3e}", v.constancy),
    ];
    Ok(Outcome {
        json: json!({
            "isomonodromic": v.isomonodromic,
            "deviation": v.deviation,
            "monodromy_deviation": v.monodromy_deviation,
            "connection_deviation": v.connection_deviation,
            "connection_constancy": v.constancy,
            "connections": v.connections.iter().map(|cs| cs.iter().map(|((i, j), m)| json!({
                "pair": [i, j], "matrix": mjson(m),
            })).collect::<Vec<_>>()).collect::<Vec<_>>(),
        }),
        text,
        csv,
        degenerate: None,
    })
}

pub fn run(cmd: Command, job: &Job, seed: u64) -> Result<Outcome> {
    match cmd {
        Command::Analyze => analyze(job),
        Command::Stokes => stokes(job),
        Command::Monodromy => monodromy(job),
        Command::Report => report(job),
        Command::Integrability => integrability(job, seed),
        Command::Isomonodromy => isomonodromy(job),
    }
}

