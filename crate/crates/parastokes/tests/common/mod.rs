//! Property checks shared by `properties.rs` and the acceptance suite. Each
//! runs a fixed-seed proptest runner and returns the first failure.

#![allow(dead_code)]

use nalgebra::DMatrix;
use parastokes::continuation::{integrate_path, Field, Path, Segment};
use parastokes::directions::singular_directions;
use parastokes::stokes::{torus_generators, LocalProblem};
use parastokes::{formal_at, Origin, ParamSystem, Rational, Series, C64};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub const SEED: [u8; 32] = *b"parastokes-property-suite-seed-1";

pub const EULER: [&str; 4] = ["0", "1", "-1/(t*z^3)", "1/(t*z^2)-1/z"];
pub const BESSEL: [&str; 4] = ["0", "1", "(t^2-z^2)/z^2", "-1/z"];

type CMat = DMatrix<C64>;

pub fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &SEED))
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn complex(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(a, b)| C64::new(a, b))
}

fn series(len: usize) -> impl Strategy<Value = Series> {
    (proptest::collection::vec(complex(2.0), len), 1u32..3, -2i64..2).prop_map(|(cs, nu, val)| Series::from_complex(nu, val, &cs))
}

/// Largest coefficient difference relative to the largest coefficient.
fn series_dist(a: &Series, b: &Series) -> f64 {
    let lo = a.val().min(b.val());
    let hi = a.order().min(b.order());
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for n in lo..=hi {
        diff = diff.max((a.coeff_c(n) - b.coeff_c(n)).norm());
        scale = scale.max(a.coeff_c(n).norm()).max(b.coeff_c(n).norm());
    }
    diff / scale.max(1e-300)
}

fn abs_series(a: &Series) -> Series {
    let cs: Vec<C64> = (a.val()..=a.order()).map(|n| C64::new(a.coeff_c(n).norm(), 0.0)).collect();
    Series::from_complex(a.nu(), a.val(), &cs)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

pub fn ring_axioms() -> Result<(), String> {
    runner(64)
        .run(&(series(12), series(12), series(12)), |(a, b, c)| {
            let assoc = series_dist(&a.add(&b).add(&c), &a.add(&b.add(&c)));
            ensure(assoc <= 1e-12, || format!("(a+b)+c vs a+(b+c): {assoc:.2e}"))?;
            let comm = series_dist(&a.mul(&b), &b.mul(&a));
            ensure(comm <= 1e-12, || format!("ab vs ba: {comm:.2e}"))?;
            let dist = series_dist(&a.mul(&b.add(&c)), &a.mul(&b).add(&a.mul(&c)));
            ensure(dist <= 1e-12, || format!("a(b+c) vs ab+ac: {dist:.2e}"))?;
            if a.coeff_c(a.val()).norm() > 0.1 {
                let inv = a.invert().map_err(|e| TestCaseError::fail(e.to_string()))?;
                let one = Series::constant(C64::new(1.0, 0.0), a.order() - a.val()).with_nu(a.nu());
                let prod = a.mul(&inv);
                // relative to sum |a_i| |b_{n-i}|, the size of the terms that cancel
                let size = abs_series(&a).mul(&abs_series(&inv));
                for n in prod.val()..=prod.order() {
                    let d = (prod.coeff_c(n) - one.coeff_c(n)).norm() / size.coeff_c(n).norm();
                    ensure(d <= 1e-12, || format!("a invert(a) vs 1 at {n}: {d:.2e}"))?;
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn borel_linearity() -> Result<(), String> {
    let levels = prop_oneof![Just((1, 1)), Just((3, 2)), Just((2, 1)), Just((5, 2))];
    let s = (proptest::collection::vec(complex(3.0), 30), proptest::collection::vec(complex(3.0), 30));
    runner(64)
        .run(&(s, complex(2.0), complex(2.0), levels), |((ca, cb), x, y, (p, q))| {
            let k = Rational::new(p, q);
            let a = Series::from_complex(1, 0, &ca);
            let b = Series::from_complex(1, 0, &cb);
            let bt = |s: &Series| s.borel_transform(k).map_err(|e| TestCaseError::fail(e.to_string()));
            let lhs = bt(&a.scale(x).add(&b.scale(y)))?;
            let rhs = bt(&a)?.scale(x).add(&bt(&b)?.scale(y));
            // one rounding per coefficient on each side
            for n in 0..30 {
                let (l, r) = (lhs.coeff_c(n), rhs.coeff_c(n));
                let tol = 8.0 * f64::EPSILON * (l.norm() + r.norm() + 1e-300);
                ensure((l - r).norm() <= tol, || format!("k={k} n={n}: {l} vs {r}"))?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn bessel_field_case() -> impl Strategy<Value = (C64, f64, f64, f64)> {
    // parameter, end point modulus, start and end angles inside (-1.2, 1.2)
    (complex(0.45), 0.6f64..2.5, -1.2f64..1.2, -1.2f64..1.2).prop_map(|(t, r, a, b)| (t + 0.5, r, a, b))
}

/// Reversal and homotopy invariance in the right half plane, where the
/// only singular point 0 is not enclosed.
pub fn path_reversal_and_homotopy() -> Result<(), String> {
    let sys = ParamSystem::parse(&BESSEL, &["t"]).unwrap();
    let tol = 1e-10;
    runner(24)
        .run(&bessel_field_case(), |(t, r, a, b)| {
            let f = Field::global(&sys, &[t]).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let start = C64::from_polar(1.0, a);
            let end = C64::from_polar(r, b);
            let y0 = CMat::identity(2, 2);
            let run = |p: &Path, y: &CMat| integrate_path(&f, p, y, tol).map_err(|e| TestCaseError::fail(e.to_string()));
            let arc = Path::new(vec![
                Segment::Arc { center: C64::new(0.0, 0.0), radius: 1.0, from: a, to: b },
                Segment::Line(C64::from_polar(1.0, b), end),
            ]);
            let fwd = run(&arc, &y0)?;
            let back = run(&arc.reversed(), &fwd.y)?;
            let rev = max_abs(&(&back.y - &y0)) / max_abs(&y0);
            // the error estimate is relative to the growth along the path
            let growth = max_abs(&fwd.y).max(1.0);
            ensure(rev <= 2.0 * tol * growth, || format!("reversal {rev:.2e}"))?;
            let chord = run(&Path::line(start, end), &y0)?;
            let hom = max_abs(&(&chord.y - &fwd.y)) / max_abs(&fwd.y);
            ensure(hom <= 2.0 * tol * growth, || format!("homotopy {hom:.2e}"))?;
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn abel_liouville() -> Result<(), String> {
    let sys = ParamSystem::parse(&BESSEL, &["t"]).unwrap();
    let y0 = (complex(1.0), complex(1.0)).prop_map(|(a, b)| {
        CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0) + a, b, C64::new(0.0, 0.5), C64::new(1.0, 0.0) - a])
    });
    runner(24)
        .run(&(bessel_field_case(), y0), |((t, r, a, b), y0)| {
            let f = Field::global(&sys, &[t]).map_err(|e| TestCaseError::fail(e.to_string()))?;
            // an arc that may wind partly around the origin
            let p = Path::new(vec![
                Segment::Arc { center: C64::new(0.0, 0.0), radius: 1.0, from: a, to: b + 3.0 },
                Segment::Line(C64::from_polar(1.0, b + 3.0), C64::from_polar(r, b + 3.0)),
            ]);
            let out = integrate_path(&f, &p, &y0, 1e-10).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let lhs = out.y.determinant();
            let rhs = y0.determinant() * out.trace_integral.exp();
            let err = (lhs - rhs).norm() / rhs.norm();
            ensure(err <= 1e-8, || format!("det identity off by {err:.2e}"))
        })
        .map_err(|e| e.to_string())
}

/// All Stokes matrices of the Euler and Bessel fixtures at random parameters.
pub fn stokes_unipotent_and_constant() -> Result<(), String> {
    let euler = ParamSystem::parse(&EULER, &["t"]).unwrap();
    let bessel = ParamSystem::parse(&BESSEL, &["t"]).unwrap();
    let case = (any::<bool>(), 0.6f64..1.6, -PI_..PI_);
    runner(8)
        .run(&case, |(which, m, a)| {
            let (sys, origin, t) = if which {
                (&euler, Origin::Point(C64::new(0.0, 0.0)), C64::from_polar(m, a))
            } else {
                (&bessel, Origin::Infinity, C64::new(0.2 + 0.2 * m, 0.1 * a))
            };
            let fail = |e: parastokes::Error| TestCaseError::fail(e.to_string());
            let sol = formal_at(sys, &[t], origin, 60).map_err(fail)?;
            let dirs = singular_directions(&sol.q, sol.nu, 0).map_err(fail)?;
            let lp = LocalProblem { sys, t: vec![t], sol: &sol, dirs: &dirs };
            for st in lp.all_stokes().map_err(fail)? {
                ensure(st.is_unipotent(1e-5), || format!("t={t} angle {}: not unipotent\n{}", st.angle, st.matrix))?;
                ensure(st.constancy <= 1e-5, || format!("t={t} angle {}: constancy {:.2e}", st.angle, st.constancy))?;
                ensure(st.ordering_violations().is_empty(), || format!("t={t} angle {}: ordering", st.angle))?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

const PI_: f64 = std::f64::consts::PI;

/// Torus generators built at two random samples coincide exactly.
pub fn torus_constant_in_t() -> Result<(), String> {
    let euler = ParamSystem::parse(&EULER, &["t"]).unwrap();
    let bessel = ParamSystem::parse(&BESSEL, &["t"]).unwrap();
    let t = (0.5f64..2.0, -PI_..PI_).prop_map(|(m, a)| C64::from_polar(m, a));
    runner(32)
        .run(&(t.clone(), t), |(t1, t2)| {
            for (sys, origin) in [(&euler, Origin::Point(C64::new(0.0, 0.0))), (&bessel, Origin::Infinity)] {
                let tor = |t: C64| {
                    formal_at(sys, &[t], origin, 12).map(|s| torus_generators(&s.q)).map_err(|e| TestCaseError::fail(e.to_string()))
                };
                let (a, b) = (tor(t1)?, tor(t2)?);
                ensure(a.len() == b.len(), || format!("{t1} vs {t2}: {} vs {} generators", a.len(), b.len()))?;
                for (x, y) in a.iter().zip(&b) {
                    ensure(x.matrix == y.matrix, || format!("{t1} vs {t2}:\n{}\n{}", x.matrix, y.matrix))?;
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn all() -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("series ring axioms", ring_axioms()),
        ("Borel linearity", borel_linearity()),
        ("path reversal and homotopy", path_reversal_and_homotopy()),
        ("Abel-Liouville determinant", abel_liouville()),
        ("Stokes unipotence and z-constancy", stokes_unipotent_and_constant()),
        ("torus constancy in t", torus_constant_in_t()),
    ]
}
