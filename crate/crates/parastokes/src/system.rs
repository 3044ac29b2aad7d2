//! Parameterized systems dY/dz = A(z,t) Y and their local expansions.

use crate::error::{invalid, Result};
use crate::expr::{Origin, ParamRational};
use crate::linalg::{cluster, poly_roots, CMat};
use crate::matseries::MatSeries;
use crate::{Expr, C64};

#[derive(Clone, Debug)]
pub struct ParamSystem {
    params: Vec<String>,
    m: usize,
    entries: Vec<Expr>,
}

impl ParamSystem {
    /// Builds the system from row-major entry strings.
    pub fn parse(entries: &[&str], params: &[&str]) -> Result<Self> {
        let n = entries.len();
        let m = (n as f64).sqrt().round() as usize;
        if m == 0 || m * m != n {
            return invalid(format!("{n} entries do not form a square matrix"));
        }
        let entries = entries.iter().map(|e| ParamRational::parse(e, params)).collect::<Result<Vec<_>>>()?;
        Ok(ParamSystem { params: params.iter().map(|s| s.to_string()).collect(), m, entries })
    }

    pub fn from_exprs(m: usize, entries: Vec<Expr>) -> Result<Self> {
        if entries.len() != m * m || m == 0 {
            return invalid("entry count does not match the dimension");
        }
        let params = entries[0].params().to_vec();
        if entries.iter().any(|e| e.params() != params.as_slice()) {
            return invalid("entries declare different parameter lists");
        }
        Ok(ParamSystem { params, m, entries })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.m + j]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn eval(&self, t: &[C64], z: C64) -> Result<CMat> {
        let mut out = CMat::zeros(self.m, self.m);
        for i in 0..self.m {
            for j in 0..self.m {
                out[(i, j)] = self.entry(i, j).eval(t, z)?;
            }
        }
        Ok(out)
    }

    pub fn trace_eval(&self, t: &[C64], z: C64) -> Result<C64> {
        (0..self.m).map(|i| self.entry(i, i).eval(t, z)).sum()
    }

    /// Expansion in the local coordinate w with dY/dw = B(w) Y.
    ///
    /// At a finite point w = z - z0 and B(w) = A(z0 + w). At infinity
    /// w = 1/z and B(w) = -A(1/w)/w^2.
    pub fn local(&self, t: &[C64], origin: Origin<f64>, order: i64) -> Result<LocalSystem> {
        let inner = if origin == Origin::Infinity { order + 2 } else { order };
        let mut e = Vec::with_capacity(self.m * self.m);
        for x in &self.entries {
            let s = x.laurent_expand(t, origin, inner)?;
            e.push(if origin == Origin::Infinity { s.shift(-2).neg() } else { s });
        }
        let b = MatSeries::from_fn(self.m, self.m, |i, j| e[i * self.m + j].clone());
        Ok(LocalSystem::new(origin, b))
    }

    /// `B(w)` of [`ParamSystem::local`] evaluated exactly.
    pub fn local_matrix(&self, t: &[C64], origin: Origin<f64>, w: C64) -> Result<CMat> {
        match origin {
            Origin::Point(p) => self.eval(t, p + w),
            Origin::Infinity => Ok(self.eval(t, w.inv())? * (-w * w).inv()),
        }
    }

    /// Poles of A at a sample, including infinity.
    pub fn singularities(&self, t: &[C64]) -> Result<Vec<Singularity>> {
        let mut cands: Vec<C64> = Vec::new();
        for x in &self.entries {
            let (_, den) = x.in_z(t)?;
            cands.extend(poly_roots(&den));
        }
        let groups = cluster(&cands, 1e-8);
        let mut out = Vec::new();
        for g in groups {
            let p = g.iter().map(|&i| cands[i]).sum::<C64>() / g.len() as f64;
            let loc = self.local(t, Origin::Point(p), 2)?;
            if loc.pole_order > 0 {
                out.push(Singularity { point: Origin::Point(p), pole_order: loc.pole_order as usize });
            }
        }
        out.sort_by(|a, b| {
            let (Origin::Point(x), Origin::Point(y)) = (a.point, b.point) else { unreachable!() };
            (x.norm(), x.arg()).partial_cmp(&(y.norm(), y.arg())).unwrap()
        });
        let inf = self.local(t, Origin::Infinity, 2)?;
        if inf.pole_order > 0 {
            out.push(Singularity { point: Origin::Infinity, pole_order: inf.pole_order as usize });
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Singularity {
    pub point: Origin<f64>,
    /// Pole order of the local matrix B(w); 1 means a simple pole.
    pub pole_order: usize,
}

impl Singularity {
    pub fn label(&self) -> String {
        match self.point {
            Origin::Infinity => "inf".into(),
            Origin::Point(p) => format!("{:.6}{:+.6}i", p.re, p.im),
        }
    }
}

/// dY/dw = B(w) Y around one point.
#[derive(Clone, Debug)]
pub struct LocalSystem {
    pub origin: Origin<f64>,
    pub b: MatSeries,
    /// -min valuation of B, at least 0.
    pub pole_order: i64,
}

impl LocalSystem {
    pub fn new(origin: Origin<f64>, b: MatSeries) -> Self {
        let v = b.entries().iter().filter_map(|s| s.valuation()).min().unwrap_or(0);
        LocalSystem { origin, b, pole_order: (-v).max(0) }
    }

    pub fn dim(&self) -> usize {
        self.b.rows()
    }

    pub fn is_diagonal(&self) -> bool {
        let m = self.dim();
        (0..m).all(|i| (0..m).all(|j| i == j || self.b.get(i, j).is_zero()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_singularities() {
        let s = ParamSystem::parse(&["0", "1", "(t^2-z^2)/z^2", "-1/z"], &["t"]).unwrap();
        let sing = s.singularities(&[C64::new(0.3, 0.0)]).unwrap();
        assert_eq!(sing.len(), 2);
        assert_eq!(sing[0].point, Origin::Point(C64::new(0.0, 0.0)));
        assert_eq!(sing[0].pole_order, 2);
        assert_eq!(sing[1].point, Origin::Infinity);
        // B(w) = -A(1/w)/w^2 has entry (2,1) = w^-2 - t^2
        let loc = s.local(&[C64::new(0.3, 0.0)], Origin::Infinity, 4).unwrap();
        assert_eq!(loc.pole_order, 2);
        assert!((loc.b.get(1, 0).coeff_c(-2) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((loc.b.get(1, 0).coeff_c(0) + C64::new(0.09, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn removable_point_is_skipped() {
        // only the double pole of -1/w^2 at infinity remains
        let s = ParamSystem::parse(&["(z-1)/(z-1)"], &[]).unwrap();
        let sing = s.singularities(&[]).unwrap();
        assert_eq!(sing.len(), 1);
        assert_eq!(sing[0].point, Origin::Infinity);
        assert!(ParamSystem::parse(&["1", "2"], &[]).is_err());
    }

    #[test]
    fn finite_pole_off_origin() {
        let s = ParamSystem::parse(&["t/(z-2)"], &["t"]).unwrap();
        let sing = s.singularities(&[C64::new(0.5, 0.0)]).unwrap();
        assert_eq!(sing.len(), 2);
        assert_eq!(sing[1], Singularity { point: Origin::Infinity, pole_order: 1 });
        let Origin::Point(p) = sing[0].point else { panic!() };
        assert!((p - C64::new(2.0, 0.0)).norm() < 1e-12);
    }
}
