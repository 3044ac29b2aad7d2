//! Matrices whose entries are truncated Puiseux series.

use crate::linalg::CMat;
use crate::scalar::Scaled;
use crate::{Series, C64};

#[derive(Clone, Debug)]
pub struct MatSeries {
    rows: usize,
    cols: usize,
    e: Vec<Series>,
}

impl MatSeries {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Series) -> Self {
        let mut e = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                e.push(f(i, j));
            }
        }
        MatSeries { rows, cols, e }
    }

    pub fn zeros(rows: usize, cols: usize, nu: u32, order: i64) -> Self {
        Self::from_fn(rows, cols, |_, _| Series::zero(nu, order))
    }

    pub fn identity(n: usize, order: i64) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Series::constant(C64::new(1.0, 0.0), order)
            } else {
                Series::zero(1, order)
            }
        })
    }

    /// Constant matrix known to all orders up to `order`.
    pub fn constant(m: &CMat, order: i64) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| Series::constant(m[(i, j)], order))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Series {
        &self.e[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, s: Series) {
        self.e[i * self.cols + j] = s;
    }

    pub fn entries(&self) -> &[Series] {
        &self.e
    }

    pub fn map(&self, f: impl Fn(&Series) -> Series) -> Self {
        MatSeries { rows: self.rows, cols: self.cols, e: self.e.iter().map(f).collect() }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        MatSeries { rows: self.rows, cols: self.cols, e: self.e.iter().zip(&o.e).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        MatSeries { rows: self.rows, cols: self.cols, e: self.e.iter().zip(&o.e).map(|(a, b)| a.sub(b)).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows);
        Self::from_fn(self.rows, o.cols, |i, j| {
            let mut acc: Option<Series> = None;
            for k in 0..self.cols {
                let p = self.get(i, k).mul(o.get(k, j));
                acc = Some(match acc {
                    None => p,
                    Some(a) => a.add(&p),
                });
            }
            acc.expect("empty product")
        })
    }

    /// Right multiplication by a constant matrix.
    pub fn mul_const(&self, m: &CMat) -> Self {
        assert_eq!(self.cols, m.nrows());
        Self::from_fn(self.rows, m.ncols(), |i, j| {
            let mut acc: Option<Series> = None;
            for k in 0..self.cols {
                let p = self.get(i, k).scale(m[(k, j)]);
                acc = Some(match acc {
                    None => p,
                    Some(a) => a.add(&p),
                });
            }
            acc.expect("empty product")
        })
    }

    pub fn differentiate(&self) -> Self {
        self.map(|s| s.differentiate())
    }

    /// Lowest truncation order over the entries, as an exponent of z.
    pub fn order_exponent(&self) -> f64 {
        self.e.iter().map(|s| (s.order() + 1) as f64 / s.nu() as f64).fold(f64::INFINITY, f64::min)
    }

    /// Lowest exponent carried by a nonzero entry.
    pub fn valuation_exponent(&self) -> Option<f64> {
        self.e
            .iter()
            .filter_map(|s| s.valuation().map(|v| v as f64 / s.nu() as f64))
            .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.min(v))))
    }

    pub fn column(&self, j: usize) -> Vec<Series> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    /// Partial sums at z = r e^{i arg}.
    pub fn eval_polar(&self, r: f64, arg: f64) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval_polar(r, arg))
    }

    /// Largest coefficient modulus, in scaled form.
    pub fn max_coeff(&self) -> Scaled<f64> {
        let mut best = Scaled::zero();
        for s in &self.e {
            for c in s.coeffs() {
                if c.log10_abs() > best.log10_abs() {
                    best = *c;
                }
            }
        }
        best
    }
}
