//! Dense complex linear algebra on top of nalgebra.

use crate::error::{numerical, Result};
use crate::C64;
use nalgebra::DMatrix;

pub type CMat = DMatrix<C64>;

/// Eigenvalue clustering tolerance.
pub const CLUSTER_TOL: f64 = 1e-8;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Max-modulus entry norm.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.norm()))
}

/// Relative deviation `max|a - b| / max(1, max|b|)`.
pub fn rel_dev(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1.0)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// 2-norm condition number.
pub fn cond(m: &CMat) -> f64 {
    let s = singular_values(m);
    let mx = s.iter().cloned().fold(0.0, f64::max);
    let mn = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    let k = cond(m);
    if !(k < 1e14) {
        return numerical(format!("matrix inversion with condition number {k:.3e}"));
    }
    match m.clone().try_inverse() {
        Some(x) => Ok(x),
        None => numerical("singular matrix"),
    }
}

pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let n = m.nrows();
    let diag = |t: &CMat| (0..n).map(|i| t[(i, i)]).collect::<Vec<_>>();
    if let Some(s) = m.clone().try_schur(f64::EPSILON, 100 * n) {
        return diag(&s.unpack().1);
    }
    // the shifted QR iteration can stall on exactly nilpotent blocks
    let sigma = c(0.3, 0.7) * (max_abs(m) + 1.0);
    let shifted = m + CMat::identity(n, n) * sigma;
    match shifted.try_schur(f64::EPSILON, 1000 * n) {
        Some(s) => diag(&s.unpack().1).into_iter().map(|e| e - sigma).collect(),
        None => diag(&m.clone().schur().unpack().1),
    }
}

/// Roots of `sum c_k x^k` by companion eigenvalues plus one Newton step.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let mut cf: Vec<C64> = coeffs.to_vec();
    while cf.last().is_some_and(|x| x.norm() == 0.0) {
        cf.pop();
    }
    let zeros = cf.iter().take_while(|x| x.norm() == 0.0).count();
    if zeros > 0 {
        let mut out = vec![c(0.0, 0.0); zeros];
        out.extend(poly_roots(&cf[zeros..]));
        return out;
    }
    let n = cf.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = cf[n];
    let comp = CMat::from_fn(n, n, |i, j| {
        if i == 0 {
            -cf[n - 1 - j] / lead
        } else if i == j + 1 {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let dc: Vec<C64> = (1..=n).map(|k| cf[k] * k as f64).collect();
    eigenvalues(&comp)
        .into_iter()
        .map(|r| {
            let p = horner(&cf, r);
            let d = horner(&dc, r);
            if d.norm() > 0.0 {
                let s = r - p / d;
                if horner(&cf, s).norm() <= p.norm() {
                    return s;
                }
            }
            r
        })
        .collect()
}

pub fn horner(cf: &[C64], z: C64) -> C64 {
    cf.iter().rev().fold(c(0.0, 0.0), |s, &a| s * z + a)
}

/// Groups values whose distance is below `tol` (relative to 1 + |x|).
pub fn cluster(vals: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    'outer: for (i, v) in vals.iter().enumerate() {
        for g in groups.iter_mut() {
            if g.iter().any(|&j| (vals[j] - v).norm() <= tol * (1.0 + v.norm())) {
                g.push(i);
                continue 'outer;
            }
        }
        groups.push(vec![i]);
    }
    groups
}

/// Orthonormal basis of the numerical nullspace, columns of the result.
pub fn nullspace(a: &CMat, rel_tol: f64) -> CMat {
    let (r, n) = a.shape();
    let sq = if r < n {
        let mut b = CMat::zeros(n, n);
        b.view_mut((0, 0), (r, n)).copy_from(a);
        b
    } else {
        a.clone()
    };
    let svd = sq.svd(false, true);
    let vt = svd.v_t.unwrap();
    let s = &svd.singular_values;
    let smax = s.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let idx: Vec<usize> = (0..s.len()).filter(|&i| s[i] <= rel_tol * smax).collect();
    CMat::from_fn(n, idx.len(), |i, j| vt[(idx[j], i)].conj())
}

/// `M = S diag(lambda_c I + N_c) S^-1` with each `N_c` nilpotent up to the
/// spread of its eigenvalue cluster.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub s: CMat,
    pub s_inv: CMat,
    /// (eigenvalue, nilpotent part, start, size)
    pub blocks: Vec<(C64, CMat, usize, usize)>,
    pub cond: f64,
}

pub fn spectral(m: &CMat) -> Result<Spectral> {
    let n = m.nrows();
    let ev = eigenvalues(m);
    let groups = cluster(&ev, CLUSTER_TOL);
    let mut cols: Vec<CMat> = Vec::new();
    let mut meta = Vec::new();
    let mut start = 0;
    for g in &groups {
        let lam = g.iter().map(|&i| ev[i]).sum::<C64>() / g.len() as f64;
        let r = g.len();
        let shifted = m - CMat::identity(n, n) * lam;
        let mut p = CMat::identity(n, n);
        for _ in 0..r {
            p = &p * &shifted;
        }
        // (M - lam)^r has singular values ~ scale^r on complementary blocks
        let mut basis = nullspace(&p, 1e-7);
        if basis.ncols() != r {
            let svd = p.clone().svd(false, true);
            let vt = svd.v_t.unwrap();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
            basis = CMat::from_fn(n, r, |i, j| vt[(order[j], i)].conj());
        }
        cols.push(basis);
        meta.push((lam, start, r));
        start += r;
    }
    let mut s = CMat::zeros(n, n);
    let mut at = 0;
    for b in &cols {
        s.view_mut((0, at), (n, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    let k = cond(&s);
    if !(k <= 1e12) {
        return numerical(format!("Jordan decomposition is ill-conditioned (condition number {k:.3e})"));
    }
    let s_inv = inverse(&s)?;
    let d = &s_inv * m * &s;
    let blocks = meta
        .into_iter()
        .map(|(lam, st, r)| {
            let b = d.view((st, st), (r, r)).clone_owned() - CMat::identity(r, r) * lam;
            (lam, b, st, r)
        })
        .collect();
    Ok(Spectral { s, s_inv, blocks, cond: k })
}

impl Spectral {
    /// `f(M)` given the Taylor coefficients `f^(k)(lambda)/k!`, k < size.
    pub fn apply(&self, taylor: impl Fn(C64, usize) -> Vec<C64>) -> CMat {
        let n = self.s.nrows();
        let mut d = CMat::zeros(n, n);
        for (lam, nil, st, r) in &self.blocks {
            let cs = taylor(*lam, *r);
            let mut acc = CMat::zeros(*r, *r);
            let mut p = CMat::identity(*r, *r);
            for k in 0..*r {
                acc += &p * cs[k];
                p = &p * nil;
            }
            d.view_mut((*st, *st), (*r, *r)).copy_from(&acc);
        }
        &self.s * d * &self.s_inv
    }
}

/// `z^L = exp(L log z)` for the given determination of `log z`.
pub fn z_power(l: &CMat, log_z: C64) -> Result<CMat> {
    let sp = spectral(l)?;
    Ok(sp.apply(|lam, r| {
        let e = (lam * log_z).exp();
        let mut out = Vec::with_capacity(r);
        let mut f = c(1.0, 0.0);
        for k in 0..r {
            if k > 0 {
                f = f * log_z / k as f64;
            }
            out.push(e * f);
        }
        out
    }))
}

pub fn expm(m: &CMat) -> CMat {
    let n = m.nrows();
    let nrm = max_abs(m) * n as f64;
    let sq = if nrm > 0.5 { (nrm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = m * c(2f64.powi(-(sq as i32)), 0.0);
    let mut term = eye(n);
    let mut acc = eye(n);
    for k in 1..30 {
        term = &term * &a * c(1.0 / k as f64, 0.0);
        acc += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..sq {
        acc = &acc * &acc;
    }
    acc
}

/// Principal matrix logarithm.
pub fn logm(m: &CMat) -> Result<CMat> {
    let sp = spectral(m)?;
    if sp.blocks.iter().any(|b| b.0.norm() == 0.0) {
        return numerical("logarithm of a singular matrix");
    }
    Ok(sp.apply(|lam, r| {
        let mut out = vec![lam.ln()];
        for k in 1..r {
            let s = if k % 2 == 1 { 1.0 } else { -1.0 };
            out.push(c(s / k as f64, 0.0) / lam.powu(k as u32));
        }
        out
    }))
}

/// `C` with `exp(2 i pi C) = M`, principal branch on eigenvalues.
pub fn matrix_log_2pii(m: &CMat) -> Result<CMat> {
    Ok(logm(m)? / c(0.0, 2.0 * std::f64::consts::PI))
}

/// Integer relation search with LLL on a lattice built from real vectors.
///
/// Returns integer vectors `a` with `|sum a_i v_i| <= tol * max|v|` and
/// `max|a_i| <= bound`, one per relation found.
pub fn integer_relations(vectors: &[Vec<f64>], bound: i64, tol: f64) -> Vec<Vec<i64>> {
    let k = vectors.len();
    if k == 0 {
        return Vec::new();
    }
    let dim = vectors[0].len();
    let vmax = vectors.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
    // weight so that relations with small residual dominate the reduction
    let w = 1.0 / (tol * vmax);
    let mut basis: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row = vec![0.0; k + dim];
            row[i] = 1.0;
            for d in 0..dim {
                row[k + d] = vectors[i][d] * w;
            }
            row
        })
        .collect();
    lll(&mut basis, 0.75);
    let mut out = Vec::new();
    for row in &basis {
        let a: Vec<i64> = row[..k].iter().map(|x| x.round() as i64).collect();
        if a.iter().all(|&x| x == 0) || a.iter().any(|x| x.abs() > bound) {
            continue;
        }
        let res = (0..dim)
            .map(|d| (0..k).map(|i| a[i] as f64 * vectors[i][d]).sum::<f64>().abs())
            .fold(0.0, f64::max);
        if res <= tol * vmax {
            out.push(a);
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lll(b: &mut [Vec<f64>], delta: f64) {
    let n = b.len();
    let gs = |b: &[Vec<f64>]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut bs: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut mu = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut v = b[i].clone();
            for j in 0..i {
                let d = dot(&bs[j], &bs[j]);
                mu[i][j] = if d > 0.0 { dot(&b[i], &bs[j]) / d } else { 0.0 };
                for (x, y) in v.iter_mut().zip(&bs[j]) {
                    *x -= mu[i][j] * y;
                }
            }
            bs.push(v);
        }
        (bs, mu)
    };
    let mut k = 1;
    let mut guard = 0;
    while k < n && guard < 100_000 {
        guard += 1;
        let (_, mu) = gs(b);
        for j in (0..k).rev() {
            let q = mu[k][j].round();
            if q != 0.0 {
                let bj = b[j].clone();
                for (x, y) in b[k].iter_mut().zip(&bj) {
                    *x -= q * y;
                }
            }
        }
        let (bs, mu) = gs(b);
        let lhs = dot(&bs[k], &bs[k]);
        let rhs = (delta - mu[k][k - 1] * mu[k][k - 1]) * dot(&bs[k - 1], &bs[k - 1]);
        if lhs >= rhs {
            k += 1;
        } else {
            b.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn nilpotent_companion() {
        let r = poly_roots(&[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.3)]);
        assert_eq!(r.len(), 3);
        assert!(r.iter().all(|x| x.norm() == 0.0));
        let j = CMat::from_fn(3, 3, |i, k| if i == k + 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert!(eigenvalues(&j).iter().all(|e| e.norm() < 1e-5));
    }

    #[test]
    fn roots_of_cubic() {
        // (x-1)(x-2i)(x+3) = x^3 + (2-2i)x^2 + (-3-4i)x + 6i
        let r = poly_roots(&[c(0.0, 6.0), c(-3.0, -4.0), c(2.0, -2.0), c(1.0, 0.0)]);
        for want in [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)] {
            assert!(r.iter().any(|x| (x - want).norm() < 1e-13));
        }
    }

    #[test]
    fn z_power_examples() {
        let lz = c(0.7f64.ln(), 0.4);
        let a = CMat::from_element(1, 1, c(0.3, 0.1));
        assert!((z_power(&a, lz).unwrap()[(0, 0)] - (c(0.3, 0.1) * lz).exp()).norm() < 1e-14);
        let n = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let p = z_power(&n, lz).unwrap();
        assert!((p[(0, 1)] - lz).norm() < 1e-14 && (p[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(max_abs(&(z_power(&CMat::zeros(2, 2), lz).unwrap() - eye(2))) < 1e-15);
    }

    #[test]
    fn log_examples() {
        let m = CMat::from_element(1, 1, c(0.0, 2.0 * PI * 0.3).exp());
        assert!((matrix_log_2pii(&m).unwrap()[(0, 0)] - c(0.3, 0.0)).norm() < 1e-14);
        assert!(max_abs(&matrix_log_2pii(&eye(3)).unwrap()) < 1e-15);
        let u = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let l = matrix_log_2pii(&u).unwrap();
        assert!((l[(0, 1)] - c(1.0, 0.0) / c(0.0, 2.0 * PI)).norm() < 1e-14);
        assert!(rel_dev(&expm(&(l * c(0.0, 2.0 * PI))), &u) < 1e-12);
    }

    #[test]
    fn relations() {
        let r = integer_relations(&[vec![1.0, 0.5], vec![2.0, 1.0], vec![0.3, 2.0_f64.sqrt()]], 1_000_000, 1e-9);
        assert_eq!(r.len(), 1);
        let a = &r[0];
        assert!(a[2] == 0 && a[0] == -2 * a[1]);
        let r = integer_relations(&[vec![1.0], vec![2.0_f64.sqrt()]], 1_000_000, 1e-9);
        assert!(r.is_empty());
    }

    #[test]
    fn nullspace_dimension() {
        let a = CMat::from_row_slice(2, 3, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let n = nullspace(&a, 1e-12);
        assert_eq!(n.ncols(), 1);
        assert!(max_abs(&(&a * &n)) < 1e-14);
    }
}
