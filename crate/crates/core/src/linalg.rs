//! Small dense helpers and the skyline (profile) symmetric solver used for
//! the equilibrium equations.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

pub type Vec3<T> = [T; 3];
/// Row-major 3x3 matrix.
pub type Mat3<T> = [[T; 3]; 3];

#[inline]
pub fn add3<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale3<T: Scalar>(a: Vec3<T>, k: T) -> Vec3<T> {
    [a[0] * k, a[1] * k, a[2] * k]
}

#[inline]
pub fn dot3<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm3<T: Scalar>(a: Vec3<T>) -> T {
    dot3(a, a).sqrt()
}

pub fn det3<T: Scalar>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of a 3x3 matrix; `None` when the determinant is exactly zero.
pub fn inv3<T: Scalar>(m: &Mat3<T>) -> Option<Mat3<T>> {
    let det = det3(m);
    if det == T::zero() {
        return None;
    }
    let inv_det = T::one() / det;
    let mut r = [[T::zero(); 3]; 3];
    r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
    r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
    r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
    r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
    r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
    r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
    r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
    r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
    r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
    Some(r)
}

/// Dot product with four independent accumulators. The summation order is
/// fixed, so results are reproducible run to run.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (T::zero(), T::zero(), T::zero(), T::zero());
    for c in 0..chunks {
        let k = 4 * c;
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for k in 4 * chunks..n {
        s += a[k] * b[k];
    }
    s
}

/// Dense symmetric positive definite matrix stored row-major, solved by
/// Cholesky factorization.
#[derive(Debug, Clone)]
pub struct DenseSpd<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseSpd<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| dot(&self.data[i * self.n..(i + 1) * self.n], x))
            .collect()
    }

    /// Lower Cholesky factor. Fails when a pivot is not positive relative to
    /// the largest diagonal entry.
    pub fn cholesky(&self) -> Result<DenseCholesky<T>> {
        let n = self.n;
        let mut l = vec![T::zero(); n * n];
        let max_diag = (0..n).map(|i| self.get(i, i).abs()).fold(T::zero(), T::max);
        let floor = max_diag * lit(1e-13);
        for i in 0..n {
            for j in 0..=i {
                let s = self.get(i, j) - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                if i == j {
                    if s <= floor || !s.is_finite() {
                        return Err(Error::RankDeficient(format!("pivot {i} is {s}")));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(DenseCholesky { n, l })
    }
}

#[derive(Debug, Clone)]
pub struct DenseCholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Scalar> DenseCholesky<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let s = y[i] - dot(&self.l[i * n..i * n + i], &y[..i]);
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            y[i] /= self.l[i * n + i];
            let yi = y[i];
            for k in 0..i {
                y[k] -= self.l[i * n + k] * yi;
            }
        }
        y
    }
}

/// Symmetric matrix in skyline (variable band) storage. Row `i` keeps the
/// contiguous entries from its first structural nonzero column up to and
/// including the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SkylineMatrix<T> {
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SkylineMatrix<T> {
    /// Builds an all-zero matrix with the given first-column profile.
    pub fn with_profile(first: Vec<usize>) -> Self {
        let mut offset = Vec::with_capacity(first.len() + 1);
        let mut acc = 0;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "profile column beyond diagonal");
            offset.push(acc);
            acc += i - f + 1;
        }
        offset.push(acc);
        Self {
            first,
            offset,
            values: vec![T::zero(); acc],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn stored_entries(&self) -> usize {
        self.values.len()
    }

    pub fn first_column(&self, i: usize) -> usize {
        self.first[i]
    }

    pub fn set_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = T::zero());
    }

    #[inline]
    fn row(&self, i: usize) -> &[T] {
        &self.values[self.offset[i]..self.offset[i + 1]]
    }

    /// Entry (i, j) of the symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if c < self.first[r] {
            T::zero()
        } else {
            self.values[self.offset[r] + c - self.first[r]]
        }
    }

    /// Adds `v` at (i, j) with `j <= i`. Panics when outside the profile.
    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(j <= i);
        let f = self.first[i];
        assert!(j >= f, "entry ({i}, {j}) outside skyline profile");
        self.values[self.offset[i] + j - f] += v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let f = self.first[i];
            let row = self.row(i);
            let diag_pos = row.len() - 1;
            y[i] += dot(&row[..diag_pos], &x[f..i]) + row[diag_pos] * x[i];
            let xi = x[i];
            for (k, &a) in row[..diag_pos].iter().enumerate() {
                y[f + k] += a * xi;
            }
        }
        y
    }

    /// Largest absolute stored entry.
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Restriction to the rows and columns flagged `keep`, renumbered in
    /// increasing order.
    pub fn restrict(&self, keep: &[bool]) -> (SkylineMatrix<T>, Vec<usize>) {
        let n = self.dim();
        assert_eq!(keep.len(), n);
        let mut new_index = vec![usize::MAX; n];
        let mut kept = Vec::new();
        for i in 0..n {
            if keep[i] {
                new_index[i] = kept.len();
                kept.push(i);
            }
        }
        let first: Vec<usize> = kept
            .iter()
            .map(|&i| {
                (self.first[i]..=i)
                    .find(|&c| keep[c])
                    .map(|c| new_index[c])
                    .expect("diagonal is kept")
            })
            .collect();
        let mut out = SkylineMatrix::with_profile(first);
        for (ni, &i) in kept.iter().enumerate() {
            let f = self.first[i];
            let row = self.row(i);
            let dst_off = out.offset[ni];
            let dst_first = out.first[ni];
            for (k, &v) in row.iter().enumerate() {
                let c = f + k;
                if keep[c] {
                    out.values[dst_off + new_index[c] - dst_first] = v;
                }
            }
        }
        (out, kept)
    }

    /// In-place LLᵀ factorization (Crout, row oriented). Pivots that fall
    /// below `1e-12` of the original diagonal are counted; any such pivot
    /// makes the factorization fail.
    pub fn factor(mut self) -> Result<SkylineCholesky<T>> {
        let n = self.dim();
        let mut near_zero = 0usize;
        let rel = lit::<T>(1e-12);
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            for j in fi..i {
                let fj = self.first[j];
                let f = fi.max(fj);
                let oj = self.offset[j];
                let (head, tail) = self.values.split_at_mut(oi);
                let row_j = &head[oj..];
                let lj = &row_j[f - fj..j - fj];
                let djj = row_j[j - fj];
                let row_i = &mut tail[..i - fi + 1];
                let s = row_i[j - fi] - dot(&row_i[f - fi..j - fi], lj);
                row_i[j - fi] = s / djj;
            }
            let row_i = &mut self.values[oi..oi + i - fi + 1];
            let a_ii = row_i[i - fi];
            let d = a_ii - dot(&row_i[..i - fi], &row_i[..i - fi]);
            if !(d > rel * a_ii.abs()) || !d.is_finite() {
                near_zero += 1;
                row_i[i - fi] = T::one();
            } else {
                row_i[i - fi] = d.sqrt();
            }
        }
        if near_zero > 0 {
            return Err(Error::Factorization {
                near_zero_pivots: near_zero,
            });
        }
        Ok(SkylineCholesky { l: self })
    }
}

/// Cholesky factor stored in the profile of the original matrix.
#[derive(Debug, Clone)]
pub struct SkylineCholesky<T> {
    l: SkylineMatrix<T>,
}

impl<T: Scalar> SkylineCholesky<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let f = self.l.first[i];
            let row = self.l.row(i);
            let d = row.len() - 1;
            y[i] = (y[i] - dot(&row[..d], &y[f..i])) / row[d];
        }
        for i in (0..n).rev() {
            let f = self.l.first[i];
            let row = self.l.row(i);
            let d = row.len() - 1;
            y[i] /= row[d];
            let yi = y[i];
            for (k, &a) in row[..d].iter().enumerate() {
                y[f + k] -= a * yi;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SkylineMatrix<f64> {
        let first = (0..n).map(|i| i.saturating_sub(1)).collect();
        let mut k = SkylineMatrix::with_profile(first);
        for i in 0..n {
            k.add_lower(i, i, 2.0);
            if i > 0 {
                k.add_lower(i, i - 1, -1.0);
            }
        }
        k
    }

    #[test]
    fn skyline_solves_tridiagonal_system() {
        let n = 50;
        let k = laplacian_1d(n);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = k.mul_vec(&x);
        let sol = k.clone().factor().unwrap().solve(&b);
        for (a, e) in sol.iter().zip(&x) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn skyline_reports_singular_pivots() {
        // Free-free chain: singular by one rigid mode.
        let n = 6;
        let first = (0..n).map(|i: usize| i.saturating_sub(1)).collect();
        let mut k = SkylineMatrix::<f64>::with_profile(first);
        for i in 0..n - 1 {
            k.add_lower(i, i, 1.0);
            k.add_lower(i + 1, i + 1, 1.0);
            k.add_lower(i + 1, i, -1.0);
        }
        match k.factor() {
            Err(Error::Factorization { near_zero_pivots }) => assert_eq!(near_zero_pivots, 1),
            other => panic!("expected factorization failure, got {other:?}"),
        }
    }

    #[test]
    fn restrict_drops_rows_and_columns() {
        let k = laplacian_1d(5);
        let keep = [false, true, true, false, true];
        let (r, kept) = k.restrict(&keep);
        assert_eq!(kept, vec![1, 2, 4]);
        for (a, &i) in kept.iter().enumerate() {
            for (b, &j) in kept.iter().enumerate() {
                assert_eq!(r.get(a, b), k.get(i, j));
            }
        }
    }

    #[test]
    fn dense_cholesky_round_trip() {
        let mut a = DenseSpd::<f64>::zeros(3);
        let m = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                a.add(i, j, m[i][j]);
            }
        }
        let x = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x);
        let sol = a.cholesky().unwrap().solve(&b);
        for i in 0..3 {
            assert!((sol[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_of_3x3() {
        let m = [[2.0, 0.0, 1.0], [1.0, 3.0, 0.0], [0.0, 1.0, 4.0]];
        let inv = inv3(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
