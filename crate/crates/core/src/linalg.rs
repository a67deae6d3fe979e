//! Small dense complex matrices.
//!
//! Everything here is sized for boundary-value bookkeeping: `2r × 2r` and
//! `2r × 4r` matrices with `r` in the single digits. Determinants go through
//! LU with partial pivoting; adjugates are built from cofactors so they stay
//! finite when the matrix is singular; singular values come from one-sided
//! Jacobi, which resolves small singular values to high relative accuracy.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(alloc::format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &d) in entries.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[C64]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn swap_rows(&mut self, i: usize, k: usize) {
        if i == k {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(i * self.cols + j, k * self.cols + j);
        }
    }

    /// Copies the listed columns, in order, into a new matrix.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, columns.len());
        for (jj, &j) in columns.iter().enumerate() {
            for i in 0..self.rows {
                out[(i, jj)] = self[(i, j)];
            }
        }
        out
    }

    /// `[self | other]`.
    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        let mut out = Self::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
            for j in 0..other.cols {
                out[(i, self.cols + j)] = other[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub fn conj_transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest Euclidean row norm.
    pub fn max_row_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| libm::sqrt(self.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>()))
            .fold(0.0, f64::max)
    }

    fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn lu(&self) -> Lu {
        assert!(self.is_square(), "LU of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                a.swap_rows(p, k);
                perm.swap(p, k);
                sign = -sign;
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                a[(i, k)] = f;
                if f == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let t = a[(k, j)];
                    a[(i, j)] -= f * t;
                }
            }
        }
        Lu {
            lu: a,
            perm,
            sign,
            singular,
        }
    }

    pub fn det(&self) -> C64 {
        match self.rows {
            0 => ONE,
            1 => self.data[0],
            2 => self.data[0] * self.data[3] - self.data[1] * self.data[2],
            _ => self.lu().det(),
        }
    }

    pub fn inverse(&self) -> Option<Self> {
        self.lu().inverse()
    }

    /// Determinant of the matrix with row `skip_row` and column `skip_col`
    /// removed.
    pub fn minor(&self, skip_row: usize, skip_col: usize) -> C64 {
        let n = self.rows;
        let mut sub = Vec::with_capacity((n - 1) * (n - 1));
        for i in (0..n).filter(|&i| i != skip_row) {
            for j in (0..n).filter(|&j| j != skip_col) {
                sub.push(self[(i, j)]);
            }
        }
        CMatrix {
            rows: n - 1,
            cols: n - 1,
            data: sub,
        }
        .det()
    }

    /// Column `j` of the adjugate: `adj(A)_{ij} = (-1)^{i+j} det A^{(j,i)}`.
    ///
    /// Built from cofactors, so it is well defined (and nonzero for rank
    /// `n-1`) when `A` is singular.
    pub fn adjugate_column(&self, j: usize) -> Vec<C64> {
        assert!(self.is_square());
        let n = self.rows;
        if n == 1 {
            return vec![ONE];
        }
        (0..n)
            .map(|i| {
                let m = self.minor(j, i);
                if (i + j).is_multiple_of(2) {
                    m
                } else {
                    -m
                }
            })
            .collect()
    }

    /// Full adjugate. Cofactors for `n <= 8`; above that `det(A) A^{-1}` when
    /// `A` is invertible, falling back to cofactors otherwise.
    pub fn adjugate(&self) -> Self {
        let n = self.rows;
        if n > 8 {
            let lu = self.lu();
            if let Some(inv) = lu.inverse() {
                return inv.scale(lu.det());
            }
        }
        let mut out = Self::zeros(n, n);
        for j in 0..n {
            out.set_column(j, &self.adjugate_column(j));
        }
        out
    }

    /// Singular value decomposition `A = U Σ V^H` by one-sided Jacobi.
    /// Only `Σ` (descending) and `V` are returned.
    pub fn svd(&self) -> Svd {
        let (m, n) = (self.rows, self.cols);
        let mut u = self.clone();
        let mut v = Self::identity(n);
        for _sweep in 0..80 {
            let mut rotated = false;
            for i in 0..n {
                for j in i + 1..n {
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = ZERO;
                    for k in 0..m {
                        let x = u[(k, i)];
                        let y = u[(k, j)];
                        alpha += x.norm_sqr();
                        beta += y.norm_sqr();
                        gamma += x.conj() * y;
                    }
                    let g = gamma.norm();
                    if g == 0.0 || g <= 1e-15 * libm::sqrt(alpha * beta) {
                        continue;
                    }
                    rotated = true;
                    let phase = (gamma / g).conj();
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = libm::copysign(1.0, zeta) / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                    let c = 1.0 / libm::sqrt(1.0 + t * t);
                    let s = c * t;
                    for k in 0..m {
                        let x = u[(k, i)];
                        let y = u[(k, j)] * phase;
                        u[(k, i)] = x * c - y * s;
                        u[(k, j)] = x * s + y * c;
                    }
                    for k in 0..n {
                        let x = v[(k, i)];
                        let y = v[(k, j)] * phase;
                        v[(k, i)] = x * c - y * s;
                        v[(k, j)] = x * s + y * c;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let norms: Vec<f64> = (0..n)
            .map(|j| libm::sqrt((0..m).map(|k| u[(k, j)].norm_sqr()).sum::<f64>()))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(core::cmp::Ordering::Equal));
        // A wide matrix has at most `m` nonzero singular values; the extra
        // columns of V span its kernel.
        let values = order.iter().take(m.min(n)).map(|&j| norms[j]).collect();
        Svd {
            values,
            v: v.select_columns(&order),
        }
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.svd().values
    }

    /// Number of singular values at or below `rel_tol * σ_max`, counting the
    /// `cols - rows` structural zeros of a wide matrix.
    pub fn nullity(&self, rel_tol: f64) -> usize {
        let s = self.singular_values();
        let smax = s.first().copied().unwrap_or(0.0);
        let small = s.iter().filter(|&&x| x <= rel_tol * smax).count();
        small + self.cols.saturating_sub(self.rows)
    }

    /// Orthonormal basis of the kernel, from right singular vectors whose
    /// singular value is at or below `rel_tol * σ_max`.
    pub fn kernel(&self, rel_tol: f64) -> Self {
        let svd = self.svd();
        let smax = svd.values.first().copied().unwrap_or(0.0);
        let rank = svd.values.iter().filter(|&&x| x > rel_tol * smax).count();
        let cols: Vec<usize> = (rank..self.cols).collect();
        svd.v.select_columns(&cols)
    }

    /// 2-norm condition number (`inf` when singular).
    pub fn condition_number(&self) -> f64 {
        let s = self.singular_values();
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }

    /// Picks `k` columns greedily by pivoted Gram–Schmidt: at every stage the
    /// column with the largest component orthogonal to those already chosen.
    pub fn greedy_columns(&self, k: usize) -> Vec<usize> {
        let m = self.rows;
        let mut work: Vec<Vec<C64>> = (0..self.cols).map(|j| self.column(j)).collect();
        let mut chosen = Vec::with_capacity(k);
        for _ in 0..k.min(self.cols) {
            let (best, _) = work
                .iter()
                .enumerate()
                .filter(|(j, _)| !chosen.contains(j))
                .map(|(j, c)| (j, c.iter().map(|z| z.norm_sqr()).sum::<f64>()))
                .fold((usize::MAX, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            if best == usize::MAX {
                break;
            }
            chosen.push(best);
            let q = work[best].clone();
            let qn = libm::sqrt(q.iter().map(|z| z.norm_sqr()).sum::<f64>());
            if qn == 0.0 {
                continue;
            }
            let q: Vec<C64> = q.iter().map(|z| z / qn).collect();
            for (j, col) in work.iter_mut().enumerate() {
                if chosen.contains(&j) {
                    continue;
                }
                for _pass in 0..2 {
                    let proj: C64 = (0..m).map(|i| q[i].conj() * col[i]).sum();
                    for i in 0..m {
                        col[i] -= proj * q[i];
                    }
                }
            }
        }
        chosen.sort_unstable();
        chosen
    }

    /// Eigenvalues of a Hermitian matrix, ascending, by cyclic Jacobi. Only
    /// the upper triangle is read.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.rows;
        let mut a = self.clone();
        for i in 0..n {
            for j in 0..i {
                a[(i, j)] = a[(j, i)].conj();
            }
            a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
        }
        for _sweep in 0..60 {
            let off: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].norm_sqr()).sum();
            let diag: f64 = (0..n).map(|i| a[(i, i)].re * a[(i, i)].re).sum();
            if off <= 1e-32 * diag || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let g = a[(p, q)].norm();
                    if g == 0.0 {
                        continue;
                    }
                    let ph = a[(p, q)] / g;
                    let zeta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * g);
                    let t = libm::copysign(1.0, zeta) / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                    let c = 1.0 / libm::sqrt(1.0 + t * t);
                    let s = c * t;
                    for k in 0..n {
                        let x = a[(k, p)];
                        let y = a[(k, q)] * ph.conj();
                        a[(k, p)] = x * c - y * s;
                        a[(k, q)] = x * s + y * c;
                    }
                    for k in 0..n {
                        let x = a[(p, k)];
                        let y = a[(q, k)] * ph;
                        a[(p, k)] = x * c - y * s;
                        a[(q, k)] = x * s + y * c;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Matrix exponential by scaling and squaring of a Taylor series.
    pub fn expm(&self) -> Self {
        assert!(self.is_square());
        let n = self.rows;
        let norm = self.norm1();
        let mut squarings = 0u32;
        let mut scaled = norm;
        while scaled > 0.5 {
            scaled *= 0.5;
            squarings += 1;
        }
        let x = self.scale(C64::new(libm::ldexp(1.0, -(squarings as i32)), 0.0));
        let mut sum = Self::identity(n);
        let mut term = Self::identity(n);
        for k in 1..40 {
            term = term.matmul(&x).scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
            if term.max_abs() <= 1e-18 * sum.max_abs() {
                break;
            }
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        sum
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Packed LU factorization with row permutation.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn det(&self) -> C64 {
        if self.singular {
            return ZERO;
        }
        let n = self.lu.rows;
        (0..n).fold(C64::new(self.sign, 0.0), |acc, i| acc * self.lu[(i, i)])
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &[C64]) -> Option<Vec<C64>> {
        if self.singular {
            return None;
        }
        let n = self.lu.rows;
        let mut y: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                y[i] = y[i] - l * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                y[i] = y[i] - u * y[k];
            }
            y[i] /= self.lu[(i, i)];
        }
        Some(y)
    }

    pub fn inverse(&self) -> Option<CMatrix> {
        let n = self.lu.rows;
        let mut inv = CMatrix::zeros(n, n);
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = ZERO);
            e[j] = ONE;
            inv.set_column(j, &self.solve(&e)?);
        }
        Some(inv)
    }
}

/// Singular values (descending) and matching right singular vectors.
#[derive(Clone, Debug)]
pub struct Svd {
    pub values: Vec<f64>,
    pub v: CMatrix,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample() -> CMatrix {
        CMatrix::from_vec(
            3,
            3,
            vec![
                c(2.0, 1.0),
                c(-1.0, 0.0),
                c(0.5, 0.0),
                c(1.0, -2.0),
                c(3.0, 0.0),
                c(0.0, 1.0),
                c(0.0, 0.0),
                c(4.0, 1.0),
                c(-2.0, 0.5),
            ],
        )
        .unwrap()
    }

    #[test]
    fn hermitian_spectrum() {
        // [[2, 1-i], [1+i, 3]]: eigenvalues 1 and 4
        let h = CMatrix::from_vec(2, 2, vec![c(2.0, 0.0), c(1.0, -1.0), c(1.0, 1.0), c(3.0, 0.0)]).unwrap();
        let ev = h.hermitian_eigenvalues();
        assert_relative_eq!(ev[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1], 4.0, epsilon = 1e-14);
        let m = CMatrix::from_vec(
            3,
            3,
            vec![c(1.0, 0.0), c(0.0, 2.0), c(0.5, 0.5), c(0.0, -2.0), c(-1.0, 0.0), c(0.0, 0.0), c(0.5, -0.5), c(0.0, 0.0), c(2.0, 0.0)],
        )
        .unwrap();
        let ev = m.hermitian_eigenvalues();
        assert_relative_eq!(ev.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        assert_relative_eq!(ev.iter().product::<f64>(), m.det().re, epsilon = 1e-12);
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let a = sample();
        let by_cofactor: C64 = (0..3)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                a[(0, j)] * a.minor(0, j) * s
            })
            .sum();
        let d = a.det();
        assert_relative_eq!(d.re, by_cofactor.re, epsilon = 1e-12);
        assert_relative_eq!(d.im, by_cofactor.im, epsilon = 1e-12);
    }

    #[test]
    fn adjugate_times_matrix_is_det_identity() {
        let a = sample();
        let prod = a.matmul(&a.adjugate());
        let d = a.det();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { d } else { ZERO };
                assert!((prod[(i, j)] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn adjugate_of_singular_matrix_is_finite_rank_one() {
        // rows 1 and 2 are proportional
        let a = CMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(a.adjugate_column(1), vec![c(-1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn inverse_round_trip() {
        let a = sample();
        let inv = a.inverse().unwrap();
        let id = a.matmul(&inv);
        assert!(id.sub(&CMatrix::identity(3)).max_abs() < 1e-13);
    }

    #[test]
    fn svd_of_diagonal_and_rank_deficient() {
        let a = CMatrix::diag(&[c(3.0, 0.0), c(0.0, -5.0), c(1e-9, 0.0)]);
        let s = a.singular_values();
        assert_relative_eq!(s[0], 5.0, epsilon = 1e-14);
        assert_relative_eq!(s[1], 3.0, epsilon = 1e-14);
        assert_relative_eq!(s[2], 1e-9, max_relative = 1e-12);

        let wide = CMatrix::from_real(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(wide.nullity(1e-12), 2);
        let k = wide.kernel(1e-12);
        assert_eq!(k.cols(), 2);
        let prod = wide.matmul(&k);
        assert!(prod.max_abs() < 1e-14);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 2.5;
        let g = CMatrix::from_real(2, 2, &[0.0, -t, t, 0.0]).unwrap();
        let e = g.expm();
        assert_relative_eq!(e[(0, 0)].re, libm::cos(t), epsilon = 1e-13);
        assert_relative_eq!(e[(1, 0)].re, libm::sin(t), epsilon = 1e-13);
    }

    #[test]
    fn greedy_columns_skip_zero_columns() {
        let m = CMatrix::from_real(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(m.greedy_columns(2), vec![0, 2]);
    }
}
