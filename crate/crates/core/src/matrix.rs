//! Sparse and dense matrices over an exact [`Ring`], plus row reduction
//! over a [`Field`].
//!
//! [`SpMat`] is column-major and is what chain complexes and chain maps are
//! made of. [`Mat`] is a small dense matrix used where elimination wants
//! random access: Smith normal form and field RREF.

use std::collections::BTreeMap;

use crate::scalar::{Field, Ring};

/// Column-major sparse matrix. Absent entries are zero; stored entries are
/// kept nonzero.
#[derive(Clone, PartialEq, Eq)]
pub struct SpMat<R> {
    nrows: usize,
    ncols: usize,
    cols: Vec<BTreeMap<usize, R>>,
}

impl<R: Ring> SpMat<R> {
    pub fn zero(nrows: usize, ncols: usize) -> Self {
        SpMat { nrows, ncols, cols: vec![BTreeMap::new(); ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.cols[i].insert(i, R::one());
        }
        m
    }

    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, R)>,
    {
        let mut m = Self::zero(nrows, ncols);
        for (r, c, v) in triplets {
            m.add_to(r, c, v);
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(|c| c.is_empty())
    }

    pub fn get(&self, r: usize, c: usize) -> R {
        self.cols[c].get(&r).cloned().unwrap_or_else(R::zero)
    }

    pub fn set(&mut self, r: usize, c: usize, v: R) {
        assert!(r < self.nrows && c < self.ncols);
        if v.is_zero() {
            self.cols[c].remove(&r);
        } else {
            self.cols[c].insert(r, v);
        }
    }

    pub fn add_to(&mut self, r: usize, c: usize, v: R) {
        assert!(r < self.nrows && c < self.ncols);
        if v.is_zero() {
            return;
        }
        let entry = self.cols[c].entry(r).or_insert_with(R::zero);
        *entry = entry.clone() + v;
        if entry.is_zero() {
            self.cols[c].remove(&r);
        }
    }

    pub fn col(&self, c: usize) -> &BTreeMap<usize, R> {
        &self.cols[c]
    }

    /// Entries as (row, col, value), ordered by column then row.
    pub fn triplets(&self) -> Vec<(usize, usize, R)> {
        let mut out = Vec::with_capacity(self.nnz());
        for (c, col) in self.cols.iter().enumerate() {
            for (r, v) in col {
                out.push((*r, c, v.clone()));
            }
        }
        out
    }

    pub fn transpose(&self) -> SpMat<R> {
        let mut t = SpMat::zero(self.ncols, self.nrows);
        for (c, col) in self.cols.iter().enumerate() {
            for (r, v) in col {
                t.cols[*r].insert(c, v.clone());
            }
        }
        t
    }

    pub fn neg(&self) -> SpMat<R> {
        let mut out = self.clone();
        for col in out.cols.iter_mut() {
            for v in col.values_mut() {
                *v = -v.clone();
            }
        }
        out
    }

    pub fn add(&self, rhs: &SpMat<R>) -> SpMat<R> {
        assert_eq!(self.nrows, rhs.nrows);
        assert_eq!(self.ncols, rhs.ncols);
        let mut out = self.clone();
        for (c, col) in rhs.cols.iter().enumerate() {
            for (r, v) in col {
                out.add_to(*r, c, v.clone());
            }
        }
        out
    }

    pub fn sub(&self, rhs: &SpMat<R>) -> SpMat<R> {
        self.add(&rhs.neg())
    }

    /// self · rhs.
    pub fn mul(&self, rhs: &SpMat<R>) -> SpMat<R> {
        assert_eq!(
            self.ncols, rhs.nrows,
            "mul shape mismatch: {}x{} · {}x{}",
            self.nrows, self.ncols, rhs.nrows, rhs.ncols
        );
        let mut out = SpMat::zero(self.nrows, rhs.ncols);
        for (j, rcol) in rhs.cols.iter().enumerate() {
            for (k, b) in rcol {
                for (i, a) in &self.cols[*k] {
                    out.add_to(*i, j, a.clone() * b.clone());
                }
            }
        }
        out
    }

    /// The submatrix with the given rows and columns, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SpMat<R> {
        let row_pos: std::collections::HashMap<usize, usize> =
            rows.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        let mut out = SpMat::zero(rows.len(), cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (r, v) in &self.cols[*c] {
                if let Some(i) = row_pos.get(r) {
                    out.cols[j].insert(*i, v.clone());
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat<R> {
        let mut m = Mat::zero(self.nrows, self.ncols);
        for (c, col) in self.cols.iter().enumerate() {
            for (r, v) in col {
                m.set(*r, c, v.clone());
            }
        }
        m
    }
}

impl<R: Ring> std::fmt::Debug for SpMat<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SpMat {}x{} nnz={}", self.nrows, self.ncols, self.nnz())?;
        if self.nrows <= 16 && self.ncols <= 16 {
            writeln!(f)?;
            for r in 0..self.nrows {
                write!(f, "  [")?;
                for c in 0..self.ncols {
                    if c > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{}", self.get(r, c))?;
                }
                writeln!(f, "]")?;
            }
        }
        Ok(())
    }
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct Mat<R> {
    nrows: usize,
    ncols: usize,
    data: Vec<R>,
}

impl<R: Ring> Mat<R> {
    pub fn zero(nrows: usize, ncols: usize) -> Self {
        Mat { nrows, ncols, data: vec![R::zero(); nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.set(i, i, R::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<R>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == ncols));
        Mat { nrows, ncols, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_columns(nrows: usize, cols: &[Vec<R>]) -> Self {
        let mut m = Mat::zero(nrows, cols.len());
        for (c, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), nrows);
            for (r, v) in col.iter().enumerate() {
                m.set(r, c, v.clone());
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, r: usize, c: usize) -> &R {
        &self.data[r * self.ncols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: R) {
        self.data[r * self.ncols + c] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    pub fn column(&self, c: usize) -> Vec<R> {
        (0..self.nrows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.ncols {
            self.data.swap(i * self.ncols + c, j * self.ncols + c);
        }
    }

    pub fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for r in 0..self.nrows {
            self.data.swap(r * self.ncols + i, r * self.ncols + j);
        }
    }

    /// row_i += c · row_j.
    pub fn add_row_multiple(&mut self, i: usize, j: usize, c: &R) {
        assert_ne!(i, j);
        for k in 0..self.ncols {
            let v = self.get(i, k).clone() + c.clone() * self.get(j, k).clone();
            self.set(i, k, v);
        }
    }

    /// col_i += c · col_j.
    pub fn add_col_multiple(&mut self, i: usize, j: usize, c: &R) {
        assert_ne!(i, j);
        for k in 0..self.nrows {
            let v = self.get(k, i).clone() + c.clone() * self.get(k, j).clone();
            self.set(k, i, v);
        }
    }

    pub fn scale_row(&mut self, i: usize, c: &R) {
        for k in 0..self.ncols {
            let v = c.clone() * self.get(i, k).clone();
            self.set(i, k, v);
        }
    }

    pub fn scale_col(&mut self, j: usize, c: &R) {
        for k in 0..self.nrows {
            let v = c.clone() * self.get(k, j).clone();
            self.set(k, j, v);
        }
    }

    pub fn mul_vec(&self, v: &[R]) -> Vec<R> {
        assert_eq!(v.len(), self.ncols);
        let mut out = vec![R::zero(); self.nrows];
        for (r, o) in out.iter_mut().enumerate() {
            for c in 0..self.ncols {
                if !self.get(r, c).is_zero() && !v[c].is_zero() {
                    *o = o.clone() + self.get(r, c).clone() * v[c].clone();
                }
            }
        }
        out
    }

    pub fn mul(&self, rhs: &Mat<R>) -> Mat<R> {
        assert_eq!(self.ncols, rhs.nrows);
        let mut out: Mat<R> = Mat::zero(self.nrows, rhs.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.ncols {
                    let v = out.get(i, j).clone() + a.clone() * rhs.get(k, j).clone();
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat<R> {
        let mut t = Mat::zero(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for c in 0..self.ncols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn to_sparse(&self) -> SpMat<R> {
        let mut m = SpMat::zero(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for c in 0..self.ncols {
                let v = self.get(r, c);
                if !v.is_zero() {
                    m.set(r, c, v.clone());
                }
            }
        }
        m
    }
}

impl<R: Ring> std::fmt::Debug for Mat<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mat {}x{}", self.nrows, self.ncols)?;
        for r in 0..self.nrows.min(16) {
            write!(f, "  [")?;
            for c in 0..self.ncols.min(16) {
                if c > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", self.get(r, c))?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref<F: Field>(m: &mut Mat<F>) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..m.ncols() {
        if row == m.nrows() {
            break;
        }
        let Some(p) = (row..m.nrows()).find(|&r| !m.get(r, col).is_zero()) else {
            continue;
        };
        m.swap_rows(row, p);
        let inv = m.get(row, col).inv();
        m.scale_row(row, &inv);
        for r in 0..m.nrows() {
            if r != row && !m.get(r, col).is_zero() {
                let c = -m.get(r, col).clone();
                m.add_row_multiple(r, row, &c);
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

pub fn rank<F: Field>(m: &Mat<F>) -> usize {
    let mut work = m.clone();
    rref(&mut work).len()
}

/// A basis of ker(m) as column vectors.
pub fn kernel_basis<F: Field>(m: &Mat<F>) -> Vec<Vec<F>> {
    let mut work = m.clone();
    let pivots = rref(&mut work);
    let pivot_row: std::collections::HashMap<usize, usize> =
        pivots.iter().enumerate().map(|(r, c)| (*c, r)).collect();
    let mut basis = Vec::new();
    for free in 0..m.ncols() {
        if pivot_row.contains_key(&free) {
            continue;
        }
        let mut v = vec![F::zero(); m.ncols()];
        v[free] = F::one();
        for (c, r) in &pivot_row {
            let coeff = work.get(*r, free);
            if !coeff.is_zero() {
                v[*c] = -coeff.clone();
            }
        }
        basis.push(v);
    }
    basis
}

/// One solution x of m · x = b, if any.
pub fn solve<F: Field>(m: &Mat<F>, b: &[F]) -> Option<Vec<F>> {
    assert_eq!(b.len(), m.nrows());
    let mut aug = Mat::zero(m.nrows(), m.ncols() + 1);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            aug.set(r, c, m.get(r, c).clone());
        }
        aug.set(r, m.ncols(), b[r].clone());
    }
    let pivots = rref(&mut aug);
    if pivots.contains(&m.ncols()) {
        return None;
    }
    let mut x = vec![F::zero(); m.ncols()];
    for (r, c) in pivots.iter().enumerate() {
        x[*c] = aug.get(r, m.ncols()).clone();
    }
    Some(x)
}
