//! Smith normal form over an integral [`IntRing`], with invertible row and
//! column transforms tracked so that linear systems can be solved exactly.

use crate::matrix::Mat;
use crate::scalar::IntRing;

/// The decomposition u · a · v = d with d diagonal and the diagonal entries
/// dividing each other in order. u and v are invertible over the ring, and
/// their inverses are tracked alongside.
pub struct Snf<I> {
    pub d: Mat<I>,
    pub u: Mat<I>,
    pub v: Mat<I>,
    pub u_inv: Mat<I>,
    pub v_inv: Mat<I>,
}

impl<I: IntRing> Snf<I> {
    /// Diagonal entries that are nonzero, made positive.
    pub fn invariant_factors(&self) -> Vec<I> {
        let k = self.d.nrows().min(self.d.ncols());
        (0..k)
            .map(|i| self.d.get(i, i).abs())
            .filter(|v| !v.is_zero())
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.invariant_factors().len()
    }

    /// Invariant factors of absolute value at least 2: the torsion part of
    /// the cokernel.
    pub fn torsion(&self) -> Vec<I> {
        self.invariant_factors()
            .into_iter()
            .filter(|f| !f.is_one())
            .collect()
    }
}

pub fn smith_normal_form<I: IntRing>(a: &Mat<I>) -> Snf<I> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut d = a.clone();
    let mut u = Mat::identity(m);
    let mut u_inv = Mat::identity(m);
    let mut v = Mat::identity(n);
    let mut v_inv = Mat::identity(n);

    // Row op: d := E · d, u := E · u, u_inv := u_inv · E⁻¹.
    // Col op: d := d · F, v := v · F, v_inv := F⁻¹ · v_inv.
    let mut t = 0;
    while t < m.min(n) {
        // Smallest nonzero entry of the trailing block becomes the pivot.
        let mut pivot: Option<(usize, usize)> = None;
        for i in t..m {
            for j in t..n {
                if d.get(i, j).is_zero() {
                    continue;
                }
                match &pivot {
                    Some((pi, pj)) if d.get(*pi, *pj).abs() <= d.get(i, j).abs() => {}
                    _ => pivot = Some((i, j)),
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        d.swap_rows(t, pi);
        u.swap_rows(t, pi);
        u_inv.swap_cols(t, pi);
        d.swap_cols(t, pj);
        v.swap_cols(t, pj);
        v_inv.swap_rows(t, pj);

        // Clear column t and row t with truncated division; restart pivot
        // selection whenever a remainder survives.
        let mut clean = true;
        for i in (t + 1)..m {
            if d.get(i, t).is_zero() {
                continue;
            }
            let (q, r) = d.get(i, t).div_rem(d.get(t, t));
            let c = -q.clone();
            d.add_row_multiple(i, t, &c);
            u.add_row_multiple(i, t, &c);
            u_inv.add_col_multiple(t, i, &q);
            if !r.is_zero() {
                clean = false;
            }
        }
        for j in (t + 1)..n {
            if d.get(t, j).is_zero() {
                continue;
            }
            let (q, r) = d.get(t, j).div_rem(d.get(t, t));
            let c = -q.clone();
            d.add_col_multiple(j, t, &c);
            v.add_col_multiple(j, t, &c);
            v_inv.add_row_multiple(t, j, &q);
            if !r.is_zero() {
                clean = false;
            }
        }
        if !clean {
            continue;
        }

        // Pivot must divide everything below-right; if not, fold the
        // offending row in and try again.
        let mut divides = true;
        'scan: for i in (t + 1)..m {
            for j in (t + 1)..n {
                if !d.get(i, j).is_multiple_of(d.get(t, t)) {
                    let one = I::one();
                    d.add_row_multiple(t, i, &one);
                    u.add_row_multiple(t, i, &one);
                    let neg = -I::one();
                    u_inv.add_col_multiple(i, t, &neg);
                    divides = false;
                    break 'scan;
                }
            }
        }
        if !divides {
            continue;
        }

        if d.get(t, t).is_negative() {
            let neg = -I::one();
            d.scale_row(t, &neg);
            u.scale_row(t, &neg);
            u_inv.scale_col(t, &neg);
        }
        t += 1;
    }

    Snf { d, u, v, u_inv, v_inv }
}

/// One integral solution x of a · x = b, if any.
pub fn solve_z<I: IntRing>(a: &Mat<I>, b: &[I]) -> Option<Vec<I>> {
    assert_eq!(b.len(), a.nrows());
    let snf = smith_normal_form(a);
    // a·x = b  ⇔  d·(v⁻¹x) = u·b.
    let mut c = vec![I::zero(); a.nrows()];
    for (i, ci) in c.iter_mut().enumerate() {
        for k in 0..a.nrows() {
            *ci = ci.clone() + snf.u.get(i, k).clone() * b[k].clone();
        }
    }
    let mut y = vec![I::zero(); a.ncols()];
    for i in 0..a.nrows() {
        let di = if i < a.ncols() { snf.d.get(i, i).clone() } else { I::zero() };
        if di.is_zero() {
            if !c[i].is_zero() {
                return None;
            }
        } else {
            let (q, r) = c[i].div_rem(&di);
            if !r.is_zero() {
                return None;
            }
            y[i] = q;
        }
    }
    let mut x = vec![I::zero(); a.ncols()];
    for (i, xi) in x.iter_mut().enumerate() {
        for k in 0..a.ncols() {
            if !snf.v.get(i, k).is_zero() && !y[k].is_zero() {
                *xi = xi.clone() + snf.v.get(i, k).clone() * y[k].clone();
            }
        }
    }
    Some(x)
}
