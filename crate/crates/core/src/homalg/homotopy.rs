//! Deciding whether two chain maps are chain homotopic, by solving
//! f − g = d∘H + H∘d for the entries of H.
//!
//! The system splits into independent blocks: an equation at source
//! generator c and target generator r only involves homotopy entries whose
//! source has the internal grade of c and whose target has the grade of r,
//! because differentials preserve the internal grading. Each block is a
//! small dense linear system, solved over ℤ via Smith normal form or over a
//! field by row reduction.

use std::collections::BTreeMap;

use crate::homalg::{ChainComplex, ChainMap};
use crate::matrix::Mat;
use crate::scalar::{Field, Ring};
use crate::snf::solve_z;
use crate::Int;

/// Shared assembly: returns per-block dense systems (matrix, rhs), or None
/// when f and g do not even have matching shifts.
fn homotopic_via<R: Ring>(
    f: &ChainMap<R>,
    g: &ChainMap<R>,
    src: &ChainComplex<R>,
    tgt: &ChainComplex<R>,
    solve: impl Fn(&Mat<R>, &[R]) -> Option<Vec<R>>,
) -> bool {
    assert_eq!(f.shift, g.shift, "homotopy between maps of equal shift");
    let s = f.shift.0;
    let diff = f.sub(g);
    if diff.is_zero() {
        return true;
    }

    // blocks keyed by (source grade, grade shift) of the offending entries
    let mut blocks: BTreeMap<(i64, i64), ()> = BTreeMap::new();
    for (i, m) in &diff.blocks {
        for (r, c, _) in m.triplets() {
            let q0 = src.qdeg(*i, c);
            blocks.insert((q0, tgt.qdeg(i + s, r) - q0), ());
        }
    }

    for (q0, dq) in blocks.keys() {
        // variables: H_j[r, c] with q(c) = q0 at source degree j,
        // q(r) = q0 + dq at target degree j + s − 1
        let mut var: BTreeMap<(i64, usize, usize), usize> = BTreeMap::new();
        for j in src.degrees() {
            for c in 0..src.rank(j) {
                if src.qdeg(j, c) != *q0 {
                    continue;
                }
                for r in 0..tgt.rank(j + s - 1) {
                    if tgt.qdeg(j + s - 1, r) == q0 + dq {
                        let id = var.len();
                        var.insert((j, r, c), id);
                    }
                }
            }
        }
        // equations: one per (i, r, c) in the block
        let mut rows: Vec<(BTreeMap<usize, R>, R)> = Vec::new();
        for i in src.degrees() {
            let d_src = src.d(i);
            let d_tgt = tgt.d(i + s - 1);
            let delta = diff.block(i, src, tgt);
            for c in 0..src.rank(i) {
                if src.qdeg(i, c) != *q0 {
                    continue;
                }
                for r in 0..tgt.rank(i + s) {
                    if tgt.qdeg(i + s, r) != q0 + dq {
                        continue;
                    }
                    let mut coeffs: BTreeMap<usize, R> = BTreeMap::new();
                    // (d ∘ H_i)[r, c] = Σ_{r'} d_tgt[r, r'] · H_i[r', c]
                    for rp in 0..d_tgt.ncols() {
                        let a = d_tgt.get(r, rp);
                        if a.is_zero() {
                            continue;
                        }
                        if let Some(id) = var.get(&(i, rp, c)) {
                            let e = coeffs.entry(*id).or_insert_with(R::zero);
                            *e = e.clone() + a;
                        }
                    }
                    // (H_{i+1} ∘ d_i)[r, c] = Σ_{c''} H_{i+1}[r, c''] · d[c'', c]
                    for (cpp, a) in d_src.col(c) {
                        if let Some(id) = var.get(&(i + 1, r, *cpp)) {
                            let e = coeffs.entry(*id).or_insert_with(R::zero);
                            *e = e.clone() + a.clone();
                        }
                    }
                    let rhs = delta.get(r, c);
                    if coeffs.is_empty() && rhs.is_zero() {
                        continue;
                    }
                    rows.push((coeffs, rhs));
                }
            }
        }
        let mut a = Mat::zero(rows.len(), var.len());
        let mut b = vec![R::zero(); rows.len()];
        for (k, (coeffs, rhs)) in rows.into_iter().enumerate() {
            for (id, v) in coeffs {
                a.set(k, id, v);
            }
            b[k] = rhs;
        }
        if solve(&a, &b).is_none() {
            return false;
        }
    }
    true
}

/// Are f and g chain homotopic through an integral homotopy?
pub fn is_chain_homotopic_z(
    f: &ChainMap<Int>,
    g: &ChainMap<Int>,
    src: &ChainComplex<Int>,
    tgt: &ChainComplex<Int>,
) -> bool {
    homotopic_via(f, g, src, tgt, |a, b| solve_z(a, b))
}

/// Are f and g chain homotopic over a field?
pub fn is_chain_homotopic_field<F: Field>(
    f: &ChainMap<F>,
    g: &ChainMap<F>,
    src: &ChainComplex<F>,
    tgt: &ChainComplex<F>,
) -> bool {
    homotopic_via(f, g, src, tgt, |a, b| crate::matrix::solve(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homalg::BasedModule;
    use crate::matrix::SpMat;
    use crate::scalar::F2;

    fn z(n: i64) -> Int {
        Int::from(n)
    }

    #[test]
    fn equal_maps_are_homotopic() {
        let mut c: ChainComplex<Int> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["x".into()], vec![0]));
        let id = ChainMap::identity(&c);
        assert!(is_chain_homotopic_z(&id, &id, &c, &c));
    }

    #[test]
    fn identity_and_zero_on_a_contractible_complex() {
        // ℤ --1--> ℤ is contractible: id ≃ 0
        let mut c: ChainComplex<Int> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["x".into()], vec![3]));
        c.set_module(1, BasedModule::new(vec!["y".into()], vec![3]));
        c.set_diff(0, SpMat::from_triplets(1, 1, vec![(0, 0, z(1))]));
        let id = ChainMap::identity(&c);
        let zero = ChainMap::new((0, 0));
        assert!(is_chain_homotopic_z(&id, &zero, &c, &c));
        assert!(is_chain_homotopic_z(&zero, &id, &c, &c));
    }

    #[test]
    fn homology_obstructs_homotopy() {
        // ℤ in degree 0, zero differential: id is not null homotopic
        let mut c: ChainComplex<Int> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["x".into()], vec![0]));
        let id = ChainMap::identity(&c);
        let zero = ChainMap::new((0, 0));
        assert!(!is_chain_homotopic_z(&id, &zero, &c, &c));
    }

    #[test]
    fn integral_and_field_answers_can_differ() {
        // ℤ --2--> ℤ: multiplication by 2 on degree 1 equals d∘H exactly,
        // but the identity is only null homotopic after inverting 2.
        let mut c: ChainComplex<Int> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["x".into()], vec![0]));
        c.set_module(1, BasedModule::new(vec!["y".into()], vec![0]));
        c.set_diff(0, SpMat::from_triplets(1, 1, vec![(0, 0, z(2))]));
        let id = ChainMap::identity(&c);
        let zero = ChainMap::new((0, 0));
        assert!(!is_chain_homotopic_z(&id, &zero, &c, &c));

        let mut cq: ChainComplex<crate::Rat> = ChainComplex::new();
        cq.set_module(0, BasedModule::new(vec!["x".into()], vec![0]));
        cq.set_module(1, BasedModule::new(vec!["y".into()], vec![0]));
        cq.set_diff(
            0,
            SpMat::from_triplets(1, 1, vec![(0, 0, <crate::Rat as Ring>::from_i64(2))]),
        );
        let idq = ChainMap::identity(&cq);
        let zeroq = ChainMap::new((0, 0));
        assert!(is_chain_homotopic_field(&idq, &zeroq, &cq, &cq));

        // over 𝔽₂ the differential vanishes and the identity survives
        let mut c2: ChainComplex<F2> = ChainComplex::new();
        c2.set_module(0, BasedModule::new(vec!["x".into()], vec![0]));
        c2.set_module(1, BasedModule::new(vec!["y".into()], vec![0]));
        let id2 = ChainMap::identity(&c2);
        let zero2 = ChainMap::new((0, 0));
        assert!(!is_chain_homotopic_field(&id2, &zero2, &c2, &c2));
    }

    #[test]
    fn grading_blocks_are_independent()  {
        // two generators in distinct internal grades, both contractible
        let mut c: ChainComplex<Int> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["a".into(), "b".into()], vec![0, 2]));
        c.set_module(1, BasedModule::new(vec!["u".into(), "v".into()], vec![0, 2]));
        c.set_diff(
            0,
            SpMat::from_triplets(2, 2, vec![(0, 0, z(1)), (1, 1, z(-1))]),
        );
        let id = ChainMap::identity(&c);
        let zero = ChainMap::new((0, 0));
        assert!(is_chain_homotopic_z(&id, &zero, &c, &c));
    }
}
