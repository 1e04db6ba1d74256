//! Based bigraded cochain complexes and chain maps between them.
//!
//! Every module comes with a distinguished basis; matrices act on column
//! vectors, so the differential d_i : C^i → C^{i+1} is a rank(i+1) × rank(i)
//! matrix. Differentials preserve the internal (q) grading; chain maps may
//! shift both gradings by a fixed bidegree.

use std::collections::BTreeMap;

use crate::matrix::SpMat;
use crate::scalar::Ring;
use crate::{Error, Result};

/// A free module with a named, internally graded basis.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BasedModule {
    pub labels: Vec<String>,
    pub q: Vec<i64>,
}

impl BasedModule {
    pub fn new(labels: Vec<String>, q: Vec<i64>) -> Self {
        assert_eq!(labels.len(), q.len());
        BasedModule { labels, q }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, label: String, q: i64) {
        self.labels.push(label);
        self.q.push(q);
    }
}

/// A cochain complex of based modules, indexed by homological degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainComplex<R: Ring> {
    modules: BTreeMap<i64, BasedModule>,
    diffs: BTreeMap<i64, SpMat<R>>,
}

impl<R: Ring> Default for ChainComplex<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Ring> ChainComplex<R> {
    pub fn new() -> Self {
        ChainComplex { modules: BTreeMap::new(), diffs: BTreeMap::new() }
    }

    pub fn set_module(&mut self, i: i64, m: BasedModule) {
        if m.is_empty() {
            self.modules.remove(&i);
        } else {
            self.modules.insert(i, m);
        }
    }

    pub fn set_diff(&mut self, i: i64, d: SpMat<R>) {
        assert_eq!(d.ncols(), self.rank(i), "d_{i} domain");
        assert_eq!(d.nrows(), self.rank(i + 1), "d_{i} codomain");
        if d.is_zero() {
            self.diffs.remove(&i);
        } else {
            self.diffs.insert(i, d);
        }
    }

    pub fn module(&self, i: i64) -> Option<&BasedModule> {
        self.modules.get(&i)
    }

    pub fn rank(&self, i: i64) -> usize {
        self.modules.get(&i).map_or(0, BasedModule::len)
    }

    pub fn total_rank(&self) -> usize {
        self.modules.values().map(BasedModule::len).sum()
    }

    pub fn degrees(&self) -> Vec<i64> {
        self.modules.keys().copied().collect()
    }

    pub fn min_degree(&self) -> i64 {
        self.modules.keys().next().copied().unwrap_or(0)
    }

    pub fn max_degree(&self) -> i64 {
        self.modules.keys().last().copied().unwrap_or(0)
    }

    pub fn d(&self, i: i64) -> SpMat<R> {
        self.diffs
            .get(&i)
            .cloned()
            .unwrap_or_else(|| SpMat::zero(self.rank(i + 1), self.rank(i)))
    }

    pub fn label(&self, i: i64, idx: usize) -> &str {
        &self.modules[&i].labels[idx]
    }

    pub fn qdeg(&self, i: i64, idx: usize) -> i64 {
        self.modules[&i].q[idx]
    }

    /// Basis elements as (degree, index) pairs in order.
    pub fn gens(&self) -> Vec<(i64, usize)> {
        self.modules
            .iter()
            .flat_map(|(i, m)| (0..m.len()).map(move |k| (*i, k)))
            .collect()
    }

    /// d ∘ d = 0, matching shapes, and q-preservation.
    pub fn check(&self) -> Result<()> {
        for (i, d) in &self.diffs {
            if d.ncols() != self.rank(*i) || d.nrows() != self.rank(i + 1) {
                return Err(Error::DimensionMismatch {
                    got: d.ncols(),
                    expected: self.rank(*i),
                });
            }
            for (r, c, _) in d.triplets() {
                if self.qdeg(i + 1, r) != self.qdeg(*i, c) {
                    return Err(Error::FiltrationViolation);
                }
            }
        }
        for (i, d) in &self.diffs {
            if let Some(next) = self.diffs.get(&(i + 1)) {
                if !next.mul(d).is_zero() {
                    return Err(Error::NotAComplex(*i));
                }
            }
        }
        Ok(())
    }

    /// The dual complex: degrees negated, differentials transposed, and
    /// every internal grade negated. Basis labels pick up a star.
    pub fn dual(&self) -> ChainComplex<R> {
        let mut out = ChainComplex::new();
        for (i, m) in &self.modules {
            let labels = m.labels.iter().map(|l| star(l)).collect();
            let q = m.q.iter().map(|q| -q).collect();
            out.set_module(-i, BasedModule::new(labels, q));
        }
        for (i, d) in &self.diffs {
            // d_i : C^i → C^{i+1} dualizes to (C*)^{-i-1} → (C*)^{-i}.
            out.set_diff(-(i + 1), d.transpose());
        }
        out
    }

    /// Tensor product with Koszul signs: d(x⊗y) = dx⊗y + (−1)^{i+offset} x⊗dy
    /// where i is the degree of x. The layout records where each block of
    /// generators starts.
    pub fn tensor(a: &ChainComplex<R>, b: &ChainComplex<R>, sign_offset: u32)
        -> (ChainComplex<R>, TensorLayout)
    {
        let mut out = ChainComplex::new();
        let mut layout = TensorLayout { blocks: BTreeMap::new(), b_ranks: BTreeMap::new() };
        for (i2, m2) in &b.modules {
            layout.b_ranks.insert(*i2, m2.len());
        }
        let degrees: Vec<i64> = {
            let mut ds = Vec::new();
            for i1 in a.degrees() {
                for i2 in b.degrees() {
                    ds.push(i1 + i2);
                }
            }
            ds.sort_unstable();
            ds.dedup();
            ds
        };
        for k in degrees {
            let mut m = BasedModule::default();
            for (i1, m1) in &a.modules {
                let i2 = k - i1;
                let Some(m2) = b.modules.get(&i2) else { continue };
                layout.blocks.insert((*i1, i2), m.len());
                for a_idx in 0..m1.len() {
                    for b_idx in 0..m2.len() {
                        m.push(
                            format!("{}⊗{}", m1.labels[a_idx], m2.labels[b_idx]),
                            m1.q[a_idx] + m2.q[b_idx],
                        );
                    }
                }
            }
            out.set_module(k, m);
        }
        for k in out.degrees() {
            let mut d = SpMat::zero(out.rank(k + 1), out.rank(k));
            for ((i1, i2), off) in &layout.blocks {
                if i1 + i2 != k {
                    continue;
                }
                let r2 = b.rank(*i2);
                // d1 ⊗ id into block (i1+1, i2)
                if let Some(tgt) = layout.blocks.get(&(i1 + 1, *i2)) {
                    for (r, c, v) in a.d(*i1).triplets() {
                        for y in 0..r2 {
                            d.add_to(tgt + r * r2 + y, off + c * r2 + y, v.clone());
                        }
                    }
                }
                // ± id ⊗ d2 into block (i1, i2+1)
                if let Some(tgt) = layout.blocks.get(&(*i1, i2 + 1)) {
                    let r2v = b.rank(i2 + 1);
                    let sign = R::neg_one_pow((i1.rem_euclid(2) as u32) + sign_offset);
                    for (r, c, v) in b.d(*i2).triplets() {
                        for x in 0..a.rank(*i1) {
                            d.add_to(
                                tgt + x * r2v + r,
                                off + x * r2 + c,
                                sign.clone() * v.clone(),
                            );
                        }
                    }
                }
            }
            out.set_diff(k, d);
        }
        (out, layout)
    }
}

/// Where each (left degree, right degree) block of a tensor product starts.
#[derive(Clone, Debug)]
pub struct TensorLayout {
    pub blocks: BTreeMap<(i64, i64), usize>,
    b_ranks: BTreeMap<i64, usize>,
}

impl TensorLayout {
    /// Index of x_a ⊗ y_b in the tensor basis, for x_a the a-th generator
    /// in degree i1 and y_b the b-th in degree i2.
    pub fn index(&self, i1: i64, a: usize, i2: i64, b: usize) -> usize {
        self.blocks[&(i1, i2)] + a * self.b_ranks[&i2] + b
    }
}

/// Starring involution on labels: add a trailing `*`, or remove one.
fn star(label: &str) -> String {
    match label.strip_suffix('*') {
        Some(base) => base.to_string(),
        None => format!("{label}*"),
    }
}

/// A degree-homogeneous map of complexes, stored as one block per source
/// degree: block(i) : src^i → tgt^{i + shift.0}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainMap<R: Ring> {
    pub blocks: BTreeMap<i64, SpMat<R>>,
    pub shift: (i64, i64),
}

impl<R: Ring> ChainMap<R> {
    pub fn new(shift: (i64, i64)) -> Self {
        ChainMap { blocks: BTreeMap::new(), shift }
    }

    pub fn identity(c: &ChainComplex<R>) -> Self {
        let mut f = ChainMap::new((0, 0));
        for i in c.degrees() {
            f.blocks.insert(i, SpMat::identity(c.rank(i)));
        }
        f
    }

    pub fn set_block(&mut self, i: i64, m: SpMat<R>) {
        if m.is_zero() {
            self.blocks.remove(&i);
        } else {
            self.blocks.insert(i, m);
        }
    }

    pub fn block(&self, i: i64, src: &ChainComplex<R>, tgt: &ChainComplex<R>) -> SpMat<R> {
        self.blocks
            .get(&i)
            .cloned()
            .unwrap_or_else(|| SpMat::zero(tgt.rank(i + self.shift.0), src.rank(i)))
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(SpMat::is_zero)
    }

    /// g ∘ f, where f maps into the domain of g.
    pub fn compose(g: &ChainMap<R>, f: &ChainMap<R>, src: &ChainComplex<R>, mid: &ChainComplex<R>, tgt: &ChainComplex<R>) -> ChainMap<R> {
        let mut out = ChainMap::new((g.shift.0 + f.shift.0, g.shift.1 + f.shift.1));
        for i in src.degrees() {
            let fi = f.block(i, src, mid);
            let gi = g.block(i + f.shift.0, mid, tgt);
            out.set_block(i, gi.mul(&fi));
        }
        out
    }

    pub fn add(&self, other: &ChainMap<R>) -> ChainMap<R> {
        assert_eq!(self.shift, other.shift);
        let mut out = self.clone();
        for (i, b) in &other.blocks {
            match out.blocks.get_mut(i) {
                Some(mine) => {
                    let sum = mine.add(b);
                    if sum.is_zero() {
                        out.blocks.remove(i);
                    } else {
                        *mine = sum;
                    }
                }
                None => {
                    out.blocks.insert(*i, b.clone());
                }
            }
        }
        out
    }

    pub fn neg(&self) -> ChainMap<R> {
        let mut out = self.clone();
        for b in out.blocks.values_mut() {
            *b = b.neg();
        }
        out
    }

    pub fn sub(&self, other: &ChainMap<R>) -> ChainMap<R> {
        self.add(&other.neg())
    }

    /// The same blocks with every entry pushed through a ring map.
    pub fn map_entries<S: Ring>(&self, f: impl Fn(&R) -> S) -> ChainMap<S> {
        let mut out = ChainMap::new(self.shift);
        for (i, b) in &self.blocks {
            let tri = b.triplets().into_iter().map(|(r, c, v)| (r, c, f(&v)));
            out.set_block(*i, SpMat::from_triplets(b.nrows(), b.ncols(), tri));
        }
        out
    }

    /// Check shapes, the q-shift on entries, and commuting with the
    /// differentials.
    pub fn verify(&self, src: &ChainComplex<R>, tgt: &ChainComplex<R>) -> Result<()> {
        let (dh, dq) = self.shift;
        for (i, b) in &self.blocks {
            if b.ncols() != src.rank(*i) || b.nrows() != tgt.rank(i + dh) {
                return Err(Error::DimensionMismatch {
                    got: b.ncols(),
                    expected: src.rank(*i),
                });
            }
            for (r, c, _) in b.triplets() {
                if tgt.qdeg(i + dh, r) != src.qdeg(*i, c) + dq {
                    return Err(Error::FiltrationViolation);
                }
            }
        }
        for i in src.degrees() {
            let lhs = tgt.d(i + dh).mul(&self.block(i, src, tgt));
            let rhs = self.block(i + 1, src, tgt).mul(&src.d(i));
            if lhs != rhs {
                return Err(Error::ChainMapViolation(i));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Int;

    fn z(n: i64) -> Int {
        Int::from(n)
    }

    /// 0 → Z --2--> Z → 0 in degrees 0, 1.
    fn small() -> ChainComplex<Int> {
        let mut c = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["x".into()], vec![0]));
        c.set_module(1, BasedModule::new(vec!["y".into()], vec![0]));
        c.set_diff(0, SpMat::from_triplets(1, 1, vec![(0, 0, z(2))]));
        c.check().unwrap();
        c
    }

    #[test]
    fn check_catches_non_complexes() {
        let mut c = ChainComplex::new();
        for i in 0..3 {
            c.set_module(i, BasedModule::new(vec![format!("e{i}")], vec![0]));
        }
        c.set_diff(0, SpMat::from_triplets(1, 1, vec![(0, 0, z(1))]));
        c.set_diff(1, SpMat::from_triplets(1, 1, vec![(0, 0, z(1))]));
        assert!(matches!(c.check(), Err(Error::NotAComplex(0))));
    }

    #[test]
    fn check_catches_q_violation() {
        let mut c = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["x".into()], vec![0]));
        c.set_module(1, BasedModule::new(vec!["y".into()], vec![5]));
        c.set_diff(0, SpMat::from_triplets(1, 1, vec![(0, 0, z(1))]));
        assert!(matches!(c.check(), Err(Error::FiltrationViolation)));
    }

    #[test]
    fn dual_is_an_involution_and_a_complex() {
        let c = small();
        let d = c.dual();
        d.check().unwrap();
        assert_eq!(d.rank(0), 1);
        assert_eq!(d.rank(-1), 1);
        assert_eq!(d.module(0).unwrap().labels, vec!["x*"]);
        assert_eq!(d.d(-1).get(0, 0), z(2));
        assert_eq!(d.dual(), c);
    }

    #[test]
    fn tensor_squares_to_zero_with_koszul_signs() {
        let c = small();
        let (t, layout) = ChainComplex::tensor(&c, &c, 0);
        t.check().unwrap();
        assert_eq!(t.rank(0), 1);
        assert_eq!(t.rank(1), 2);
        assert_eq!(t.rank(2), 1);
        // d(x⊗y part): the (0,1) block maps to degree 2 via d1⊗id with no
        // sign, the (1,0) block via −id⊗d2 ... both entries magnitude 2.
        let ix_xy = layout.index(0, 0, 1, 0);
        let ix_yx = layout.index(1, 0, 0, 0);
        let d1 = t.d(1);
        assert_eq!(d1.get(0, ix_xy).clone(), z(2));
        assert_eq!(d1.get(0, ix_yx).clone(), z(-2));

        // offset flips the Koszul sign: it sits on the id⊗d₂ summand, so the
        // first-factor term is untouched and the second-factor term negates
        let (t2, _) = ChainComplex::tensor(&c, &c, 1);
        t2.check().unwrap();
        assert_eq!(t2.d(1).get(0, ix_xy).clone(), z(2));
        assert_eq!(t2.d(1).get(0, ix_yx).clone(), z(2));
    }

    #[test]
    fn chain_maps_compose_and_verify() {
        let c = small();
        let id = ChainMap::identity(&c);
        id.verify(&c, &c).unwrap();
        let two = ChainMap::compose(&id, &id, &c, &c, &c).add(&id);
        assert_eq!(two.block(0, &c, &c).get(0, 0), z(2));

        // doubling on degree 0 only is not a chain map
        let mut bad = ChainMap::new((0, 0));
        bad.set_block(0, SpMat::from_triplets(1, 1, vec![(0, 0, z(2))]));
        bad.set_block(1, SpMat::identity(1));
        assert!(matches!(bad.verify(&c, &c), Err(Error::ChainMapViolation(0))));
    }
}
