//! Gaussian elimination of unit pivots in a chain complex, with the
//! inclusion/projection homotopy data tracked, plus the search for a signed
//! basis bijection between two fully reduced complexes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::homalg::{BasedModule, ChainComplex, ChainMap};
use crate::matrix::SpMat;
use crate::scalar::Ring;
use crate::{Error, Result};

/// A complex reduced by eliminating unit pivots, together with the
/// inclusion ι : reduced → original and projection π : original → reduced.
/// Both are chain homotopy equivalences, π ∘ ι is the identity, and the
/// accumulated homotopy H certifies id − ι∘π = d∘H + H∘d on the original.
pub struct Reduction<R: Ring> {
    pub reduced: ChainComplex<R>,
    pub include: ChainMap<R>,
    pub project: ChainMap<R>,
    pub homotopy: ChainMap<R>,
}

/// One elimination step, with the homotopy H satisfying
/// id − ι∘π = d∘H + H∘d.
pub struct StepReduction<R: Ring> {
    pub reduced: ChainComplex<R>,
    pub include: ChainMap<R>,
    pub project: ChainMap<R>,
    pub homotopy: ChainMap<R>,
}

/// A sparse matrix under row/column surgery: hash entries with row and
/// column indexes kept sorted for deterministic sweeps.
struct WorkMat<R> {
    entries: HashMap<(usize, usize), R>,
    rows: BTreeMap<usize, BTreeSet<usize>>,
    cols: BTreeMap<usize, BTreeSet<usize>>,
}

impl<R: Ring> WorkMat<R> {
    fn new() -> Self {
        WorkMat { entries: HashMap::new(), rows: BTreeMap::new(), cols: BTreeMap::new() }
    }

    fn from_sp(m: &SpMat<R>) -> Self {
        let mut w = WorkMat::new();
        for (r, c, v) in m.triplets() {
            w.set(r, c, v);
        }
        w
    }

    fn identity(n: usize) -> Self {
        let mut w = WorkMat::new();
        for i in 0..n {
            w.set(i, i, R::one());
        }
        w
    }

    fn get(&self, r: usize, c: usize) -> Option<&R> {
        self.entries.get(&(r, c))
    }

    fn set(&mut self, r: usize, c: usize, v: R) {
        if v.is_zero() {
            self.clear(r, c);
        } else {
            self.entries.insert((r, c), v);
            self.rows.entry(r).or_default().insert(c);
            self.cols.entry(c).or_default().insert(r);
        }
    }

    fn clear(&mut self, r: usize, c: usize) {
        if self.entries.remove(&(r, c)).is_some() {
            if let Some(s) = self.rows.get_mut(&r) {
                s.remove(&c);
                if s.is_empty() {
                    self.rows.remove(&r);
                }
            }
            if let Some(s) = self.cols.get_mut(&c) {
                s.remove(&r);
                if s.is_empty() {
                    self.cols.remove(&c);
                }
            }
        }
    }

    fn add(&mut self, r: usize, c: usize, v: R) {
        if v.is_zero() {
            return;
        }
        let cur = self.entries.get(&(r, c)).cloned().unwrap_or_else(R::zero);
        self.set(r, c, cur + v);
    }

    fn row(&self, r: usize) -> Vec<(usize, R)> {
        self.rows
            .get(&r)
            .into_iter()
            .flatten()
            .map(|c| (*c, self.entries[&(r, *c)].clone()))
            .collect()
    }

    fn col(&self, c: usize) -> Vec<(usize, R)> {
        self.cols
            .get(&c)
            .into_iter()
            .flatten()
            .map(|r| (*r, self.entries[&(*r, c)].clone()))
            .collect()
    }

    fn remove_row(&mut self, r: usize) {
        for (c, _) in self.row(r) {
            self.clear(r, c);
        }
    }

    fn remove_col(&mut self, c: usize) {
        for (r, _) in self.col(c) {
            self.clear(r, c);
        }
    }
}

/// Eliminate unit pivots until none remain. Pivots are taken lowest
/// homological degree first, then lowest internal degree, then basis order,
/// so the result is deterministic.
pub fn reduce_fully<R: Ring>(c: &ChainComplex<R>) -> Reduction<R> {
    reduce_constrained(c, |_, _, _| true).0
}

/// Elimination restricted to pivots the predicate admits; the arguments are
/// the differential's degree, source column and target row in the *original*
/// basis, which stays meaningful because elimination never renumbers until
/// the final compaction. Also returns the surviving original indices per
/// degree, in the order the reduced complex lists them.
pub fn reduce_constrained<R: Ring>(
    c: &ChainComplex<R>,
    allow: impl Fn(i64, usize, usize) -> bool,
) -> (Reduction<R>, BTreeMap<i64, Vec<usize>>) {
    let degrees = c.degrees();
    let mut d: BTreeMap<i64, WorkMat<R>> = BTreeMap::new();
    let mut iota: BTreeMap<i64, WorkMat<R>> = BTreeMap::new();
    let mut pi: BTreeMap<i64, WorkMat<R>> = BTreeMap::new();
    let mut homs: BTreeMap<i64, WorkMat<R>> = BTreeMap::new();
    let mut alive: BTreeMap<i64, BTreeSet<usize>> = BTreeMap::new();
    for &i in &degrees {
        d.insert(i, WorkMat::from_sp(&c.d(i)));
        iota.insert(i, WorkMat::identity(c.rank(i)));
        pi.insert(i, WorkMat::identity(c.rank(i)));
        alive.insert(i, (0..c.rank(i)).collect());
    }

    // candidate pivots keyed (degree, q of source, col, row)
    let mut cands: BTreeSet<(i64, i64, usize, usize)> = BTreeSet::new();
    for &i in &degrees {
        for ((r, col), v) in &d[&i].entries {
            if v.is_unit() && allow(i, *col, *r) {
                cands.insert((i, c.qdeg(i, *col), *col, *r));
            }
        }
    }

    while let Some((i, _q, x, y)) = cands.pop_first() {
        let alive_src = alive.get(&i).map_or(false, |s| s.contains(&x));
        let alive_tgt = alive.get(&(i + 1)).map_or(false, |s| s.contains(&y));
        if !alive_src || !alive_tgt {
            continue;
        }
        let Some(eps) = d[&i].get(y, x).cloned() else { continue };
        if !eps.is_unit() {
            continue;
        }
        let eps_inv = eps.inv_unit();

        let di = d.get_mut(&i).unwrap();
        let row_y: Vec<(usize, R)> = di.row(y).into_iter().filter(|(cc, _)| *cc != x).collect();
        let col_x: Vec<(usize, R)> = di.col(x).into_iter().filter(|(r, _)| *r != y).collect();

        // d ← d − γ ε⁻¹ δ
        for (r, gam) in &col_x {
            for (cc, del) in &row_y {
                let corr = -(gam.clone() * eps_inv.clone() * del.clone());
                di.add(*r, *cc, corr);
            }
        }
        di.remove_row(y);
        di.remove_col(x);
        if let Some(prev) = d.get_mut(&(i - 1)) {
            prev.remove_row(x);
        }
        if let Some(next) = d.get_mut(&(i + 1)) {
            next.remove_col(y);
        }

        // ι: surviving source columns pick up −ε⁻¹ δ times the x column
        let it = iota.get_mut(&i).unwrap();
        let iota_col_x = it.col(x);
        for (cc, del) in &row_y {
            let coef = -(eps_inv.clone() * del.clone());
            for (orig_r, a) in &iota_col_x {
                it.add(*orig_r, *cc, coef.clone() * a.clone());
            }
        }
        it.remove_col(x);
        iota.get_mut(&(i + 1)).unwrap().remove_col(y);

        // π: surviving target rows pick up −ε⁻¹ γ times the y row
        let pt = pi.get_mut(&(i + 1)).unwrap();
        let pi_row_y = pt.row(y);
        for (r, gam) in &col_x {
            let coef = -(eps_inv.clone() * gam.clone());
            for (orig_c, a) in &pi_row_y {
                pt.add(*r, *orig_c, coef.clone() * a.clone());
            }
        }
        pt.remove_row(y);
        pi.get_mut(&i).unwrap().remove_row(x);

        // H ← H + ι ∘ h ∘ π for the step homotopy h = ε⁻¹ e_{x,y}, using
        // the maps as they stood before this step; the composition rule
        // H₁ + ι₁∘H₂∘π₁ then telescopes across all steps.
        let hm = homs.entry(i + 1).or_insert_with(WorkMat::new);
        for (orig_r, a) in &iota_col_x {
            for (orig_c, b) in &pi_row_y {
                hm.add(*orig_r, *orig_c, a.clone() * eps_inv.clone() * b.clone());
            }
        }

        alive.get_mut(&i).unwrap().remove(&x);
        alive.get_mut(&(i + 1)).unwrap().remove(&y);

        // corrected entries may be fresh pivots
        let di = &d[&i];
        for (r, _) in &col_x {
            for (cc, _) in &row_y {
                if let Some(v) = di.get(*r, *cc) {
                    if v.is_unit() && allow(i, *cc, *r) {
                        cands.insert((i, c.qdeg(i, *cc), *cc, *r));
                    }
                }
            }
        }
    }

    // compact the survivors
    let mut reduced = ChainComplex::new();
    let mut newidx: BTreeMap<i64, HashMap<usize, usize>> = BTreeMap::new();
    for &i in &degrees {
        let keep: Vec<usize> = alive[&i].iter().copied().collect();
        let mut m = BasedModule::default();
        let mut remap = HashMap::new();
        for (new, old) in keep.iter().enumerate() {
            remap.insert(*old, new);
            m.push(c.label(i, *old).to_string(), c.qdeg(i, *old));
        }
        newidx.insert(i, remap);
        reduced.set_module(i, m);
    }
    for &i in &degrees {
        let mut m = SpMat::zero(reduced.rank(i + 1), reduced.rank(i));
        for ((r, cc), v) in &d[&i].entries {
            m.set(newidx[&(i + 1)][r], newidx[&i][cc], v.clone());
        }
        reduced.set_diff(i, m);
    }
    let mut include = ChainMap::new((0, 0));
    let mut project = ChainMap::new((0, 0));
    for &i in &degrees {
        let mut inc = SpMat::zero(c.rank(i), reduced.rank(i));
        for ((orig_r, cc), v) in &iota[&i].entries {
            inc.set(*orig_r, newidx[&i][cc], v.clone());
        }
        include.set_block(i, inc);
        let mut prj = SpMat::zero(reduced.rank(i), c.rank(i));
        for ((r, orig_c), v) in &pi[&i].entries {
            prj.set(newidx[&i][r], *orig_c, v.clone());
        }
        project.set_block(i, prj);
    }
    let mut homotopy = ChainMap::new((-1, 0));
    for (&i, wm) in &homs {
        let mut h = SpMat::zero(c.rank(i - 1), c.rank(i));
        for ((r, cc), v) in &wm.entries {
            h.set(*r, *cc, v.clone());
        }
        homotopy.set_block(i, h);
    }
    let survivors = alive
        .into_iter()
        .map(|(i, s)| (i, s.into_iter().collect()))
        .collect();
    (Reduction { reduced, include, project, homotopy }, survivors)
}

/// Eliminate the single pivot d_i[row, col], which must be a unit,
/// returning the reduced complex and all four structure maps.
pub fn gaussian_eliminate<R: Ring>(
    c: &ChainComplex<R>,
    i: i64,
    row: usize,
    col: usize,
) -> Result<StepReduction<R>> {
    let d = c.d(i);
    let eps = d.get(row, col);
    if !eps.is_unit() {
        return Err(Error::EntryNotUnit);
    }
    let eps_inv = eps.inv_unit();

    let keep_src: Vec<usize> = (0..c.rank(i)).filter(|k| *k != col).collect();
    let keep_tgt: Vec<usize> = (0..c.rank(i + 1)).filter(|k| *k != row).collect();

    let mut reduced = ChainComplex::new();
    for j in c.degrees() {
        let m = c.module(j).unwrap();
        let keep: Vec<usize> = match j {
            _ if j == i => keep_src.clone(),
            _ if j == i + 1 => keep_tgt.clone(),
            _ => (0..m.len()).collect(),
        };
        let mut nm = BasedModule::default();
        for k in &keep {
            nm.push(m.labels[*k].clone(), m.q[*k]);
        }
        reduced.set_module(j, nm);
    }
    for j in c.degrees() {
        let full = c.d(j);
        let rows: Vec<usize> = if j + 1 == i {
            keep_src.clone()
        } else if j == i {
            keep_tgt.clone()
        } else {
            (0..c.rank(j + 1)).collect()
        };
        let cols: Vec<usize> = if j == i {
            keep_src.clone()
        } else if j == i + 1 {
            keep_tgt.clone()
        } else {
            (0..c.rank(j)).collect()
        };
        let mut sub = full.submatrix(&rows, &cols);
        if j == i {
            // subtract γ ε⁻¹ δ
            for (rr, r_orig) in keep_tgt.iter().enumerate() {
                let gam = d.get(*r_orig, col);
                if gam.is_zero() {
                    continue;
                }
                for (cc, c_orig) in keep_src.iter().enumerate() {
                    let del = d.get(row, *c_orig);
                    if del.is_zero() {
                        continue;
                    }
                    sub.add_to(rr, cc, -(gam.clone() * eps_inv.clone() * del));
                }
            }
        }
        reduced.set_diff(j, sub);
    }

    // include maps reduced → original, project the other way.
    let mut include = ChainMap::new((0, 0));
    let mut project = ChainMap::new((0, 0));
    for j in c.degrees() {
        let (nr, nc) = (c.rank(j), reduced.rank(j));
        let mut inc = SpMat::zero(nr, nc);
        let mut prj = SpMat::zero(nc, nr);
        if j == i {
            for (new, old) in keep_src.iter().enumerate() {
                inc.set(*old, new, R::one());
                let del = d.get(row, *old);
                if !del.is_zero() {
                    inc.add_to(col, new, -(eps_inv.clone() * del));
                }
                prj.set(new, *old, R::one());
            }
        } else if j == i + 1 {
            for (new, old) in keep_tgt.iter().enumerate() {
                inc.set(*old, new, R::one());
                prj.set(new, *old, R::one());
                let gam = d.get(*old, col);
                if !gam.is_zero() {
                    prj.add_to(new, row, -(eps_inv.clone() * gam));
                }
            }
        } else {
            inc = SpMat::identity(nr);
            prj = SpMat::identity(nr);
        }
        include.set_block(j, inc);
        project.set_block(j, prj);
    }

    let mut homotopy = ChainMap::new((-1, 0));
    let mut h = SpMat::zero(c.rank(i), c.rank(i + 1));
    h.set(col, row, eps_inv);
    homotopy.set_block(i + 1, h);

    Ok(StepReduction { reduced, include, project, homotopy })
}

/// Search for a signed bijection of bases σ : a → b commuting with the
/// differentials. Intended for fully reduced complexes; generators are
/// matched within each bigrading, preferring label-identical pairings and
/// positive signs, with backtracking on the differential constraints.
pub fn match_reduced<R: Ring>(a: &ChainComplex<R>, b: &ChainComplex<R>) -> Result<ChainMap<R>> {
    let mut a_blocks: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    let mut b_blocks: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for i in a.degrees() {
        for (k, q) in a.module(i).unwrap().q.iter().enumerate() {
            a_blocks.entry((i, *q)).or_default().push(k);
        }
    }
    for i in b.degrees() {
        for (k, q) in b.module(i).unwrap().q.iter().enumerate() {
            b_blocks.entry((i, *q)).or_default().push(k);
        }
    }
    if a_blocks.keys().ne(b_blocks.keys()) {
        return Err(Error::NoBasisIsomorphism);
    }
    for (key, ag) in &a_blocks {
        if ag.len() != b_blocks[key].len() {
            return Err(Error::NoBasisIsomorphism);
        }
    }

    let order: Vec<(i64, usize)> = a_blocks
        .iter()
        .flat_map(|((i, _), gens)| gens.iter().map(move |g| (*i, *g)))
        .collect();

    // assignment: a-gen -> (b-gen, sign)
    let mut assign: HashMap<(i64, usize), (usize, R)> = HashMap::new();
    let mut used: BTreeSet<(i64, usize)> = BTreeSet::new();

    fn consistent<R: Ring>(
        a: &ChainComplex<R>,
        b: &ChainComplex<R>,
        assign: &HashMap<(i64, usize), (usize, R)>,
        (i, g): (i64, usize),
        cand: usize,
        sign: &R,
    ) -> bool {
        for ((hi, h), (hb, hs)) in assign {
            if *hi == i - 1 {
                let lhs = b.d(i - 1).get(cand, *hb);
                let rhs = sign.clone() * hs.clone() * a.d(i - 1).get(g, *h);
                if lhs != rhs {
                    return false;
                }
            } else if *hi == i + 1 {
                let lhs = b.d(i).get(*hb, cand);
                let rhs = sign.clone() * hs.clone() * a.d(i).get(*h, g);
                if lhs != rhs {
                    return false;
                }
            }
        }
        true
    }

    fn backtrack<R: Ring>(
        a: &ChainComplex<R>,
        b: &ChainComplex<R>,
        b_blocks: &BTreeMap<(i64, i64), Vec<usize>>,
        order: &[(i64, usize)],
        pos: usize,
        assign: &mut HashMap<(i64, usize), (usize, R)>,
        used: &mut BTreeSet<(i64, usize)>,
    ) -> bool {
        let Some(&(i, g)) = order.get(pos) else {
            return true;
        };
        let q = a.qdeg(i, g);
        let label = a.label(i, g);
        let mut cands: Vec<usize> = b_blocks[&(i, q)]
            .iter()
            .copied()
            .filter(|c| !used.contains(&(i, *c)))
            .collect();
        cands.sort_by_key(|c| (b.label(i, *c) != label, *c));
        for cand in cands {
            for sign in [R::one(), -R::one()] {
                if !consistent(a, b, assign, (i, g), cand, &sign) {
                    continue;
                }
                assign.insert((i, g), (cand, sign.clone()));
                used.insert((i, cand));
                if backtrack(a, b, b_blocks, order, pos + 1, assign, used) {
                    return true;
                }
                assign.remove(&(i, g));
                used.remove(&(i, cand));
            }
        }
        false
    }

    if !backtrack(a, b, &b_blocks, &order, 0, &mut assign, &mut used) {
        return Err(Error::NoBasisIsomorphism);
    }

    let mut sigma = ChainMap::new((0, 0));
    for i in a.degrees() {
        let mut m = SpMat::zero(b.rank(i), a.rank(i));
        for ((gi, g), (bg, s)) in &assign {
            if *gi == i {
                m.set(*bg, *g, s.clone());
            }
        }
        sigma.set_block(i, m);
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homalg::homology_z;
    use crate::Int;

    fn z(n: i64) -> Int {
        Int::from(n)
    }

    /// Degrees 0..2 with one unit entry and one stuck torsion entry:
    ///   d0 = [1 2; 0 0], d1 = [0 0; 0 2].
    fn sample() -> ChainComplex<Int> {
        let mut c = ChainComplex::new();
        for i in 0..3 {
            c.set_module(
                i,
                BasedModule::new(vec![format!("{i}a"), format!("{i}b")], vec![0, 0]),
            );
        }
        c.set_diff(0, SpMat::from_triplets(2, 2, vec![(0, 0, z(1)), (0, 1, z(2))]));
        c.set_diff(1, SpMat::from_triplets(2, 2, vec![(1, 1, z(2))]));
        c.check().unwrap();
        c
    }

    #[test]
    fn full_reduction_preserves_homology() {
        let c = sample();
        let red = reduce_fully(&c);
        red.reduced.check().unwrap();
        red.include.verify(&red.reduced, &c).unwrap();
        red.project.verify(&c, &red.reduced).unwrap();
        assert_eq!(homology_z(&red.reduced), homology_z(&c));
        // no unit entries survive
        for i in red.reduced.degrees() {
            for (_, _, v) in red.reduced.d(i).triplets() {
                assert!(!crate::scalar::Ring::is_unit(&v));
            }
        }
        // π ∘ ι = id
        let pi_iota = ChainMap::compose(
            &red.project,
            &red.include,
            &red.reduced,
            &c,
            &red.reduced,
        );
        assert_eq!(pi_iota, ChainMap::identity(&red.reduced));

        // id − ι∘π = dH + Hd with the accumulated homotopy
        let iota_pi = ChainMap::compose(&red.include, &red.project, &c, &red.reduced, &c);
        let lhs = ChainMap::identity(&c).sub(&iota_pi);
        for i in c.degrees() {
            let dh = c.d(i - 1).mul(&red.homotopy.block(i, &c, &c));
            let hd = red.homotopy.block(i + 1, &c, &c).mul(&c.d(i));
            assert_eq!(lhs.block(i, &c, &c), dh.add(&hd), "degree {i}");
        }
    }

    #[test]
    fn single_step_satisfies_the_homotopy_identity() {
        let c = sample();
        let step = gaussian_eliminate(&c, 0, 0, 0).unwrap();
        step.reduced.check().unwrap();
        step.include.verify(&step.reduced, &c).unwrap();
        step.project.verify(&c, &step.reduced).unwrap();

        let iota_pi = ChainMap::compose(&step.include, &step.project, &c, &step.reduced, &c);
        let id = ChainMap::identity(&c);
        let lhs = id.sub(&iota_pi);
        // dH + Hd
        let mut rhs = ChainMap::new((0, 0));
        for i in c.degrees() {
            let dh = c.d(i - 1).mul(&step.homotopy.block(i, &c, &c));
            let hd = step.homotopy.block(i + 1, &c, &c).mul(&c.d(i));
            rhs.set_block(i, dh.add(&hd));
        }
        for i in c.degrees() {
            assert_eq!(lhs.block(i, &c, &c), rhs.block(i, &c, &c), "degree {i}");
        }

        assert!(matches!(
            gaussian_eliminate(&c, 0, 0, 1),
            Err(Error::EntryNotUnit)
        ));
    }

    #[test]
    fn stuck_complexes_do_not_reduce() {
        let mut c: ChainComplex<Int> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["x".into()], vec![1]));
        c.set_module(1, BasedModule::new(vec!["y".into()], vec![1]));
        c.set_diff(0, SpMat::from_triplets(1, 1, vec![(0, 0, z(2))]));
        let red = reduce_fully(&c);
        assert_eq!(red.reduced, c);
    }

    #[test]
    fn matching_finds_signed_bijections() {
        let c = sample();
        let red = reduce_fully(&c).reduced;
        let sigma = match_reduced(&red, &red).unwrap();
        sigma.verify(&red, &red).unwrap();

        // flip a basis sign in a copy: still matchable
        let mut other = red.clone();
        for i in other.degrees() {
            let d = other.d(i).neg();
            other.set_diff(i, d);
        }
        // negating all differentials is conjugation by alternating signs
        // whenever degrees are consecutive; the search should succeed
        let sigma2 = match_reduced(&red, &other).unwrap();
        sigma2.verify(&red, &other).unwrap();

        // a genuinely different complex is rejected
        let mut diff: ChainComplex<Int> = ChainComplex::new();
        diff.set_module(0, BasedModule::new(vec!["x".into()], vec![0]));
        diff.set_module(1, BasedModule::new(vec!["y".into()], vec![0]));
        diff.set_diff(0, SpMat::from_triplets(1, 1, vec![(0, 0, z(3))]));
        let mut diff2 = diff.clone();
        diff2.set_diff(0, SpMat::from_triplets(1, 1, vec![(0, 0, z(5))]));
        assert!(matches!(
            match_reduced(&diff, &diff2),
            Err(Error::NoBasisIsomorphism)
        ));
    }
}
