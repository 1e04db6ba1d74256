//! The Khovanov complex of a link diagram: vertex modules are tensor powers
//! of the rank-two Frobenius algebra V indexed by the circles of each
//! resolution, edge maps merge or split circles, and the signed sum of edge
//! maps is a differential of bidegree (1, 0).
//!
//! Besides homology itself this module realizes the structural chain
//! isomorphisms that the rest of the crate leans on — disjoint unions as
//! tensor products, the mirror as the dual, and the reversed cube — plus the
//! Kauffman state sum as an independent oracle for the graded Euler
//! characteristic.

use std::collections::{BTreeMap, HashMap};

use crate::cube::{edge_data, enumerate_states, EdgeData, EdgeKind, SignAssignment, State};
use crate::diagram::LinkDiagram;
use crate::homalg::{
    homology_field, homology_z, BasedModule, BigradedGroup, ChainComplex, ChainMap, TensorLayout,
};
use crate::matrix::SpMat;
use crate::poly::Laurent;
use crate::scalar::Ring;
use crate::{Error, Int, Rat, Result, F2};

/// Cube-size bound used by the convenience entry points; explicit callers
/// can raise it.
pub const DEFAULT_MAX_CROSSINGS: usize = 14;

/// The rank-two Frobenius algebra V = ⟨v₊, v₋⟩, with basis labels encoded
/// as bits: 0 is v₊, 1 is v₋.
///
/// deg v₊ = +1 and deg v₋ = −1; both m and Δ lower the total internal
/// degree by exactly one, which is what keeps the quantum grading of the
/// complex flat along edges.
pub struct FrobeniusV;

impl FrobeniusV {
    /// Internal degree of a basis label.
    pub fn deg(label: u8) -> i64 {
        if label == 0 {
            1
        } else {
            -1
        }
    }

    /// ι(1) = v₊.
    pub fn unit() -> u8 {
        0
    }

    /// ε(v₊) = 0 and ε(v₋) = 1.
    pub fn counit(label: u8) -> i64 {
        i64::from(label)
    }

    /// m(v₊ ⊗ v₊) = v₊, m(v₊ ⊗ v₋) = m(v₋ ⊗ v₊) = v₋, m(v₋ ⊗ v₋) = 0.
    pub fn mult(a: u8, b: u8) -> Option<u8> {
        if a & b == 1 {
            None
        } else {
            Some(a | b)
        }
    }

    /// Δ(v₊) = v₊ ⊗ v₋ + v₋ ⊗ v₊ and Δ(v₋) = v₋ ⊗ v₋.
    pub fn comult(a: u8) -> Vec<(u8, u8)> {
        if a == 0 {
            vec![(0, 1), (1, 0)]
        } else {
            vec![(1, 1)]
        }
    }
}

/// A generator of the complex: a vertex of the cube together with a ±
/// label on every circle of its resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnhancedState {
    /// The vertex of the cube.
    pub state: State,
    /// Circle labels packed as bits; bit c set means circle c carries v₋.
    pub labels: u32,
    /// Number of circles in the resolution at `state`.
    pub circles: usize,
}

impl EnhancedState {
    /// Sum of the internal degrees of the labels.
    pub fn degree_sum(&self) -> i64 {
        self.circles as i64 - 2 * i64::from(self.labels.count_ones())
    }
}

impl std::fmt::Display for EnhancedState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", gen_label(self.state.bits, self.state.n, self.labels, self.circles))
    }
}

fn gen_label(bits: u32, n: usize, labels: u32, circles: usize) -> String {
    let mut s = State::new(bits, n).to_string();
    s.push(':');
    for c in 0..circles {
        s.push(if labels >> c & 1 == 1 { '-' } else { '+' });
    }
    s
}

fn full_mask(n: usize) -> u32 {
    if n == 0 {
        0
    } else {
        (1u32 << n) - 1
    }
}

/// The Khovanov complex of a diagram, with the enhanced-state bookkeeping
/// needed to address its basis from outside.
///
/// Homological degree of a generator is |v|₁ − n₋ and its internal degree
/// is gr_q = |v|₁ + Σ deg(labels) + n₊ − 2n₋.
#[derive(Clone, Debug)]
pub struct KhovanovComplex<R: Ring> {
    /// The diagram the complex was built from.
    pub diagram: LinkDiagram,
    /// The sign assignment twisting the edge maps.
    pub signs: SignAssignment,
    /// The underlying bigraded complex.
    pub complex: ChainComplex<R>,
    circles: Vec<usize>,
    positions: HashMap<(u32, u32), (i64, usize)>,
    gens: BTreeMap<i64, Vec<(u32, u32)>>,
}

impl<R: Ring> KhovanovComplex<R> {
    /// Number of circles in the resolution at a state.
    pub fn circle_count(&self, bits: u32) -> usize {
        self.circles[bits as usize]
    }

    /// The (state, labels) pairs backing the basis in homological degree i,
    /// in index order.
    pub fn generators(&self, i: i64) -> &[(u32, u32)] {
        self.gens.get(&i).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Where a generator sits: (homological degree, index).
    pub fn position(&self, bits: u32, labels: u32) -> Option<(i64, usize)> {
        self.positions.get(&(bits, labels)).copied()
    }

    /// The generator as an enhanced state.
    pub fn enhanced(&self, bits: u32, labels: u32) -> EnhancedState {
        EnhancedState {
            state: State::new(bits, self.diagram.n()),
            labels,
            circles: self.circles[bits as usize],
        }
    }
}

/// Images of one generator's labels under the edge map: the bystander
/// labels are transported, and the named circles go through m or Δ.
fn edge_images(ed: &EdgeData, labels: u32) -> Vec<u32> {
    let mut base = 0u32;
    for &(cu, cv) in &ed.bystanders {
        base |= (labels >> cu & 1) << cv;
    }
    match ed.kind {
        EdgeKind::Merge { src: (s1, s2), dst } => {
            FrobeniusV::mult((labels >> s1 & 1) as u8, (labels >> s2 & 1) as u8)
                .map(|c| base | u32::from(c) << dst)
                .into_iter()
                .collect()
        }
        EdgeKind::Split { src, dst: (t1, t2) } => FrobeniusV::comult((labels >> src & 1) as u8)
            .into_iter()
            .map(|(x, y)| base | u32::from(x) << t1 | u32::from(y) << t2)
            .collect(),
    }
}

/// Build the Khovanov complex of `d` with the edge signs `e`.
///
/// Vertex modules are enumerated in (weight, tuple-lex) state order with
/// label masks ascending inside each state; the differential applies m or Δ
/// on the circles named by [`edge_data`] and the identity on bystanders.
pub fn build_ckh<R: Ring>(
    d: &LinkDiagram,
    e: &SignAssignment,
    max_crossings: usize,
) -> Result<KhovanovComplex<R>> {
    let n = d.n();
    if e.n != n {
        return Err(Error::DimensionMismatch { got: e.n, expected: n });
    }
    let states = enumerate_states(n, max_crossings)?;
    let np = d.n_plus() as i64;
    let nm = d.n_minus() as i64;

    let mut circles = vec![0usize; 1usize << n];
    for v in &states {
        circles[v.bits as usize] = d.resolve(v.bits).len();
    }

    let mut gens: BTreeMap<i64, Vec<(u32, u32)>> = BTreeMap::new();
    for v in &states {
        let bucket = gens.entry(i64::from(v.weight()) - nm).or_default();
        for labels in 0..1u32 << circles[v.bits as usize] {
            bucket.push((v.bits, labels));
        }
    }

    let mut positions = HashMap::new();
    let mut complex = ChainComplex::new();
    for (&i, bucket) in &gens {
        let mut m = BasedModule::default();
        for (idx, &(bits, labels)) in bucket.iter().enumerate() {
            positions.insert((bits, labels), (i, idx));
            let r = circles[bits as usize];
            let degree_sum = r as i64 - 2 * i64::from(labels.count_ones());
            let q = i64::from(bits.count_ones()) + degree_sum + np - 2 * nm;
            m.push(gen_label(bits, n, labels, r), q);
        }
        complex.set_module(i, m);
    }

    let mut triplets: BTreeMap<i64, Vec<(usize, usize, R)>> = BTreeMap::new();
    for u in &states {
        let i = i64::from(u.weight()) - nm;
        for c in 0..n {
            if u.bit(c) {
                continue;
            }
            let v = u.step(c);
            let ed = edge_data(d, *u, v)?;
            let sign = R::from_i64(i64::from(e.get(u.bits, v.bits)));
            let entries = triplets.entry(i).or_default();
            for labels in 0..1u32 << circles[u.bits as usize] {
                let col = positions[&(u.bits, labels)].1;
                for image in edge_images(&ed, labels) {
                    let row = positions[&(v.bits, image)].1;
                    entries.push((row, col, sign.clone()));
                }
            }
        }
    }
    for (i, t) in triplets {
        complex.set_diff(i, SpMat::from_triplets(complex.rank(i + 1), complex.rank(i), t));
    }

    Ok(KhovanovComplex { diagram: d.clone(), signs: e.clone(), complex, circles, positions, gens })
}

/// [`build_ckh`] with the standard sign assignment and the default bound.
pub fn kh_complex<R: Ring>(d: &LinkDiagram) -> Result<KhovanovComplex<R>> {
    build_ckh(d, &SignAssignment::standard(d.n()), DEFAULT_MAX_CROSSINGS)
}

/// Coefficient systems the homology front ends understand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coeff {
    /// The integers.
    Z,
    /// The rationals.
    Q,
    /// The field with two elements.
    F2,
}

impl std::str::FromStr for Coeff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Coeff> {
        match s.to_ascii_lowercase().as_str() {
            "z" => Ok(Coeff::Z),
            "q" => Ok(Coeff::Q),
            "f2" => Ok(Coeff::F2),
            other => Err(Error::MalformedToken(other.to_string())),
        }
    }
}

impl std::fmt::Display for Coeff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coeff::Z => write!(f, "Z"),
            Coeff::Q => write!(f, "Q"),
            Coeff::F2 => write!(f, "F2"),
        }
    }
}

/// Khovanov homology of a diagram with the standard sign assignment,
/// reported per bigrade. Over ℚ and 𝔽₂ the summands are ranks only; over ℤ
/// torsion orders appear alongside.
pub fn kh_homology(d: &LinkDiagram, coeff: Coeff, max_crossings: usize) -> Result<BigradedGroup> {
    let e = SignAssignment::standard(d.n());
    Ok(match coeff {
        Coeff::Z => homology_z(&build_ckh::<Int>(d, &e, max_crossings)?.complex),
        Coeff::Q => homology_field(&build_ckh::<Rat>(d, &e, max_crossings)?.complex),
        Coeff::F2 => homology_field(&build_ckh::<F2>(d, &e, max_crossings)?.complex),
    })
}

/// Graded Euler characteristic Σ_{i,j} (−1)ⁱ rank_ℚ Khⁱ⁽ʲ⁾ · qʲ, computed
/// from rational homology.
pub fn graded_euler(d: &LinkDiagram, max_crossings: usize) -> Result<Laurent> {
    let kh = kh_homology(d, Coeff::Q, max_crossings)?;
    let mut p = Laurent::zero();
    for (&(i, j), g) in &kh.groups {
        let sign = if i.rem_euclid(2) == 0 { 1 } else { -1 };
        p.add_term(Int::from(sign * g.rank as i64), j);
    }
    Ok(p)
}

/// The unnormalized Jones polynomial by the Kauffman state sum
///
///   (−1)^{n₋} q^{n₊ − 2n₋} Σ_v (−q)^{|v|₁} (q + q⁻¹)^{r(D_v)},
///
/// computed directly from the resolutions, with no reference to the chain
/// complex. Runs over all 2ⁿ states.
pub fn kauffman_jones(d: &LinkDiagram) -> Laurent {
    let n = d.n();
    let mut sum = Laurent::zero();
    for bits in 0..1u64 << n {
        let bits = bits as u32;
        let w = bits.count_ones();
        let sign = if w % 2 == 0 { 1 } else { -1 };
        let smoothed = Laurent::circle().pow(d.resolve(bits).len() as u32);
        sum = sum + Laurent::monomial(Int::from(sign), i64::from(w)) * smoothed;
    }
    let nm = d.n_minus() as i64;
    let front = if nm % 2 == 0 { 1 } else { -1 };
    sum * Laurent::monomial(Int::from(front), d.n_plus() as i64 - 2 * nm)
}

/// Plain-text Poincaré polynomial Σ rank·tⁱqʲ of a bigraded group. Free
/// ranks only; torsion summands are not displayed.
pub fn poincare(g: &BigradedGroup) -> String {
    let mut terms = Vec::new();
    for (&(i, j), s) in &g.groups {
        if s.rank == 0 {
            continue;
        }
        let mut term = String::new();
        if s.rank != 1 {
            term.push_str(&s.rank.to_string());
        }
        if i != 0 {
            term.push_str(&(if i == 1 { "t".to_string() } else { format!("t^{i}") }));
        }
        if j != 0 {
            term.push_str(&(if j == 1 { "q".to_string() } else { format!("q^{j}") }));
        }
        if term.is_empty() {
            term.push('1');
        }
        terms.push(term);
    }
    if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(" + ")
    }
}

/// A disjoint union matched against the tensor product of its factors.
#[derive(Debug)]
pub struct DisjointUnion<R: Ring> {
    /// CKh(d1) ⊗ CKh(d2) with the Koszul twist below.
    pub product: ChainComplex<R>,
    /// Index bookkeeping of the tensor basis.
    pub layout: TensorLayout,
    /// The complex of d1 ⊔ d2 built directly.
    pub union: KhovanovComplex<R>,
    /// The bijection (x, y) ↦ x ⊔ y as a chain isomorphism product → union.
    pub iso: ChainMap<R>,
}

/// Identify CKh(d1) ⊗ CKh(d2) with CKh(d1 ⊔ d2) by pairing basis vectors.
///
/// All three complexes carry standard signs. Because homological degree is
/// |v|₁ − n₋ while the standard sign at a d2-crossing of the union counts
/// (−1)^{|v₁|₁}, the tensor differential must be twisted by the parity of
/// n₋(d1) for the pairing to commute on the nose; `iso.verify` certifies
/// that exactly.
pub fn disjoint_iso<R: Ring>(
    d1: &LinkDiagram,
    d2: &LinkDiagram,
    max_crossings: usize,
) -> Result<DisjointUnion<R>> {
    let a: KhovanovComplex<R> = build_ckh(d1, &SignAssignment::standard(d1.n()), max_crossings)?;
    let b: KhovanovComplex<R> = build_ckh(d2, &SignAssignment::standard(d2.n()), max_crossings)?;
    let du = d1.disjoint_union(d2);
    let union: KhovanovComplex<R> =
        build_ckh(&du, &SignAssignment::standard(du.n()), max_crossings)?;
    let (product, layout) =
        ChainComplex::tensor(&a.complex, &b.complex, (d1.n_minus() % 2) as u32);

    let n1 = d1.n();
    let mut blocks: BTreeMap<i64, Vec<(usize, usize, R)>> = BTreeMap::new();
    for (&i1, bucket1) in &a.gens {
        for (idx1, &(bits1, labels1)) in bucket1.iter().enumerate() {
            let r1 = a.circles[bits1 as usize];
            for (&i2, bucket2) in &b.gens {
                for (idx2, &(bits2, labels2)) in bucket2.iter().enumerate() {
                    let col = layout.index(i1, idx1, i2, idx2);
                    let key = (bits1 | bits2 << n1, labels1 | labels2 << r1);
                    let (i, row) = union.positions[&key];
                    debug_assert_eq!(i, i1 + i2);
                    blocks.entry(i).or_default().push((row, col, R::one()));
                }
            }
        }
    }
    let mut iso = ChainMap::new((0, 0));
    for (i, t) in blocks {
        iso.set_block(i, SpMat::from_triplets(union.complex.rank(i), product.rank(i), t));
    }
    iso.verify(&product, &union.complex)?;
    Ok(DisjointUnion { product, layout, union, iso })
}

/// Sign assignment on the mirror cube induced by complementing states:
/// e*(u, v) = e(v̄, ū) with e the standard assignment of the original cube.
/// Complementation is a bijection on edges that maps 2-faces to 2-faces, so
/// the anticommutation of e carries over.
fn mirror_signs(n: usize) -> SignAssignment {
    let std = SignAssignment::standard(n);
    let full = full_mask(n);
    let mut triples = Vec::new();
    for u in 0..1u32 << n {
        for c in 0..n {
            if u >> c & 1 == 0 {
                let v = u | 1 << c;
                triples.push((u, v, std.get(full & !v, full & !u)));
            }
        }
    }
    SignAssignment::from_triples(n, &triples).expect("complementation preserves the cube's edges")
}

/// The mirror complex compared against the dual of the original.
#[derive(Debug)]
pub struct MirrorDual<R: Ring> {
    /// CKh(D*), carrying the sign assignment induced from D.
    pub mirror: KhovanovComplex<R>,
    /// The degreewise dual of CKh(D), gradings negated.
    pub dual: ChainComplex<R>,
    /// The isomorphism mirror → dual sending an enhanced state to the dual
    /// basis vector of its complementary state with all labels flipped.
    pub iso: ChainMap<R>,
}

/// Pair CKh(D*) with dual(CKh(D)) by (v, λ) ↦ (v̄, λ̄)*.
///
/// Under m ↔ Δ duality the structure constants match up without any signs
/// once the mirror carries the induced assignment of [`mirror_signs`]; the
/// pairing preserves both gradings, which `iso.verify` checks entrywise.
pub fn mirror_dual_iso<R: Ring>(
    d: &LinkDiagram,
    max_crossings: usize,
) -> Result<MirrorDual<R>> {
    let n = d.n();
    let full = full_mask(n);
    let base: KhovanovComplex<R> = build_ckh(d, &SignAssignment::standard(n), max_crossings)?;
    let mirror: KhovanovComplex<R> = build_ckh(&d.mirror(), &mirror_signs(n), max_crossings)?;
    let dual = base.complex.dual();

    let mut iso = ChainMap::new((0, 0));
    for (&i, bucket) in &mirror.gens {
        let mut t = Vec::new();
        for (col, &(bits, labels)) in bucket.iter().enumerate() {
            let r = mirror.circles[bits as usize];
            let flip = full_mask(r);
            let (bi, row) = base.positions[&(full & !bits, labels ^ flip)];
            debug_assert_eq!(bi, -i);
            debug_assert_eq!(mirror.complex.qdeg(i, col), dual.qdeg(i, row));
            t.push((row, col, R::one()));
        }
        iso.set_block(i, SpMat::from_triplets(dual.rank(i), bucket.len(), t));
    }
    iso.verify(&mirror.complex, &dual)?;
    Ok(MirrorDual { mirror, dual, iso })
}

/// The reversed cube of a diagram, isomorphic to the complex of the mirror.
#[derive(Debug)]
pub struct ReversedCube<R: Ring> {
    /// The descending-cube complex: same vertex modules as CKh(d), edge
    /// maps running from v to v − eᵢ, graded by n₋ − |v|₁ homologically and
    /// Σ deg(labels) − |v|₁ − n₊ + 2n₋ internally.
    pub complex: ChainComplex<R>,
    /// CKh of the mirror diagram with standard signs.
    pub mirror: KhovanovComplex<R>,
    /// The relabeling isomorphism complex → mirror: state v of d becomes
    /// state v̄ of the mirror, labels untouched.
    pub gamma: ChainMap<R>,
}

/// Images of a generator under a reversed edge: a merge runs backwards as
/// Δ on the merged circle, a split runs backwards as m on the two pieces,
/// and bystander labels are transported the other way.
fn reversed_edge_images(ed: &EdgeData, labels: u32) -> Vec<u32> {
    let mut base = 0u32;
    for &(cu, cv) in &ed.bystanders {
        base |= (labels >> cv & 1) << cu;
    }
    match ed.kind {
        EdgeKind::Merge { src: (s1, s2), dst } => FrobeniusV::comult((labels >> dst & 1) as u8)
            .into_iter()
            .map(|(x, y)| base | u32::from(x) << s1 | u32::from(y) << s2)
            .collect(),
        EdgeKind::Split { src, dst: (t1, t2) } => {
            FrobeniusV::mult((labels >> t1 & 1) as u8, (labels >> t2 & 1) as u8)
                .map(|a| base | u32::from(a) << src)
                .into_iter()
                .collect()
        }
    }
}

/// Build the reversed cube of `d` together with its isomorphism onto the
/// mirror complex.
///
/// Reversing the edge v → v − eᵢ of d is the same local picture as raising
/// the complementary edge v̄ → v̄ + eᵢ of the mirror, whose resolutions agree
/// with d's circle for circle. Each reversed edge therefore carries the
/// standard mirror sign e(v̄, ū), which makes γ the identity on labels.
pub fn reversed_cube<R: Ring>(d: &LinkDiagram, max_crossings: usize) -> Result<ReversedCube<R>> {
    let n = d.n();
    let full = full_mask(n);
    let states = enumerate_states(n, max_crossings)?;
    let std = SignAssignment::standard(n);
    let np = d.n_plus() as i64;
    let nm = d.n_minus() as i64;

    let mut circles = vec![0usize; 1usize << n];
    for v in &states {
        circles[v.bits as usize] = d.resolve(v.bits).len();
    }

    let mut gens: BTreeMap<i64, Vec<(u32, u32)>> = BTreeMap::new();
    for v in &states {
        let bucket = gens.entry(nm - i64::from(v.weight())).or_default();
        for labels in 0..1u32 << circles[v.bits as usize] {
            bucket.push((v.bits, labels));
        }
    }
    let mut positions = HashMap::new();
    let mut complex = ChainComplex::new();
    for (&i, bucket) in &gens {
        let mut m = BasedModule::default();
        for (idx, &(bits, labels)) in bucket.iter().enumerate() {
            positions.insert((bits, labels), (i, idx));
            let r = circles[bits as usize];
            let degree_sum = r as i64 - 2 * i64::from(labels.count_ones());
            let q = degree_sum - i64::from(bits.count_ones()) - np + 2 * nm;
            m.push(gen_label(bits, n, labels, r), q);
        }
        complex.set_module(i, m);
    }

    let mut triplets: BTreeMap<i64, Vec<(usize, usize, R)>> = BTreeMap::new();
    for v in &states {
        let i = nm - i64::from(v.weight());
        for c in 0..n {
            if !v.bit(c) {
                continue;
            }
            let u = State::new(v.bits & !(1 << c), n);
            let ed = edge_data(d, u, *v)?;
            let sign = R::from_i64(i64::from(std.get(full & !v.bits, full & !u.bits)));
            let entries = triplets.entry(i).or_default();
            for labels in 0..1u32 << circles[v.bits as usize] {
                let col = positions[&(v.bits, labels)].1;
                for image in reversed_edge_images(&ed, labels) {
                    let row = positions[&(u.bits, image)].1;
                    entries.push((row, col, sign.clone()));
                }
            }
        }
    }
    for (i, t) in triplets {
        complex.set_diff(i, SpMat::from_triplets(complex.rank(i + 1), complex.rank(i), t));
    }

    let mirror: KhovanovComplex<R> =
        build_ckh(&d.mirror(), &SignAssignment::standard(n), max_crossings)?;
    let mut gamma = ChainMap::new((0, 0));
    for (&i, bucket) in &gens {
        let mut t = Vec::new();
        for (col, &(bits, labels)) in bucket.iter().enumerate() {
            let (mi, row) = mirror.positions[&(full & !bits, labels)];
            debug_assert_eq!(mi, i);
            debug_assert_eq!(complex.qdeg(i, col), mirror.complex.qdeg(mi, row));
            t.push((row, col, R::one()));
        }
        gamma.set_block(i, SpMat::from_triplets(mirror.complex.rank(i), bucket.len(), t));
    }
    gamma.verify(&complex, &mirror.complex)?;
    Ok(ReversedCube { complex, mirror, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::cochain_transform;
    use crate::homalg::{
        graded_homology_dims, spectral_sequence, uct_consistent, FilteredComplex, GroupSummand,
    };

    fn parse(text: &str) -> LinkDiagram {
        LinkDiagram::parse(text).unwrap()
    }

    fn right_trefoil() -> LinkDiagram {
        parse("X[2,3,4,1];X[3,5,6,4];X[5,2,1,6]")
    }

    fn left_trefoil() -> LinkDiagram {
        parse("X[1,4,2,5];X[3,6,4,1];X[5,2,6,3]")
    }

    fn hopf_plus() -> LinkDiagram {
        LinkDiagram::braid_closure(2, &[1, 1]).unwrap()
    }

    fn hopf_minus() -> LinkDiagram {
        LinkDiagram::braid_closure(2, &[-1, -1]).unwrap()
    }

    fn figure_eight() -> LinkDiagram {
        LinkDiagram::braid_closure(3, &[1, -2, 1, -2]).unwrap()
    }

    fn z(rank: usize) -> GroupSummand {
        GroupSummand { rank, torsion: vec![] }
    }

    fn z_mod(rank: usize, torsion: &[i64]) -> GroupSummand {
        GroupSummand { rank, torsion: torsion.iter().map(|&t| Int::from(t)).collect() }
    }

    #[test]
    fn frobenius_tables_close_up() {
        // unitality
        for x in 0..2u8 {
            assert_eq!(FrobeniusV::mult(FrobeniusV::unit(), x), Some(x));
        }
        // (m ⊗ id)(id ⊗ Δ) = Δ ∘ m = (id ⊗ m)(Δ ⊗ id), as multisets of
        // structure constants — eight identities over the four inputs.
        for a in 0..2u8 {
            for b in 0..2u8 {
                let mut rhs: Vec<(u8, u8)> = FrobeniusV::mult(a, b)
                    .map(FrobeniusV::comult)
                    .unwrap_or_default();
                rhs.sort_unstable();

                let mut left: Vec<(u8, u8)> = FrobeniusV::comult(b)
                    .into_iter()
                    .filter_map(|(x, y)| FrobeniusV::mult(a, x).map(|m| (m, y)))
                    .collect();
                left.sort_unstable();
                assert_eq!(left, rhs);

                let mut right: Vec<(u8, u8)> = FrobeniusV::comult(a)
                    .into_iter()
                    .filter_map(|(x, y)| FrobeniusV::mult(y, b).map(|m| (x, m)))
                    .collect();
                right.sort_unstable();
                assert_eq!(right, rhs);
            }
        }
        // closed surfaces: a sphere evaluates to 0, a torus to 2
        assert_eq!(FrobeniusV::counit(FrobeniusV::unit()), 0);
        let torus: i64 = FrobeniusV::comult(FrobeniusV::unit())
            .into_iter()
            .filter_map(|(x, y)| FrobeniusV::mult(x, y))
            .map(FrobeniusV::counit)
            .sum();
        assert_eq!(torus, 2);
        assert_eq!(FrobeniusV::deg(0) - FrobeniusV::deg(1), 2);
    }

    #[test]
    fn unknot_and_empty_complexes() {
        let u: KhovanovComplex<Int> = kh_complex(&parse("U")).unwrap();
        u.complex.check().unwrap();
        assert_eq!(u.complex.total_rank(), 2);
        assert_eq!(u.complex.rank(0), 2);
        assert!(u.complex.d(0).is_zero());
        let qs: Vec<i64> = (0..2).map(|idx| u.complex.qdeg(0, idx)).collect();
        assert_eq!(qs, vec![1, -1]);
        assert_eq!(u.complex.label(0, 0), ":+");
        assert_eq!(u.enhanced(0, 1).degree_sum(), -1);

        let kh = kh_homology(&parse("U"), Coeff::Z, 14).unwrap();
        assert_eq!(kh.get(0, 1), z(1));
        assert_eq!(kh.get(0, -1), z(1));
        assert_eq!(kh.total_rank(), 2);

        let empty = parse("");
        let kh0 = kh_homology(&empty, Coeff::Z, 14).unwrap();
        assert_eq!(kh0.get(0, 0), z(1));
        assert_eq!(kh0.total_rank(), 1);
        assert_eq!(kauffman_jones(&empty), Laurent::one());
    }

    #[test]
    fn one_crossing_unknots_match_the_unknot() {
        let u = kh_homology(&parse("U"), Coeff::Z, 14).unwrap();
        for code in ["X[1,1,2,2]", "X[2,1,1,2]"] {
            let d = parse(code);
            let ckh: KhovanovComplex<Int> = kh_complex(&d).unwrap();
            ckh.complex.check().unwrap();
            assert_eq!(ckh.gens.len(), 2, "two vertex modules for {code}");
            assert_eq!(kh_homology(&d, Coeff::Z, 14).unwrap(), u, "kink {code}");
        }
    }

    #[test]
    fn trefoil_homology_matches_the_table() {
        let mut right = BigradedGroup::default();
        right.insert((0, 1), z(1));
        right.insert((0, 3), z(1));
        right.insert((2, 5), z(1));
        right.insert((3, 7), z_mod(0, &[2]));
        right.insert((3, 9), z(1));
        assert_eq!(kh_homology(&right_trefoil(), Coeff::Z, 14).unwrap(), right);

        let mut left = BigradedGroup::default();
        left.insert((0, -1), z(1));
        left.insert((0, -3), z(1));
        left.insert((-2, -5), z(1));
        left.insert((-2, -7), z_mod(0, &[2]));
        left.insert((-3, -9), z(1));
        assert_eq!(kh_homology(&left_trefoil(), Coeff::Z, 14).unwrap(), left);

        // universal coefficients ties the 𝔽₂ dimensions to rank + torsion
        let f2 = kh_homology(&right_trefoil(), Coeff::F2, 14).unwrap();
        assert!(uct_consistent(&kh_homology(&right_trefoil(), Coeff::Z, 14).unwrap(), &f2));
        assert_eq!(f2.total_rank(), 6);
    }

    #[test]
    fn complexes_satisfy_the_differential_and_grading_checks() {
        for code in
            ["U;U", "X[2,3,4,1];X[3,5,6,4];X[5,2,1,6]", "X[1,4,2,5];X[3,6,4,1];X[5,2,6,3]"]
        {
            kh_complex::<Int>(&parse(code)).unwrap().complex.check().unwrap();
        }
        for d in [hopf_plus(), hopf_minus(), figure_eight()] {
            kh_complex::<Int>(&d).unwrap().complex.check().unwrap();
        }
        // total rank is the sum of 2^{circles} over all states
        let t: KhovanovComplex<Int> = kh_complex(&right_trefoil()).unwrap();
        let total: usize = (0..1u32 << 3).map(|v| 1usize << t.circle_count(v)).sum();
        assert_eq!(t.complex.total_rank(), total);
        assert_eq!(total, 30);
        // the cube bound is enforced
        assert!(matches!(
            build_ckh::<Int>(&right_trefoil(), &SignAssignment::standard(3), 2),
            Err(Error::CubeTooLarge(3, 2))
        ));
    }

    #[test]
    fn homology_does_not_depend_on_the_sign_assignment() {
        let d = right_trefoil();
        let std = SignAssignment::standard(3);
        // rescale every odd-weight vertex
        let f: HashMap<u32, i8> =
            (0..8u32).map(|v| (v, if v.count_ones() % 2 == 1 { -1 } else { 1 })).collect();
        let twisted = std.conjugate(&f);
        twisted.verify().unwrap();

        let a: KhovanovComplex<Int> = build_ckh(&d, &std, 14).unwrap();
        let b: KhovanovComplex<Int> = build_ckh(&d, &twisted, 14).unwrap();
        b.complex.check().unwrap();
        let recovered = cochain_transform(&std, &twisted).unwrap();
        assert!((0..8u32).all(|v| recovered[&v] == f[&v] * recovered[&0]));
        assert_eq!(homology_z(&a.complex), homology_z(&b.complex));
    }

    #[test]
    fn euler_characteristic_agrees_with_the_state_sum() {
        let mut jones = Laurent::zero();
        jones.add_term(Int::from(1), 1);
        jones.add_term(Int::from(1), 3);
        jones.add_term(Int::from(1), 5);
        jones.add_term(Int::from(-1), 9);
        assert_eq!(kauffman_jones(&right_trefoil()), jones);
        assert_eq!(format!("{}", kauffman_jones(&right_trefoil())), "q + q^3 + q^5 - q^9");
        assert_eq!(format!("{}", kauffman_jones(&parse("U"))), "q^-1 + q");

        for d in [
            parse("U"),
            parse("U;U"),
            parse("X[1,1,2,2]"),
            hopf_plus(),
            hopf_minus(),
            right_trefoil(),
            left_trefoil(),
            figure_eight(),
        ] {
            assert_eq!(graded_euler(&d, 14).unwrap(), kauffman_jones(&d), "{d}");
            // the state sum of the mirror substitutes q ↦ q⁻¹
            assert_eq!(kauffman_jones(&d.mirror()), kauffman_jones(&d).subst_inv(), "{d}");
        }
        // multiplicative under disjoint union
        let two = right_trefoil().disjoint_union(&parse("U"));
        assert_eq!(kauffman_jones(&two), kauffman_jones(&right_trefoil()) * Laurent::circle());
    }

    #[test]
    fn hopf_link_homology_is_free() {
        let mut plus = BigradedGroup::default();
        plus.insert((0, 0), z(1));
        plus.insert((0, 2), z(1));
        plus.insert((2, 4), z(1));
        plus.insert((2, 6), z(1));
        assert_eq!(kh_homology(&hopf_plus(), Coeff::Z, 14).unwrap(), plus);
        assert_eq!(
            kh_homology(&hopf_minus(), Coeff::Z, 14).unwrap(),
            plus.negate_bigrading()
        );
    }

    #[test]
    fn disjoint_unions_are_tensor_products() {
        let uu: DisjointUnion<Int> = disjoint_iso(&parse("U"), &parse("U"), 14).unwrap();
        assert_eq!(uu.product.total_rank(), 4);
        assert_eq!(uu.union.complex.total_rank(), 4);
        let kh = kh_homology(&parse("U;U"), Coeff::Z, 14).unwrap();
        assert_eq!(kh.get(0, 2), z(1));
        assert_eq!(kh.get(0, 0), z(2));
        assert_eq!(kh.get(0, -2), z(1));

        // a factor with crossings on the left exercises the Koszul twist
        let tu: DisjointUnion<Int> = disjoint_iso(&right_trefoil(), &parse("U"), 14).unwrap();
        assert_eq!(tu.iso.shift, (0, 0));
        // gradings add under ⊔
        let a: KhovanovComplex<Int> = kh_complex(&right_trefoil()).unwrap();
        let b: KhovanovComplex<Int> = kh_complex(&parse("U")).unwrap();
        for (&(bits1, labels1), &(i1, idx1)) in &a.positions {
            for (&(bits2, labels2), &(i2, idx2)) in &b.positions {
                let key = (bits1 | bits2 << 3, labels1 | labels2 << a.circles[bits1 as usize]);
                let (i, idx) = tu.union.positions[&key];
                assert_eq!(i, i1 + i2);
                assert_eq!(
                    tu.union.complex.qdeg(i, idx),
                    a.complex.qdeg(i1, idx1) + b.complex.qdeg(i2, idx2)
                );
            }
        }

        // Künneth over ℚ: dimensions convolve
        let left = kh_homology(&right_trefoil().disjoint_union(&parse("U")), Coeff::Q, 14).unwrap();
        let t = kh_homology(&right_trefoil(), Coeff::Q, 14).unwrap();
        let u = kh_homology(&parse("U"), Coeff::Q, 14).unwrap();
        let mut conv: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for (&(i1, j1), g1) in &t.groups {
            for (&(i2, j2), g2) in &u.groups {
                *conv.entry((i1 + i2, j1 + j2)).or_default() += g1.rank * g2.rank;
            }
        }
        let got: BTreeMap<(i64, i64), usize> =
            left.groups.iter().map(|(&k, g)| (k, g.rank)).collect();
        assert_eq!(got, conv);
    }

    #[test]
    fn mirrors_are_duals() {
        let mu: MirrorDual<Int> = mirror_dual_iso(&parse("U"), 14).unwrap();
        // rank-two swap: v₊ pairs with the dual of v₋ and vice versa
        let block = mu.iso.block(0, &mu.mirror.complex, &mu.dual);
        assert_eq!(block.get(0, 1), Int::from(1));
        assert_eq!(block.get(1, 0), Int::from(1));
        assert_eq!(block.get(0, 0), Int::from(0));

        mirror_dual_iso::<Int>(&right_trefoil(), 14).unwrap();
        mirror_dual_iso::<Int>(&hopf_plus(), 14).unwrap();
        mirror_dual_iso::<Int>(&figure_eight(), 14).unwrap();

        // rank duality over ℚ and dimension duality over 𝔽₂
        for d in [right_trefoil(), hopf_plus(), figure_eight()] {
            let m = d.mirror();
            assert_eq!(
                kh_homology(&m, Coeff::Q, 14).unwrap(),
                kh_homology(&d, Coeff::Q, 14).unwrap().negate_bigrading()
            );
            assert_eq!(
                kh_homology(&m, Coeff::F2, 14).unwrap(),
                kh_homology(&d, Coeff::F2, 14).unwrap().negate_bigrading()
            );
        }
    }

    #[test]
    fn reversed_cubes_relabel_the_mirror() {
        // no crossings: reversing does nothing
        let ru: ReversedCube<Int> = reversed_cube(&parse("U"), 14).unwrap();
        assert_eq!(ru.complex.total_rank(), 2);
        assert!(ru.complex.d(0).is_zero());
        let g = ru.gamma.block(0, &ru.complex, &ru.mirror.complex);
        assert_eq!(g.get(0, 0), Int::from(1));
        assert_eq!(g.get(1, 1), Int::from(1));

        let rt: ReversedCube<Int> = reversed_cube(&right_trefoil(), 14).unwrap();
        rt.complex.check().unwrap();
        assert_eq!(homology_z(&rt.complex), homology_z(&rt.mirror.complex));
        reversed_cube::<Int>(&figure_eight(), 14).unwrap();

        // the reversed differential raises the descending weight by one and
        // preserves q, so both filtrations are legal
        let rf: ReversedCube<Rat> = reversed_cube(&right_trefoil(), 14).unwrap();
        let by_h = FilteredComplex::by_degree(&rf.complex).unwrap();
        let by_q = FilteredComplex::by_q(&rf.complex).unwrap();

        // the q-filtration collapses immediately; the degree filtration
        // needs one differential and both converge to graded homology
        let ss_q = spectral_sequence(&by_q, None).unwrap();
        assert!(ss_q.collapse_page() <= 1);
        assert_eq!(ss_q.infinity().dims, graded_homology_dims(&by_q));
        let ss_h = spectral_sequence(&by_h, None).unwrap();
        assert_eq!(ss_h.infinity().dims, graded_homology_dims(&by_h));
    }

    #[test]
    fn poincare_renders_ranks() {
        let kh = kh_homology(&parse("U"), Coeff::Z, 14).unwrap();
        assert_eq!(poincare(&kh), "q^-1 + q");
        let t = kh_homology(&right_trefoil(), Coeff::Z, 14).unwrap();
        assert_eq!(poincare(&t), "q + q^3 + t^2q^5 + t^3q^9");
        let uu = kh_homology(&parse("U;U"), Coeff::Z, 14).unwrap();
        assert_eq!(poincare(&uu), "q^-2 + 2 + q^2");
        assert_eq!(poincare(&BigradedGroup::default()), "0");
        assert_eq!(poincare(&kh_homology(&parse(""), Coeff::Z, 14).unwrap()), "1");
    }
}
