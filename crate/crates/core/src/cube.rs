//! The cube of resolutions: vertex enumeration, edge signs, and the
//! merge/split classification of each edge.

use std::collections::HashMap;

use crate::diagram::LinkDiagram;
use crate::{Error, Result};

/// A vertex of the cube: one smoothing per crossing, bit i for crossing i.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct State {
    pub bits: u32,
    pub n: usize,
}

impl State {
    pub fn new(bits: u32, n: usize) -> Self {
        debug_assert!(n == 32 || bits < (1u32 << n));
        State { bits, n }
    }

    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    /// Sort key: weight first, then the smoothing tuple (u_0, …, u_{n-1})
    /// lexicographically.
    pub fn order_key(&self) -> (u32, u32) {
        let mut rev = 0u32;
        for j in 0..self.n {
            if self.bit(j) {
                rev |= 1 << (self.n - 1 - j);
            }
        }
        (self.weight(), rev)
    }

    /// The state with crossing i flipped from 0 to 1.
    pub fn step(&self, i: usize) -> State {
        debug_assert!(!self.bit(i));
        State::new(self.bits | 1 << i, self.n)
    }
}

impl std::fmt::Display for State {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for j in 0..self.n {
            write!(f, "{}", self.bits >> j & 1)?;
        }
        Ok(())
    }
}

/// All states of an n-crossing cube in (weight, tuple-lex) order, refusing
/// cubes larger than `max` crossings.
pub fn enumerate_states(n: usize, max: usize) -> Result<Vec<State>> {
    if n > max {
        return Err(Error::CubeTooLarge(n, max));
    }
    let mut states: Vec<State> = (0..1u32 << n).map(|b| State::new(b, n)).collect();
    states.sort_by_key(State::order_key);
    Ok(states)
}

/// The standard edge sign (−1)^{u_0 + … + u_{i-1}} for the edge raising
/// crossing i.
pub fn standard_sign(u: State, i: usize) -> i8 {
    let below = u.bits & ((1u32 << i) - 1);
    if below.count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Signs on the cube edges, keyed by (lower state, upper state).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignAssignment {
    pub n: usize,
    values: HashMap<(u32, u32), i8>,
}

/// All edges of the n-cube as (lower, raised crossing).
fn edges(n: usize) -> impl Iterator<Item = (u32, usize)> {
    (0..1u32 << n).flat_map(move |u| {
        (0..n)
            .filter(move |i| u >> i & 1 == 0)
            .map(move |i| (u, i))
    })
}

impl SignAssignment {
    /// The standard assignment.
    pub fn standard(n: usize) -> Self {
        let mut values = HashMap::new();
        for (u, i) in edges(n) {
            let s = State::new(u, n);
            values.insert((u, u | 1 << i), standard_sign(s, i));
        }
        SignAssignment { n, values }
    }

    pub fn from_triples(n: usize, triples: &[(u32, u32, i8)]) -> Result<Self> {
        let mut values = HashMap::new();
        for (u, v, e) in triples {
            if v.count_ones() != u.count_ones() + 1 || u & !v != 0 || *v >= 1u32 << n {
                return Err(Error::NotAdjacent);
            }
            if *e != 1 && *e != -1 {
                return Err(Error::MalformedToken(format!("sign {e}")));
            }
            values.insert((*u, *v), *e);
        }
        let out = SignAssignment { n, values };
        out.check_complete()?;
        Ok(out)
    }

    pub fn to_triples(&self) -> Vec<(u32, u32, i8)> {
        let mut t: Vec<(u32, u32, i8)> =
            self.values.iter().map(|((u, v), e)| (*u, *v, *e)).collect();
        t.sort_unstable();
        t
    }

    pub fn get(&self, u: u32, v: u32) -> i8 {
        self.values[&(u, v)]
    }

    fn check_complete(&self) -> Result<()> {
        for (u, i) in edges(self.n) {
            if !self.values.contains_key(&(u, u | 1 << i)) {
                return Err(Error::IncompleteAssignment);
            }
        }
        Ok(())
    }

    /// Check that every square face anticommutes.
    pub fn verify(&self) -> Result<()> {
        self.check_complete()?;
        for u in 0..1u32 << self.n {
            for i in 0..self.n {
                if u >> i & 1 == 1 {
                    continue;
                }
                for j in (i + 1)..self.n {
                    if u >> j & 1 == 1 {
                        continue;
                    }
                    let (ui, uj) = (u | 1 << i, u | 1 << j);
                    let uij = u | 1 << i | 1 << j;
                    let one = self.get(u, ui) * self.get(ui, uij);
                    let two = self.get(u, uj) * self.get(uj, uij);
                    if one != -two {
                        return Err(Error::NoTransform);
                    }
                }
            }
        }
        Ok(())
    }

    /// Conjugate by a vertex sign change: e'(u,v) = f(u) f(v) e(u,v).
    pub fn conjugate(&self, f: &HashMap<u32, i8>) -> SignAssignment {
        let values = self
            .values
            .iter()
            .map(|((u, v), e)| ((*u, *v), f[u] * f[v] * e))
            .collect();
        SignAssignment { n: self.n, values }
    }
}

/// A vertex sign change f with f(0…0) = +1 turning `a` into `b`, i.e.
/// b(u,v) = f(u) f(v) a(u,v) on every edge.
pub fn cochain_transform(a: &SignAssignment, b: &SignAssignment) -> Result<HashMap<u32, i8>> {
    assert_eq!(a.n, b.n);
    let n = a.n;
    a.check_complete()?;
    b.check_complete()?;
    let mut f: HashMap<u32, i8> = HashMap::new();
    f.insert(0, 1);
    // Walk the spanning tree that raises the lowest unset crossing.
    let mut queue = std::collections::VecDeque::from([0u32]);
    while let Some(u) = queue.pop_front() {
        for i in 0..n {
            if u >> i & 1 == 1 {
                continue;
            }
            let v = u | 1 << i;
            if f.contains_key(&v) {
                continue;
            }
            f.insert(v, f[&u] * a.get(u, v) * b.get(u, v));
            queue.push_back(v);
        }
    }
    for (u, i) in edges(n) {
        let v = u | 1 << i;
        if b.get(u, v) != f[&u] * f[&v] * a.get(u, v) {
            return Err(Error::NoTransform);
        }
    }
    Ok(f)
}

/// How the circles change along a cube edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    /// Two circles of the lower state fuse into one.
    Merge { src: (usize, usize), dst: usize },
    /// One circle of the lower state pinches into two.
    Split { src: usize, dst: (usize, usize) },
}

/// A cube edge with its merge/split shape and the pairing of the untouched
/// circles (index in the lower resolution, index in the upper one).
#[derive(Clone, Debug)]
pub struct EdgeData {
    pub crossing: usize,
    pub kind: EdgeKind,
    pub bystanders: Vec<(usize, usize)>,
}

/// Classify the edge u → v of the cube over `d`; v must raise exactly one
/// crossing of u.
pub fn edge_data(d: &LinkDiagram, u: State, v: State) -> Result<EdgeData> {
    if u.n != v.n || v.bits.count_ones() != u.bits.count_ones() + 1 || u.bits & !v.bits != 0 {
        return Err(Error::NotAdjacent);
    }
    let i = (u.bits ^ v.bits).trailing_zeros() as usize;
    let res_u = d.resolve(u.bits);
    let res_v = d.resolve(v.bits);
    let [a, b, _, cd] = d.crossings()[i].arcs;
    let s1 = res_u.circle_of(a);
    let s2 = res_u.circle_of(d.crossings()[i].arcs[2]);
    debug_assert_eq!(res_u.circle_of(b), s1);
    debug_assert_eq!(res_u.circle_of(cd), s2);
    let kind = if s1 != s2 {
        EdgeKind::Merge { src: (s1, s2), dst: res_v.circle_of(a) }
    } else {
        let (t1, t2) = (res_v.circle_of(a), res_v.circle_of(b));
        debug_assert_ne!(t1, t2);
        EdgeKind::Split { src: s1, dst: (t1, t2) }
    };
    let mut bystanders = Vec::new();
    for (cu, circle) in res_u.circles.iter().enumerate() {
        if cu == s1 || cu == s2 {
            continue;
        }
        bystanders.push((cu, res_v.circle_of(circle[0])));
    }
    Ok(EdgeData { crossing: i, kind, bystanders })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn right_trefoil() -> LinkDiagram {
        LinkDiagram::parse("X[2,3,4,1];X[3,5,6,4];X[5,2,1,6]").unwrap()
    }

    #[test]
    fn state_order_is_weight_then_tuple() {
        let s: Vec<u32> = enumerate_states(2, 20).unwrap().iter().map(|s| s.bits).collect();
        // as smoothing tuples: (0,0), (0,1), (1,0), (1,1)
        assert_eq!(s, vec![0b00, 0b10, 0b01, 0b11]);

        let s3: Vec<u32> = enumerate_states(3, 20).unwrap().iter().map(|s| s.bits).collect();
        assert_eq!(s3, vec![0b000, 0b100, 0b010, 0b001, 0b110, 0b101, 0b011, 0b111]);

        assert!(matches!(
            enumerate_states(21, 20),
            Err(Error::CubeTooLarge(21, 20))
        ));
    }

    #[test]
    fn standard_signs_verify() {
        for n in 0..=4 {
            SignAssignment::standard(n).verify().unwrap();
        }
        let u = State::new(0b011, 3);
        assert_eq!(standard_sign(u, 2), 1);
        let u = State::new(0b001, 3);
        assert_eq!(standard_sign(u, 1), -1);
        assert_eq!(standard_sign(u, 2), -1);
    }

    #[test]
    fn broken_signs_fail_verification() {
        let mut triples = SignAssignment::standard(2).to_triples();
        triples[0].2 = -triples[0].2;
        let bad = SignAssignment::from_triples(2, &triples).unwrap();
        assert!(bad.verify().is_err());
    }

    #[test]
    fn transform_between_conjugate_assignments() {
        let a = SignAssignment::standard(3);
        // flip the fiber over a couple of vertices
        let mut f: HashMap<u32, i8> = (0..8).map(|u| (u, 1)).collect();
        f.insert(0b011, -1);
        f.insert(0b100, -1);
        let b = a.conjugate(&f);
        b.verify().unwrap();
        let g = cochain_transform(&a, &b).unwrap();
        assert_eq!(g[&0], 1);
        let again = a.conjugate(&g);
        assert_eq!(again, b);

        // one flipped edge is not a coboundary
        let mut triples = a.to_triples();
        triples[5].2 = -triples[5].2;
        let bad = SignAssignment::from_triples(3, &triples).unwrap();
        assert!(matches!(cochain_transform(&a, &bad), Err(Error::NoTransform)));
    }

    #[test]
    fn trefoil_edges_classify() {
        let d = right_trefoil();
        let n = 3;
        // 000 → 001 fuses the two Seifert circles.
        let e = edge_data(&d, State::new(0b000, n), State::new(0b001, n)).unwrap();
        assert_eq!(e.crossing, 0);
        assert!(matches!(e.kind, EdgeKind::Merge { .. }));
        assert!(e.bystanders.is_empty());

        // 011 → 111 pinches the single circle apart.
        let e = edge_data(&d, State::new(0b011, n), State::new(0b111, n)).unwrap();
        assert_eq!(e.crossing, 2);
        assert!(matches!(e.kind, EdgeKind::Split { .. }));
        assert_eq!(e.bystanders.len(), 1);

        assert!(edge_data(&d, State::new(0b001, n), State::new(0b110, n)).is_err());
        assert!(edge_data(&d, State::new(0b011, n), State::new(0b001, n)).is_err());
    }
}
