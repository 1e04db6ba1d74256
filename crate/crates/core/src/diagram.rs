//! Planar diagram codes and their combinatorics.
//!
//! A diagram is a list of crossings `X[a,b,c,d]` plus free loops `U`. The
//! four arcs of a crossing are listed counterclockwise starting from the
//! incoming under-strand, so the under-strand runs a → c. The over-strand
//! direction (d → b or b → d) is not part of the code; it is recovered by
//! propagating strand orientations, and the crossing is positive exactly
//! when the over-strand runs d → b.
//!
//! Resolutions follow the two local smoothings: the 0-smoothing joins the
//! arc pairs (a,b) and (c,d), the 1-smoothing joins (a,d) and (b,c). For a
//! positive crossing the 0-smoothing is the oriented one.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::{Error, Result};

/// A crossing with its four arcs (counterclockwise from the incoming
/// under-strand), resolved orientation, and sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Crossing {
    pub arcs: [u32; 4],
    /// Whether the over-strand enters at the last slot (d → b). Equivalent
    /// to the crossing being positive.
    pub over_in_d: bool,
    pub sign: i8,
}

impl Crossing {
    fn slot(&self, arc_pos: usize) -> u32 {
        self.arcs[arc_pos]
    }
}

/// An oriented link diagram: crossings plus crossing-free loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkDiagram {
    crossings: Vec<Crossing>,
    loops: Vec<u32>,
    arcs: Vec<u32>,
    component_count: usize,
    n_plus: usize,
    n_minus: usize,
}

/// One full resolution of a diagram: the partition of the arcs into
/// circles. Circles are sorted by their smallest arc id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedDiagram {
    pub circles: Vec<Vec<u32>>,
    index: HashMap<u32, usize>,
}

impl ResolvedDiagram {
    pub fn len(&self) -> usize {
        self.circles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circles.is_empty()
    }

    pub fn circle_of(&self, arc: u32) -> usize {
        self.index[&arc]
    }
}

/// Bookkeeping returned by [`LinkDiagram::poke_under`]: the two new
/// crossings and the arcs of the local picture.
#[derive(Clone, Copy, Debug)]
pub struct PokeInfo {
    /// Index of the positive new crossing (strand entering the finger).
    pub a_idx: usize,
    /// Index of the negative new crossing (strand leaving the finger).
    pub b_idx: usize,
    /// Middle segment of the poked strand, between the two new crossings.
    pub m: u32,
    /// Outgoing segment of the poked strand (carries the old head).
    pub t: u32,
    /// Circle arc on the entry side of the finger.
    pub le: u32,
    /// Circle arc on the far side of the finger.
    pub lw: u32,
}

/// Union-find over crossings with parity, for solving the over-strand
/// directions. The boolean attached to each crossing is `over_in_d`.
struct ParityUf {
    parent: Vec<usize>,
    parity: Vec<bool>,
    fixed: Vec<Option<bool>>,
}

impl ParityUf {
    fn new(n: usize) -> Self {
        ParityUf { parent: (0..n).collect(), parity: vec![false; n], fixed: vec![None; n] }
    }

    fn find(&mut self, i: usize) -> (usize, bool) {
        if self.parent[i] == i {
            return (i, false);
        }
        let (root, p) = self.find(self.parent[i]);
        self.parent[i] = root;
        self.parity[i] ^= p;
        (root, self.parity[i])
    }

    /// Impose β_i ⊕ β_j = p.
    fn union(&mut self, i: usize, j: usize, p: bool) -> Result<()> {
        let (ri, pi) = self.find(i);
        let (rj, pj) = self.find(j);
        if ri == rj {
            if pi ^ pj != p {
                return Err(Error::OrientationInconsistent);
            }
            return Ok(());
        }
        // β_ri ⊕ β_rj = pi ⊕ pj ⊕ p; attach rj under ri.
        self.parent[rj] = ri;
        self.parity[rj] = pi ^ pj ^ p;
        match (self.fixed[ri], self.fixed[rj]) {
            (_, None) => {}
            (None, Some(v)) => self.fixed[ri] = Some(v ^ self.parity[rj]),
            (Some(a), Some(b)) => {
                if a != b ^ self.parity[rj] {
                    return Err(Error::OrientationInconsistent);
                }
            }
        }
        self.fixed[rj] = None;
        Ok(())
    }

    /// Impose β_i = v.
    fn fix(&mut self, i: usize, v: bool) -> Result<()> {
        let (r, p) = self.find(i);
        let root_val = v ^ p;
        match self.fixed[r] {
            None => {
                self.fixed[r] = Some(root_val);
                Ok(())
            }
            Some(w) if w == root_val => Ok(()),
            Some(_) => Err(Error::OrientationInconsistent),
        }
    }

    fn value(&mut self, i: usize) -> Option<bool> {
        let (r, p) = self.find(i);
        self.fixed[r].map(|v| v ^ p)
    }
}

/// Whether the strand entering/leaving at this slot consumes the arc there
/// (head) or produces it (tail), given the over-direction β.
pub(crate) fn slot_is_head(slot: usize, beta: bool) -> bool {
    match slot {
        0 => true,   // under-in
        2 => false,  // under-out
        1 => !beta,  // over-out when β, over-in otherwise
        3 => beta,   // over-in when β, over-out otherwise
        _ => unreachable!(),
    }
}

impl LinkDiagram {
    /// Parse a planar diagram code: `X[a,b,c,d]` items and `U` loops
    /// separated by `;`. An empty string is the empty diagram. Loops get
    /// fresh arc ids following the largest one used by the crossings, in
    /// order of appearance.
    pub fn parse(text: &str) -> Result<LinkDiagram> {
        let mut tuples = Vec::new();
        let mut loop_count = 0usize;
        for raw in text.split(';') {
            let item = raw.trim();
            if item.is_empty() {
                if text.trim().is_empty() {
                    continue;
                }
                return Err(Error::MalformedToken(raw.to_string()));
            }
            if item == "U" {
                loop_count += 1;
                continue;
            }
            let inner = item
                .strip_prefix("X[")
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| Error::MalformedToken(item.to_string()))?;
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(Error::MalformedToken(item.to_string()));
            }
            let mut arcs = [0u32; 4];
            for (k, p) in parts.iter().enumerate() {
                arcs[k] = p
                    .parse::<u32>()
                    .map_err(|_| Error::MalformedToken(item.to_string()))?;
            }
            tuples.push(arcs);
        }
        let max_arc = tuples.iter().flatten().copied().max().unwrap_or(0);
        let loops = (1..=loop_count as u32).map(|k| max_arc + k).collect();
        LinkDiagram::from_parts(tuples, loops)
    }

    /// Build a diagram from crossing tuples and explicit loop arc ids,
    /// solving the over-strand orientations.
    pub fn from_parts(tuples: Vec<[u32; 4]>, loops: Vec<u32>) -> Result<LinkDiagram> {
        // Every arc id must occur exactly twice among the crossing slots,
        // and loop ids must be fresh and distinct.
        let mut occ: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
        for (ci, t) in tuples.iter().enumerate() {
            for (si, a) in t.iter().enumerate() {
                occ.entry(*a).or_default().push((ci, si));
            }
        }
        for (a, slots) in &occ {
            if slots.len() != 2 {
                return Err(Error::ArcMultiplicity(*a, slots.len()));
            }
        }
        for (k, l) in loops.iter().enumerate() {
            if occ.contains_key(l) || loops[..k].contains(l) {
                return Err(Error::ArcMultiplicity(*l, 3));
            }
        }

        // Solve the over-strand directions: each arc needs exactly one head
        // and one tail among its two slots.
        let mut uf = ParityUf::new(tuples.len());
        for slots in occ.values() {
            let (ci, si) = slots[0];
            let (cj, sj) = slots[1];
            let det_i = si == 0 || si == 2;
            let det_j = sj == 0 || sj == 2;
            match (det_i, det_j) {
                (true, true) => {
                    if slot_is_head(si, false) == slot_is_head(sj, false) {
                        return Err(Error::OrientationInconsistent);
                    }
                }
                (true, false) => {
                    let need_head = !slot_is_head(si, false);
                    let beta = if sj == 1 { !need_head } else { need_head };
                    uf.fix(cj, beta)?;
                }
                (false, true) => {
                    let need_head = !slot_is_head(sj, false);
                    let beta = if si == 1 { !need_head } else { need_head };
                    uf.fix(ci, beta)?;
                }
                (false, false) => {
                    // slot b contributes β⊕1 to headness, slot d contributes β.
                    let n_i = si == 1;
                    let n_j = sj == 1;
                    let p = true ^ n_i ^ n_j;
                    if ci == cj {
                        if p {
                            return Err(Error::OrientationInconsistent);
                        }
                    } else {
                        uf.union(ci, cj, p)?;
                    }
                }
            }
        }
        // Components that no under-strand pins down get a default
        // orientation at their lowest crossing.
        for c in 0..tuples.len() {
            if uf.value(c).is_none() {
                uf.fix(c, false)?;
            }
        }

        let mut crossings = Vec::with_capacity(tuples.len());
        let (mut n_plus, mut n_minus) = (0, 0);
        for (ci, t) in tuples.iter().enumerate() {
            let beta = uf.value(ci).unwrap();
            let sign = if beta { 1 } else { -1 };
            if beta {
                n_plus += 1;
            } else {
                n_minus += 1;
            }
            crossings.push(Crossing { arcs: *t, over_in_d: beta, sign });
        }

        let mut arcs: Vec<u32> = occ.keys().copied().chain(loops.iter().copied()).collect();
        arcs.sort_unstable();

        let mut d = LinkDiagram {
            crossings,
            loops,
            arcs,
            component_count: 0,
            n_plus,
            n_minus,
        };
        d.component_count = d.components().len();
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.crossings.len()
    }

    pub fn n_plus(&self) -> usize {
        self.n_plus
    }

    pub fn n_minus(&self) -> usize {
        self.n_minus
    }

    pub fn writhe(&self) -> i64 {
        self.n_plus as i64 - self.n_minus as i64
    }

    pub fn crossings(&self) -> &[Crossing] {
        &self.crossings
    }

    pub fn loops(&self) -> &[u32] {
        &self.loops
    }

    pub fn arcs(&self) -> &[u32] {
        &self.arcs
    }

    pub fn max_arc_id(&self) -> u32 {
        self.arcs.last().copied().unwrap_or(0)
    }

    pub fn component_count(&self) -> usize {
        self.component_count
    }

    /// Link components as cyclic arc sequences in strand order, sorted by
    /// smallest arc id. Free loops are their own components.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let mut succ: HashMap<u32, u32> = HashMap::new();
        for c in &self.crossings {
            succ.insert(c.slot(0), c.slot(2));
            if c.over_in_d {
                succ.insert(c.slot(3), c.slot(1));
            } else {
                succ.insert(c.slot(1), c.slot(3));
            }
        }
        let mut seen: HashMap<u32, bool> = HashMap::new();
        let mut comps = Vec::new();
        for a in &self.arcs {
            if self.loops.contains(a) {
                comps.push(vec![*a]);
                continue;
            }
            if seen.contains_key(a) {
                continue;
            }
            let mut cycle = Vec::new();
            let mut cur = *a;
            loop {
                cycle.push(cur);
                seen.insert(cur, true);
                cur = succ[&cur];
                if cur == *a {
                    break;
                }
            }
            comps.push(cycle);
        }
        comps
    }

    /// The circles of the full resolution selected by `state`: bit i gives
    /// the smoothing of crossing i.
    pub fn resolve(&self, state: u32) -> ResolvedDiagram {
        assert!(self.n() < 32, "resolution state out of range");
        let idx: HashMap<u32, usize> =
            self.arcs.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let mut parent: Vec<usize> = (0..self.arcs.len()).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let r = find(parent, parent[i]);
                parent[i] = r;
            }
            parent[i]
        }
        let union = |parent: &mut Vec<usize>, x: u32, y: u32| {
            let (rx, ry) = (find(parent, idx[&x]), find(parent, idx[&y]));
            if rx != ry {
                parent[rx] = ry;
            }
        };
        for (ci, c) in self.crossings.iter().enumerate() {
            let [a, b, cc, d] = c.arcs;
            if state >> ci & 1 == 0 {
                union(&mut parent, a, b);
                union(&mut parent, cc, d);
            } else {
                union(&mut parent, a, d);
                union(&mut parent, b, cc);
            }
        }
        let mut groups: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for (i, a) in self.arcs.iter().enumerate() {
            groups.entry(find(&mut parent, i)).or_default().push(*a);
        }
        let mut circles: Vec<Vec<u32>> = groups.into_values().collect();
        circles.sort_by_key(|c| c[0]);
        let mut index = HashMap::new();
        for (k, circle) in circles.iter().enumerate() {
            for a in circle {
                index.insert(*a, k);
            }
        }
        ResolvedDiagram { circles, index }
    }

    /// The mirror image: every crossing switched. The tuple is re-rooted at
    /// the old over-strand entry, which becomes the new under-strand entry.
    pub fn mirror(&self) -> LinkDiagram {
        let tuples = self
            .crossings
            .iter()
            .map(|c| {
                let t = c.arcs;
                if c.over_in_d {
                    [t[3], t[0], t[1], t[2]]
                } else {
                    [t[1], t[2], t[3], t[0]]
                }
            })
            .collect();
        LinkDiagram::from_parts(tuples, self.loops.clone())
            .expect("mirror of a valid diagram is valid")
    }

    /// Disjoint union, with the arcs of `other` shifted past ours.
    pub fn disjoint_union(&self, other: &LinkDiagram) -> LinkDiagram {
        let off = self.max_arc_id() + 1;
        let mut tuples: Vec<[u32; 4]> = self.crossings.iter().map(|c| c.arcs).collect();
        tuples.extend(other.crossings.iter().map(|c| {
            let [a, b, cc, d] = c.arcs;
            [a + off, b + off, cc + off, d + off]
        }));
        let mut loops = self.loops.clone();
        loops.extend(other.loops.iter().map(|l| l + off));
        LinkDiagram::from_parts(tuples, loops)
            .expect("disjoint union of valid diagrams is valid")
    }

    /// The closure of a braid word on the given number of strands. Letter
    /// ±k is the k-th positive/negative generator, 1 ≤ k < strands. Strands
    /// untouched by the word close up into free loops.
    pub fn braid_closure(strands: usize, word: &[i32]) -> Result<LinkDiagram> {
        if strands == 0 {
            return Err(Error::MalformedToken("braid on 0 strands".into()));
        }
        let mut pos: Vec<u32> = (1..=strands as u32).collect();
        let mut next = strands as u32 + 1;
        let mut tuples = Vec::with_capacity(word.len());
        for w in word {
            let k = w.unsigned_abs() as usize;
            if *w == 0 || k >= strands {
                return Err(Error::MalformedToken(format!("braid letter {w}")));
            }
            let (x, y) = (pos[k - 1], pos[k]);
            let xp = next;
            let yp = next + 1;
            next += 2;
            if *w > 0 {
                tuples.push([y, xp, yp, x]);
            } else {
                tuples.push([x, y, xp, yp]);
            }
            pos[k - 1] = yp;
            pos[k] = xp;
        }
        // Close up: the arc leaving the bottom of each strand is the arc
        // entering its top.
        let mut subst: HashMap<u32, u32> = HashMap::new();
        let mut loops = Vec::new();
        for (j, p) in pos.iter().enumerate() {
            let top = j as u32 + 1;
            if *p == top {
                loops.push(top);
            } else {
                subst.insert(*p, top);
            }
        }
        for t in tuples.iter_mut() {
            for a in t.iter_mut() {
                if let Some(s) = subst.get(a) {
                    *a = *s;
                }
            }
        }
        LinkDiagram::from_parts(tuples, loops)
    }

    /// Push a finger of the free loop `loop_arc` under the strand carrying
    /// `strand_arc`: one of the two second-move pictures. The loop stops
    /// being free; the strand is cut into three segments s → m → t; the
    /// poked circle into le / lw. New crossings go at the end, positive
    /// first.
    pub fn poke_under(&self, loop_arc: u32, strand_arc: u32) -> Result<(LinkDiagram, PokeInfo)> {
        if !self.loops.contains(&loop_arc) {
            return Err(Error::SiteInconsistent(format!(
                "arc {loop_arc} is not a free loop"
            )));
        }
        let mut head_slot = None;
        for (ci, c) in self.crossings.iter().enumerate() {
            for (si, a) in c.arcs.iter().enumerate() {
                if *a == strand_arc && slot_is_head(si, c.over_in_d) {
                    head_slot = Some((ci, si));
                }
            }
        }
        let Some((hc, hs)) = head_slot else {
            return Err(Error::SiteInconsistent(format!(
                "arc {strand_arc} is not a crossing arc"
            )));
        };

        let base = self.max_arc_id();
        let (m, t, le, lw) = (base + 1, base + 2, loop_arc, base + 3);
        let mut tuples: Vec<[u32; 4]> = self.crossings.iter().map(|c| c.arcs).collect();
        tuples[hc][hs] = t;
        let a_idx = tuples.len();
        tuples.push([le, m, lw, strand_arc]);
        let b_idx = tuples.len();
        tuples.push([lw, m, le, t]);
        let loops = self.loops.iter().copied().filter(|l| *l != loop_arc).collect();
        let d = LinkDiagram::from_parts(tuples, loops)?;
        Ok((d, PokeInfo { a_idx, b_idx, m, t, le, lw }))
    }

    /// A seeded random diagram: the closure of a random braid word with at
    /// most `max_crossings` letters, resampled while the state cube would
    /// be unreasonably large.
    pub fn random<R: Rng>(rng: &mut R, max_crossings: usize) -> LinkDiagram {
        let max_crossings = max_crossings.max(1);
        let mut last = None;
        for _ in 0..50 {
            let strands = rng.gen_range(2..=4usize);
            let len = rng.gen_range(1..=max_crossings);
            let word: Vec<i32> = (0..len)
                .map(|_| {
                    let k = rng.gen_range(1..strands) as i32;
                    if rng.gen_bool(0.5) {
                        k
                    } else {
                        -k
                    }
                })
                .collect();
            let d = LinkDiagram::braid_closure(strands, &word)
                .expect("random braid words are well formed");
            let total: u64 = (0..1u32 << d.n())
                .map(|s| 1u64 << d.resolve(s).len())
                .sum();
            if total <= 250_000 {
                return d;
            }
            last = Some(d);
        }
        last.expect("at least one sample was drawn")
    }

    /// The diagram back in code form.
    pub fn to_pd(&self) -> String {
        let mut items: Vec<String> = self
            .crossings
            .iter()
            .map(|c| {
                let [a, b, cc, d] = c.arcs;
                format!("X[{a},{b},{cc},{d}]")
            })
            .collect();
        items.extend(self.loops.iter().map(|_| "U".to_string()));
        items.join(";")
    }
}

impl std::fmt::Display for LinkDiagram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_pd())
    }
}
