//! Decreasing filtrations on based chain complexes, orders of filtered maps,
//! and the spectral sequence of a bounded filtration over a field.
//!
//! A filtration level is attached to every basis element; `F^p` is the span
//! of the generators with level ≥ p, so `F^p ⊇ F^{p+1}`. Page dimensions are
//! computed from the cycle spaces
//!   `Z_r^{p,i} = { x ∈ F^p Cⁱ : dx ∈ F^{p+r} }`
//! via `E_r^{p,i} = Z_r^{p,i} / (Z_{r-1}^{p+1,i} + d Z_{r-1}^{p-r+1,i-1})`.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::homalg::{ChainComplex, ChainMap};
use crate::matrix::{kernel_basis, rank, Mat};
use crate::scalar::{Field, Ring};
use crate::{Error, Result};

/// Which grading to filter a bigraded complex by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Filtration {
    /// homological grading; the differential has order ≥ 1
    H,
    /// internal (quantum) grading; the differential has order ≥ 0
    Q,
}

impl FromStr for Filtration {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(Filtration::H),
            "q" => Ok(Filtration::Q),
            other => Err(Error::MalformedToken(other.to_string())),
        }
    }
}

/// A chain complex with a decreasing filtration given by generator levels,
/// plus the order the differential is declared to respect:
/// `level(dx) ≥ level(x) + declared_order` for every generator x.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredComplex<R: Ring> {
    pub complex: ChainComplex<R>,
    pub levels: BTreeMap<i64, Vec<i64>>,
    pub declared_order: i64,
}

impl<R: Ring> FilteredComplex<R> {
    pub fn new(
        complex: ChainComplex<R>,
        levels: BTreeMap<i64, Vec<i64>>,
        declared_order: i64,
    ) -> Result<Self> {
        for i in complex.degrees() {
            let n = complex.rank(i);
            let got = levels.get(&i).map_or(0, |v| v.len());
            if got != n {
                return Err(Error::DimensionMismatch { got, expected: n });
            }
        }
        let fc = FilteredComplex { complex, levels, declared_order };
        for i in fc.complex.degrees() {
            for (r, c, _) in fc.complex.d(i).triplets() {
                if fc.level(i + 1, r) < fc.level(i, c) + declared_order {
                    return Err(Error::FiltrationViolation);
                }
            }
        }
        Ok(fc)
    }

    /// Filter by the internal grading already carried by the basis.
    pub fn by_q(complex: &ChainComplex<R>) -> Result<Self> {
        let levels = complex
            .degrees()
            .into_iter()
            .map(|i| (i, complex.module(i).unwrap().q.clone()))
            .collect();
        FilteredComplex::new(complex.clone(), levels, 0)
    }

    /// Filter by homological degree itself.
    pub fn by_degree(complex: &ChainComplex<R>) -> Result<Self> {
        let levels = complex
            .degrees()
            .into_iter()
            .map(|i| (i, vec![i; complex.rank(i)]))
            .collect();
        FilteredComplex::new(complex.clone(), levels, 1)
    }

    pub fn level(&self, degree: i64, gen: usize) -> i64 {
        self.levels[&degree][gen]
    }

    fn level_range(&self) -> Option<(i64, i64)> {
        let mut range: Option<(i64, i64)> = None;
        for v in self.levels.values() {
            for l in v {
                range = Some(match range {
                    None => (*l, *l),
                    Some((lo, hi)) => (lo.min(*l), hi.max(*l)),
                });
            }
        }
        range
    }
}

/// The order of a filtered map: the largest k with `f(F^p) ⊆ F^{p+k}`
/// levelwise, i.e. the minimum of `level(target) − level(source)` over
/// nonzero matrix entries. `None` encodes +∞, attained exactly by f = 0.
pub fn ord<R: Ring>(
    f: &ChainMap<R>,
    src: &FilteredComplex<R>,
    tgt: &FilteredComplex<R>,
) -> Option<i64> {
    let mut best: Option<i64> = None;
    for (i, m) in &f.blocks {
        for (r, c, _) in m.triplets() {
            let k = tgt.level(i + f.shift.0, r) - src.level(*i, c);
            best = Some(match best {
                None => k,
                Some(b) => b.min(k),
            });
        }
    }
    best
}

/// One page of a spectral sequence: dimensions per (filtration level,
/// homological degree), with zero entries omitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub r: usize,
    pub dims: BTreeMap<(i64, i64), usize>,
}

impl Page {
    pub fn total(&self) -> usize {
        self.dims.values().sum()
    }
}

/// The pages E_0 … E_∞ of a bounded filtration. The last page stored is
/// guaranteed stable: once r exceeds the level span, no differential can
/// move between occupied levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectralSequence {
    pub pages: Vec<Page>,
}

impl SpectralSequence {
    pub fn infinity(&self) -> &Page {
        self.pages.last().expect("at least one page")
    }

    /// Smallest r with E_r = E_∞. Page dimensions only decrease, so equality
    /// of dimensions from r onward is equivalent to d_s = 0 for all s ≥ r.
    pub fn collapse_page(&self) -> usize {
        let inf = &self.infinity().dims;
        self.pages
            .iter()
            .find(|p| &p.dims == inf)
            .map(|p| p.r)
            .unwrap_or(0)
    }
}

/// Columns spanning `Z_r^{p,i}` in the coordinates of the full basis of Cⁱ.
/// `r < 0` is the convention `Z_{-1}^{p,i} = F^p Cⁱ`.
fn z_basis<F: Field>(fc: &FilteredComplex<F>, i: i64, p: i64, r: i64) -> Mat<F> {
    let n = fc.complex.rank(i);
    let src: Vec<usize> = (0..n).filter(|k| fc.level(i, *k) >= p).collect();
    let coords = if r < 0 {
        Mat::identity(src.len())
    } else {
        let m = fc.complex.rank(i + 1);
        let tgt: Vec<usize> = (0..m).filter(|k| fc.level(i + 1, *k) < p + r).collect();
        let a = fc.complex.d(i).submatrix(&tgt, &src).to_dense();
        Mat::from_columns(src.len(), &kernel_basis(&a))
    };
    let mut full = Mat::zero(n, coords.ncols());
    for (row, gen) in src.iter().enumerate() {
        for c in 0..coords.ncols() {
            full.set(*gen, c, coords.get(row, c).clone());
        }
    }
    full
}

fn concat_cols<F: Field>(a: &Mat<F>, b: &Mat<F>) -> Mat<F> {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = Mat::zero(a.nrows(), a.ncols() + b.ncols());
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            out.set(r, c, a.get(r, c).clone());
        }
        for c in 0..b.ncols() {
            out.set(r, a.ncols() + c, b.get(r, c).clone());
        }
    }
    out
}

/// Compute pages E_0 … E_{r_stop} of the filtration spectral sequence over a
/// field, where r_stop is `r_max` if given and otherwise one past the level
/// span (sufficient for stability). Page 0 is the associated graded.
pub fn spectral_sequence<F: Field>(
    fc: &FilteredComplex<F>,
    r_max: Option<usize>,
) -> Result<SpectralSequence> {
    let Some((lo, hi)) = fc.level_range() else {
        return Ok(SpectralSequence { pages: vec![Page { r: 0, dims: BTreeMap::new() }] });
    };
    let span = (hi - lo) as usize;
    let r_stop = r_max.unwrap_or(span + 1).max(span + 1);

    // bigrades occupied at E_0; later pages only shrink
    let mut occupied: Vec<(i64, i64)> = Vec::new();
    for i in fc.complex.degrees() {
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for k in 0..fc.complex.rank(i) {
            *counts.entry(fc.level(i, k)).or_default() += 1;
        }
        occupied.extend(counts.keys().map(|p| (*p, i)));
    }

    let mut pages = Vec::with_capacity(r_stop + 1);
    for r in 0..=r_stop {
        let ri = r as i64;
        let mut dims = BTreeMap::new();
        for &(p, i) in &occupied {
            let z = z_basis(fc, i, p, ri);
            if z.ncols() == 0 {
                continue;
            }
            let sub = z_basis(fc, i, p + 1, ri - 1);
            let img = fc
                .complex
                .d(i - 1)
                .to_dense()
                .mul(&z_basis(fc, i - 1, p - ri + 1, ri - 1));
            let denom = rank(&concat_cols(&sub, &img));
            let dim = z.ncols() - denom;
            if dim > 0 {
                dims.insert((p, i), dim);
            }
        }
        pages.push(Page { r, dims });
    }
    Ok(SpectralSequence { pages })
}

/// Dimensions of the associated graded of homology with respect to the
/// filtration: `gr^p Hⁱ = F^p Hⁱ / F^{p+1} Hⁱ` where `F^p H` is the image of
/// the cycles lying in `F^p`. Zero entries are omitted.
pub fn graded_homology_dims<F: Field>(fc: &FilteredComplex<F>) -> BTreeMap<(i64, i64), usize> {
    let mut out = BTreeMap::new();
    let Some((lo, hi)) = fc.level_range() else {
        return out;
    };
    for i in fc.complex.degrees() {
        let n = fc.complex.rank(i);
        let ker_in = kernel_basis(&fc.complex.d(i - 1).to_dense()).len();
        let filtered_h = |p: i64| -> usize {
            let src: Vec<usize> = (0..n).filter(|k| fc.level(i, *k) >= p).collect();
            let all_out: Vec<usize> = (0..fc.complex.rank(i + 1)).collect();
            let ker_cap =
                kernel_basis(&fc.complex.d(i).submatrix(&all_out, &src).to_dense()).len();
            // dim (im d_{i-1} ∩ F^p) = dim ker(proj_{<p} ∘ d_{i-1}) − dim ker d_{i-1}
            let low: Vec<usize> = (0..n).filter(|k| fc.level(i, *k) < p).collect();
            let all_in: Vec<usize> = (0..fc.complex.rank(i - 1)).collect();
            let ker_proj =
                kernel_basis(&fc.complex.d(i - 1).submatrix(&low, &all_in).to_dense()).len();
            ker_cap - (ker_proj - ker_in)
        };
        for p in lo..=hi {
            let dim = filtered_h(p) - filtered_h(p + 1);
            if dim > 0 {
                out.insert((p, i), dim);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homalg::BasedModule;
    use crate::matrix::SpMat;
    use crate::scalar::F2;
    use crate::Rat;
    use num_traits::One;

    fn rat(n: i64) -> Rat {
        Rat::from_integer(n.into())
    }

    #[test]
    fn zero_differential_freezes_every_page() {
        let mut c: ChainComplex<Rat> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["a".into(), "b".into()], vec![0, 2]));
        c.set_module(1, BasedModule::new(vec!["c".into()], vec![4]));
        let fc = FilteredComplex::by_q(&c).unwrap();
        let ss = spectral_sequence(&fc, None).unwrap();
        for p in &ss.pages {
            assert_eq!(p.dims, ss.pages[0].dims);
        }
        assert_eq!(ss.collapse_page(), 0);
        assert_eq!(graded_homology_dims(&fc), ss.infinity().dims);
    }

    #[test]
    fn level_gap_two_dies_on_page_three() {
        let mut c: ChainComplex<Rat> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["x".into()], vec![0]));
        c.set_module(1, BasedModule::new(vec!["y".into()], vec![2]));
        c.set_diff(0, SpMat::from_triplets(1, 1, vec![(0, 0, Rat::one())]));
        let fc = FilteredComplex::by_q(&c).unwrap();
        let ss = spectral_sequence(&fc, None).unwrap();
        let e0: BTreeMap<(i64, i64), usize> = [((0, 0), 1), ((2, 1), 1)].into();
        assert_eq!(ss.pages[0].dims, e0);
        assert_eq!(ss.pages[1].dims, e0);
        assert_eq!(ss.pages[2].dims, e0);
        assert!(ss.pages[3].dims.is_empty());
        assert_eq!(ss.collapse_page(), 3);
        assert!(graded_homology_dims(&fc).is_empty());
    }

    #[test]
    fn uniform_levels_collapse_at_page_one() {
        // k² → k², matrix [1 0; 0 0]; all generators at level 0
        let mut c: ChainComplex<Rat> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["a".into(), "b".into()], vec![0, 0]));
        c.set_module(1, BasedModule::new(vec!["u".into(), "v".into()], vec![0, 0]));
        c.set_diff(0, SpMat::from_triplets(2, 2, vec![(0, 0, Rat::one())]));
        let fc = FilteredComplex::by_q(&c).unwrap();
        let ss = spectral_sequence(&fc, None).unwrap();
        assert_eq!(ss.pages[0].total(), 4);
        let e1: BTreeMap<(i64, i64), usize> = [((0, 0), 1), ((0, 1), 1)].into();
        assert_eq!(ss.pages[1].dims, e1);
        assert_eq!(ss.collapse_page(), 1);
        assert_eq!(graded_homology_dims(&fc), e1);
    }

    #[test]
    fn degree_filtration_recovers_homology_on_page_two() {
        let mut c: ChainComplex<Rat> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["a".into(), "b".into()], vec![0, 0]));
        c.set_module(1, BasedModule::new(vec!["u".into(), "v".into()], vec![0, 0]));
        c.set_diff(0, SpMat::from_triplets(2, 2, vec![(0, 0, Rat::one())]));
        let fc = FilteredComplex::by_degree(&c).unwrap();
        let ss = spectral_sequence(&fc, None).unwrap();
        assert_eq!(ss.pages[0].total(), 4);
        assert_eq!(ss.pages[1].total(), 4);
        let e2: BTreeMap<(i64, i64), usize> = [((0, 0), 1), ((1, 1), 1)].into();
        assert_eq!(ss.pages[2].dims, e2);
        assert_eq!(ss.collapse_page(), 2);
        assert_eq!(graded_homology_dims(&fc), e2);
    }

    #[test]
    fn mod_two_pages_differ_from_rational_ones() {
        // multiplication by 2 is an isomorphism over ℚ and zero over 𝔽₂
        let mut cq: ChainComplex<Rat> = ChainComplex::new();
        cq.set_module(0, BasedModule::new(vec!["x".into()], vec![0]));
        cq.set_module(1, BasedModule::new(vec!["y".into()], vec![0]));
        cq.set_diff(0, SpMat::from_triplets(1, 1, vec![(0, 0, rat(2))]));
        let fq = FilteredComplex::by_q(&cq).unwrap();
        assert!(spectral_sequence(&fq, None).unwrap().infinity().dims.is_empty());

        let mut c2: ChainComplex<F2> = ChainComplex::new();
        c2.set_module(0, BasedModule::new(vec!["x".into()], vec![0]));
        c2.set_module(1, BasedModule::new(vec!["y".into()], vec![0]));
        // 2 = 0 in 𝔽₂: differential vanishes
        let f2 = FilteredComplex::by_q(&c2).unwrap();
        let ss = spectral_sequence(&f2, None).unwrap();
        assert_eq!(ss.infinity().total(), 2);
        assert_eq!(graded_homology_dims(&f2), ss.infinity().dims);
    }

    #[test]
    fn orders_of_filtered_maps() {
        let mut c: ChainComplex<Rat> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["a".into(), "b".into()], vec![0, 2]));
        let fc = FilteredComplex::by_q(&c).unwrap();

        let zero: ChainMap<Rat> = ChainMap::new((0, 0));
        assert_eq!(ord(&zero, &fc, &fc), None);

        let id = ChainMap::identity(&c);
        assert_eq!(ord(&id, &fc, &fc), Some(0));

        let mut up = ChainMap::new((0, 0));
        up.set_block(0, SpMat::from_triplets(2, 2, vec![(1, 0, Rat::one())]));
        assert_eq!(ord(&up, &fc, &fc), Some(2));

        // superadditivity: ord(g∘f) ≥ ord(g) + ord(f)
        let gf = ChainMap::compose(&up, &up, &c, &c, &c);
        let o = ord(&gf, &fc, &fc);
        assert!(o.is_none() || o.unwrap() >= 4);
    }

    #[test]
    fn declared_order_is_enforced() {
        let mut c: ChainComplex<Rat> = ChainComplex::new();
        c.set_module(0, BasedModule::new(vec!["x".into()], vec![5]));
        c.set_module(1, BasedModule::new(vec!["y".into()], vec![0]));
        c.set_diff(0, SpMat::from_triplets(1, 1, vec![(0, 0, Rat::one())]));
        assert!(matches!(
            FilteredComplex::by_q(&c),
            Err(Error::FiltrationViolation)
        ));
    }
}
