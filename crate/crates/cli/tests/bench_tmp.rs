use kh::diagram::LinkDiagram;
use kh::homalg::{graded_homology_dims, spectral_sequence, FilteredComplex};
use kh::khovanov::{build_ckh, mirror_dual_iso, reversed_cube};
use kh::cube::SignAssignment;
use kh::{F2, Int};

#[test]
fn bench_ss_and_mirror() {
    let five1 = LinkDiagram::braid_closure(2, &[1, 1, 1, 1, 1]).unwrap();
    let t0 = std::time::Instant::now();
    let kc = build_ckh::<F2>(&five1, &SignAssignment::standard(5), 14).unwrap();
    let dim: usize = kc.complex.degrees().iter().map(|&i| kc.complex.rank(i)).sum();
    let fq = FilteredComplex::by_q(&kc.complex).unwrap();
    let ss = spectral_sequence(&fq, None).unwrap();
    let gr = graded_homology_dims(&fq);
    assert_eq!(ss.infinity().dims, gr);
    println!("5_1 q-filtration: dim {dim}, pages {}, {:?}", ss.pages.len(), t0.elapsed());

    let t1 = std::time::Instant::now();
    let fh = FilteredComplex::by_degree(&kc.complex).unwrap();
    let ss2 = spectral_sequence(&fh, None).unwrap();
    assert_eq!(ss2.infinity().dims, graded_homology_dims(&fh));
    println!("5_1 h-filtration: pages {}, {:?}", ss2.pages.len(), t1.elapsed());

    let t2 = std::time::Instant::now();
    mirror_dual_iso::<Int>(&five1, 14).unwrap();
    reversed_cube::<Int>(&five1, 14).unwrap();
    println!("5_1 mirror+reversed: {:?}", t2.elapsed());
}
