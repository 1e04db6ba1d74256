//! Bigraded chain complexes over an exact ring and the operations the rest
//! of the crate builds on: homology with torsion, Gaussian reduction with
//! tracked homotopy data, filtrations and their spectral sequences, and
//! chain homotopy solving.

mod complex;
mod filtration;
mod homology;
mod homotopy;
mod reduce;

pub use complex::{BasedModule, ChainComplex, ChainMap, TensorLayout};
pub use filtration::{
    graded_homology_dims, ord, spectral_sequence, FilteredComplex, Filtration, Page,
    SpectralSequence,
};
pub use homology::{
    homology_field, homology_z, induced_on_homology, uct_consistent, BigradedGroup,
    GroupSummand, HomologyBasis, InducedMap,
};
pub use homotopy::{is_chain_homotopic_field, is_chain_homotopic_z};
pub use reduce::{
    gaussian_eliminate, match_reduced, reduce_constrained, reduce_fully, Reduction, StepReduction,
};
