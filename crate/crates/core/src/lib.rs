//! Khovanov homology toolkit over exact coefficients.
//!
//! The pipeline: parse a planar diagram code ([`diagram`]), build the cube of
//! resolutions with its sign assignment ([`cube`]), assemble the bigraded
//! chain complex ([`khovanov`]), and compute homology or reductions with the
//! integral homological algebra in [`homalg`]. Chain-level maps induced by
//! elementary cobordisms and Reidemeister moves live in [`cobordism`].
//!
//! Everything is generic over the scalar through the traits in [`scalar`];
//! the concrete coefficient choices used throughout are re-exported here as
//! [`Int`], [`Rat`] and [`F2`].

pub mod scalar;
pub mod matrix;
pub mod snf;
pub mod poly;
pub mod diagram;
pub mod cube;
pub mod homalg;
pub mod khovanov;
pub mod cobordism;

/// Arbitrary-precision integers, the default coefficient ring.
pub type Int = num_bigint::BigInt;

/// Arbitrary-precision rationals.
pub type Rat = num_rational::BigRational;

pub use scalar::F2;

/// Errors surfaced by parsing, cube assembly and chain-level computations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// Input text failed to tokenize or a token is not of the expected shape.
    #[error("malformed token: {0}")]
    MalformedToken(String),

    /// An arc id must occur exactly twice across all crossing tuples.
    #[error("arc {0} occurs {1} times, expected 2")]
    ArcMultiplicity(u32, usize),

    /// No consistent choice of over-strand directions exists for the diagram.
    #[error("no consistent orientation of the over-strands exists")]
    OrientationInconsistent,

    /// A matrix or module had a different size than the context requires.
    #[error("dimension mismatch: got {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },

    /// The two vertices passed to an edge constructor do not differ in
    /// exactly one coordinate, with the smaller one below the larger.
    #[error("vertices are not adjacent in the cube")]
    NotAdjacent,

    /// A sign assignment is missing a value on some edge.
    #[error("sign assignment does not cover every edge")]
    IncompleteAssignment,

    /// Two sign assignments are not related by any sign change of the basis.
    #[error("no vertex sign change transforms one assignment into the other")]
    NoTransform,

    /// Refusing to enumerate a cube with more crossings than the bound.
    #[error("cube with {0} crossings exceeds the bound of {1}")]
    CubeTooLarge(usize, usize),

    /// d ∘ d failed to vanish at the given homological degree.
    #[error("differential does not square to zero at degree {0}")]
    NotAComplex(i64),

    /// A pivot entry must be a unit of the coefficient ring.
    #[error("pivot entry is not a unit")]
    EntryNotUnit,

    /// A filtration comparison was requested for the zero map.
    #[error("the zero map has unbounded filtration order")]
    UnboundedFiltration,

    /// A map claimed to respect a filtration does not.
    #[error("map violates the filtration")]
    FiltrationViolation,

    /// f ∘ d − d ∘ f failed to vanish at the given homological degree.
    #[error("map does not commute with the differentials at degree {0}")]
    ChainMapViolation(i64),

    /// Death applied to a circle that still meets a crossing.
    #[error("circle passes through a crossing and cannot be capped")]
    CircleNotFree,

    /// A move site does not describe a valid local picture in the diagram.
    #[error("move site is inconsistent with the diagram: {0}")]
    SiteInconsistent(String),

    /// A homotopy equation admits no solution where one was required.
    #[error("homotopy check failed: {0}")]
    HomotopyCheckFailed(String),

    /// Adjacent movie frames disagree, with the frame index that failed.
    #[error("movie frames disagree at frame {0}")]
    FrameMismatch(usize),

    /// A filtered map is an isomorphism of filtered groups but not graded ones,
    /// or fails even the filtered comparison.
    #[error("not an isomorphism of filtered groups")]
    NotFilteredIso,

    /// No signed basis bijection intertwines two reduced complexes.
    #[error("no signed basis bijection matches the two complexes")]
    NoBasisIsomorphism,
}

pub type Result<T> = std::result::Result<T, Error>;
