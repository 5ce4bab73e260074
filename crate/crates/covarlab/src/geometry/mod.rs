//! Spacetime catalog, causal structure, regions and embeddings.

pub mod compact;
pub mod embedding;
pub mod region;
pub mod spacetime;

pub use compact::{
    causal_complement, causal_future, causal_hull, causal_past, CausalComplement, CompactPiece, CompactSet,
    LatticeSet,
};
pub use embedding::{validate_embedding, ComponentMap, Embedding};
pub use region::{admissible_compacts, causally_disjoint, is_causally_convex, make_diamond, Region};
pub use spacetime::{build_spacetime, cauchy_classification, CauchyClass, Component, Spacetime, SpacetimeSpec, Topology};
