//! Dimers on the torus and the annulus: cycle-rooted spanning forests sampled
//! by a generalised Wilson algorithm, the extended Temperley bijection to
//! perfect matchings of the superposition graph, and exact height one-forms
//! with their winding identities and Hodge decomposition.

pub mod error;
pub mod experiments;
pub mod height;
pub mod oracle;
pub mod surface;
pub mod temperley;
pub mod wilson;

pub use error::{Error, Result};
pub use surface::{
    build_annulus, build_torus, GraphSpec, HalfEdge, Hom, LatticePath, LiftedFace, SuperpositionGraph, SurfaceGraph,
    Topology, Vec2, Weights,
};
pub use temperley::{DimerConfig, DualOrientedForest, TemperleyanPair};
pub use wilson::{sample_crsf, sample_rng, OrientedCrsf};
