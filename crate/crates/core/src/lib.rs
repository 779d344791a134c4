//! Exact arithmetic for ramified Witt vectors of length two, pi-derivations and their
//! prolongation to polynomial rings, first arithmetic jet spaces, and the
//! Deligne-Illusie obstruction classes of schemes over a ramified p-adic base.

pub mod base_ring;
pub mod bounds;
pub mod cli;
pub mod corpus;
pub mod delta;
pub mod di;
pub mod jet;
pub mod library;
pub mod linalg;
pub mod poly;
pub mod ring;
pub mod scheme;
pub mod witt;

pub use base_ring::{BaseElem, BaseRingConfig, BaseRingError, BaseRingSpec, Fp};

