//! Planning and evaluation of multi-agent search over target distributions
//! carried by unsteady 2-D flows.
//!
//! The crate provides the building blocks of a batch search simulator:
//! gridded scalar fields and a cosine spectral basis with Sobolev weighting
//! ([`spectral`]), velocity fields and adaptive flow-map integration
//! ([`flow`]), semi-Lagrangian transport of the target distribution
//! ([`transport`]), drifting search-coverage accounting ([`coverage`]),
//! optimal-search machinery ([`search_theory`]), steering controllers
//! ([`control`]), stochastic target detection ([`detection`]), a finite-time
//! mixing diagnostic ([`hypergraph`]), and the scenario/episode harness
//! ([`scenario`], [`sim`]).

pub mod control;
pub mod coverage;
pub mod detection;
pub mod domain;
mod error;
pub mod flow;
pub mod geom;
pub mod hypergraph;
pub mod io;
pub mod rng;
pub mod scenario;
pub mod search_theory;
pub mod sim;
pub mod spectral;
pub mod transport;

pub use domain::{Domain, ScalarField};
pub use error::Error;
pub use geom::{convex_hull, Polygon, Vec2};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
