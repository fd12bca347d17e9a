//! Recommendation over weighted heterogeneous information networks.
//!
//! The crate builds multi-relational recommenders from typed graphs:
//!
//! * [`graph`] and [`schema`] store the typed network; [`kcore`] filters it.
//! * [`metapath`], [`expand`] and [`walk`] turn meta-paths into relations,
//!   either by exhaustive expansion or by random walks whose rating steps
//!   prefer high weights (probability proportional to `exp(w)`).
//! * [`pruning`] scores relations by normalized information gain.
//! * [`dmf`] trains shared entity factors over a target relation and
//!   auxiliary relations with Bayesian Personalized Ranking.
//! * [`baselines`] implements the P3-alpha, RP3-beta and HeatS/ProbS hybrid
//!   graph rankers.
//! * [`eval`] splits data, computes top-k metrics and times generation.
//! * [`pipeline`] wires the stages together from a config file.

pub mod baselines;
pub mod dmf;
pub mod error;
pub mod eval;
pub mod expand;
pub mod graph;
pub mod io;
pub mod kcore;
pub mod metapath;
pub mod pipeline;
pub mod pruning;
pub mod relation;
pub mod rng;
pub mod sampling;
pub mod schema;
pub mod walk;

pub use error::{Error, Result};
pub use expand::{expand_full, ExpandOptions};
pub use graph::{load_graph, Direction, DuplicatePolicy, Edge, GraphBuilder, HeteroGraph, NodeRef};
pub use kcore::k_core_filter;
pub use metapath::{validate_metapath, MetaPath, Step};
pub use relation::{GenerationMethod, Provenance, RelationMatrix};
pub use sampling::{usample, wsample};
pub use schema::{EdgeTypeDef, NetworkSchema, NodeTypeId, WeightRange};
pub use walk::{sample_relation, sample_walk, SampleBudget, Walk, WalkOutcome};

/// Whether per-start work runs on the current thread or on the rayon pool.
/// Results are identical either way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}
