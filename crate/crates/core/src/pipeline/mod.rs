//! Config-driven experiment orchestration and synthetic data.

pub mod config;
pub mod run;
pub mod synth;

pub use config::{ExperimentConfig, SplitMode, ALGORITHMS};
pub use run::{
    aux_relations, fit_baseline, generate_relations, load_data, make_splits, read_relations_dir, run_experiment,
    train_variant, walk_seed, DmfRecommender, FoldRelations, RelationNeeds, RunOutput, TRAIN_SOURCE,
};
pub use synth::{Planted, RatingDistribution, SynthEdges, SynthNodes, SyntheticSpec};
