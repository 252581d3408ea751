//! Passive indoor sensing with multistatic frequency sweeps.
//!
//! The pipeline is: simulate complex channel sweeps for a small room with a
//! few fixed receivers ([`sim`]), turn each sweep into a channel impulse
//! response and pack link CIRs into learner features ([`dsp`]), sample a grid
//! of target positions into a dataset with disjoint train/val/test splits
//! ([`dataset`]), then detect target presence and regress target position
//! with small from-scratch learners ([`nn`], [`gbt`]) evaluated over receiver
//! subsets ([`eval`], [`report`]).

pub mod dataset;
pub mod dsp;
pub mod eval;
pub mod gbt;
pub mod geom;
pub mod io;
pub mod nn;
pub mod report;
pub mod seed;
pub mod sim;

pub use dsp::{
    cir_from_sweep, features_from_cirs, Cir, FeatureLayout, FeatureMode, FeatureVector,
    FrequencySweep, Normalize,
};
pub use geom::Point;
pub use sim::{
    build_paths, synthesize_scene_sweeps, synthesize_sweep, PropagationPath, Scatterer, Scene,
    SimError, SweepConfig, TargetSpec, SPEED_OF_LIGHT,
};
