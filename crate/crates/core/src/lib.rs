//! Conversational grounding annotation toolkit.
//!
//! * [`model`]: grounding-act taxonomy and annotation value types
//! * [`corpus`]: JSONL and TSV corpus readers and writers
//! * [`engine`]: CGU lifecycle replay and validation
//! * [`analytics`]: act histograms, trajectory statistics, Cohen's kappa and
//!   response-time feasibility
//! * [`dataset`]: per-CGU classifier instances, stratified splits, class weights

pub mod analytics;
pub mod corpus;
pub mod dataset;
pub mod engine;
pub mod model;

pub use model::{
    parse_act, ActLabel, CguId, CorpusTag, Degree, DialogAnnotation, GroundingAct, Utterance,
    UtteranceFlag,
};
