pub mod env_model;
pub mod special;
pub mod stats;
pub mod streams;
pub mod quenched;
pub mod importance;
pub mod walk;
pub mod estimators;
pub mod harness;
