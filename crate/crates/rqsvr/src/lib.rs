//! Real-part quantum support vector regression.
//!
//! This crate bundles everything needed to train a classical ε-SVR on an
//! explicit feature space and evaluate its predictions on a simulated
//! quantum device:
//!
//! - [`statevec`]: a dense statevector simulator with gate application,
//!   exact probabilities and seeded shot sampling;
//! - [`circuit`]: the inner-product estimation circuit built from diagonal
//!   unitary embeddings, sign expansion and real-part extraction, plus the
//!   trained regression model and its JSON format;
//! - [`svr`]: ε-SVR training via SMO on the dual, with grid-search
//!   cross-validation;
//! - [`features`]: the 11-dimensional cosine feature map and its
//!   restart-based least-squares parameter fit;
//! - [`data`]: milling-stability dataset schema, CSV round-tripping,
//!   splits and a synthetic generator;
//! - [`seeds`]: the deterministic seed fan-out used by all stages.

pub mod circuit;
pub mod data;
pub mod features;
pub mod lbfgs;
pub mod seeds;
pub mod statevec;
pub mod svr;
