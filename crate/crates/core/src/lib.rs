//! Tools for delineating an emerging research domain from scientific abstracts
//! and measuring the novelty and citation impact of its publications.
//!
//! The pipeline runs in three broad phases:
//!
//! 1. **Term learning** — [`corpus`] normalizes abstracts and pastes frequent
//!    word pairs into phrase tokens, [`embed`] trains skip-gram word vectors
//!    over the result, and [`termcluster`] clusters the vector space and
//!    distills the cluster around a seed term into a search-term list.
//! 2. **Retrieval and description** — [`retrieve`] matches the search terms
//!    against a document store and computes yearly trends and category
//!    shares; [`tsclust`] groups citation time series by warped distance.
//! 3. **Novelty and impact** — [`novelty`] scores first-ever referenced-journal
//!    combinations, [`atypicality`] scores journal pairs against randomized
//!    citation networks, and [`econ`] fits the regression and matching models
//!    that relate both to adoption of the focal method.
//!
//! [`pipeline`] wires the phases behind a single config file with one master
//! seed; [`synth`] generates the planted fixtures used by the test suite.
//!
//! With the default `parallel` feature, bulk loops (bootstrap replicates,
//! null networks, distance matrices, per-document scoring) run on rayon.
//! Disabling the feature yields a fully sequential build with identical
//! results: every parallel reduction is order-independent by construction.

pub mod atypicality;
pub mod corpus;
pub mod econ;
pub mod embed;
pub mod exec;
pub mod novelty;
pub mod pipeline;
pub mod retrieve;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod termcluster;
pub mod tsclust;
