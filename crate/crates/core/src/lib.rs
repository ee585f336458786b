//! Corpus forge for reentrancy detection in Solidity contracts.
//!
//! The crate synthesizes labeled vulnerable and secure contracts, modernizes
//! legacy sources to 0.8.x conventions, verifies labels with a lightweight
//! static detector, assembles stratified train/test corpora, and scores model
//! prediction files.

pub mod balancer;
pub mod corpus;
pub mod detector;
pub mod evaluator;
pub mod generator;
pub mod modernizer;
pub mod rng;
pub mod solidity;
pub mod taxonomy;
