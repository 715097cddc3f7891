//! Detection of tropical-cyclone rapid intensification (RI) with an Elman
//! recurrent network trained by backpropagation through time.
//!
//! Pipeline: [`besttrack`] parses and filters best-track records,
//! [`extraction`] turns tracks into labeled 5-point windows, [`elman`] and
//! [`bptt`] define and train the network, [`metrics`] scores it, and
//! [`experiment`] runs the repeated-seed protocol end to end.

#![allow(clippy::needless_range_loop)]

pub mod besttrack;
pub mod bptt;
pub mod elman;
pub mod error;
pub mod experiment;
pub mod extraction;
pub mod metrics;
pub mod reference;

pub use error::{Error, Result, Stage};
