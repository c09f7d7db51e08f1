//! Benchmark toolkit for anonymizing heterogeneous social data (directed
//! graph + user posts) and attacking the result with the ATHD
//! de-anonymization technique against a simulated target network.
//!
//! The pipeline is: [`datagen`] builds a synthetic network with ground
//! truth, [`anonymize`] and [`dp`] produce released datasets under the
//! structural and textual schemes, [`target`] serves the un-anonymized
//! network through a search-engine/API facade, [`attack`] re-identifies
//! released pseudonyms, and [`eval`] runs the full scheme matrix and
//! reports success rates.

pub mod anonymize;
pub mod attack;
pub mod datagen;
pub mod dp;
pub mod error;
pub mod eval;
pub mod model;
pub mod seed;
pub mod target;
pub mod text;
pub mod vector;

pub use error::{Error, Result};
