//! Experiment harness for the `jpeg-compat` library: PGM input, a synthetic
//! image source, the experiment drivers and CSV/JSON result rows.

pub mod error;
pub mod experiments;
pub mod pgm;
pub mod results;
pub mod synthetic;
