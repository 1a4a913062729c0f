//! Compatibility and timing steganalysis of high-quality JPEG blocks.
//!
//! A quantized DCT block is *compatible* when some integer pixel block
//! compresses to it. Cover blocks always are; blocks modified in the DCT
//! domain often are not, and proving that no antecedent exists is an integer
//! feasibility problem. This crate provides the block pipeline
//! ([`codec`], [`transform`]), the feasibility search ([`feasibility`]),
//! stego-signal simulators ([`embedding`]) and the detectors built on the
//! search outcome ([`detect`]).

pub mod codec;
pub mod detect;
pub mod embedding;
pub mod error;
pub mod feasibility;
pub mod image;
pub mod transform;

pub use codec::{BlockCodec, DctBlock, DctError, DecompResult, PixelBlock};
pub use error::{Error, Result};
pub use feasibility::{Budget, ConstraintSystem, KVector, Outcome, Verdict};
pub use transform::{BlockShape, DctMatrix, QuantTable};
