//! Training-free analysis of bounding-box annotation noise for lesion
//! detection: box geometry and matching criteria, enlargement-noise
//! injection, anchor labeling with a positive-anchor census, hard-sample
//! mining, detection losses with verified gradients, and FROC/AFROC
//! evaluation with case-level bootstrap confidence intervals.
//!
//! Everything here is deterministic: randomness flows through explicit
//! seeds and a counter-based generator ([`rng`]), so equal inputs produce
//! bit-identical outputs on any platform.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;

pub mod anchors;
pub mod froc;
pub mod geom;
pub mod losses;
pub mod mining;
pub mod noise;
pub mod rng;

pub use error::{Error, Result};
pub use froc::Detection;
pub use geom::{BBox, MatchCriterion};
pub use noise::Annotation;
