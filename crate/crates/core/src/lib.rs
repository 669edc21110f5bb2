//! Labelling face tracks in video with actor names, starting from a few
//! template photos per actor.
//!
//! The pipeline runs detections through [`tracker`], scores tracks against
//! actor clouds with the costs in [`labeler`], and grows each cloud with the
//! tracks it confidently claims so the labels bridge the gap between
//! template photos and in-video appearance.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod io;
pub mod labeler;
pub mod profile;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
