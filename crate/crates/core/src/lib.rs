//! Classical versus quantum memory in two-time open quantum dynamics.
//!
//! The crate is organized around Choi operators ([`channel::ChoiOperator`]). Giant-atom and
//! example dynamics live in [`dynamics`], closed-form classifiers and constructive
//! decompositions in [`criteria`], semidefinite programs in [`sdp`] and linear witnesses
//! in [`witness`].

pub mod channel;
pub mod criteria;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod random;
pub mod sdp;
pub mod witness;

pub use error::{Error, Result};
