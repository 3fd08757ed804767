//! Strong-secrecy coding for the discrete memoryless broadcast channel with
//! two confidential messages.
//!
//! The crate is organised bottom-up:
//!
//! * [`prob`] holds exact finite probability tables and information measures
//!   (entropy, mutual information, Kullback-Leibler divergence), all in bits.
//! * [`channel`] models the broadcast channel, the auxiliary scheme
//!   `(U, V1, V2) -> X`, the induced single-letter joint law and the stealth
//!   reference `Q(y2 | v2)`.
//! * [`typicality`] provides empirical types, robust letter-typicality and the
//!   exhaustive check of the lower bound on `Q^n(y2 | v2)` over typical pairs.
//! * [`region`] evaluates the achievable rate pair of a scheme, the code-rate
//!   constraints, and searches auxiliary schemes for a Pareto frontier.
//! * [`codec`] implements the random-coding scheme: codebook draw, covering
//!   selection, encoding, typicality decoding and error estimation.
//! * [`secrecy`] computes effective secrecy, leakage and stealth exactly or by
//!   Monte Carlo, together with the diagnostics used to verify the bounds.
//! * [`suites`] bundles the property checks run by the `verify` command.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the `rayon`
//! feature is enabled (the default) and plain iterators otherwise. Results
//! are identical either way.

pub mod channel;
pub mod codec;
mod error;
pub mod par;
pub mod presets;
pub mod prob;
pub mod region;
pub mod rng;
pub mod secrecy;
pub mod suites;
pub mod typicality;

pub use error::{Error, Result};
