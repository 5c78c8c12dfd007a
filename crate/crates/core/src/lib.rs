//! Decay constants and exact solvers for sparse stochastic differential
//! network games.
//!
//! The crate covers graph layers and the counts `N_k^h` ([`graph`]), the
//! recursive decay constants `γ_h`, `γ^(r)`, `γ̃^(r)` ([`decay`]), and three
//! solver families used to check the decay estimates numerically: the exact
//! linear-quadratic open-loop game ([`lq`]), its distributed-strategy
//! counterpart ([`distributed`]), and a deterministic nonlinear version
//! solved by shooting ([`pontryagin`]).

pub mod acceptance;
pub mod decay;
pub mod distributed;
pub mod error;
pub mod graph;
pub mod lq;
pub mod numerics;
pub mod pontryagin;

pub use decay::{CostBounds, DecayReport};
pub use error::{GameError, Result};
pub use graph::{Graph, NkhTable, Orientation};
