//! Tabular toolkit for world value functions (WVFs).
//!
//! A WVF is a goal-conditioned value table `Q(s, g, a)` learned under an
//! extended reward that penalises terminating anywhere other than the
//! intended goal. One learned WVF recovers the task policy by maximising
//! over goals, implies the world's transition function, transfers
//! zero-shot to new tasks given only their terminal rewards, and composes
//! with Boolean operators into new skills.
//!
//! The crate is organised around dense tables over small deterministic
//! worlds:
//!
//! - [`world`]: MDP/task data model, extended reward, penalty derivation
//! - [`grid`]: the four-rooms and object-pickup gridworlds plus the map
//!   file format
//! - [`table`]: dense `WVFTable`/`QTable` storage and text serialization
//! - [`oracle`]: exact goal-conditioned value iteration (ground truth)
//! - [`learn`]: Q-learning for WVFs with a growing goal buffer
//! - [`algebra`]: task recovery, mastery evaluation, zero-shot transfer,
//!   Boolean composition
//! - [`dynamics`]: transition inference from a WVF and imagined rollouts
//! - [`eval`]: policy rollouts and return statistics
//! - [`render`]: deterministic SVG heatmaps of value tables

pub mod algebra;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod grid;
pub mod learn;
pub mod oracle;
pub mod render;
pub mod table;
pub mod world;

pub use error::{Error, Result};

/// State ordinal in a tabular world.
pub type State = usize;
/// Action ordinal in a tabular world.
pub type Action = usize;
