//! Feasibility calculus, the stage-by-stage descent, the 5-adic endgame and
//! certificate assembly.

pub mod base;
pub mod certificate;
pub mod endgame;
pub mod engine;
pub mod exponents;
pub mod pipeline;
pub mod verify;
