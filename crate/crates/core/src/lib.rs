//! Proof obligation generation for VDM-SL explicit operations, with a
//! bounded, exhaustive discharger.

pub mod analysis;
pub mod ast;
pub mod diagnostic;
pub mod discharge;
pub mod driver;
pub mod frontend;
pub mod pog;
pub mod render;
