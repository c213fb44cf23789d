//! Test support shared by the groundwork crates: worked-example fixtures, a legal
//! dialog generator, and brute-force oracles that recompute results without
//! going through the engine.

pub mod fixtures;
pub mod generate;
pub mod oracle;
