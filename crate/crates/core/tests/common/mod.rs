#![allow(dead_code, clippy::needless_range_loop)]

pub mod criteria;
pub mod fixtures;
pub mod oracles;
pub mod reference_rf;
