//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's rotation code.
#![allow(dead_code)]

pub mod quat;
