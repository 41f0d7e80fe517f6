//! Guide listings compiled as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/problems.md")]
pub mod problems {}

#[doc = include_str!("../../../book/src/operators.md")]
pub mod operators {}

#[doc = include_str!("../../../book/src/ekf.md")]
pub mod ekf {}

#[doc = include_str!("../../../book/src/contract.md")]
pub mod contract {}

#[doc = include_str!("../../../book/src/design.md")]
pub mod design {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
