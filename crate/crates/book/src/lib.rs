//! The rcm guide. Each chapter of `book/src` is included as the docs of an
//! empty module, so `cargo test -p rcm-book` runs every snippet in the book.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/environments.md")]
pub mod environments {}

#[doc = include_str!("../../../book/src/torus.md")]
pub mod torus {}

#[doc = include_str!("../../../book/src/corrector.md")]
pub mod corrector {}

#[doc = include_str!("../../../book/src/mobility.md")]
pub mod mobility {}

#[doc = include_str!("../../../book/src/floquet.md")]
pub mod floquet {}

#[doc = include_str!("../../../book/src/homogenization.md")]
pub mod homogenization {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
