pub mod ccd;
pub mod contact;
pub mod energy;
pub mod error;
pub mod mesh;
pub mod scene;
pub mod solver;
pub mod sparse;
pub mod subspace;
pub mod verify;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/library.md")]
    struct Library;
}
