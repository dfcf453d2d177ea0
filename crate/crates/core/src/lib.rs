//! Outer billiards laboratory: the outer billiard map and its differential,
//! the dual Birkhoff distribution on polygon space, and two constructions of
//! tables whose outer billiard map has an invariant curve of periodic points.

pub mod error;
pub mod geom;
pub mod table;
pub mod birkhoff;
pub mod horizontal;
pub mod triangle;
pub mod periodicity;
pub mod discrete;
pub mod svg;
pub mod verify;

pub use error::{Error, Result};
pub use geom::{Polygon, PolyTangent, Vec2};
pub use table::{ConvexTable, Mat2, TangencyFrame};
