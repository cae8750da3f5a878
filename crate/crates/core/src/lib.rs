pub mod error;
pub mod evolution;
pub mod geometry;
pub mod golden;
pub mod hilbert;
pub mod io;
pub mod linalg;
pub mod models;
pub mod phases;
pub mod tolerances;

pub use error::{PtqmError, Result};
pub use tolerances::Tolerances;
