pub mod continuous;
pub mod corpus;
pub mod discrete;
pub mod error;
pub mod io;
pub mod matcore;
pub mod quadruple;
pub mod random;
pub mod realization;
pub mod riccati;
pub mod stability;
pub mod verify;

pub use error::{Error, Result};
pub use matcore::{CMatrix, C64};
pub use realization::{Convention, Realization};
