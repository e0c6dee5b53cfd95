pub mod asymptotics;
pub mod density;
pub mod error;
pub mod hankel;
pub mod io;
pub mod matcore;
pub mod quad;
pub mod random;
pub mod snode;
pub mod toeplitz;

pub use error::{Error, Result};
