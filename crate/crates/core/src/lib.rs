pub mod analytic;
pub mod criteria;
pub mod detector;
pub mod error;
pub mod fock;
pub mod herald;
pub mod linalg;
pub mod moments;
pub mod open_system;
pub mod scenario;
pub mod sideband;
pub mod verify;

pub use error::{Error, Result};
