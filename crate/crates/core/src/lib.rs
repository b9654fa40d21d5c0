pub mod address;
pub mod beacon;
pub mod collision;
pub mod digest;
pub mod error;
pub mod hexfmt;
pub mod mitigation;
pub mod rlp;
pub mod scenarios;
pub mod seeding;

pub use error::Error;
