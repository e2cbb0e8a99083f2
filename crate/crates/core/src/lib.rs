pub mod authority;
pub mod canonical;
pub mod circuits;
pub mod crypto;
pub mod identity;
pub mod ledger;
pub mod selection;
pub mod student;

/// Logical time in seconds since the Unix epoch. Always injected by the
/// caller; nothing in this crate reads the wall clock.
pub type Timestamp = u64;
