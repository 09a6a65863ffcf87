//! Phone-side software token.
//!
//! Holds the device key pair, answers login challenges pushed over the
//! device channel by recording, synchronizing its clock with the server,
//! decrypting the computer's recording, scoring the two locally and
//! returning a signed verdict. Phone audio never leaves the process.

pub mod clock;
pub mod conn;
pub mod enroll;
mod error;
pub mod keys;
pub mod source;
pub mod token;

pub use clock::LocalClock;
pub use conn::{Connection, Transcript};
pub use enroll::enroll_with_server;
pub use error::{Result, TokenError};
pub use keys::Credentials;
pub use source::AudioSource;
pub use token::{judge, Judgement, Token, TokenEvent, TokenHandle, TokenOptions};
