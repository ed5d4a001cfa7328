//! Memo-anchored health certificate exchange on a private token ledger.
//!
//! A controller accredits labs, registers users and destination companies,
//! sells `KYC` tokens and stores test results off-chain. A user proves a
//! certificate send by paying one token to the company with a 16-byte user
//! hash in the transaction memo; only that company can then fetch and decrypt
//! the certificate.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod client;
pub mod codec;
pub mod controller;
pub mod crypto;
pub mod ledger;
pub mod registry;
pub mod verifier;
pub mod wallet;
