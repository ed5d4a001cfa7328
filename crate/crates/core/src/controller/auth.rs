//! Bearer tokens issued at onboarding.
//!
//! A token is `<role>.<id>.<signature hex>`, the signature being the
//! controller's Ed25519 signature over `certchain-auth|<role>|<id>`. Tokens
//! verify statelessly against the controller's public key.

use std::fmt;

use crate::crypto::{verify_signature, SigningKeyPair};
use crate::ledger::AccountId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Lab,
    Company,
    User,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::Lab => "lab",
            Role::Company => "company",
            Role::User => "user",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "lab" => Some(Role::Lab),
            "company" => Some(Role::Company),
            "user" => Some(Role::User),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn message(role: Role, id: &str) -> Vec<u8> {
    format!("certchain-auth|{role}|{id}").into_bytes()
}

pub fn issue(keys: &SigningKeyPair, role: Role, id: &str) -> String {
    debug_assert!(!id.contains('.'));
    let sig = keys.sign(&message(role, id));
    format!("{role}.{id}.{}", hex::encode(sig))
}

/// Returns the role and id a token was issued for, if its signature holds.
pub fn verify(controller: &AccountId, token: &str) -> Option<(Role, String)> {
    let mut parts = token.splitn(3, '.');
    let role = Role::parse(parts.next()?)?;
    let id = parts.next()?;
    let sig: [u8; 64] = hex::FromHex::from_hex(parts.next()?).ok()?;
    verify_signature(&controller.0, &message(role, id), &sig).then(|| (role, id.to_string()))
}
