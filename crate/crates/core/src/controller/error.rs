use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::CryptoError;
use crate::ledger::LedgerError;
use crate::registry::RegistryError;

macro_rules! controller_errors {
    ($( $(#[$meta:meta])* $variant:ident => $code:literal, $status:literal, $exit:literal; )+) => {
        /// Failure reported by the controller, in-process or over HTTP.
        ///
        /// Every variant has a stable wire code, an HTTP status and a CLI exit code.
        #[derive(Debug, Clone, PartialEq, Eq, Error)]
        pub enum ControllerError {
            $( $(#[$meta])* #[error("{}: {0}", $code)] $variant(String), )+
        }

        impl ControllerError {
            pub fn code(&self) -> &'static str {
                match self { $( Self::$variant(_) => $code, )+ }
            }

            pub fn http_status(&self) -> u16 {
                match self { $( Self::$variant(_) => $status, )+ }
            }

            pub fn exit_code(&self) -> i32 {
                match self { $( Self::$variant(_) => $exit, )+ }
            }

            pub fn message(&self) -> &str {
                match self { $( Self::$variant(m) => m, )+ }
            }

            pub fn from_code(code: &str, message: impl Into<String>) -> Self {
                let message = message.into();
                match code {
                    $( $code => Self::$variant(message), )+
                    _ => Self::Internal(format!("{code}: {message}")),
                }
            }

            /// `(code, exit code)` pairs, for documentation and tests.
            pub fn exit_code_table() -> Vec<(&'static str, i32)> {
                vec![ $( ($code, $exit), )+ ]
            }
        }
    };
}

controller_errors! {
    Internal => "INTERNAL", 500, 1;
    Transport => "TRANSPORT", 502, 3;
    BadRequest => "BAD_REQUEST", 400, 10;
    AuthFailure => "AUTH_FAILURE", 401, 11;
    DuplicateKey => "DUPLICATE_KEY", 409, 12;
    NotFound => "NOT_FOUND", 404, 13;
    UnknownLab => "UNKNOWN_LAB", 404, 14;
    NotAccredited => "NOT_ACCREDITED", 403, 15;
    DecryptFailed => "DECRYPT_FAILED", 422, 16;
    UnknownUser => "UNKNOWN_USER", 404, 17;
    MalformedPayload => "MALFORMED_PAYLOAD", 422, 18;
    NoValidTest => "NO_VALID_TEST", 409, 19;
    OverLimit => "OVER_LIMIT", 422, 20;
    PaymentRejected => "PAYMENT_REJECTED", 402, 21;
    SupplyExhausted => "SUPPLY_EXHAUSTED", 409, 22;
    UnknownTest => "UNKNOWN_TEST", 404, 23;
    Expired => "EXPIRED", 409, 24;
    NotOwner => "NOT_OWNER", 403, 25;
    UnknownCompany => "UNKNOWN_COMPANY", 404, 26;
    InsufficientTokens => "INSUFFICIENT_TOKENS", 409, 27;
    AlreadyBackfilled => "ALREADY_BACKFILLED", 409, 28;
    LedgerTxMissing => "LEDGER_TX_MISSING", 404, 29;
    MemoMismatch => "MEMO_MISMATCH", 422, 30;
    PartyMismatch => "PARTY_MISMATCH", 422, 31;
    WrongAsset => "WRONG_ASSET", 422, 32;
    NotDestination => "NOT_DESTINATION", 403, 33;
    NotBackfilled => "NOT_BACKFILLED", 409, 34;
    WrongDirection => "WRONG_DIRECTION", 422, 35;
    AlreadyClaimed => "ALREADY_CLAIMED", 409, 36;
    AmountMismatch => "AMOUNT_MISMATCH", 422, 37;
    BadSignature => "BAD_SIGNATURE", 422, 38;
    BadSequence => "BAD_SEQUENCE", 409, 39;
    UnknownAccount => "UNKNOWN_ACCOUNT", 404, 40;
    CloseDisabled => "CLOSE_DISABLED", 409, 41;
}

/// JSON error body returned by the HTTP API.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl From<&ControllerError> for ErrorBody {
    fn from(e: &ControllerError) -> Self {
        Self {
            error: e.code().to_string(),
            message: e.message().to_string(),
        }
    }
}

impl From<LedgerError> for ControllerError {
    fn from(e: LedgerError) -> Self {
        let msg = e.to_string();
        match e {
            LedgerError::BadSignature => Self::BadSignature(msg),
            LedgerError::BadSequence { .. } => Self::BadSequence(msg),
            LedgerError::UnknownSource(_) | LedgerError::UnknownAccount(_) => {
                Self::UnknownAccount(msg)
            }
            LedgerError::NoTrustline(_) => Self::WrongAsset(msg),
            LedgerError::Malformed(_) => Self::BadRequest(msg),
            LedgerError::NotFound => Self::LedgerTxMissing(msg),
            LedgerError::EmptyNetworkId | LedgerError::ZeroSupply => Self::BadRequest(msg),
            LedgerError::Corrupt(_) | LedgerError::Io(_) => Self::Internal(msg),
        }
    }
}

impl From<RegistryError> for ControllerError {
    fn from(e: RegistryError) -> Self {
        let msg = e.to_string();
        match e {
            RegistryError::DuplicateKey(_) => Self::DuplicateKey(msg),
            RegistryError::NotFound(_) => Self::NotFound(msg),
            RegistryError::UnknownUser(_) => Self::UnknownUser(msg),
            RegistryError::AlreadyBackfilled => Self::AlreadyBackfilled(msg),
            RegistryError::AlreadyClaimed => Self::AlreadyClaimed(msg),
            RegistryError::Invalid(_) => Self::BadRequest(msg),
            RegistryError::Io(_) => Self::Internal(msg),
        }
    }
}

impl From<CryptoError> for ControllerError {
    fn from(e: CryptoError) -> Self {
        let msg = e.to_string();
        match e {
            CryptoError::DecryptFailed | CryptoError::MalformedEnvelope(_) => {
                Self::DecryptFailed(msg)
            }
            CryptoError::PayloadTooLarge(_) | CryptoError::MalformedKey(_) => Self::BadRequest(msg),
            CryptoError::EncryptFailed => Self::Internal(msg),
        }
    }
}
