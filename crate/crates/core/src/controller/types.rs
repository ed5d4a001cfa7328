//! Request and response documents shared by the in-process API, the HTTP
//! server and the HTTP client. Byte fields travel as lowercase hex.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::{EncryptionPrivateKey, EncryptionPublicKey, UserHash};
use crate::ledger::{AccountId, TxHash};
use crate::registry::TestRecord;

/// Prefix of every QR payload.
pub const QR_PREFIX: &str = "KYCCERT:v1:";

/// `KYCCERT:v1:` followed by the 64-char lowercase hex block hash.
pub fn qr_text(block_hash: &TxHash) -> String {
    format!("{QR_PREFIX}{}", block_hash.to_hex())
}

/// Parses a QR payload back into the block hash it carries.
pub fn parse_qr_text(text: &str) -> Option<TxHash> {
    let hex = text.trim().strip_prefix(QR_PREFIX)?;
    if hex.len() != 64 {
        return None;
    }
    TxHash::from_hex(hex)
}

/// Result document a lab reports: the headline result plus free-form details.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub result: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, String>,
}

/// Plaintext a lab seals to its channel key and submits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabSubmission {
    pub user_id: String,
    pub test_type: String,
    pub result: ResultDocument,
    pub taken_at: u64,
    #[serde(default, with = "opt_hex32")]
    pub biometric_digest: Option<[u8; 32]>,
}

/// What a destination company decrypts.
///
/// Serialized as JSON with a fixed field order, so identical inputs always
/// produce identical bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateDocument {
    pub test_id: String,
    pub user_name: String,
    pub test_type: String,
    pub result: ResultDocument,
    pub taken_at: u64,
    pub valid_until: u64,
    pub lab_name: String,
    #[serde(default, with = "opt_hex32")]
    pub biometric_digest: Option<[u8; 32]>,
}

impl CertificateDocument {
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("certificate serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> serde_json::Result<Self> {
        serde_json::from_slice(bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnboardLabRequest {
    pub name: String,
    #[serde(default)]
    pub accreditation_evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabOnboarding {
    pub lab_id: String,
    /// Public half of the lab channel key, delivered to the lab.
    pub lab_encryption_key: EncryptionPublicKey,
    pub auth_token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccreditationRequest {
    pub accredited: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnboardCompanyRequest {
    pub name: String,
}

/// Returned once; the controller keeps only the public halves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompanyOnboarding {
    pub company_id: String,
    pub encryption_private_key: EncryptionPrivateKey,
    pub ledger_account: AccountId,
    /// Hex Ed25519 secret for the company's ledger account.
    pub ledger_secret_key: String,
    pub auth_token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityInput {
    pub name: String,
    /// Digested before storage.
    pub national_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterUserRequest {
    pub identity: IdentityInput,
    pub wallet_public_key: AccountId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRegistration {
    pub user_id: String,
    pub ledger_account: AccountId,
    pub auth_token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabSummary {
    pub lab_id: String,
    pub name: String,
    pub accredited: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitTestRequest {
    pub lab_id: String,
    pub envelope: crate::crypto::SealedEnvelope,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSubmitted {
    pub test_id: String,
    pub valid_until: u64,
}

/// A user's view of a stored test; the result itself is not included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSummary {
    pub test_id: String,
    pub lab_id: String,
    pub test_type: String,
    pub taken_at: u64,
    pub valid_until: u64,
}

impl From<&TestRecord> for TestSummary {
    fn from(t: &TestRecord) -> Self {
        Self {
            test_id: t.test_id.clone(),
            lab_id: t.lab_id.clone(),
            test_type: t.test_type.clone(),
            taken_at: t.taken_at,
            valid_until: t.valid_until,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurchaseRequest {
    pub user_id: String,
    pub n: u64,
    pub payment_proof: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Purchase {
    pub tx_hash: TxHash,
    pub balance: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitiateTransferRequest {
    pub user_id: String,
    pub test_id: String,
    pub company_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferInitiated {
    pub user_hash: UserHash,
    /// Ledger account the certificate token must be paid to.
    pub destination_account: AccountId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmTransferRequest {
    pub block_hash: TxHash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferConfirmed {
    pub numeric_id: u64,
    pub qr_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QrPayload {
    pub numeric_id: u64,
    pub qr_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchCertificateRequest {
    pub company_id: String,
    pub user_hash: UserHash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateEnvelope {
    pub envelope: crate::crypto::SealedEnvelope,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuybackRequest {
    pub company_id: String,
    pub n: u64,
    pub return_tx_hash: TxHash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuybackCredit {
    pub credit: u64,
    pub credit_balance: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountView {
    pub account: AccountId,
    pub sequence: u64,
    /// `None` when the account holds no KYC trustline (the issuer).
    pub balance: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitTransactionRequest {
    pub transaction: crate::ledger::SignedTransaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloseSummary {
    pub sequence: u64,
    pub tx_count: usize,
    #[serde(with = "hex::serde")]
    pub block_digest: [u8; 32],
}

mod opt_hex32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<[u8; 32]>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(d) => s.serialize_some(&hex::encode(d)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[u8; 32]>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|h| hex::FromHex::from_hex(&h).map_err(serde::de::Error::custom))
            .transpose()
    }
}
