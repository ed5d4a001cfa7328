use serde::{Deserialize, Serialize};

use crate::crypto::{digest256, Digest256, EncryptionPrivateKey, EncryptionPublicKey, UserHash};
use crate::ledger::{AccountId, TxHash};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    pub name: String,
    /// National id numbers are never stored in clear.
    #[serde(with = "hex::serde")]
    pub national_id_digest: Digest256,
}

impl Identity {
    pub fn new(name: impl Into<String>, national_id: &str) -> Self {
        Self {
            name: name.into(),
            national_id_digest: digest256(national_id.as_bytes()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub identity: Identity,
    #[serde(default, with = "opt_digest")]
    pub biometric_digest: Option<Digest256>,
    pub ledger_account: AccountId,
    pub created_at: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabRecord {
    pub lab_id: String,
    pub name: String,
    pub server_held_decryption_key: EncryptionPrivateKey,
    pub accredited: bool,
    #[serde(default)]
    pub accreditation_evidence: String,
}

impl PartialEq for LabRecord {
    fn eq(&self, other: &Self) -> bool {
        self.lab_id == other.lab_id
            && self.name == other.name
            && self.accredited == other.accredited
            && self.accreditation_evidence == other.accreditation_evidence
            && self.server_held_decryption_key.to_hex() == other.server_held_decryption_key.to_hex()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanyRecord {
    pub company_id: String,
    pub name: String,
    pub encryption_public_key: EncryptionPublicKey,
    pub ledger_account: AccountId,
    pub credit_balance: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test_id: String,
    pub user_id: String,
    pub lab_id: String,
    pub test_type: String,
    /// Structured result document as submitted by the lab.
    #[serde(with = "hex::serde")]
    pub result_payload: Vec<u8>,
    pub taken_at: u64,
    pub valid_until: u64,
}

impl TestRecord {
    pub fn is_valid_at(&self, now_ms: u64) -> bool {
        self.valid_until > now_ms
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub user_hash: UserHash,
    #[serde(with = "hex::serde")]
    pub nonce: [u8; 16],
    pub test_id: String,
    pub source_account: AccountId,
    pub destination_company_id: String,
    pub block_hash: Option<TxHash>,
    pub numeric_id: Option<u64>,
    pub created_at: u64,
}

impl TransferRecord {
    pub fn is_backfilled(&self) -> bool {
        self.block_hash.is_some()
    }
}

/// A token return already credited to a company.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuybackClaim {
    pub tx_hash: TxHash,
    pub company_id: String,
    pub amount: u64,
    pub credit: u64,
    pub claimed_at: u64,
}

mod opt_digest {
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
