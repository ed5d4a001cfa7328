use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::{Canonical, DecodeError, Reader, Writer};
use crate::crypto::{digest256, verify_signature, Digest256, SigningKeyPair, UserHash};

/// Ledger account address: an Ed25519 verification key.
///
/// Displayed as `GA` followed by 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AccountId(pub [u8; 32]);

pub const ACCOUNT_PREFIX: &str = "GA";

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{ACCOUNT_PREFIX}{}", hex::encode(self.0))
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AccountId({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid account id {0:?}")]
pub struct ParseAccountIdError(pub String);

impl FromStr for AccountId {
    type Err = ParseAccountIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseAccountIdError(s.to_string());
        let body = s.strip_prefix(ACCOUNT_PREFIX).ok_or_else(err)?;
        if body.len() != 64 || body.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(err());
        }
        hex::FromHex::from_hex(body).map(AccountId).map_err(|_| err())
    }
}

impl Serialize for AccountId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AccountId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

impl Canonical for AccountId {
    fn encode(&self, w: &mut Writer) {
        w.fixed(&self.0);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self(r.array()?))
    }
}

/// Hash of a transaction; also the block-hash carried by QR payloads.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TxHash(#[serde(with = "hex::serde")] pub Digest256);

impl TxHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.bytes().any(|b| b.is_ascii_uppercase()) {
            return None;
        }
        hex::FromHex::from_hex(s).ok().map(Self)
    }
}

impl fmt::Display for TxHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for TxHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TxHash({})", self.to_hex())
    }
}

/// An issued asset, identified by `(code, issuer)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Asset {
    pub code: String,
    pub issuer: AccountId,
}

pub const KYC_CODE: &str = "KYC";

impl Asset {
    pub fn new(code: impl Into<String>, issuer: AccountId) -> Option<Self> {
        let code = code.into();
        Self::valid_code(&code).then_some(Self { code, issuer })
    }

    pub fn kyc(issuer: AccountId) -> Self {
        Self {
            code: KYC_CODE.to_string(),
            issuer,
        }
    }

    pub fn valid_code(code: &str) -> bool {
        (1..=12).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_alphanumeric())
    }
}

impl Canonical for Asset {
    fn encode(&self, w: &mut Writer) {
        w.str(&self.code).put(&self.issuer);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let code = r.str()?;
        let issuer = r.get()?;
        Asset::new(code, issuer).ok_or(DecodeError::Invalid("asset code"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Memo {
    #[default]
    None,
    Hash([u8; 32]),
}

impl Memo {
    /// User hash in bytes 0..16, zero padding in 16..32.
    pub fn from_user_hash(h: &UserHash) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..16].copy_from_slice(&h.0);
        Memo::Hash(bytes)
    }

    /// The user hash carried in a well-formed memo (HASH kind, zero tail).
    pub fn user_hash(&self) -> Option<UserHash> {
        match self {
            Memo::Hash(bytes) if bytes[16..].iter().all(|&b| b == 0) => {
                let mut h = [0u8; 16];
                h.copy_from_slice(&bytes[..16]);
                Some(UserHash(h))
            }
            _ => None,
        }
    }
}

impl Canonical for Memo {
    fn encode(&self, w: &mut Writer) {
        match self {
            Memo::None => {
                w.u8(0);
            }
            Memo::Hash(bytes) => {
                w.u8(1).fixed(bytes);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(Memo::None),
            1 => Ok(Memo::Hash(r.array()?)),
            tag => Err(DecodeError::UnknownTag { what: "memo", tag }),
        }
    }
}

impl Serialize for Memo {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            kind: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            hash: Option<String>,
        }
        match self {
            Memo::None => Repr { kind: "NONE", hash: None },
            Memo::Hash(b) => Repr {
                kind: "HASH",
                hash: Some(hex::encode(b)),
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Memo {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            kind: String,
            hash: Option<String>,
        }
        let repr = Repr::deserialize(d)?;
        match (repr.kind.as_str(), repr.hash) {
            ("NONE", None) => Ok(Memo::None),
            ("HASH", Some(h)) => hex::FromHex::from_hex(&h)
                .map(Memo::Hash)
                .map_err(serde::de::Error::custom),
            _ => Err(serde::de::Error::custom("invalid memo")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Operation {
    CreateAccount { new_id: AccountId },
    ChangeTrust { asset: Asset },
    Payment {
        destination: AccountId,
        asset: Asset,
        amount: u64,
    },
}

impl Canonical for Operation {
    fn encode(&self, w: &mut Writer) {
        match self {
            Operation::CreateAccount { new_id } => {
                w.u8(0).put(new_id);
            }
            Operation::ChangeTrust { asset } => {
                w.u8(1).put(asset);
            }
            Operation::Payment {
                destination,
                asset,
                amount,
            } => {
                w.u8(2).put(destination).put(asset).u64(*amount);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(Operation::CreateAccount { new_id: r.get()? }),
            1 => Ok(Operation::ChangeTrust { asset: r.get()? }),
            2 => Ok(Operation::Payment {
                destination: r.get()?,
                asset: r.get()?,
                amount: r.u64()?,
            }),
            tag => Err(DecodeError::UnknownTag {
                what: "operation",
                tag,
            }),
        }
    }
}

pub const MAX_OPERATIONS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub source: AccountId,
    pub sequence: u64,
    pub operations: Vec<Operation>,
    pub memo: Memo,
}

impl Canonical for Transaction {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.source).u64(self.sequence);
        w.u32(self.operations.len() as u32);
        for op in &self.operations {
            w.put(op);
        }
        w.put(&self.memo);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let source = r.get()?;
        let sequence = r.u64()?;
        let count = r.u32()? as usize;
        if count > MAX_OPERATIONS {
            return Err(DecodeError::Invalid("operation count"));
        }
        let operations = (0..count).map(|_| r.get()).collect::<Result<_, _>>()?;
        Ok(Self {
            source,
            sequence,
            operations,
            memo: r.get()?,
        })
    }
}

impl Transaction {
    /// Structural checks that do not depend on ledger state.
    pub fn well_formed(&self) -> Result<(), &'static str> {
        if self.operations.is_empty() || self.operations.len() > MAX_OPERATIONS {
            return Err("a transaction carries 1 to 16 operations");
        }
        for op in &self.operations {
            if let Operation::Payment { amount: 0, .. } = op {
                return Err("payment amount must be at least 1");
            }
        }
        Ok(())
    }

    /// `digest256(len-prefixed network_id ‖ canonical(tx))`.
    pub fn hash(&self, network_id: &str) -> TxHash {
        let mut w = Writer::new();
        w.str(network_id).put(self);
        TxHash(digest256(&w.into_bytes()))
    }

    pub fn sign(self, network_id: &str, keys: &SigningKeyPair) -> SignedTransaction {
        let signature = keys.sign(&self.hash(network_id).0);
        SignedTransaction {
            tx: self,
            signature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedTransaction {
    pub tx: Transaction,
    #[serde(with = "hex::serde")]
    pub signature: [u8; 64],
}

impl SignedTransaction {
    pub fn hash(&self, network_id: &str) -> TxHash {
        self.tx.hash(network_id)
    }

    pub fn verify(&self, network_id: &str) -> bool {
        verify_signature(&self.tx.source.0, &self.hash(network_id).0, &self.signature)
    }
}

impl Canonical for SignedTransaction {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.tx).fixed(&self.signature);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            tx: r.get()?,
            signature: r.array()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerBlock {
    pub sequence: u64,
    #[serde(with = "hex::serde")]
    pub prev_hash: Digest256,
    pub close_time: u64,
    pub txs: Vec<SignedTransaction>,
    #[serde(with = "hex::serde")]
    pub block_digest: Digest256,
}

impl LedgerBlock {
    /// `digest256(sequence ‖ prev_hash ‖ close_time ‖ tx hashes in order)`.
    pub fn compute_digest(&self, network_id: &str) -> Digest256 {
        let mut w = Writer::new();
        w.u64(self.sequence)
            .fixed(&self.prev_hash)
            .u64(self.close_time);
        for stx in &self.txs {
            w.fixed(&stx.hash(network_id).0);
        }
        digest256(&w.into_bytes())
    }
}

impl Canonical for LedgerBlock {
    fn encode(&self, w: &mut Writer) {
        w.u64(self.sequence)
            .fixed(&self.prev_hash)
            .u64(self.close_time)
            .u32(self.txs.len() as u32);
        for stx in &self.txs {
            w.put(stx);
        }
        w.fixed(&self.block_digest);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let sequence = r.u64()?;
        let prev_hash = r.array()?;
        let close_time = r.u64()?;
        let count = r.u32()? as usize;
        // Each signed transaction is far larger than one byte; reject absurd counts early.
        if count > r.remaining() {
            return Err(DecodeError::Invalid("transaction count"));
        }
        let txs = (0..count).map(|_| r.get()).collect::<Result<_, _>>()?;
        Ok(Self {
            sequence,
            prev_hash,
            close_time,
            txs,
            block_digest: r.array()?,
        })
    }
}

/// Outcome of applying a transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TxResult {
    Applied,
    InsufficientBalance,
    NoTrustline,
    UnknownDestination,
    UnknownAsset,
    AccountExists,
    NotAuthorized,
    SupplyExhausted,
    IssuerTrust,
}

impl TxResult {
    pub fn is_applied(self) -> bool {
        self == TxResult::Applied
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub tx_hash: TxHash,
    pub ledger_sequence: u64,
    pub tx: SignedTransaction,
    pub result: TxResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub id: AccountId,
    pub sequence: u64,
    pub trustlines: std::collections::BTreeMap<Asset, u64>,
}

impl Account {
    pub fn new(id: AccountId) -> Self {
        Self {
            id,
            sequence: 0,
            trustlines: Default::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_tx() -> Transaction {
        let issuer = AccountId([9; 32]);
        Transaction {
            source: AccountId([1; 32]),
            sequence: 4,
            operations: vec![
                Operation::ChangeTrust {
                    asset: Asset::kyc(issuer),
                },
                Operation::Payment {
                    destination: AccountId([2; 32]),
                    asset: Asset::kyc(issuer),
                    amount: 1,
                },
            ],
            memo: Memo::from_user_hash(&UserHash([0xab; 16])),
        }
    }

    #[test]
    fn account_display_parses_back() {
        let id = AccountId([0x5a; 32]);
        let s = id.to_string();
        assert_eq!(s.len(), 66);
        assert!(s.starts_with("GA5a5a"));
        assert_eq!(s.parse::<AccountId>().unwrap(), id);
        assert!(s.to_uppercase().parse::<AccountId>().is_err());
        assert!(s[2..].parse::<AccountId>().is_err());
    }

    #[test]
    fn asset_code_bounds() {
        let issuer = AccountId([0; 32]);
        assert!(Asset::new("", issuer).is_none());
        assert!(Asset::new("ABCDEFGHIJKLM", issuer).is_none());
        assert!(Asset::new("ABCDEFGHIJKL", issuer).is_some());
        assert!(Asset::new("K-Y", issuer).is_none());
        assert_ne!(Asset::kyc(issuer), Asset::kyc(AccountId([1; 32])));
    }

    #[test]
    fn memo_user_hash_layout() {
        let h = UserHash([7; 16]);
        let Memo::Hash(bytes) = Memo::from_user_hash(&h) else {
            panic!("expected hash memo");
        };
        assert_eq!(&bytes[..16], &[7; 16]);
        assert_eq!(&bytes[16..], &[0; 16]);
        assert_eq!(Memo::Hash(bytes).user_hash(), Some(h));
        let mut dirty = bytes;
        dirty[31] = 1;
        assert_eq!(Memo::Hash(dirty).user_hash(), None);
        assert_eq!(Memo::None.user_hash(), None);
    }

    #[test]
    fn canonical_transaction_layout_is_stable() {
        // Pinned encoding: changing this breaks every stored chain and external signer.
        let bytes = sample_tx().to_canonical_bytes();
        let mut expected = vec![1u8; 32];
        expected.extend_from_slice(&4u64.to_be_bytes());
        expected.extend_from_slice(&2u32.to_be_bytes());
        expected.push(1);
        expected.extend_from_slice(&[0, 0, 0, 3]);
        expected.extend_from_slice(b"KYC");
        expected.extend_from_slice(&[9; 32]);
        expected.push(2);
        expected.extend_from_slice(&[2; 32]);
        expected.extend_from_slice(&[0, 0, 0, 3]);
        expected.extend_from_slice(b"KYC");
        expected.extend_from_slice(&[9; 32]);
        expected.extend_from_slice(&1u64.to_be_bytes());
        expected.push(1);
        expected.extend_from_slice(&[0xab; 16]);
        expected.extend_from_slice(&[0; 16]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn tx_hash_depends_on_network_and_excludes_signature() {
        let keys = SigningKeyPair::generate();
        let tx = Transaction {
            source: keys.account_id(),
            ..sample_tx()
        };
        assert_ne!(tx.hash("net-a"), tx.hash("net-b"));
        let signed = tx.clone().sign("net-a", &keys);
        assert!(signed.verify("net-a"));
        assert!(!signed.verify("net-b"));
        let mut resigned = signed.clone();
        resigned.signature[0] ^= 1;
        assert_eq!(resigned.hash("net-a"), signed.hash("net-a"));
        assert!(!resigned.verify("net-a"));
    }

    #[test]
    fn well_formedness() {
        let mut tx = sample_tx();
        assert!(tx.well_formed().is_ok());
        tx.operations.clear();
        assert!(tx.well_formed().is_err());
        tx.operations = vec![
            Operation::CreateAccount {
                new_id: AccountId([3; 32])
            };
            17
        ];
        assert!(tx.well_formed().is_err());
        let mut tx = sample_tx();
        tx.operations[1] = Operation::Payment {
            destination: AccountId([2; 32]),
            asset: Asset::kyc(AccountId([9; 32])),
            amount: 0,
        };
        assert!(tx.well_formed().is_err());
    }

    #[test]
    fn json_shapes() {
        let v = serde_json::to_value(sample_tx()).unwrap();
        assert_eq!(v["memo"]["kind"], "HASH");
        assert_eq!(v["operations"][1]["type"], "payment");
        let back: Transaction = serde_json::from_value(v).unwrap();
        assert_eq!(back, sample_tx());
        assert_eq!(
            serde_json::to_string(&TxResult::InsufficientBalance).unwrap(),
            "\"INSUFFICIENT_BALANCE\""
        );
    }

    proptest! {
        #[test]
        fn signed_transaction_canonical_round_trip(seq in any::<u64>(), amount in 1u64.., memo in any::<[u8; 32]>(), sig in proptest::collection::vec(any::<u8>(), 64)) {
            let mut tx = sample_tx();
            tx.sequence = seq;
            tx.memo = Memo::Hash(memo);
            if let Operation::Payment { amount: a, .. } = &mut tx.operations[1] {
                *a = amount;
            }
            let stx = SignedTransaction { tx, signature: sig.try_into().unwrap() };
            let back = SignedTransaction::from_canonical_bytes(&stx.to_canonical_bytes()).unwrap();
            prop_assert_eq!(back, stx);
        }
    }
}
