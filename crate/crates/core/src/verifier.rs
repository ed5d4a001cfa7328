//! Destination-company client: check a presented QR code on the ledger,
//! fetch and decrypt the certificate, decide, and return collected tokens.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::*;
use crate::crypto::{open, EncryptionPrivateKey, SigningKeyPair, UserHash};
use crate::ledger::{AccountId, Memo, Operation, Transaction, TxHash};
use crate::wallet::{await_transaction, WalletError};

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("not a certificate code: {0}")]
    BadPayload(String),
    #[error("ledger transaction not found or not applied: {0}")]
    LedgerTxMissing(String),
    #[error("certificate was sent to another destination")]
    NotForUs,
    #[error("controller refused the certificate: {0}")]
    FetchRefused(ControllerError),
    #[error("certificate envelope does not open with our key")]
    DecryptFailed,
    #[error("balance {balance} is below {requested}")]
    InsufficientTokens { balance: u64, requested: u64 },
    #[error("return transaction already claimed")]
    AlreadyClaimed,
    #[error("company config: {0}")]
    Config(String),
    #[error(transparent)]
    Api(ControllerError),
    #[error("timed out waiting for ledger close")]
    Timeout,
}

impl VerifierError {
    pub fn exit_code(&self) -> i32 {
        match self {
            VerifierError::BadPayload(_) => 60,
            VerifierError::LedgerTxMissing(_) => 61,
            VerifierError::NotForUs => 62,
            VerifierError::FetchRefused(_) => 63,
            VerifierError::DecryptFailed => 64,
            VerifierError::InsufficientTokens { .. } => 65,
            VerifierError::AlreadyClaimed => 66,
            VerifierError::Config(_) => 67,
            VerifierError::Timeout => 57,
            VerifierError::Api(e) => e.exit_code(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            VerifierError::BadPayload(_) => "BAD_PAYLOAD",
            VerifierError::LedgerTxMissing(_) => "LEDGER_TX_MISSING",
            VerifierError::NotForUs => "NOT_FOR_US",
            VerifierError::FetchRefused(_) => "FETCH_REFUSED",
            VerifierError::DecryptFailed => "DECRYPT_FAILED",
            VerifierError::InsufficientTokens { .. } => "INSUFFICIENT_TOKENS",
            VerifierError::AlreadyClaimed => "ALREADY_CLAIMED",
            VerifierError::Config(_) => "CONFIG",
            VerifierError::Timeout => "TIMEOUT",
            VerifierError::Api(e) => e.code(),
        }
    }
}

impl From<ControllerError> for VerifierError {
    fn from(e: ControllerError) -> Self {
        match e {
            ControllerError::AlreadyClaimed(_) => VerifierError::AlreadyClaimed,
            e => VerifierError::Api(e),
        }
    }
}

impl From<WalletError> for VerifierError {
    fn from(e: WalletError) -> Self {
        match e {
            WalletError::Api(e) => e.into(),
            WalletError::Timeout => VerifierError::Timeout,
            other => VerifierError::Api(ControllerError::Internal(other.to_string())),
        }
    }
}

type Result<T> = std::result::Result<T, VerifierError>;

/// Service rule: the named result field must hold one of `accept`.
/// `field = "result"` is the headline result; any other name is looked up in
/// the result details.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRule {
    #[serde(default = "default_field")]
    pub field: String,
    pub accept: Vec<String>,
    /// Deny when a presented biometric digest differs from the certificate's.
    #[serde(default = "yes")]
    pub match_biometric: bool,
}

fn default_field() -> String {
    "result".into()
}

fn yes() -> bool {
    true
}

impl Default for DecisionRule {
    fn default() -> Self {
        Self {
            field: default_field(),
            accept: vec!["negative".into()],
            match_biometric: true,
        }
    }
}

/// Everything the verifier needs; loaded from the `--company-config` TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompanyConfig {
    pub server: String,
    pub company_id: String,
    pub auth_token: String,
    pub encryption_private_key: EncryptionPrivateKey,
    pub ledger_account: AccountId,
    /// Hex Ed25519 secret of `ledger_account`, used to return tokens.
    pub ledger_secret_key: String,
    #[serde(default)]
    pub decision: DecisionRule,
}

impl CompanyConfig {
    pub fn from_onboarding(server: &str, o: &CompanyOnboarding) -> Self {
        Self {
            server: server.to_string(),
            company_id: o.company_id.clone(),
            auth_token: o.auth_token.clone(),
            encryption_private_key: o.encryption_private_key.clone(),
            ledger_account: o.ledger_account,
            ledger_secret_key: o.ledger_secret_key.clone(),
            decision: DecisionRule::default(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| VerifierError::Config(format!("{}: {e}", path.as_ref().display())))?;
        toml::from_str(&text).map_err(|e| VerifierError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("company config serializes")
    }

    fn ledger_keys(&self) -> Result<SigningKeyPair> {
        let keys = SigningKeyPair::from_secret_hex(&self.ledger_secret_key)
            .map_err(|e| VerifierError::Config(e.to_string()))?;
        if keys.account_id() != self.ledger_account {
            return Err(VerifierError::Config(
                "ledger_secret_key does not match ledger_account".into(),
            ));
        }
        Ok(keys)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Grant,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub on_chain_ok: bool,
    pub tx_hash: TxHash,
    pub user_hash: UserHash,
    pub certificate: CertificateDocument,
    pub decision: Decision,
    pub reasons: Vec<String>,
}

/// The service decision. Pure: same inputs, same answer.
pub fn decide(
    cert: &CertificateDocument,
    now_ms: u64,
    rule: &DecisionRule,
    presented_biometric: Option<&[u8; 32]>,
) -> (Decision, Vec<String>) {
    let mut reasons = Vec::new();
    let value = if rule.field == "result" {
        Some(&cert.result.result)
    } else {
        cert.result.details.get(&rule.field)
    };
    match value {
        Some(v) if rule.accept.iter().any(|a| a == v) => {}
        Some(v) => reasons.push(format!("{} is {v:?}", rule.field)),
        None => reasons.push(format!("{} is missing", rule.field)),
    }
    if now_ms >= cert.valid_until {
        reasons.push("certificate expired".into());
    }
    if rule.match_biometric {
        if let Some(presented) = presented_biometric {
            if cert.biometric_digest.as_ref() != Some(presented) {
                reasons.push("biometric digest does not match".into());
            }
        }
    }
    let decision = if reasons.is_empty() {
        Decision::Grant
    } else {
        Decision::Deny
    };
    (decision, reasons)
}

pub struct Verifier<'a> {
    pub config: CompanyConfig,
    api: &'a dyn ControllerApi,
    pub await_timeout: Duration,
}

impl<'a> Verifier<'a> {
    pub fn new(config: CompanyConfig, api: &'a dyn ControllerApi) -> Self {
        Self {
            config,
            api,
            await_timeout: Duration::from_secs(30),
        }
    }

    /// Checks the ledger payment behind a QR code and returns the user hash in
    /// its memo. Makes no controller call beyond the ledger query.
    pub fn check_on_chain(&self, qr: &str) -> Result<(TxHash, UserHash)> {
        let tx_hash = parse_qr_text(qr).ok_or_else(|| VerifierError::BadPayload(qr.trim().to_string()))?;
        let rec = match self.api.get_transaction(&tx_hash) {
            Ok(rec) => rec,
            Err(ControllerError::LedgerTxMissing(m)) => return Err(VerifierError::LedgerTxMissing(m)),
            Err(e) => return Err(e.into()),
        };
        if !rec.result.is_applied() {
            return Err(VerifierError::LedgerTxMissing(format!("{:?}", rec.result)));
        }
        let kyc = self.api.ledger_info()?.asset;
        let [Operation::Payment {
            destination, asset, ..
        }] = rec.tx.tx.operations.as_slice()
        else {
            return Err(VerifierError::BadPayload("transaction is not a single payment".into()));
        };
        if *destination != self.config.ledger_account {
            return Err(VerifierError::NotForUs);
        }
        if *asset != kyc {
            return Err(VerifierError::BadPayload("payment is not in KYC tokens".into()));
        }
        let user_hash = match rec.tx.tx.memo {
            m @ Memo::Hash(_) => m.user_hash(),
            Memo::None => None,
        }
        .ok_or_else(|| VerifierError::BadPayload("memo does not carry a user hash".into()))?;
        Ok((tx_hash, user_hash))
    }

    pub fn cmd_verify(&self, qr: &str, now_ms: u64, presented_biometric: Option<&[u8; 32]>) -> Result<VerificationOutcome> {
        let (tx_hash, user_hash) = self.check_on_chain(qr)?;
        let envelope = self
            .api
            .fetch_certificate(&self.config.auth_token, &self.config.company_id, &user_hash)
            .map_err(|e| match e {
                ControllerError::Transport(_) => VerifierError::Api(e),
                e => VerifierError::FetchRefused(e),
            })?;
        let plain = open(&envelope, &self.config.encryption_private_key)
            .map_err(|_| VerifierError::DecryptFailed)?;
        let certificate =
            CertificateDocument::from_bytes(&plain).map_err(|_| VerifierError::DecryptFailed)?;
        let (decision, reasons) = decide(&certificate, now_ms, &self.config.decision, presented_biometric);
        Ok(VerificationOutcome {
            on_chain_ok: true,
            tx_hash,
            user_hash,
            certificate,
            decision,
            reasons,
        })
    }

    pub fn balance(&self) -> Result<u64> {
        Ok(self
            .api
            .ledger_account(&self.config.ledger_account)?
            .balance
            .unwrap_or(0))
    }

    /// Pays `n` tokens back to the issuer, waits for the close and claims
    /// the buy-back credit.
    pub fn cmd_return_tokens(&self, n: u64) -> Result<(TxHash, BuybackCredit)> {
        let balance = self.balance()?;
        if n == 0 || n > balance {
            return Err(VerifierError::InsufficientTokens {
                balance,
                requested: n,
            });
        }
        let keys = self.config.ledger_keys()?;
        let info = self.api.ledger_info()?;
        let account = self.api.ledger_account(&self.config.ledger_account)?;
        let stx = Transaction {
            source: keys.account_id(),
            sequence: account.sequence + 1,
            operations: vec![Operation::Payment {
                destination: info.issuer,
                asset: info.asset,
                amount: n,
            }],
            memo: Memo::None,
        }
        .sign(&info.network_id, &keys);
        let receipt = self.api.submit_transaction(&stx)?;
        let rec = await_transaction(self.api, &receipt.tx_hash, self.await_timeout)?;
        if !rec.result.is_applied() {
            return Err(VerifierError::InsufficientTokens {
                balance: self.balance()?,
                requested: n,
            });
        }
        Ok((receipt.tx_hash, self.cmd_claim(&receipt.tx_hash, n)?))
    }

    /// Claims credit for a return payment already on the ledger.
    pub fn cmd_claim(&self, tx_hash: &TxHash, n: u64) -> Result<BuybackCredit> {
        Ok(self.api.buy_back(
            &self.config.auth_token,
            &BuybackRequest {
                company_id: self.config.company_id.clone(),
                n,
                return_tx_hash: *tx_hash,
            },
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cert(result: &str, valid_until: u64) -> CertificateDocument {
        CertificateDocument {
            test_id: "t".into(),
            user_name: "Ada".into(),
            test_type: "PCR".into(),
            result: ResultDocument {
                result: result.into(),
                details: [("antibodies".to_string(), "present".to_string())].into(),
            },
            taken_at: 0,
            valid_until,
            lab_name: "L".into(),
            biometric_digest: Some([4; 32]),
        }
    }

    #[test]
    fn decision_rule() {
        let rule = DecisionRule::default();
        assert_eq!(decide(&cert("negative", 10), 9, &rule, None).0, Decision::Grant);
        assert_eq!(decide(&cert("negative", 10), 10, &rule, None).0, Decision::Deny);
        assert_eq!(decide(&cert("positive", 10), 0, &rule, None).0, Decision::Deny);
        assert_eq!(decide(&cert("negative", 10), 0, &rule, Some(&[4; 32])).0, Decision::Grant);
        let (d, reasons) = decide(&cert("negative", 10), 0, &rule, Some(&[5; 32]));
        assert_eq!(d, Decision::Deny);
        assert_eq!(reasons, vec!["biometric digest does not match".to_string()]);
        let details = DecisionRule {
            field: "antibodies".into(),
            accept: vec!["present".into()],
            match_biometric: false,
        };
        assert_eq!(decide(&cert("positive", 10), 0, &details, Some(&[5; 32])).0, Decision::Grant);
    }

    #[test]
    fn decision_is_pure() {
        let c = cert("negative", 1_000);
        let rule = DecisionRule::default();
        for now in [0, 999, 1_000, 5_000] {
            assert_eq!(decide(&c, now, &rule, None), decide(&c.clone(), now, &rule.clone(), None));
        }
    }

    #[test]
    fn config_toml_round_trip() {
        let keys = SigningKeyPair::generate();
        let cfg = CompanyConfig {
            server: "http://127.0.0.1:8080".into(),
            company_id: "company-1".into(),
            auth_token: "company.company-1.00".into(),
            encryption_private_key: EncryptionPrivateKey::from_bytes([3; 32]),
            ledger_account: keys.account_id(),
            ledger_secret_key: hex::encode(keys.secret_bytes()),
            decision: DecisionRule::default(),
        };
        let text = cfg.to_toml();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, &text).unwrap();
        let back = CompanyConfig::load(&path).unwrap();
        assert_eq!(back.ledger_account, cfg.ledger_account);
        assert_eq!(back.decision, cfg.decision);
        assert!(back.ledger_keys().is_ok());
    }
}
