//! The system controller: onboarding, test ingestion, token sale, transfer
//! orchestration, certificate release and buy-back.
//!
//! [`Controller`] implements [`ControllerApi`] in-process; [`http::router`]
//! serves the same operations as HTTP+JSON.

mod api;
mod auth;
mod config;
mod error;
pub mod http;
mod types;

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;

pub use self::api::{ApiResult, ControllerApi};
pub use self::auth::Role;
pub use self::config::{
    CloseMode, Clock, ControllerConfig, ManualClock, PaymentRule, SystemClock,
    DEFAULT_BUYBACK_DIVISOR, DEFAULT_TEST_VALIDITY_MS,
};
pub use self::error::{ControllerError, ErrorBody};
pub use self::types::*;

use crate::crypto::{
    derive_user_hash, open, random_nonce, seal, EncryptionKeyPair, SealedEnvelope,
    SigningKeyPair, UserHash,
};
use crate::ledger::{
    AccountId, CloseTimer, LedgerHandle, Memo, NetworkInfo, Operation, PendingReceipt,
    SignedTransaction, Transaction, TransactionRecord, TxHash, TxResult,
};
use crate::registry::{
    BuybackClaim, CompanyRecord, Identity, LabRecord, Registry, TestRecord, TransferRecord,
    UserRecord,
};

type Result<T> = std::result::Result<T, ControllerError>;

const KEY_FILE: &str = "controller.key";
const LEDGER_FILE: &str = "ledger.log";
const JOURNAL_FILE: &str = "registry.journal";

fn new_id(prefix: &str) -> String {
    format!("{prefix}-{}", uuid::Uuid::new_v4().simple())
}

pub struct Controller {
    config: ControllerConfig,
    keys: SigningKeyPair,
    ledger: LedgerHandle,
    registry: Registry,
    clock: Arc<dyn Clock>,
    /// Serializes sequence assignment for issuer-signed transactions.
    issuer_seq: Mutex<()>,
    timer: Mutex<Option<CloseTimer>>,
}

impl std::fmt::Debug for Controller {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Controller")
            .field("issuer", &self.keys.account_id())
            .field("ledger", &self.ledger)
            .field("registry", &self.registry)
            .finish()
    }
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Result<Self> {
        Self::with_clock(config, Arc::new(SystemClock))
    }

    /// Loads or creates the controller key, block log and registry journal
    /// under `config.data_dir`, or keeps everything in memory when it is unset.
    pub fn with_clock(config: ControllerConfig, clock: Arc<dyn Clock>) -> Result<Self> {
        config.validate()?;
        let (keys, ledger, registry) = match &config.data_dir {
            None => {
                let keys = SigningKeyPair::generate();
                let ledger =
                    LedgerHandle::create_network(&config.network_id, &keys, config.kyc_supply)?;
                (keys, ledger, Registry::in_memory())
            }
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(io_err)?;
                let keys = load_or_create_key(&dir.join(KEY_FILE))?;
                let ledger = LedgerHandle::open_persistent(
                    dir.join(LEDGER_FILE),
                    &config.network_id,
                    keys.account_id(),
                    config.kyc_supply,
                )?;
                (keys, ledger, Registry::open(dir.join(JOURNAL_FILE))?)
            }
        };
        Ok(Self::assemble(config, keys, ledger, registry, clock))
    }

    /// Builds a controller around existing parts. The ledger's issuer must be
    /// `keys`' account.
    pub fn from_parts(
        config: ControllerConfig,
        keys: SigningKeyPair,
        ledger: LedgerHandle,
        registry: Registry,
        clock: Arc<dyn Clock>,
    ) -> Result<Self> {
        config.validate()?;
        if ledger.issuer() != keys.account_id() {
            return Err(ControllerError::BadRequest(
                "ledger issuer does not match controller key".into(),
            ));
        }
        Ok(Self::assemble(config, keys, ledger, registry, clock))
    }

    fn assemble(
        config: ControllerConfig,
        keys: SigningKeyPair,
        ledger: LedgerHandle,
        registry: Registry,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let timer = (config.close_mode == CloseMode::Timer).then(|| {
            CloseTimer::start(
                ledger.clone(),
                Duration::from_millis(config.close_interval_ms),
            )
        });
        Self {
            config,
            keys,
            ledger,
            registry,
            clock,
            issuer_seq: Mutex::new(()),
            timer: Mutex::new(timer),
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn ledger(&self) -> &LedgerHandle {
        &self.ledger
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn issuer(&self) -> AccountId {
        self.keys.account_id()
    }

    /// Stops the close timer, if one is running.
    pub fn shutdown(&self) {
        if let Some(timer) = self.timer.lock().take() {
            timer.stop();
        }
    }

    fn now(&self) -> u64 {
        self.clock.now_ms()
    }

    fn check_admin(&self, token: &str) -> Result<()> {
        if token.is_empty() || token != self.config.admin_token {
            return Err(ControllerError::AuthFailure("admin token required".into()));
        }
        Ok(())
    }

    /// Id the bearer token was issued to, if it is a valid token for `role`.
    fn authorize(&self, token: &str, role: Role) -> Result<String> {
        match auth::verify(&self.keys.account_id(), token) {
            Some((r, id)) if r == role => Ok(id),
            _ => Err(ControllerError::AuthFailure(format!("{role} token required"))),
        }
    }

    fn authorize_as(&self, token: &str, role: Role, id: &str) -> Result<()> {
        if self.authorize(token, role)? != id {
            return Err(ControllerError::AuthFailure(format!("token is not for {role} {id}")));
        }
        Ok(())
    }

    /// Signs and submits an issuer transaction, then waits for its result.
    fn issuer_tx(&self, operations: Vec<Operation>) -> Result<TransactionRecord> {
        let receipt = {
            let _guard = self.issuer_seq.lock();
            let issuer = self.keys.account_id();
            let tx = Transaction {
                source: issuer,
                sequence: self.ledger.next_sequence(&issuer)?,
                operations,
                memo: Memo::None,
            };
            self.ledger
                .submit(tx.sign(self.ledger.network_id(), &self.keys))?
        };
        self.settle(&receipt.tx_hash)
    }

    fn settle(&self, tx_hash: &TxHash) -> Result<TransactionRecord> {
        match self.config.close_mode {
            CloseMode::OnDemand => {
                self.ledger.close_ledger(self.now())?;
                Ok(self.ledger.get_transaction(tx_hash)?)
            }
            CloseMode::Timer => {
                let wait = Duration::from_millis(self.config.close_interval_ms * 3 + 1_000);
                self.ledger
                    .wait_for_transaction(tx_hash, wait)
                    .map_err(|_| ControllerError::Internal("ledger did not close in time".into()))
            }
        }
    }

    fn create_ledger_account(&self, account: AccountId) -> Result<TxResult> {
        let rec = self.issuer_tx(vec![Operation::CreateAccount { new_id: account }])?;
        Ok(rec.result)
    }

    fn kyc_balance(&self, account: &AccountId) -> Result<u64> {
        Ok(self.ledger.get_balance(account, &self.ledger.kyc_asset())?)
    }

    fn company_for(&self, company_id: &str) -> Result<CompanyRecord> {
        self.registry
            .get_company(company_id)
            .map_err(|_| ControllerError::UnknownCompany(company_id.to_string()))
    }

    fn user_for(&self, user_id: &str) -> Result<UserRecord> {
        self.registry
            .get_user(user_id)
            .map_err(|_| ControllerError::UnknownUser(user_id.to_string()))
    }

    fn applied_tx(&self, tx_hash: &TxHash) -> Result<TransactionRecord> {
        let rec = self
            .ledger
            .get_transaction(tx_hash)
            .map_err(|_| ControllerError::LedgerTxMissing(tx_hash.to_hex()))?;
        if !rec.result.is_applied() {
            return Err(ControllerError::LedgerTxMissing(format!(
                "{} failed with {:?}",
                tx_hash.to_hex(),
                rec.result
            )));
        }
        Ok(rec)
    }

    /// The certificate a destination company receives for a transfer.
    pub fn certificate_for(&self, transfer: &TransferRecord) -> Result<CertificateDocument> {
        let test = self.registry.get_test(&transfer.test_id)?;
        let user = self.registry.get_user(&test.user_id)?;
        let lab = self.registry.get_lab(&test.lab_id)?;
        let result: ResultDocument = serde_json::from_slice(&test.result_payload)
            .map_err(|e| ControllerError::Internal(format!("stored result: {e}")))?;
        Ok(CertificateDocument {
            test_id: test.test_id,
            user_name: user.identity.name,
            test_type: test.test_type,
            result,
            taken_at: test.taken_at,
            valid_until: test.valid_until,
            lab_name: lab.name,
            biometric_digest: user.biometric_digest,
        })
    }
}

impl Drop for Controller {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn io_err(e: std::io::Error) -> ControllerError {
    ControllerError::Internal(e.to_string())
}

fn load_or_create_key(path: &Path) -> Result<SigningKeyPair> {
    match std::fs::read_to_string(path) {
        Ok(text) => SigningKeyPair::from_secret_hex(text.trim())
            .map_err(|e| ControllerError::Internal(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let keys = SigningKeyPair::generate();
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, hex::encode(keys.secret_bytes())).map_err(io_err)?;
            std::fs::rename(&tmp, path).map_err(io_err)?;
            Ok(keys)
        }
        Err(e) => Err(io_err(e)),
    }
}

impl ControllerApi for Controller {
    fn onboard_lab(&self, admin: &str, req: &OnboardLabRequest) -> Result<LabOnboarding> {
        self.check_admin(admin)?;
        if req.name.trim().is_empty() {
            return Err(ControllerError::BadRequest("lab name must not be empty".into()));
        }
        let pair = EncryptionKeyPair::generate();
        let lab_id = new_id("lab");
        self.registry.put_lab(LabRecord {
            lab_id: lab_id.clone(),
            name: req.name.clone(),
            server_held_decryption_key: pair.private_key,
            accredited: true,
            accreditation_evidence: req.accreditation_evidence.clone(),
        })?;
        Ok(LabOnboarding {
            auth_token: auth::issue(&self.keys, Role::Lab, &lab_id),
            lab_id,
            lab_encryption_key: pair.public_key,
        })
    }

    fn set_lab_accreditation(&self, admin: &str, lab_id: &str, accredited: bool) -> Result<LabSummary> {
        self.check_admin(admin)?;
        self.registry
            .set_lab_accreditation(lab_id, accredited)
            .map_err(|_| ControllerError::UnknownLab(lab_id.to_string()))?;
        let lab = self.registry.get_lab(lab_id)?;
        Ok(LabSummary {
            lab_id: lab.lab_id,
            name: lab.name,
            accredited: lab.accredited,
        })
    }

    fn onboard_company(&self, admin: &str, req: &OnboardCompanyRequest) -> Result<CompanyOnboarding> {
        self.check_admin(admin)?;
        if req.name.trim().is_empty() {
            return Err(ControllerError::BadRequest("company name must not be empty".into()));
        }
        let enc = EncryptionKeyPair::generate();
        let ledger_keys = SigningKeyPair::generate();
        let account = ledger_keys.account_id();
        let result = self.create_ledger_account(account)?;
        if !result.is_applied() {
            return Err(ControllerError::Internal(format!("create account: {result:?}")));
        }
        let company_id = new_id("company");
        self.registry.put_company(CompanyRecord {
            company_id: company_id.clone(),
            name: req.name.clone(),
            encryption_public_key: enc.public_key,
            ledger_account: account,
            credit_balance: 0,
        })?;
        Ok(CompanyOnboarding {
            auth_token: auth::issue(&self.keys, Role::Company, &company_id),
            company_id,
            encryption_private_key: enc.private_key,
            ledger_account: account,
            ledger_secret_key: hex::encode(ledger_keys.secret_bytes()),
        })
    }

    fn register_user(&self, req: &RegisterUserRequest) -> Result<UserRegistration> {
        if req.identity.name.trim().is_empty() || req.identity.national_id.is_empty() {
            return Err(ControllerError::BadRequest("identity is incomplete".into()));
        }
        let account = req.wallet_public_key;
        if account == self.keys.account_id() || self.registry.owner_of_account(&account).is_some() {
            return Err(ControllerError::DuplicateKey(format!("wallet key {account}")));
        }
        match self.create_ledger_account(account)? {
            // An account left behind by an interrupted registration is reused.
            TxResult::Applied | TxResult::AccountExists => {}
            other => return Err(ControllerError::Internal(format!("create account: {other:?}"))),
        }
        let user_id = new_id("user");
        self.registry.put_user(UserRecord {
            user_id: user_id.clone(),
            identity: Identity::new(req.identity.name.clone(), &req.identity.national_id),
            biometric_digest: None,
            ledger_account: account,
            created_at: self.now(),
        })?;
        Ok(UserRegistration {
            auth_token: auth::issue(&self.keys, Role::User, &user_id),
            user_id,
            ledger_account: account,
        })
    }

    fn list_labs(&self) -> Result<Vec<LabSummary>> {
        Ok(self
            .registry
            .list_accredited_labs()
            .into_iter()
            .map(|l| LabSummary {
                lab_id: l.lab_id,
                name: l.name,
                accredited: l.accredited,
            })
            .collect())
    }

    fn submit_test(&self, token: &str, lab_id: &str, envelope: &SealedEnvelope) -> Result<TestSubmitted> {
        let caller = self.authorize(token, Role::Lab)?;
        let lab = self
            .registry
            .get_lab(lab_id)
            .map_err(|_| ControllerError::UnknownLab(lab_id.to_string()))?;
        if caller != lab_id {
            return Err(ControllerError::AuthFailure(format!("token is not for lab {lab_id}")));
        }
        if !lab.accredited {
            return Err(ControllerError::NotAccredited(lab_id.to_string()));
        }
        let plain = open(envelope, &lab.server_held_decryption_key)?;
        let sub: LabSubmission = serde_json::from_slice(&plain)
            .map_err(|e| ControllerError::MalformedPayload(e.to_string()))?;
        if sub.test_type.trim().is_empty() || sub.result.result.is_empty() {
            return Err(ControllerError::MalformedPayload("empty test type or result".into()));
        }
        self.user_for(&sub.user_id)?;
        let valid_until = sub
            .taken_at
            .checked_add(self.config.test_validity_ms)
            .ok_or_else(|| ControllerError::MalformedPayload("taken_at out of range".into()))?;
        let test_id = new_id("test");
        self.registry.put_test(TestRecord {
            test_id: test_id.clone(),
            user_id: sub.user_id.clone(),
            lab_id: lab_id.to_string(),
            test_type: sub.test_type,
            result_payload: serde_json::to_vec(&sub.result).expect("result serializes"),
            taken_at: sub.taken_at,
            valid_until,
        })?;
        if let Some(digest) = sub.biometric_digest {
            self.registry.set_biometric_if_absent(&sub.user_id, digest)?;
        }
        Ok(TestSubmitted {
            test_id,
            valid_until,
        })
    }

    fn list_valid_tests(&self, token: &str, user_id: &str) -> Result<Vec<TestSummary>> {
        self.authorize_as(token, Role::User, user_id)?;
        Ok(self
            .registry
            .list_valid_tests(user_id, self.now())?
            .iter()
            .map(TestSummary::from)
            .collect())
    }

    fn purchase_tokens(&self, token: &str, req: &PurchaseRequest) -> Result<Purchase> {
        self.authorize_as(token, Role::User, &req.user_id)?;
        if req.n == 0 {
            return Err(ControllerError::BadRequest("n must be at least 1".into()));
        }
        if req.n > self.config.max_tokens_per_purchase {
            return Err(ControllerError::OverLimit(format!(
                "at most {} tokens per purchase",
                self.config.max_tokens_per_purchase
            )));
        }
        let user = self.user_for(&req.user_id)?;
        if self.registry.list_valid_tests(&req.user_id, self.now())?.is_empty() {
            return Err(ControllerError::NoValidTest(req.user_id.clone()));
        }
        let supply = self.ledger.supply();
        if supply.issued.saturating_add(req.n) > supply.kyc_supply {
            return Err(ControllerError::SupplyExhausted(format!(
                "{} of {} issued",
                supply.issued, supply.kyc_supply
            )));
        }
        let due = req.n.saturating_mul(self.config.token_price);
        if !self.config.payment.accepts(due, &req.payment_proof) {
            return Err(ControllerError::PaymentRejected(format!("payment of {due} not accepted")));
        }
        let rec = self.issuer_tx(vec![Operation::Payment {
            destination: user.ledger_account,
            asset: self.ledger.kyc_asset(),
            amount: req.n,
        }])?;
        match rec.result {
            TxResult::Applied => {}
            TxResult::SupplyExhausted => {
                return Err(ControllerError::SupplyExhausted("supply cap reached".into()))
            }
            other => return Err(ControllerError::Internal(format!("issuance: {other:?}"))),
        }
        Ok(Purchase {
            tx_hash: rec.tx_hash,
            balance: self.kyc_balance(&user.ledger_account)?,
        })
    }

    fn initiate_transfer(&self, token: &str, req: &InitiateTransferRequest) -> Result<TransferInitiated> {
        self.authorize_as(token, Role::User, &req.user_id)?;
        let user = self.user_for(&req.user_id)?;
        let test = self
            .registry
            .get_test(&req.test_id)
            .map_err(|_| ControllerError::UnknownTest(req.test_id.clone()))?;
        if test.user_id != req.user_id {
            return Err(ControllerError::NotOwner(req.test_id.clone()));
        }
        if !test.is_valid_at(self.now()) {
            return Err(ControllerError::Expired(req.test_id.clone()));
        }
        let company = self.company_for(&req.company_id)?;
        if self.kyc_balance(&user.ledger_account)? < 1 {
            return Err(ControllerError::InsufficientTokens("balance is 0".into()));
        }
        let nonce = random_nonce();
        let user_hash = derive_user_hash(
            &test.test_id,
            &user.ledger_account,
            &company.ledger_account,
            &nonce,
        );
        self.registry.put_transfer(TransferRecord {
            user_hash,
            nonce,
            test_id: test.test_id,
            source_account: user.ledger_account,
            destination_company_id: company.company_id,
            block_hash: None,
            numeric_id: None,
            created_at: self.now(),
        })?;
        Ok(TransferInitiated {
            user_hash,
            destination_account: company.ledger_account,
        })
    }

    fn confirm_transfer(&self, token: &str, user_hash: &UserHash, block_hash: &TxHash) -> Result<TransferConfirmed> {
        let user_id = self.authorize(token, Role::User)?;
        let user = self.user_for(&user_id)?;
        let transfer = self
            .registry
            .find_transfer_by_user_hash(user_hash)
            .map_err(|_| ControllerError::NotFound(format!("transfer {user_hash}")))?;
        if transfer.source_account != user.ledger_account {
            return Err(ControllerError::NotOwner(format!("transfer {user_hash}")));
        }
        if let (Some(done), Some(numeric_id)) = (transfer.block_hash, transfer.numeric_id) {
            // A repeated confirmation of the same payment answers the same way.
            if done == *block_hash {
                return Ok(TransferConfirmed {
                    numeric_id,
                    qr_text: qr_text(block_hash),
                });
            }
            return Err(ControllerError::AlreadyBackfilled(user_hash.to_hex()));
        }
        let rec = self.applied_tx(block_hash)?;
        let company = self.company_for(&transfer.destination_company_id)?;
        let (destination, asset, amount) = match rec.tx.tx.operations.as_slice() {
            [Operation::Payment {
                destination,
                asset,
                amount,
            }] => (destination, asset, *amount),
            _ => {
                return Err(ControllerError::PartyMismatch(
                    "transaction must hold exactly one payment".into(),
                ))
            }
        };
        if *asset != self.ledger.kyc_asset() {
            return Err(ControllerError::WrongAsset(asset.code.clone()));
        }
        if amount < 1 {
            return Err(ControllerError::WrongAsset("payment carries no token".into()));
        }
        if rec.tx.tx.source != transfer.source_account {
            return Err(ControllerError::PartyMismatch("payment source is not the user".into()));
        }
        if *destination != company.ledger_account {
            return Err(ControllerError::PartyMismatch(
                "payment destination is not the company".into(),
            ));
        }
        let memo_ok = match rec.tx.tx.memo {
            Memo::Hash(bytes) => bytes[..16] == user_hash.0 && bytes[16..].iter().all(|&b| b == 0),
            Memo::None => false,
        };
        if !memo_ok {
            return Err(ControllerError::MemoMismatch(format!(
                "memo does not carry {user_hash}"
            )));
        }
        let numeric_id = match self.registry.backfill_next(user_hash, *block_hash) {
            Ok(n) => n,
            Err(crate::registry::RegistryError::AlreadyBackfilled) => {
                // Lost a race with a concurrent confirmation.
                let t = self.registry.find_transfer_by_user_hash(user_hash)?;
                match (t.block_hash, t.numeric_id) {
                    (Some(h), Some(n)) if h == *block_hash => n,
                    _ => return Err(ControllerError::AlreadyBackfilled(user_hash.to_hex())),
                }
            }
            Err(e) => return Err(e.into()),
        };
        Ok(TransferConfirmed {
            numeric_id,
            qr_text: qr_text(block_hash),
        })
    }

    fn get_qr_payload(&self, token: &str, numeric_id: u64) -> Result<QrPayload> {
        let user_id = self.authorize(token, Role::User)?;
        let user = self.user_for(&user_id)?;
        let transfer = self
            .registry
            .find_transfer_by_numeric_id(numeric_id)
            .map_err(|_| ControllerError::NotFound(format!("numeric id {numeric_id}")))?;
        let block_hash = transfer
            .block_hash
            .ok_or_else(|| ControllerError::NotFound(format!("numeric id {numeric_id}")))?;
        if transfer.source_account != user.ledger_account {
            return Err(ControllerError::NotOwner(format!("numeric id {numeric_id}")));
        }
        Ok(QrPayload {
            numeric_id,
            qr_text: qr_text(&block_hash),
        })
    }

    fn fetch_certificate(&self, token: &str, company_id: &str, user_hash: &UserHash) -> Result<SealedEnvelope> {
        self.authorize_as(token, Role::Company, company_id)?;
        let company = self.company_for(company_id)?;
        let transfer = self
            .registry
            .find_transfer_by_user_hash(user_hash)
            .map_err(|_| ControllerError::NotFound(format!("transfer {user_hash}")))?;
        if transfer.destination_company_id != company.company_id {
            return Err(ControllerError::NotDestination(user_hash.to_hex()));
        }
        if !transfer.is_backfilled() {
            return Err(ControllerError::NotBackfilled(user_hash.to_hex()));
        }
        let cert = self.certificate_for(&transfer)?;
        Ok(seal(&cert.to_bytes(), &company.encryption_public_key)?)
    }

    fn buy_back(&self, token: &str, req: &BuybackRequest) -> Result<BuybackCredit> {
        self.authorize_as(token, Role::Company, &req.company_id)?;
        let company = self.company_for(&req.company_id)?;
        let rec = self.applied_tx(&req.return_tx_hash)?;
        let issuer = self.keys.account_id();
        let amount = match rec.tx.tx.operations.as_slice() {
            [Operation::Payment {
                destination,
                asset,
                amount,
            }] if rec.tx.tx.source == company.ledger_account
                && *destination == issuer
                && *asset == self.ledger.kyc_asset() =>
            {
                *amount
            }
            _ => {
                return Err(ControllerError::WrongDirection(
                    "not a KYC payment from the company to the issuer".into(),
                ))
            }
        };
        if self.registry.get_claim(&req.return_tx_hash).is_some() {
            return Err(ControllerError::AlreadyClaimed(req.return_tx_hash.to_hex()));
        }
        if amount != req.n {
            return Err(ControllerError::AmountMismatch(format!(
                "returned {amount}, claimed {}",
                req.n
            )));
        }
        let credit = self.config.buyback_credit(req.n);
        self.registry.claim_buyback(BuybackClaim {
            tx_hash: req.return_tx_hash,
            company_id: company.company_id.clone(),
            amount,
            credit,
            claimed_at: self.now(),
        })?;
        Ok(BuybackCredit {
            credit,
            credit_balance: self.registry.get_company(&company.company_id)?.credit_balance,
        })
    }

    fn ledger_info(&self) -> Result<NetworkInfo> {
        Ok(self.ledger.info().clone())
    }

    fn ledger_account(&self, account: &AccountId) -> Result<AccountView> {
        let acct = self.ledger.get_account(account)?;
        Ok(AccountView {
            account: acct.id,
            sequence: acct.sequence,
            balance: acct.trustlines.get(&self.ledger.kyc_asset()).copied(),
        })
    }

    fn submit_transaction(&self, stx: &SignedTransaction) -> Result<PendingReceipt> {
        Ok(self.ledger.submit(stx.clone())?)
    }

    fn get_transaction(&self, tx_hash: &TxHash) -> Result<TransactionRecord> {
        Ok(self.ledger.get_transaction(tx_hash)?)
    }

    fn close_ledger(&self) -> Result<CloseSummary> {
        if self.config.close_mode == CloseMode::Timer {
            return Err(ControllerError::CloseDisabled("ledger closes on its timer".into()));
        }
        let block = self.ledger.close_ledger(self.now())?;
        Ok(CloseSummary {
            sequence: block.sequence,
            tx_count: block.txs.len(),
            block_digest: block.block_digest,
        })
    }
}

#[cfg(test)]
mod tests;
