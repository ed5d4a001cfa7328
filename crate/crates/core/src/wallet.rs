//! End-user wallet: key custody, registration, token purchase and the
//! certificate send pipeline.
//!
//! The wallet file is JSON `{version, body, checksum}` where `checksum` is the
//! hex digest of the serialized body. While a [`Wallet`] is open a sidecar
//! `<file>.lock` is held with an exclusive OS lock.
//!
//! `send` persists its progress before every externally visible step, so a
//! crash at any point resumes without spending a second token.

use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::*;
use crate::crypto::{digest256, SigningKeyPair, UserHash};
use crate::ledger::{
    AccountId, Memo, Operation, SignedTransaction, Transaction, TransactionRecord, TxHash,
    TxResult,
};

pub const WALLET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WalletError {
    #[error(transparent)]
    Api(#[from] ControllerError),
    #[error("wallet file {0} already exists")]
    Exists(PathBuf),
    #[error("wallet is locked by another process")]
    Locked,
    #[error("wallet file is corrupt: {0}")]
    Corrupt(String),
    #[error("wallet is not registered")]
    NotRegistered,
    #[error("wallet is already registered as {0}")]
    AlreadyRegistered(String),
    #[error("another send is in progress (test {test_id} to {company_id}); finish it first")]
    SendInProgress { test_id: String, company_id: String },
    #[error("ledger payment failed: {0:?}")]
    PaymentFailed(TxResult),
    #[error("timed out waiting for ledger close")]
    Timeout,
    #[error("simulated crash at {0:?}")]
    SimulatedCrash(CrashPoint),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl WalletError {
    /// Process exit code; controller errors keep their own table.
    pub fn exit_code(&self) -> i32 {
        match self {
            WalletError::Api(e) => e.exit_code(),
            WalletError::Exists(_) => 50,
            WalletError::Locked => 51,
            WalletError::Corrupt(_) => 52,
            WalletError::NotRegistered => 53,
            WalletError::AlreadyRegistered(_) => 54,
            WalletError::SendInProgress { .. } => 55,
            WalletError::PaymentFailed(_) => 56,
            WalletError::Timeout => 57,
            WalletError::SimulatedCrash(_) => 70,
            WalletError::Io(_) => 74,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            WalletError::Api(e) => e.code(),
            WalletError::Exists(_) => "WALLET_EXISTS",
            WalletError::Locked => "WALLET_LOCKED",
            WalletError::Corrupt(_) => "WALLET_CORRUPT",
            WalletError::NotRegistered => "NOT_REGISTERED",
            WalletError::AlreadyRegistered(_) => "ALREADY_REGISTERED",
            WalletError::SendInProgress { .. } => "SEND_IN_PROGRESS",
            WalletError::PaymentFailed(_) => "PAYMENT_FAILED",
            WalletError::Timeout => "TIMEOUT",
            WalletError::SimulatedCrash(_) => "SIMULATED_CRASH",
            WalletError::Io(_) => "IO",
        }
    }
}

type Result<T> = std::result::Result<T, WalletError>;

/// Places where `send` can be made to stop, for crash-recovery tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrashPoint {
    /// User hash issued and saved; no payment signed yet.
    AfterInitiate,
    /// Payment signed and saved but not submitted.
    AfterSign,
    /// Payment submitted to the ledger.
    AfterSubmit,
    /// Payment applied in a closed ledger; not yet confirmed.
    AfterApplied,
}

impl std::str::FromStr for CrashPoint {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown crash point {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub user_id: String,
    pub auth_token: String,
}

/// A send between `initiate_transfer` and `confirm_transfer`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingSend {
    pub test_id: String,
    pub company_id: String,
    pub user_hash: UserHash,
    pub destination_account: AccountId,
    pub payment: Option<SignedTransaction>,
    pub tx_hash: Option<TxHash>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentCertificate {
    pub numeric_id: u64,
    pub qr_text: String,
    pub test_id: String,
    pub company_id: String,
    pub user_hash: UserHash,
    pub tx_hash: TxHash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalletState {
    /// Hex Ed25519 secret; never sent anywhere.
    pub secret_key: String,
    pub server: String,
    pub registration: Option<Registration>,
    pub pending: Option<PendingSend>,
    #[serde(default)]
    pub sent: Vec<SentCertificate>,
}

#[derive(Serialize, Deserialize)]
struct WalletFile {
    version: u32,
    body: WalletState,
    checksum: String,
}

fn checksum(body: &WalletState) -> String {
    hex::encode(digest256(&serde_json::to_vec(body).expect("wallet state serializes")))
}

fn lock_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".lock");
    PathBuf::from(name)
}

fn acquire_lock(path: &Path) -> Result<File> {
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(lock_path(path))?;
    match file.try_lock() {
        Ok(()) => Ok(file),
        Err(std::fs::TryLockError::WouldBlock) => Err(WalletError::Locked),
        Err(std::fs::TryLockError::Error(e)) => Err(e.into()),
    }
}

/// Tuning for `send`.
#[derive(Debug, Clone, Default)]
pub struct SendOptions {
    pub crash_at: Option<CrashPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SendOutcome {
    pub numeric_id: u64,
    pub qr_text: String,
    pub user_hash: UserHash,
    pub tx_hash: TxHash,
    /// True when an interrupted send was finished instead of a new one started.
    pub resumed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceView {
    pub account: AccountId,
    pub balance: u64,
    pub sequence: u64,
}

/// An open wallet file.
#[derive(Debug)]
pub struct Wallet {
    path: PathBuf,
    state: WalletState,
    keys: SigningKeyPair,
    _lock: File,
    /// How long to wait for a payment to appear in a closed ledger.
    pub await_timeout: Duration,
}

impl Wallet {
    /// Creates a wallet with a fresh signing key. Fails if the file exists.
    pub fn create(path: impl AsRef<Path>, server: &str) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let lock = acquire_lock(&path)?;
        if path.exists() {
            return Err(WalletError::Exists(path));
        }
        let keys = SigningKeyPair::generate();
        let wallet = Self {
            state: WalletState {
                secret_key: hex::encode(keys.secret_bytes()),
                server: server.to_string(),
                registration: None,
                pending: None,
                sent: Vec::new(),
            },
            path,
            keys,
            _lock: lock,
            await_timeout: Duration::from_secs(30),
        };
        wallet.save()?;
        Ok(wallet)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let lock = acquire_lock(&path)?;
        let bytes = std::fs::read(&path)?;
        let file: WalletFile =
            serde_json::from_slice(&bytes).map_err(|e| WalletError::Corrupt(e.to_string()))?;
        if file.version != WALLET_VERSION {
            return Err(WalletError::Corrupt(format!("unsupported version {}", file.version)));
        }
        if file.checksum != checksum(&file.body) {
            return Err(WalletError::Corrupt("checksum mismatch".into()));
        }
        let keys = SigningKeyPair::from_secret_hex(&file.body.secret_key)
            .map_err(|e| WalletError::Corrupt(e.to_string()))?;
        Ok(Self {
            path,
            state: file.body,
            keys,
            _lock: lock,
            await_timeout: Duration::from_secs(30),
        })
    }

    /// Writes the state atomically (temp file, fsync, rename).
    fn save(&self) -> Result<()> {
        let file = WalletFile {
            version: WALLET_VERSION,
            checksum: checksum(&self.state),
            body: self.state.clone(),
        };
        let tmp = self.path.with_extension("tmp");
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, &file)
                .map_err(|e| WalletError::Io(e.into()))?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, &self.path)?;
        Ok(())
    }

    pub fn state(&self) -> &WalletState {
        &self.state
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn account(&self) -> AccountId {
        self.keys.account_id()
    }

    pub fn server(&self) -> &str {
        &self.state.server
    }

    pub fn set_server(&mut self, server: &str) -> Result<()> {
        if self.state.server != server {
            self.state.server = server.to_string();
            self.save()?;
        }
        Ok(())
    }

    fn registration(&self) -> Result<&Registration> {
        self.state.registration.as_ref().ok_or(WalletError::NotRegistered)
    }

    pub fn cmd_register(&mut self, api: &dyn ControllerApi, name: &str, national_id: &str) -> Result<Registration> {
        if let Some(r) = &self.state.registration {
            return Err(WalletError::AlreadyRegistered(r.user_id.clone()));
        }
        let reg = api.register_user(&RegisterUserRequest {
            identity: IdentityInput {
                name: name.to_string(),
                national_id: national_id.to_string(),
            },
            wallet_public_key: self.account(),
        })?;
        let reg = Registration {
            user_id: reg.user_id,
            auth_token: reg.auth_token,
        };
        self.state.registration = Some(reg.clone());
        self.save()?;
        Ok(reg)
    }

    pub fn cmd_list_labs(&self, api: &dyn ControllerApi) -> Result<Vec<LabSummary>> {
        Ok(api.list_labs()?)
    }

    pub fn cmd_tests(&self, api: &dyn ControllerApi) -> Result<Vec<TestSummary>> {
        let reg = self.registration()?;
        Ok(api.list_valid_tests(&reg.auth_token, &reg.user_id)?)
    }

    pub fn cmd_buy(&self, api: &dyn ControllerApi, n: u64, payment_proof: &str) -> Result<Purchase> {
        let reg = self.registration()?;
        Ok(api.purchase_tokens(
            &reg.auth_token,
            &PurchaseRequest {
                user_id: reg.user_id.clone(),
                n,
                payment_proof: payment_proof.to_string(),
            },
        )?)
    }

    pub fn cmd_balance(&self, api: &dyn ControllerApi) -> Result<BalanceView> {
        let view = api.ledger_account(&self.account())?;
        Ok(BalanceView {
            account: view.account,
            balance: view.balance.unwrap_or(0),
            sequence: view.sequence,
        })
    }

    pub fn cmd_show_qr(&self, api: &dyn ControllerApi, numeric_id: u64) -> Result<QrPayload> {
        let reg = self.registration()?;
        Ok(api.get_qr_payload(&reg.auth_token, numeric_id)?)
    }

    /// Sends a certificate: initiate, pay one token with the user hash as
    /// memo, wait for the close, confirm.
    ///
    /// An interrupted send for the same test and company is resumed; one for
    /// a different pair must be finished first with [`Wallet::cmd_resume`].
    pub fn cmd_send(&mut self, api: &dyn ControllerApi, test_id: &str, company_id: &str, opts: &SendOptions) -> Result<SendOutcome> {
        self.registration()?;
        let resumed = match &self.state.pending {
            Some(p) if p.test_id == test_id && p.company_id == company_id => true,
            Some(p) => {
                return Err(WalletError::SendInProgress {
                    test_id: p.test_id.clone(),
                    company_id: p.company_id.clone(),
                })
            }
            None => false,
        };
        if !resumed {
            let reg = self.registration()?;
            let init = api.initiate_transfer(
                &reg.auth_token,
                &InitiateTransferRequest {
                    user_id: reg.user_id.clone(),
                    test_id: test_id.to_string(),
                    company_id: company_id.to_string(),
                },
            )?;
            self.state.pending = Some(PendingSend {
                test_id: test_id.to_string(),
                company_id: company_id.to_string(),
                user_hash: init.user_hash,
                destination_account: init.destination_account,
                payment: None,
                tx_hash: None,
            });
            self.save()?;
            crash_check(opts, CrashPoint::AfterInitiate)?;
        }
        self.drive(api, opts, resumed)
    }

    /// Finishes an interrupted send, if any.
    pub fn cmd_resume(&mut self, api: &dyn ControllerApi, opts: &SendOptions) -> Result<Option<SendOutcome>> {
        if self.state.pending.is_none() {
            return Ok(None);
        }
        self.drive(api, opts, true).map(Some)
    }

    fn drive(&mut self, api: &dyn ControllerApi, opts: &SendOptions, resumed: bool) -> Result<SendOutcome> {
        let record = loop {
            let pending = self.state.pending.clone().expect("pending send");
            let (stx, tx_hash) = match (pending.payment, pending.tx_hash) {
                (Some(stx), Some(h)) => (stx, h),
                _ => {
                    let stx = self.sign_payment(api, &pending.user_hash, pending.destination_account)?;
                    let network = api.ledger_info()?.network_id;
                    let h = stx.hash(&network);
                    let p = self.state.pending.as_mut().expect("pending send");
                    p.payment = Some(stx.clone());
                    p.tx_hash = Some(h);
                    self.save()?;
                    crash_check(opts, CrashPoint::AfterSign)?;
                    (stx, h)
                }
            };
            match self.submit_and_await(api, &stx, &tx_hash, opts)? {
                Some(rec) => break rec,
                None => {
                    // The signed payment lost its sequence number to another
                    // transaction and can never apply; sign a fresh one.
                    let p = self.state.pending.as_mut().expect("pending send");
                    p.payment = None;
                    p.tx_hash = None;
                    self.save()?;
                }
            }
        };
        if !record.result.is_applied() {
            // Nothing was spent; the transfer is abandoned.
            self.state.pending = None;
            self.save()?;
            return Err(WalletError::PaymentFailed(record.result));
        }
        crash_check(opts, CrashPoint::AfterApplied)?;

        let pending = self.state.pending.clone().expect("pending send");
        let reg = self.registration()?;
        let conf = api.confirm_transfer(&reg.auth_token, &pending.user_hash, &record.tx_hash)?;
        self.state.sent.push(SentCertificate {
            numeric_id: conf.numeric_id,
            qr_text: conf.qr_text.clone(),
            test_id: pending.test_id,
            company_id: pending.company_id,
            user_hash: pending.user_hash,
            tx_hash: record.tx_hash,
        });
        self.state.pending = None;
        self.save()?;
        Ok(SendOutcome {
            numeric_id: conf.numeric_id,
            qr_text: conf.qr_text,
            user_hash: pending.user_hash,
            tx_hash: record.tx_hash,
            resumed,
        })
    }

    fn sign_payment(&self, api: &dyn ControllerApi, user_hash: &UserHash, destination: AccountId) -> Result<SignedTransaction> {
        let info = api.ledger_info()?;
        let account = api.ledger_account(&self.account())?;
        let tx = Transaction {
            source: self.account(),
            sequence: account.sequence + 1,
            operations: vec![Operation::Payment {
                destination,
                asset: info.asset,
                amount: 1,
            }],
            memo: Memo::from_user_hash(user_hash),
        };
        Ok(tx.sign(&info.network_id, &self.keys))
    }

    /// Submits unless already on the ledger, then waits for the close.
    /// `None` means the payment can no longer apply.
    fn submit_and_await(&self, api: &dyn ControllerApi, stx: &SignedTransaction, tx_hash: &TxHash, opts: &SendOptions) -> Result<Option<TransactionRecord>> {
        if let Some(rec) = lookup(api, tx_hash)? {
            return Ok(Some(rec));
        }
        match api.submit_transaction(stx) {
            Ok(_) => {}
            // Already queued by an earlier run, or the sequence was taken.
            Err(ControllerError::BadSequence(_)) => {
                let seq = api.ledger_account(&self.account())?.sequence;
                if seq >= stx.tx.sequence && lookup(api, tx_hash)?.is_none() {
                    return Ok(None);
                }
            }
            Err(e) => return Err(e.into()),
        }
        crash_check(opts, CrashPoint::AfterSubmit)?;
        match await_transaction(api, tx_hash, self.await_timeout) {
            Ok(rec) => Ok(Some(rec)),
            Err(WalletError::Timeout) => {
                let seq = api.ledger_account(&self.account())?.sequence;
                if seq >= stx.tx.sequence && lookup(api, tx_hash)?.is_none() {
                    Ok(None)
                } else {
                    Err(WalletError::Timeout)
                }
            }
            Err(e) => Err(e),
        }
    }
}

fn crash_check(opts: &SendOptions, here: CrashPoint) -> Result<()> {
    if opts.crash_at == Some(here) {
        return Err(WalletError::SimulatedCrash(here));
    }
    Ok(())
}

fn lookup(api: &dyn ControllerApi, tx_hash: &TxHash) -> Result<Option<TransactionRecord>> {
    match api.get_transaction(tx_hash) {
        Ok(rec) => Ok(Some(rec)),
        Err(ControllerError::LedgerTxMissing(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Waits until `tx_hash` is in a closed ledger. Asks for a close when the
/// controller closes on demand; otherwise polls until the timer closes.
pub fn await_transaction(api: &dyn ControllerApi, tx_hash: &TxHash, timeout: Duration) -> Result<TransactionRecord> {
    let deadline = Instant::now() + timeout;
    let mut can_close = true;
    loop {
        if let Some(rec) = lookup(api, tx_hash)? {
            return Ok(rec);
        }
        if Instant::now() >= deadline {
            return Err(WalletError::Timeout);
        }
        if can_close {
            match api.close_ledger() {
                Ok(_) => continue,
                Err(ControllerError::CloseDisabled(_)) => can_close = false,
                Err(e) => return Err(e.into()),
            }
        }
        std::thread::sleep(Duration::from_millis(100));
    }
}

/// Lab list as printed by the CLI; `"no labs"` when empty.
pub fn render_labs(labs: &[LabSummary]) -> String {
    if labs.is_empty() {
        return "no labs".to_string();
    }
    let width = labs.iter().map(|l| l.lab_id.len()).max().unwrap_or(0);
    labs.iter()
        .map(|l| format!("{:width$}  {}", l.lab_id, l.name))
        .collect::<Vec<_>>()
        .join("\n")
}
