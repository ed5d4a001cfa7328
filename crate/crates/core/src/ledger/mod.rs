//! Private single-validator token ledger.
//!
//! One controller account issues a fixed supply of the `KYC` asset. Accounts
//! hold it through trustlines, pay each other with memo-bearing transactions,
//! and a single validator closes queued transactions into hash-chained blocks
//! either on demand or on a timer ([`CloseTimer`]).

mod log;
mod state;
mod timer;
mod types;

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex, RwLock};
use thiserror::Error;

pub use self::log::{
    encode_log, parse_log, verify_blocks, verify_log_bytes, BlockLog, ParsedLog,
    VerificationReport,
};
pub use self::timer::{CloseTimer, DEFAULT_CLOSE_INTERVAL_MS};
pub(crate) use self::timer::unix_millis;
pub use self::types::*;

use self::state::LedgerState;
use crate::crypto::SigningKeyPair;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("network id must not be empty")]
    EmptyNetworkId,
    #[error("KYC supply must be at least 1")]
    ZeroSupply,
    #[error("signature does not verify under the source account key")]
    BadSignature,
    #[error("source account {0} does not exist")]
    UnknownSource(AccountId),
    #[error("bad sequence: expected {expected}, got {got}")]
    BadSequence { expected: u64, got: u64 },
    #[error("malformed transaction: {0}")]
    Malformed(&'static str),
    #[error("transaction not found")]
    NotFound,
    #[error("account {0} does not exist")]
    UnknownAccount(AccountId),
    #[error("account {0} has no trustline for the asset")]
    NoTrustline(AccountId),
    #[error("block log does not match this network: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PendingReceipt {
    pub tx_hash: TxHash,
}

/// Public parameters fixed at network creation.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NetworkInfo {
    pub network_id: String,
    pub issuer: AccountId,
    pub asset: Asset,
    pub kyc_supply: u64,
}

/// Supply counters. `issued` only grows; tokens returned to the issuer are
/// counted in `redeemed` rather than becoming issuable again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SupplySnapshot {
    pub kyc_supply: u64,
    pub issued: u64,
    pub redeemed: u64,
    pub circulating: u64,
}

impl SupplySnapshot {
    /// `issued = circulating + redeemed` and `issued ≤ kyc_supply`.
    pub fn conserved(&self) -> bool {
        self.issued == self.circulating + self.redeemed && self.issued <= self.kyc_supply
    }
}

#[derive(Default)]
struct Queue {
    txs: VecDeque<(TxHash, SignedTransaction)>,
    /// Highest queued sequence per source, so several transactions from one
    /// account can wait for the same close.
    pending_seq: HashMap<AccountId, u64>,
}

struct Shared {
    info: NetworkInfo,
    state: RwLock<LedgerState>,
    queue: Mutex<Queue>,
    log: Mutex<Option<BlockLog>>,
    closes: Mutex<u64>,
    closed: Condvar,
}

/// Thread-safe handle to a ledger. Cloning shares the same ledger.
///
/// Reads observe closed state only; submissions are serialized through the
/// queue and one close runs at a time.
#[derive(Clone)]
pub struct LedgerHandle {
    shared: Arc<Shared>,
}

impl std::fmt::Debug for LedgerHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LedgerHandle")
            .field("network_id", &self.shared.info.network_id)
            .field("height", &self.height())
            .finish()
    }
}

impl LedgerHandle {
    /// In-memory ledger with the controller account and KYC asset declared
    /// and no blocks closed.
    pub fn create_network(
        network_id: &str,
        controller_keys: &SigningKeyPair,
        kyc_supply: u64,
    ) -> Result<Self, LedgerError> {
        Self::with_issuer(network_id, controller_keys.account_id(), kyc_supply)
    }

    pub fn with_issuer(
        network_id: &str,
        issuer: AccountId,
        kyc_supply: u64,
    ) -> Result<Self, LedgerError> {
        if network_id.is_empty() {
            return Err(LedgerError::EmptyNetworkId);
        }
        if kyc_supply == 0 {
            return Err(LedgerError::ZeroSupply);
        }
        let state = LedgerState::genesis(network_id.to_string(), issuer, kyc_supply);
        Ok(Self {
            shared: Arc::new(Shared {
                info: NetworkInfo {
                    network_id: network_id.to_string(),
                    issuer,
                    asset: Asset::kyc(issuer),
                    kyc_supply,
                },
                state: RwLock::new(state),
                queue: Mutex::new(Queue::default()),
                log: Mutex::new(None),
                closes: Mutex::new(0),
                closed: Condvar::new(),
            }),
        })
    }

    /// Ledger persisted to an append-only block log at `path`. Existing blocks
    /// are verified and replayed; every later close is appended.
    pub fn open_persistent(
        path: impl AsRef<Path>,
        network_id: &str,
        issuer: AccountId,
        kyc_supply: u64,
    ) -> Result<Self, LedgerError> {
        let handle = Self::with_issuer(network_id, issuer, kyc_supply)?;
        let (log, blocks) = BlockLog::open(path)?;
        let report = verify_blocks(network_id, &blocks);
        if !report.ok {
            return Err(LedgerError::Corrupt(format!(
                "verification failed at block {}",
                report.first_bad_block.unwrap_or_default()
            )));
        }
        {
            let mut state = handle.shared.state.write();
            for block in blocks {
                state.apply_block(block);
            }
        }
        *handle.shared.log.lock() = Some(log);
        Ok(handle)
    }

    pub fn info(&self) -> &NetworkInfo {
        &self.shared.info
    }

    pub fn network_id(&self) -> &str {
        &self.shared.info.network_id
    }

    pub fn issuer(&self) -> AccountId {
        self.shared.info.issuer
    }

    pub fn kyc_asset(&self) -> Asset {
        self.shared.info.asset.clone()
    }

    /// Validates and queues a transaction for the next close.
    pub fn submit(&self, stx: SignedTransaction) -> Result<PendingReceipt, LedgerError> {
        stx.tx.well_formed().map_err(LedgerError::Malformed)?;
        if !stx.verify(self.network_id()) {
            return Err(LedgerError::BadSignature);
        }
        let tx_hash = stx.hash(self.network_id());
        let mut queue = self.shared.queue.lock();
        let closed_seq = {
            let state = self.shared.state.read();
            state
                .accounts
                .get(&stx.tx.source)
                .map(|a| a.sequence)
                .ok_or(LedgerError::UnknownSource(stx.tx.source))?
        };
        let current = queue
            .pending_seq
            .get(&stx.tx.source)
            .copied()
            .unwrap_or(closed_seq)
            .max(closed_seq);
        let expected = current + 1;
        if stx.tx.sequence != expected {
            return Err(LedgerError::BadSequence {
                expected,
                got: stx.tx.sequence,
            });
        }
        queue.pending_seq.insert(stx.tx.source, expected);
        queue.txs.push_back((tx_hash, stx));
        Ok(PendingReceipt { tx_hash })
    }

    /// Applies every queued transaction in FIFO order and appends a block.
    ///
    /// The close time is clamped so it never runs backwards.
    pub fn close_ledger(&self, now_ms: u64) -> Result<LedgerBlock, LedgerError> {
        let mut queue = self.shared.queue.lock();
        let mut state = self.shared.state.write();
        let txs: Vec<SignedTransaction> = queue.txs.iter().map(|(_, stx)| stx.clone()).collect();
        let block = {
            let mut block = LedgerBlock {
                sequence: state.blocks.len() as u64 + 1,
                prev_hash: state.last_digest(),
                close_time: now_ms.max(state.last_close_time()),
                txs,
                block_digest: [0; 32],
            };
            block.block_digest = block.compute_digest(self.network_id());
            block
        };
        if let Some(log) = self.shared.log.lock().as_mut() {
            log.append(&block)?;
        }
        queue.txs.clear();
        queue.pending_seq.clear();
        state.apply_block(block.clone());
        drop(state);
        drop(queue);

        *self.shared.closes.lock() += 1;
        self.shared.closed.notify_all();
        tracing::debug!(sequence = block.sequence, txs = block.txs.len(), "ledger closed");
        Ok(block)
    }

    pub fn get_transaction(&self, tx_hash: &TxHash) -> Result<TransactionRecord, LedgerError> {
        self.shared
            .state
            .read()
            .records
            .get(tx_hash)
            .cloned()
            .ok_or(LedgerError::NotFound)
    }

    /// Blocks until `tx_hash` appears in a closed ledger or `timeout` passes.
    pub fn wait_for_transaction(
        &self,
        tx_hash: &TxHash,
        timeout: Duration,
    ) -> Result<TransactionRecord, LedgerError> {
        let deadline = Instant::now() + timeout;
        let mut closes = self.shared.closes.lock();
        loop {
            if let Ok(rec) = self.get_transaction(tx_hash) {
                return Ok(rec);
            }
            if self
                .shared
                .closed
                .wait_until(&mut closes, deadline)
                .timed_out()
            {
                return self.get_transaction(tx_hash);
            }
        }
    }

    pub fn get_balance(&self, account: &AccountId, asset: &Asset) -> Result<u64, LedgerError> {
        let state = self.shared.state.read();
        let acct = state
            .accounts
            .get(account)
            .ok_or(LedgerError::UnknownAccount(*account))?;
        acct.trustlines
            .get(asset)
            .copied()
            .ok_or(LedgerError::NoTrustline(*account))
    }

    pub fn get_account(&self, account: &AccountId) -> Result<Account, LedgerError> {
        self.shared
            .state
            .read()
            .accounts
            .get(account)
            .cloned()
            .ok_or(LedgerError::UnknownAccount(*account))
    }

    /// Next sequence number a new transaction from `account` must carry,
    /// counting transactions already queued.
    pub fn next_sequence(&self, account: &AccountId) -> Result<u64, LedgerError> {
        let queue = self.shared.queue.lock();
        let closed = self.get_account(account)?.sequence;
        let pending = queue.pending_seq.get(account).copied().unwrap_or(0);
        Ok(closed.max(pending) + 1)
    }

    pub fn supply(&self) -> SupplySnapshot {
        let state = self.shared.state.read();
        SupplySnapshot {
            kyc_supply: state.supply,
            issued: state.issued,
            redeemed: state.redeemed,
            circulating: state.circulating(),
        }
    }

    pub fn height(&self) -> u64 {
        self.shared.state.read().blocks.len() as u64
    }

    pub fn pending_count(&self) -> usize {
        self.shared.queue.lock().txs.len()
    }

    pub fn blocks(&self) -> Vec<LedgerBlock> {
        self.shared.state.read().blocks.clone()
    }

    pub fn block(&self, sequence: u64) -> Option<LedgerBlock> {
        let idx = usize::try_from(sequence.checked_sub(1)?).ok()?;
        self.shared.state.read().blocks.get(idx).cloned()
    }

    /// The closed chain encoded exactly as the block log stores it.
    pub fn chain_bytes(&self) -> Vec<u8> {
        encode_log(&self.shared.state.read().blocks)
    }

    pub fn verify_chain(&self) -> VerificationReport {
        verify_blocks(self.network_id(), &self.shared.state.read().blocks)
    }
}
