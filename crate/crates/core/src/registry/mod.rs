//! Off-chain registry of users, labs, companies, tests and transfers.
//!
//! All mutations go through one mutex: each is validated against the
//! in-memory tables, appended to the journal (when persistent) and only then
//! applied, so an acknowledged write is always durable and a rejected one
//! leaves no trace. Reads clone records out of the tables.

mod journal;
mod records;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::journal::{decode_records, encode_record, Journal, HEADER_LEN, MAGIC, VERSION};
pub use self::records::*;

use crate::crypto::{Digest256, UserHash};
use crate::ledger::{AccountId, TxHash};

/// First numeric transfer identifier handed out.
pub const FIRST_NUMERIC_ID: u64 = 1_000_000_000;
/// Journal entries between automatic snapshots.
pub const DEFAULT_SNAPSHOT_EVERY: usize = 1024;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("duplicate key: {0}")]
    DuplicateKey(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("transfer already has a block hash")]
    AlreadyBackfilled,
    #[error("ledger transaction already claimed for buy-back")]
    AlreadyClaimed,
    #[error("invalid record: {0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = RegistryError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum JournalEntry {
    Snapshot(Box<Snapshot>),
    PutUser(UserRecord),
    PutLab(LabRecord),
    PutCompany(CompanyRecord),
    PutTest(TestRecord),
    PutTransfer(TransferRecord),
    Backfill {
        user_hash: UserHash,
        block_hash: TxHash,
        numeric_id: u64,
    },
    SetBiometric {
        user_id: String,
        #[serde(with = "hex::serde")]
        digest: Digest256,
    },
    ClaimBuyback(BuybackClaim),
    SetAccreditation {
        lab_id: String,
        accredited: bool,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Snapshot {
    pub users: Vec<UserRecord>,
    pub labs: Vec<LabRecord>,
    pub companies: Vec<CompanyRecord>,
    pub tests: Vec<TestRecord>,
    pub transfers: Vec<TransferRecord>,
    pub claims: Vec<BuybackClaim>,
}

#[derive(Debug, Default)]
struct Tables {
    users: BTreeMap<String, UserRecord>,
    labs: BTreeMap<String, LabRecord>,
    companies: BTreeMap<String, CompanyRecord>,
    tests: BTreeMap<String, TestRecord>,
    transfers: BTreeMap<UserHash, TransferRecord>,
    claims: HashMap<TxHash, BuybackClaim>,
    owner_by_account: HashMap<AccountId, String>,
    transfer_by_numeric: HashMap<u64, UserHash>,
    next_numeric: u64,
}

fn dup(what: &str, key: impl std::fmt::Display) -> RegistryError {
    RegistryError::DuplicateKey(format!("{what} {key}"))
}

impl Tables {
    fn new() -> Self {
        Self {
            next_numeric: FIRST_NUMERIC_ID,
            ..Default::default()
        }
    }

    fn check_account_free(&self, account: &AccountId) -> Result<()> {
        match self.owner_by_account.get(account) {
            Some(_) => Err(dup("ledger account", account)),
            None => Ok(()),
        }
    }

    fn validate(&self, entry: &JournalEntry) -> Result<()> {
        match entry {
            JournalEntry::Snapshot(_) => Ok(()),
            JournalEntry::PutUser(u) => {
                if u.user_id.is_empty() {
                    return Err(RegistryError::Invalid("empty user id"));
                }
                if self.users.contains_key(&u.user_id) {
                    return Err(dup("user", &u.user_id));
                }
                self.check_account_free(&u.ledger_account)
            }
            JournalEntry::PutLab(l) => {
                if self.labs.contains_key(&l.lab_id) {
                    return Err(dup("lab", &l.lab_id));
                }
                Ok(())
            }
            JournalEntry::PutCompany(c) => {
                if self.companies.contains_key(&c.company_id) {
                    return Err(dup("company", &c.company_id));
                }
                self.check_account_free(&c.ledger_account)
            }
            JournalEntry::PutTest(t) => {
                if self.tests.contains_key(&t.test_id) {
                    return Err(dup("test", &t.test_id));
                }
                if t.valid_until <= t.taken_at {
                    return Err(RegistryError::Invalid("valid_until must follow taken_at"));
                }
                Ok(())
            }
            JournalEntry::PutTransfer(t) => {
                if self.transfers.contains_key(&t.user_hash) {
                    return Err(dup("user hash", t.user_hash));
                }
                if t.block_hash.is_some() != t.numeric_id.is_some() {
                    return Err(RegistryError::Invalid(
                        "block hash and numeric id are set together",
                    ));
                }
                if let Some(n) = t.numeric_id {
                    if self.transfer_by_numeric.contains_key(&n) {
                        return Err(dup("numeric id", n));
                    }
                }
                Ok(())
            }
            JournalEntry::Backfill {
                user_hash,
                numeric_id,
                ..
            } => {
                let t = self
                    .transfers
                    .get(user_hash)
                    .ok_or_else(|| RegistryError::NotFound(format!("transfer {user_hash}")))?;
                if t.is_backfilled() {
                    return Err(RegistryError::AlreadyBackfilled);
                }
                if self.transfer_by_numeric.contains_key(numeric_id) {
                    return Err(dup("numeric id", numeric_id));
                }
                Ok(())
            }
            JournalEntry::SetBiometric { user_id, .. } => {
                if !self.users.contains_key(user_id) {
                    return Err(RegistryError::UnknownUser(user_id.clone()));
                }
                Ok(())
            }
            JournalEntry::ClaimBuyback(c) => {
                if self.claims.contains_key(&c.tx_hash) {
                    return Err(RegistryError::AlreadyClaimed);
                }
                if !self.companies.contains_key(&c.company_id) {
                    return Err(RegistryError::NotFound(format!("company {}", c.company_id)));
                }
                Ok(())
            }
            JournalEntry::SetAccreditation { lab_id, .. } => {
                if !self.labs.contains_key(lab_id) {
                    return Err(RegistryError::NotFound(format!("lab {lab_id}")));
                }
                Ok(())
            }
        }
    }

    /// Applies an entry that already passed [`Tables::validate`].
    fn commit(&mut self, entry: JournalEntry) {
        match entry {
            JournalEntry::Snapshot(s) => {
                *self = Tables::new();
                let s = *s;
                for u in s.users {
                    self.commit(JournalEntry::PutUser(u));
                }
                for l in s.labs {
                    self.commit(JournalEntry::PutLab(l));
                }
                for c in s.companies {
                    self.commit(JournalEntry::PutCompany(c));
                }
                for t in s.tests {
                    self.commit(JournalEntry::PutTest(t));
                }
                for t in s.transfers {
                    self.commit(JournalEntry::PutTransfer(t));
                }
                for c in s.claims {
                    self.claims.insert(c.tx_hash, c);
                }
            }
            JournalEntry::PutUser(u) => {
                self.owner_by_account
                    .insert(u.ledger_account, u.user_id.clone());
                self.users.insert(u.user_id.clone(), u);
            }
            JournalEntry::PutLab(l) => {
                self.labs.insert(l.lab_id.clone(), l);
            }
            JournalEntry::PutCompany(c) => {
                self.owner_by_account
                    .insert(c.ledger_account, c.company_id.clone());
                self.companies.insert(c.company_id.clone(), c);
            }
            JournalEntry::PutTest(t) => {
                self.tests.insert(t.test_id.clone(), t);
            }
            JournalEntry::PutTransfer(t) => {
                if let Some(n) = t.numeric_id {
                    self.transfer_by_numeric.insert(n, t.user_hash);
                    self.next_numeric = self.next_numeric.max(n + 1);
                }
                self.transfers.insert(t.user_hash, t);
            }
            JournalEntry::Backfill {
                user_hash,
                block_hash,
                numeric_id,
            } => {
                let t = self.transfers.get_mut(&user_hash).expect("validated");
                t.block_hash = Some(block_hash);
                t.numeric_id = Some(numeric_id);
                self.transfer_by_numeric.insert(numeric_id, user_hash);
                self.next_numeric = self.next_numeric.max(numeric_id + 1);
            }
            JournalEntry::SetBiometric { user_id, digest } => {
                let u = self.users.get_mut(&user_id).expect("validated");
                u.biometric_digest.get_or_insert(digest);
            }
            JournalEntry::ClaimBuyback(c) => {
                let company = self.companies.get_mut(&c.company_id).expect("validated");
                company.credit_balance += c.credit;
                self.claims.insert(c.tx_hash, c);
            }
            JournalEntry::SetAccreditation { lab_id, accredited } => {
                self.labs.get_mut(&lab_id).expect("validated").accredited = accredited;
            }
        }
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            users: self.users.values().cloned().collect(),
            labs: self.labs.values().cloned().collect(),
            companies: self.companies.values().cloned().collect(),
            tests: self.tests.values().cloned().collect(),
            transfers: self.transfers.values().cloned().collect(),
            claims: self.claims.values().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JournalOptions {
    /// fsync after every append.
    pub sync: bool,
    /// Compact into a snapshot after this many appends; 0 disables.
    pub snapshot_every: usize,
}

impl Default for JournalOptions {
    fn default() -> Self {
        Self {
            sync: true,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
        }
    }
}

struct Inner {
    tables: Tables,
    journal: Option<Journal<JournalEntry>>,
    snapshot_every: usize,
}

/// Thread-safe registry store.
pub struct Registry {
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let inner = self.inner.lock();
        f.debug_struct("Registry")
            .field("users", &inner.tables.users.len())
            .field("transfers", &inner.tables.transfers.len())
            .field("persistent", &inner.journal.is_some())
            .finish()
    }
}

impl Registry {
    pub fn in_memory() -> Self {
        Self {
            inner: Mutex::new(Inner {
                tables: Tables::new(),
                journal: None,
                snapshot_every: 0,
            }),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::open_with(path, JournalOptions::default())
    }

    /// Opens a journal-backed registry, replaying whatever intact prefix survives.
    pub fn open_with(path: impl AsRef<Path>, options: JournalOptions) -> Result<Self> {
        let (journal, entries) = Journal::open(path, options.sync)?;
        let mut tables = Tables::new();
        for entry in entries {
            // Entries were validated before they were written; a failure here
            // means the file was edited by hand.
            tables.validate(&entry)?;
            tables.commit(entry);
        }
        Ok(Self {
            inner: Mutex::new(Inner {
                tables,
                journal: Some(journal),
                snapshot_every: options.snapshot_every,
            }),
        })
    }

    fn write(&self, entry: JournalEntry) -> Result<()> {
        self.write_with(|_| entry)
    }

    /// Builds an entry from current tables, then validates, journals and applies it
    /// under one lock.
    fn write_with(&self, make: impl FnOnce(&Tables) -> JournalEntry) -> Result<()> {
        let mut inner = self.inner.lock();
        let entry = make(&inner.tables);
        inner.tables.validate(&entry)?;
        let Inner {
            tables,
            journal,
            snapshot_every,
        } = &mut *inner;
        if let Some(journal) = journal.as_mut() {
            journal.append(&entry)?;
        }
        tables.commit(entry);
        if let Some(journal) = journal.as_mut() {
            if *snapshot_every > 0 && journal.appended() >= *snapshot_every {
                let snap = JournalEntry::Snapshot(Box::new(tables.snapshot()));
                journal.rewrite(std::slice::from_ref(&snap))?;
            }
        }
        Ok(())
    }

    /// Rewrites the journal as a single snapshot entry.
    pub fn compact(&self) -> Result<()> {
        let mut inner = self.inner.lock();
        let snap = JournalEntry::Snapshot(Box::new(inner.tables.snapshot()));
        if let Some(journal) = inner.journal.as_mut() {
            journal.rewrite(std::slice::from_ref(&snap))?;
        }
        Ok(())
    }

    fn read<R>(&self, f: impl FnOnce(&Tables) -> R) -> R {
        f(&self.inner.lock().tables)
    }

    pub fn put_user(&self, user: UserRecord) -> Result<()> {
        self.write(JournalEntry::PutUser(user))
    }

    pub fn get_user(&self, user_id: &str) -> Result<UserRecord> {
        self.read(|t| t.users.get(user_id).cloned())
            .ok_or_else(|| RegistryError::NotFound(format!("user {user_id}")))
    }

    pub fn put_lab(&self, lab: LabRecord) -> Result<()> {
        self.write(JournalEntry::PutLab(lab))
    }

    pub fn get_lab(&self, lab_id: &str) -> Result<LabRecord> {
        self.read(|t| t.labs.get(lab_id).cloned())
            .ok_or_else(|| RegistryError::NotFound(format!("lab {lab_id}")))
    }

    pub fn put_company(&self, company: CompanyRecord) -> Result<()> {
        self.write(JournalEntry::PutCompany(company))
    }

    pub fn get_company(&self, company_id: &str) -> Result<CompanyRecord> {
        self.read(|t| t.companies.get(company_id).cloned())
            .ok_or_else(|| RegistryError::NotFound(format!("company {company_id}")))
    }

    pub fn put_test(&self, test: TestRecord) -> Result<()> {
        self.write(JournalEntry::PutTest(test))
    }

    pub fn get_test(&self, test_id: &str) -> Result<TestRecord> {
        self.read(|t| t.tests.get(test_id).cloned())
            .ok_or_else(|| RegistryError::NotFound(format!("test {test_id}")))
    }

    pub fn put_transfer(&self, transfer: TransferRecord) -> Result<()> {
        self.write(JournalEntry::PutTransfer(transfer))
    }

    pub fn get_transfer(&self, user_hash: &UserHash) -> Result<TransferRecord> {
        self.find_transfer_by_user_hash(user_hash)
    }

    pub fn find_transfer_by_user_hash(&self, user_hash: &UserHash) -> Result<TransferRecord> {
        self.read(|t| t.transfers.get(user_hash).cloned())
            .ok_or_else(|| RegistryError::NotFound(format!("transfer {user_hash}")))
    }

    pub fn find_transfer_by_numeric_id(&self, numeric_id: u64) -> Result<TransferRecord> {
        self.read(|t| {
            t.transfer_by_numeric
                .get(&numeric_id)
                .and_then(|h| t.transfers.get(h))
                .cloned()
        })
        .ok_or_else(|| RegistryError::NotFound(format!("numeric id {numeric_id}")))
    }

    pub fn set_lab_accreditation(&self, lab_id: &str, accredited: bool) -> Result<()> {
        self.write(JournalEntry::SetAccreditation {
            lab_id: lab_id.to_string(),
            accredited,
        })
    }

    /// Accredited labs ordered by `lab_id`.
    pub fn list_accredited_labs(&self) -> Vec<LabRecord> {
        self.read(|t| t.labs.values().filter(|l| l.accredited).cloned().collect())
    }

    pub fn list_companies(&self) -> Vec<CompanyRecord> {
        self.read(|t| t.companies.values().cloned().collect())
    }

    /// The user's tests with `valid_until > now_ms`, ordered by `test_id`.
    pub fn list_valid_tests(&self, user_id: &str, now_ms: u64) -> Result<Vec<TestRecord>> {
        self.read(|t| {
            if !t.users.contains_key(user_id) {
                return Err(RegistryError::UnknownUser(user_id.to_string()));
            }
            Ok(t.tests
                .values()
                .filter(|r| r.user_id == user_id && r.is_valid_at(now_ms))
                .cloned()
                .collect())
        })
    }

    /// Id of the user or company owning a ledger account.
    pub fn owner_of_account(&self, account: &AccountId) -> Option<String> {
        self.read(|t| t.owner_by_account.get(account).cloned())
    }

    /// Sets block hash and numeric id on a transfer, once.
    pub fn backfill_block_hash(
        &self,
        user_hash: &UserHash,
        block_hash: TxHash,
        numeric_id: u64,
    ) -> Result<()> {
        self.write(JournalEntry::Backfill {
            user_hash: *user_hash,
            block_hash,
            numeric_id,
        })
    }

    /// Backfills with the next counter value, assigned under the same lock.
    pub fn backfill_next(&self, user_hash: &UserHash, block_hash: TxHash) -> Result<u64> {
        let mut numeric_id = 0;
        self.write_with(|t| {
            numeric_id = t.next_numeric;
            JournalEntry::Backfill {
                user_hash: *user_hash,
                block_hash,
                numeric_id,
            }
        })?;
        Ok(numeric_id)
    }

    pub fn next_numeric_id(&self) -> u64 {
        self.read(|t| t.next_numeric)
    }

    /// Records a biometric digest unless one is already on file.
    pub fn set_biometric_if_absent(&self, user_id: &str, digest: Digest256) -> Result<()> {
        let present = self.get_user(user_id)?.biometric_digest.is_some();
        if present {
            return Ok(());
        }
        self.write(JournalEntry::SetBiometric {
            user_id: user_id.to_string(),
            digest,
        })
    }

    /// Credits a company for returned tokens; each ledger transaction once.
    pub fn claim_buyback(&self, claim: BuybackClaim) -> Result<()> {
        self.write(JournalEntry::ClaimBuyback(claim))
    }

    pub fn get_claim(&self, tx_hash: &TxHash) -> Option<BuybackClaim> {
        self.read(|t| t.claims.get(tx_hash).cloned())
    }

    pub fn transfers(&self) -> Vec<TransferRecord> {
        self.read(|t| t.transfers.values().cloned().collect())
    }

    pub fn tests(&self) -> Vec<TestRecord> {
        self.read(|t| t.tests.values().cloned().collect())
    }
}
