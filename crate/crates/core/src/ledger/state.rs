//! Closed ledger state and transaction application.

use std::collections::{BTreeMap, HashMap};

use super::types::*;

#[derive(Debug, Clone)]
pub(crate) struct LedgerState {
    pub network_id: String,
    pub issuer: AccountId,
    pub kyc: Asset,
    pub supply: u64,
    pub issued: u64,
    pub redeemed: u64,
    pub accounts: BTreeMap<AccountId, Account>,
    pub blocks: Vec<LedgerBlock>,
    pub records: HashMap<TxHash, TransactionRecord>,
}

/// Copy-on-touch view of accounts used to apply one transaction atomically.
struct Overlay<'a> {
    base: &'a BTreeMap<AccountId, Account>,
    touched: BTreeMap<AccountId, Account>,
    issued: u64,
    redeemed: u64,
}

impl<'a> Overlay<'a> {
    fn exists(&self, id: &AccountId) -> bool {
        self.touched.contains_key(id) || self.base.contains_key(id)
    }

    fn get_mut(&mut self, id: &AccountId) -> Option<&mut Account> {
        if !self.touched.contains_key(id) {
            let acct = self.base.get(id)?.clone();
            self.touched.insert(*id, acct);
        }
        self.touched.get_mut(id)
    }
}

impl LedgerState {
    pub fn genesis(network_id: String, issuer: AccountId, supply: u64) -> Self {
        let mut accounts = BTreeMap::new();
        accounts.insert(issuer, Account::new(issuer));
        Self {
            network_id,
            issuer,
            kyc: Asset::kyc(issuer),
            supply,
            issued: 0,
            redeemed: 0,
            accounts,
            blocks: Vec::new(),
            records: HashMap::new(),
        }
    }

    pub fn last_digest(&self) -> [u8; 32] {
        self.blocks.last().map(|b| b.block_digest).unwrap_or([0; 32])
    }

    pub fn last_close_time(&self) -> u64 {
        self.blocks.last().map(|b| b.close_time).unwrap_or(0)
    }

    /// Applies a closed block's transactions in order and appends the block.
    /// The caller has already built or verified the block.
    pub fn apply_block(&mut self, block: LedgerBlock) {
        for stx in &block.txs {
            let tx_hash = stx.hash(&self.network_id);
            let result = self.apply_tx(&stx.tx);
            self.records.insert(
                tx_hash,
                TransactionRecord {
                    tx_hash,
                    ledger_sequence: block.sequence,
                    tx: stx.clone(),
                    result,
                },
            );
        }
        self.blocks.push(block);
    }

    /// Applies one transaction: all operations or none. The source sequence is
    /// consumed either way.
    fn apply_tx(&mut self, tx: &Transaction) -> TxResult {
        let (result, touched, issued, redeemed) = {
            let mut overlay = Overlay {
                base: &self.accounts,
                touched: BTreeMap::new(),
                issued: self.issued,
                redeemed: self.redeemed,
            };
            let result = tx
                .operations
                .iter()
                .map(|op| self.apply_op(&mut overlay, &tx.source, op))
                .find(|r| !r.is_applied())
                .unwrap_or(TxResult::Applied);
            (result, overlay.touched, overlay.issued, overlay.redeemed)
        };
        if result.is_applied() {
            self.accounts.extend(touched);
            self.issued = issued;
            self.redeemed = redeemed;
        }
        if let Some(src) = self.accounts.get_mut(&tx.source) {
            src.sequence = tx.sequence;
        }
        result
    }

    fn apply_op(&self, ov: &mut Overlay<'_>, source: &AccountId, op: &Operation) -> TxResult {
        match op {
            Operation::CreateAccount { new_id } => {
                if *source != self.issuer {
                    return TxResult::NotAuthorized;
                }
                if ov.exists(new_id) {
                    return TxResult::AccountExists;
                }
                // Admission by the issuer authorizes the network asset.
                let mut acct = Account::new(*new_id);
                acct.trustlines.insert(self.kyc.clone(), 0);
                ov.touched.insert(*new_id, acct);
                TxResult::Applied
            }
            Operation::ChangeTrust { asset } => {
                if *asset != self.kyc {
                    return TxResult::UnknownAsset;
                }
                if *source == self.issuer {
                    return TxResult::IssuerTrust;
                }
                let acct = ov.get_mut(source).expect("source validated at submit");
                acct.trustlines.entry(asset.clone()).or_insert(0);
                TxResult::Applied
            }
            Operation::Payment {
                destination,
                asset,
                amount,
            } => {
                if *asset != self.kyc {
                    return TxResult::UnknownAsset;
                }
                if !ov.exists(destination) {
                    return TxResult::UnknownDestination;
                }
                let amount = *amount;
                // Debit side.
                if *source == self.issuer {
                    if *destination == self.issuer {
                        return TxResult::Applied;
                    }
                    match ov.issued.checked_add(amount) {
                        Some(total) if total <= self.supply => ov.issued = total,
                        _ => return TxResult::SupplyExhausted,
                    }
                } else {
                    let acct = ov.get_mut(source).expect("source validated at submit");
                    match acct.trustlines.get_mut(asset) {
                        None => return TxResult::NoTrustline,
                        Some(bal) if *bal < amount => return TxResult::InsufficientBalance,
                        Some(bal) => *bal -= amount,
                    }
                }
                // Credit side.
                if *destination == self.issuer {
                    ov.redeemed += amount;
                } else {
                    let acct = ov.get_mut(destination).expect("checked above");
                    match acct.trustlines.get_mut(asset) {
                        None => return TxResult::NoTrustline,
                        Some(bal) => *bal += amount,
                    }
                }
                TxResult::Applied
            }
        }
    }

    /// Sum of KYC balances held outside the issuer.
    pub fn circulating(&self) -> u64 {
        self.accounts
            .values()
            .filter_map(|a| a.trustlines.get(&self.kyc))
            .sum()
    }
}
