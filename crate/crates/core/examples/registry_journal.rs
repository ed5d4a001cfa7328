//! Persist registry records in a journal, reopen it, and survive a torn tail.

use certchain::crypto::{EncryptionKeyPair, SigningKeyPair, UserHash};
use certchain::ledger::TxHash;
use certchain::registry::{CompanyRecord, Identity, Registry, TransferRecord, UserRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("registry.journal");
    let user_hash = UserHash([0x11; 16]);

    {
        let reg = Registry::open(&path)?;
        let user_keys = SigningKeyPair::generate();
        reg.put_user(UserRecord {
            user_id: "user-1".into(),
            identity: Identity::new("Ada", "AB123456"),
            biometric_digest: None,
            ledger_account: user_keys.account_id(),
            created_at: 0,
        })?;
        reg.put_company(CompanyRecord {
            company_id: "company-1".into(),
            name: "Airline".into(),
            encryption_public_key: EncryptionKeyPair::generate().public_key,
            ledger_account: SigningKeyPair::generate().account_id(),
            credit_balance: 0,
        })?;
        reg.put_transfer(TransferRecord {
            user_hash,
            nonce: [0; 16],
            test_id: "test-1".into(),
            source_account: user_keys.account_id(),
            destination_company_id: "company-1".into(),
            block_hash: None,
            numeric_id: None,
            created_at: 0,
        })?;
        let id = reg.backfill_next(&user_hash, TxHash([0x22; 32]))?;
        println!("backfilled numeric id {id}");
    }

    let len = std::fs::metadata(&path)?.len();
    println!("journal is {len} bytes");

    let reg = Registry::open(&path)?;
    let t = reg.get_transfer(&user_hash)?;
    println!("after reopen: numeric_id={:?} next={}", t.numeric_id, reg.next_numeric_id());
    drop(reg);

    // Cut the last record in half; replay keeps the intact prefix.
    let file = std::fs::OpenOptions::new().write(true).open(&path)?;
    file.set_len(len - 10)?;
    let reg = Registry::open(&path)?;
    let t = reg.get_transfer(&user_hash)?;
    println!("after torn write: numeric_id={:?}", t.numeric_id);
    println!("user national id kept as digest only: {}", hex::encode(reg.get_user("user-1")?.identity.national_id_digest));
    Ok(())
}
