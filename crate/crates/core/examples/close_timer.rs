//! Close ledgers on a fixed cadence and watch the close times.

use std::time::Duration;

use certchain::crypto::SigningKeyPair;
use certchain::ledger::{CloseTimer, LedgerHandle, Memo, Operation, Transaction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let interval = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(250u64);
    let issuer = SigningKeyPair::generate();
    let ledger = LedgerHandle::create_network("timer-net", &issuer, 100)?;
    let timer = CloseTimer::start(ledger.clone(), Duration::from_millis(interval));

    let user = SigningKeyPair::generate();
    let tx = Transaction {
        source: issuer.account_id(),
        sequence: ledger.next_sequence(&issuer.account_id())?,
        operations: vec![Operation::CreateAccount { new_id: user.account_id() }],
        memo: Memo::None,
    };
    let receipt = ledger.submit(tx.sign(ledger.network_id(), &issuer))?;
    let rec = ledger.wait_for_transaction(&receipt.tx_hash, Duration::from_millis(interval * 4))?;
    println!("queued transaction landed in block {}", rec.ledger_sequence);

    std::thread::sleep(Duration::from_millis(interval * 6));
    timer.stop();

    let blocks = ledger.blocks();
    for pair in blocks.windows(2) {
        println!(
            "block {:>3} closed +{} ms, {} tx",
            pair[1].sequence,
            pair[1].close_time - pair[0].close_time,
            pair[1].txs.len()
        );
    }
    println!("chain {:?}", ledger.verify_chain());
    Ok(())
}
