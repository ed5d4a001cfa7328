//! Create a network, open two accounts, move tokens and check the chain.

use certchain::crypto::SigningKeyPair;
use certchain::ledger::{LedgerHandle, Memo, Operation, Transaction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let issuer = SigningKeyPair::generate();
    let ledger = LedgerHandle::create_network("demo-net", &issuer, 1_000)?;
    let kyc = ledger.kyc_asset();
    let alice = SigningKeyPair::generate();
    let bob = SigningKeyPair::generate();

    let mut now = 1_700_000_000_000;
    let mut run = |keys: &SigningKeyPair, ops: Vec<Operation>, memo: Memo| {
        let tx = Transaction {
            source: keys.account_id(),
            sequence: ledger.next_sequence(&keys.account_id()).unwrap(),
            operations: ops,
            memo,
        };
        let receipt = ledger.submit(tx.sign(ledger.network_id(), keys)).unwrap();
        now += 5_000;
        ledger.close_ledger(now).unwrap();
        ledger.get_transaction(&receipt.tx_hash).unwrap()
    };

    for who in [&alice, &bob] {
        let rec = run(
            &issuer,
            vec![Operation::CreateAccount { new_id: who.account_id() }],
            Memo::None,
        );
        println!("create {} -> {:?}", who.account_id(), rec.result);
    }

    let pay = |to: &SigningKeyPair, amount| Operation::Payment {
        destination: to.account_id(),
        asset: kyc.clone(),
        amount,
    };
    run(&issuer, vec![pay(&alice, 10)], Memo::None);
    let rec = run(&alice, vec![pay(&bob, 3)], Memo::Hash([0xab; 32]));
    println!("alice -> bob: {:?} in block {}", rec.result, rec.ledger_sequence);

    // Overdraft is recorded as a failed transaction, not dropped.
    let rec = run(&bob, vec![pay(&alice, 99)], Memo::None);
    println!("bob overdraft: {:?}", rec.result);

    println!(
        "balances: alice={} bob={}",
        ledger.get_balance(&alice.account_id(), &kyc)?,
        ledger.get_balance(&bob.account_id(), &kyc)?
    );
    let supply = ledger.supply();
    println!("supply: {supply:?} conserved={}", supply.conserved());
    println!("height {} verify {:?}", ledger.height(), ledger.verify_chain());
    Ok(())
}
