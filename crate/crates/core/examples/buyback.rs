//! A company collects tokens from certificate sends and sells them back.

use certchain::controller::{
    Controller, ControllerApi, ControllerConfig, LabSubmission, OnboardCompanyRequest,
    OnboardLabRequest, PaymentRule, ResultDocument,
};
use certchain::crypto::seal;
use certchain::verifier::{CompanyConfig, Verifier};
use certchain::wallet::{SendOptions, Wallet};

const ADMIN: &str = "change-me";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ctl = Controller::new(ControllerConfig::on_demand())?;
    let price = ctl.config().token_price;
    println!("credit table at price {price}:");
    for n in [1, 2, 5, 10] {
        println!("  return {n:>2} -> credit {}", ctl.config().buyback_credit(n));
    }

    let lab = ctl.onboard_lab(
        ADMIN,
        &OnboardLabRequest {
            name: "City Lab".into(),
            accreditation_evidence: "ISO 15189".into(),
        },
    )?;
    let company = ctl.onboard_company(ADMIN, &OnboardCompanyRequest { name: "Airline".into() })?;

    let dir = tempfile::tempdir()?;
    let mut wallet = Wallet::create(dir.path().join("wallet.json"), "in-process")?;
    let reg = wallet.cmd_register(&ctl, "Ada", "AB123456")?;
    let env = seal(
        &serde_json::to_vec(&LabSubmission {
            user_id: reg.user_id,
            test_type: "PCR".into(),
            result: ResultDocument {
                result: "negative".into(),
                details: Default::default(),
            },
            taken_at: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)?
                .as_millis() as u64,
            biometric_digest: None,
        })?,
        &lab.lab_encryption_key,
    )?;
    let test = ctl.submit_test(&lab.auth_token, &lab.lab_id, &env)?;
    wallet.cmd_buy(&ctl, 3, &PaymentRule::receipt_for(3 * price))?;
    for _ in 0..3 {
        wallet.cmd_send(&ctl, &test.test_id, &company.company_id, &SendOptions::default())?;
    }

    let verifier = Verifier::new(CompanyConfig::from_onboarding("in-process", &company), &ctl);
    println!("company holds {} tokens", verifier.balance()?);
    let (tx, credit) = verifier.cmd_return_tokens(2)?;
    println!("returned 2 in {tx}: credited {} (total {})", credit.credit, credit.credit_balance);

    // Claiming the same return twice is refused.
    match verifier.cmd_claim(&tx, 2) {
        Ok(_) => println!("second claim accepted (unexpected)"),
        Err(e) => println!("second claim: {}", e.code()),
    }
    println!("supply {:?}", ctl.ledger().supply());
    Ok(())
}
