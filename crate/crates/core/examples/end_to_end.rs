//! The whole exchange in one process: onboard, test, buy, send, verify.

use certchain::controller::{
    Controller, ControllerApi, ControllerConfig, LabSubmission, OnboardCompanyRequest,
    OnboardLabRequest, PaymentRule, ResultDocument,
};
use certchain::crypto::seal;
use certchain::verifier::{CompanyConfig, Verifier};
use certchain::wallet::{SendOptions, Wallet};

const ADMIN: &str = "change-me";

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap()
        .as_millis() as u64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ctl = Controller::new(ControllerConfig::on_demand())?;
    let lab = ctl.onboard_lab(
        ADMIN,
        &OnboardLabRequest {
            name: "City Lab".into(),
            accreditation_evidence: "ISO 15189".into(),
        },
    )?;
    let airline = ctl.onboard_company(ADMIN, &OnboardCompanyRequest { name: "Airline".into() })?;

    let dir = tempfile::tempdir()?;
    let mut wallet = Wallet::create(dir.path().join("wallet.json"), "in-process")?;
    let reg = wallet.cmd_register(&ctl, "Ada", "AB123456")?;
    println!("registered {}", reg.user_id);

    let submission = LabSubmission {
        user_id: reg.user_id.clone(),
        test_type: "PCR".into(),
        result: ResultDocument {
            result: "negative".into(),
            details: [("ct".to_string(), "38".to_string())].into(),
        },
        taken_at: now_ms(),
        biometric_digest: None,
    };
    let env = seal(&serde_json::to_vec(&submission)?, &lab.lab_encryption_key)?;
    let test = ctl.submit_test(&lab.auth_token, &lab.lab_id, &env)?;
    println!("lab stored {}", test.test_id);

    let price = ctl.config().token_price;
    wallet.cmd_buy(&ctl, 2, &PaymentRule::receipt_for(2 * price))?;
    let sent = wallet.cmd_send(&ctl, &test.test_id, &airline.company_id, &SendOptions::default())?;
    println!("sent: numeric id {} qr {}", sent.numeric_id, sent.qr_text);
    println!("wallet balance now {}", wallet.cmd_balance(&ctl)?.balance);

    let verifier = Verifier::new(CompanyConfig::from_onboarding("in-process", &airline), &ctl);
    let outcome = verifier.cmd_verify(&sent.qr_text, now_ms(), None)?;
    println!(
        "airline decision {:?} for {} ({})",
        outcome.decision, outcome.certificate.test_type, outcome.certificate.user_name
    );
    Ok(())
}
