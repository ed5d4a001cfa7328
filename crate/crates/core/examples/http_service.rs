//! Run the controller over HTTP and drive it with the wallet and verifier clients.

use std::sync::Arc;

use certchain::client::HttpApi;
use certchain::controller::{
    http, Controller, ControllerApi, ControllerConfig, LabSubmission, OnboardCompanyRequest,
    OnboardLabRequest, PaymentRule, ResultDocument,
};
use certchain::crypto::seal;
use certchain::verifier::{CompanyConfig, Verifier};
use certchain::wallet::{SendOptions, Wallet};

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap()
        .as_millis() as u64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ControllerConfig::on_demand();
    let admin = config.admin_token.clone();
    let server = http::spawn(Arc::new(Controller::new(config)?), "127.0.0.1:0")?;
    println!("controller listening on {}", server.url());

    let api = HttpApi::new(server.url());
    let lab = api.onboard_lab(
        &admin,
        &OnboardLabRequest {
            name: "City Lab".into(),
            accreditation_evidence: "ISO 15189".into(),
        },
    )?;
    let company = api.onboard_company(&admin, &OnboardCompanyRequest { name: "Stadium".into() })?;
    for l in api.list_labs()? {
        println!("lab {} {} accredited={}", l.lab_id, l.name, l.accredited);
    }

    let dir = tempfile::tempdir()?;
    let mut wallet = Wallet::create(dir.path().join("wallet.json"), &server.url())?;
    let reg = wallet.cmd_register(&api, "Grace", "CD987654")?;
    let env = seal(
        &serde_json::to_vec(&LabSubmission {
            user_id: reg.user_id,
            test_type: "antigen".into(),
            result: ResultDocument {
                result: "negative".into(),
                details: Default::default(),
            },
            taken_at: now_ms(),
            biometric_digest: None,
        })?,
        &lab.lab_encryption_key,
    )?;
    let test = api.submit_test(&lab.auth_token, &lab.lab_id, &env)?;

    wallet.cmd_buy(&api, 1, &PaymentRule::receipt_for(5))?;
    let sent = wallet.cmd_send(&api, &test.test_id, &company.company_id, &SendOptions::default())?;
    println!("qr: {}", sent.qr_text);

    let verifier = Verifier::new(CompanyConfig::from_onboarding(&server.url(), &company), &api);
    let outcome = verifier.cmd_verify(&sent.qr_text, now_ms(), None)?;
    println!("decision {:?} reasons {:?}", outcome.decision, outcome.reasons);

    // A stranger reading the same QR is turned away.
    let other = api.onboard_company(&admin, &OnboardCompanyRequest { name: "Cinema".into() })?;
    let stranger = Verifier::new(CompanyConfig::from_onboarding(&server.url(), &other), &api);
    match stranger.cmd_verify(&sent.qr_text, now_ms(), None) {
        Ok(_) => println!("stranger verified (unexpected)"),
        Err(e) => println!("stranger: {} {e}", e.code()),
    }

    println!("supply {:?}", api.supply()?);
    println!("chain {:?}", api.verify_chain()?);
    server.stop()?;
    Ok(())
}
