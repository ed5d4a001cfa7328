//! Interrupt a send at each crash point and finish it from the wallet file.

use certchain::controller::{
    Controller, ControllerApi, ControllerConfig, LabSubmission, OnboardCompanyRequest,
    OnboardLabRequest, PaymentRule, ResultDocument,
};
use certchain::crypto::seal;
use certchain::wallet::{CrashPoint, SendOptions, Wallet};

const ADMIN: &str = "change-me";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ctl = Controller::new(ControllerConfig::on_demand())?;
    let lab = ctl.onboard_lab(
        ADMIN,
        &OnboardLabRequest {
            name: "City Lab".into(),
            accreditation_evidence: "ISO 15189".into(),
        },
    )?;
    let company = ctl.onboard_company(ADMIN, &OnboardCompanyRequest { name: "Airline".into() })?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("wallet.json");
    let mut wallet = Wallet::create(&path, "in-process")?;
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

    let points = [
        CrashPoint::AfterInitiate,
        CrashPoint::AfterSign,
        CrashPoint::AfterSubmit,
        CrashPoint::AfterApplied,
    ];
    let price = ctl.config().token_price;
    wallet.cmd_buy(&ctl, points.len() as u64, &PaymentRule::receipt_for(points.len() as u64 * price))?;
    drop(wallet);

    for point in points {
        let before = Wallet::open(&path)?.cmd_balance(&ctl)?.balance;
        {
            let mut w = Wallet::open(&path)?;
            let opts = SendOptions { crash_at: Some(point) };
            let err = w
                .cmd_send(&ctl, &test.test_id, &company.company_id, &opts)
                .expect_err("crash point fires");
            println!("{point:?}: {}", err.code());
        }
        // A fresh process reopens the file and finishes the same send.
        let mut w = Wallet::open(&path)?;
        let done = w.cmd_resume(&ctl, &SendOptions::default())?.expect("pending send");
        let after = w.cmd_balance(&ctl)?.balance;
        println!(
            "  resumed={} numeric_id={} tokens spent={}",
            done.resumed,
            done.numeric_id,
            before - after
        );
    }
    println!("certificates sent: {}", Wallet::open(&path)?.state().sent.len());
    Ok(())
}
