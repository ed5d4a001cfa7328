mod common;

use certchain::controller::{
    BuybackRequest, CertificateDocument, ControllerApi, ControllerConfig, ControllerError,
    ErrorBody, InitiateTransferRequest, OnboardCompanyRequest, OnboardLabRequest, PaymentRule,
    PurchaseRequest, RegisterUserRequest, IdentityInput,
};
use certchain::crypto::{open, seal, SigningKeyPair};
use certchain::ledger::{Memo, Operation, Transaction, TxHash, TxResult};
use common::{Served, ADMIN};
use serde_json::{json, Value};

/// Raw request; returns status and parsed JSON body.
fn raw(method: &str, url: &str, token: Option<&str>, body: Option<&str>) -> (u16, Value) {
    let mut req = ureq::request(method, url);
    if let Some(t) = token {
        req = req.set("Authorization", &format!("Bearer {t}"));
    }
    let res = match body {
        Some(b) => req.set("Content-Type", "application/json").send_string(b),
        None => req.call(),
    };
    let resp = match res {
        Ok(r) => r,
        Err(ureq::Error::Status(_, r)) => r,
        Err(e) => panic!("transport: {e}"),
    };
    let status = resp.status();
    (status, resp.into_json().unwrap_or(Value::Null))
}

#[test]
fn every_endpoint_round_trips() {
    let s = Served::new();
    let api = s.api();

    let lab = api
        .onboard_lab(
            ADMIN,
            &OnboardLabRequest {
                name: "North Lab".into(),
                accreditation_evidence: "cert-7".into(),
            },
        )
        .unwrap();
    let labs = api.list_labs().unwrap();
    assert!(labs.iter().any(|l| l.lab_id == lab.lab_id && l.accredited));
    let company = api
        .onboard_company(ADMIN, &OnboardCompanyRequest { name: "Ferry".into() })
        .unwrap();

    let keys = SigningKeyPair::generate();
    let reg = api
        .register_user(&RegisterUserRequest {
            identity: IdentityInput {
                name: "Lin".into(),
                national_id: "X-1".into(),
            },
            wallet_public_key: keys.account_id(),
        })
        .unwrap();
    assert_eq!(reg.ledger_account, keys.account_id());

    let sub = s.world.submission(&reg.user_id, "negative");
    let env = seal(&serde_json::to_vec(&sub).unwrap(), &lab.lab_encryption_key).unwrap();
    let test = api.submit_test(&lab.auth_token, &lab.lab_id, &env).unwrap();
    let tests = api.list_valid_tests(&reg.auth_token, &reg.user_id).unwrap();
    assert_eq!(tests.len(), 1);
    assert_eq!(tests[0].test_id, test.test_id);

    let bought = api
        .purchase_tokens(
            &reg.auth_token,
            &PurchaseRequest {
                user_id: reg.user_id.clone(),
                n: 2,
                payment_proof: PaymentRule::receipt_for(10),
            },
        )
        .unwrap();
    assert_eq!(bought.balance, 2);
    assert_eq!(api.get_transaction(&bought.tx_hash).unwrap().result, TxResult::Applied);

    let init = api
        .initiate_transfer(
            &reg.auth_token,
            &InitiateTransferRequest {
                user_id: reg.user_id.clone(),
                test_id: test.test_id.clone(),
                company_id: company.company_id.clone(),
            },
        )
        .unwrap();
    assert_eq!(init.destination_account, company.ledger_account);

    let info = api.ledger_info().unwrap();
    let account = api.ledger_account(&keys.account_id()).unwrap();
    assert_eq!(account.balance, Some(2));
    let stx = Transaction {
        source: keys.account_id(),
        sequence: account.sequence + 1,
        operations: vec![Operation::Payment {
            destination: init.destination_account,
            asset: info.asset.clone(),
            amount: 1,
        }],
        memo: Memo::from_user_hash(&init.user_hash),
    }
    .sign(&info.network_id, &keys);
    let receipt = api.submit_transaction(&stx).unwrap();
    let closed = api.close_ledger().unwrap();
    assert_eq!(closed.tx_count, 1);

    let conf = api
        .confirm_transfer(&reg.auth_token, &init.user_hash, &receipt.tx_hash)
        .unwrap();
    assert!(conf.qr_text.starts_with("KYCCERT:v1:"));
    let qr = api.get_qr_payload(&reg.auth_token, conf.numeric_id).unwrap();
    assert_eq!(qr.qr_text, conf.qr_text);

    let sealed = api
        .fetch_certificate(&company.auth_token, &company.company_id, &init.user_hash)
        .unwrap();
    let cert = CertificateDocument::from_bytes(&open(&sealed, &company.encryption_private_key).unwrap()).unwrap();
    assert_eq!(cert.result, sub.result);
    assert_eq!(cert.user_name, "Lin");

    // Company returns its one token.
    let company_keys = SigningKeyPair::from_secret_hex(&company.ledger_secret_key).unwrap();
    let back = Transaction {
        source: company.ledger_account,
        sequence: api.ledger_account(&company.ledger_account).unwrap().sequence + 1,
        operations: vec![Operation::Payment {
            destination: info.issuer,
            asset: info.asset,
            amount: 1,
        }],
        memo: Memo::None,
    }
    .sign(&info.network_id, &company_keys);
    let back_hash = api.submit_transaction(&back).unwrap().tx_hash;
    api.close_ledger().unwrap();
    let credit = api
        .buy_back(
            &company.auth_token,
            &BuybackRequest {
                company_id: company.company_id.clone(),
                n: 1,
                return_tx_hash: back_hash,
            },
        )
        .unwrap();
    assert_eq!(credit.credit, 1);

    let supply = api.supply().unwrap();
    assert_eq!((supply.issued, supply.redeemed, supply.circulating), (2, 1, 1));
    assert!(api.verify_chain().unwrap().ok);
}

#[test]
fn errors_carry_code_status_and_body() {
    let s = Served::new();
    let url = s.url();

    let (st, b) = raw("POST", &format!("{url}/labs"), None, Some(r#"{"name":"x"}"#));
    assert_eq!((st, b["error"].as_str()), (401, Some("AUTH_FAILURE")));
    assert!(b["message"].is_string());

    let (st, b) = raw("POST", &format!("{url}/users"), None, Some("{not json"));
    assert_eq!((st, b["error"].as_str()), (400, Some("BAD_REQUEST")));

    let (st, b) = raw("GET", &format!("{url}/nowhere"), None, None);
    assert_eq!((st, b["error"].as_str()), (404, Some("NOT_FOUND")));

    let (st, b) = raw("GET", &format!("{url}/ledger/transactions/xyz"), None, None);
    assert_eq!((st, b["error"].as_str()), (400, Some("BAD_REQUEST")));

    let missing = "ab".repeat(32);
    let (st, b) = raw("GET", &format!("{url}/ledger/transactions/{missing}"), None, None);
    assert_eq!((st, b["error"].as_str()), (404, Some("LEDGER_TX_MISSING")));

    let (st, b) = raw("GET", &format!("{url}/ledger/accounts/GAxyz"), None, None);
    assert_eq!((st, b["error"].as_str()), (400, Some("BAD_REQUEST")));

    let (st, b) = raw("GET", &format!("{url}/qr/notanumber"), Some("t"), None);
    assert_eq!((st, b["error"].as_str()), (400, Some("BAD_REQUEST")));

    let (st, b) = raw(
        "POST",
        &format!("{url}/transfers/zz/confirm"),
        Some("t"),
        Some(&json!({ "block_hash": missing }).to_string()),
    );
    assert_eq!((st, b["error"].as_str()), (400, Some("BAD_REQUEST")));

    // A purchase without a test: the status and code of the variant.
    let user = s.world.user("Ola");
    let (st, b) = raw(
        "POST",
        &format!("{url}/purchases"),
        Some(&user.reg.auth_token),
        Some(&json!({"user_id": user.reg.user_id, "n": 1, "payment_proof": "receipt:5"}).to_string()),
    );
    let e = ControllerError::NoValidTest(String::new());
    assert_eq!(st, e.http_status());
    assert_eq!(b["error"], e.code());
}

#[test]
fn client_sees_the_same_errors_as_in_process_callers() {
    let s = Served::new();
    let api = s.api();
    let w = &s.world;
    let user = w.user("Ana");
    let other = w.user("Ben");
    let company = w.company("Gym");
    let stranger = SigningKeyPair::generate().account_id();

    let req = |u: &common::User, n| PurchaseRequest {
        user_id: u.reg.user_id.clone(),
        n,
        payment_proof: PaymentRule::receipt_for(n * 5),
    };
    let cases: Vec<(&str, Box<dyn Fn(&dyn ControllerApi) -> ControllerError>)> = vec![
        ("AUTH_FAILURE", Box::new(|a| a.onboard_company("wrong", &OnboardCompanyRequest { name: "n".into() }).unwrap_err())),
        ("NO_VALID_TEST", Box::new(|a| a.purchase_tokens(&user.reg.auth_token, &req(&user, 1)).unwrap_err())),
        ("BAD_REQUEST", Box::new(|a| a.purchase_tokens(&user.reg.auth_token, &req(&user, 0)).unwrap_err())),
        ("AUTH_FAILURE", Box::new(|a| a.purchase_tokens(&other.reg.auth_token, &req(&user, 1)).unwrap_err())),
        ("UNKNOWN_TEST", Box::new(|a| {
            a.initiate_transfer(
                &user.reg.auth_token,
                &InitiateTransferRequest {
                    user_id: user.reg.user_id.clone(),
                    test_id: "test-missing".into(),
                    company_id: company.company_id.clone(),
                },
            )
            .unwrap_err()
        })),
        ("LEDGER_TX_MISSING", Box::new(|a| a.get_transaction(&TxHash([9; 32])).unwrap_err())),
        ("NOT_FOUND", Box::new(|a| a.get_qr_payload(&user.reg.auth_token, 1_000_000_000).unwrap_err())),
        ("UNKNOWN_ACCOUNT", Box::new(|a| a.ledger_account(&stranger).unwrap_err())),
    ];
    for (code, case) in &cases {
        let local = case(&*w.ctl);
        let remote = case(&api);
        assert_eq!(local.code(), *code);
        assert_eq!(remote, local, "{code}");
    }
}

#[test]
fn timer_mode_refuses_manual_close_over_http() {
    let s = Served::with(ControllerConfig {
        close_interval_ms: 100,
        ..ControllerConfig::default()
    });
    let (st, b) = raw("POST", &format!("{}/ledger/close", s.url()), None, None);
    assert_eq!((st, b["error"].as_str()), (409, Some("CLOSE_DISABLED")));
    let e: ErrorBody = serde_json::from_value(b).unwrap();
    assert_eq!(e.error, "CLOSE_DISABLED");
}

#[test]
fn accreditation_toggle_gates_submissions() {
    let s = Served::new();
    let api = s.api();
    let w = &s.world;
    let user = w.user("Cy");
    let revoked = api.set_lab_accreditation(ADMIN, &w.lab.lab_id, false).unwrap();
    assert!(!revoked.accredited);
    assert!(api.list_labs().unwrap().is_empty());

    let sub = w.submission(&user.reg.user_id, "negative");
    let env = seal(&serde_json::to_vec(&sub).unwrap(), &w.lab.lab_encryption_key).unwrap();
    let err = api.submit_test(&w.lab.auth_token, &w.lab.lab_id, &env).unwrap_err();
    assert_eq!(err.code(), "NOT_ACCREDITED");
    assert_eq!(
        api.set_lab_accreditation(&w.lab.auth_token, &w.lab.lab_id, true).unwrap_err().code(),
        "AUTH_FAILURE"
    );

    api.set_lab_accreditation(ADMIN, &w.lab.lab_id, true).unwrap();
    api.submit_test(&w.lab.auth_token, &w.lab.lab_id, &env).unwrap();
}
