use super::*;
use crate::crypto::EncryptionPublicKey;

const T0: u64 = 1_700_000_000_000;
const ADMIN: &str = "change-me";

struct Fx {
    ctl: Controller,
    clock: ManualClock,
    lab: LabOnboarding,
}

struct User {
    keys: SigningKeyPair,
    reg: UserRegistration,
}

fn fx_with(config: ControllerConfig) -> Fx {
    let clock = ManualClock::new(T0);
    let ctl = Controller::with_clock(config, Arc::new(clock.clone())).unwrap();
    let lab = ctl
        .onboard_lab(
            ADMIN,
            &OnboardLabRequest {
                name: "LabA".into(),
                accreditation_evidence: "ISO 15189".into(),
            },
        )
        .unwrap();
    Fx { ctl, clock, lab }
}

fn fx() -> Fx {
    fx_with(ControllerConfig::on_demand())
}

impl Fx {
    fn user(&self, name: &str) -> User {
        let keys = SigningKeyPair::generate();
        let reg = self
            .ctl
            .register_user(&RegisterUserRequest {
                identity: IdentityInput {
                    name: name.into(),
                    national_id: format!("id-{name}"),
                },
                wallet_public_key: keys.account_id(),
            })
            .unwrap();
        User { keys, reg }
    }

    fn company(&self, name: &str) -> CompanyOnboarding {
        self.ctl
            .onboard_company(ADMIN, &OnboardCompanyRequest { name: name.into() })
            .unwrap()
    }

    fn submission(&self, user: &User) -> LabSubmission {
        LabSubmission {
            user_id: user.reg.user_id.clone(),
            test_type: "PCR".into(),
            result: ResultDocument {
                result: "negative".into(),
                details: [("ct".to_string(), "38".to_string())].into(),
            },
            taken_at: self.clock.now_ms(),
            biometric_digest: Some([7; 32]),
        }
    }

    fn submit(&self, sub: &LabSubmission) -> ControllerResult<TestSubmitted> {
        let env = seal(&serde_json::to_vec(sub).unwrap(), &self.lab.lab_encryption_key).unwrap();
        self.ctl
            .submit_test(&self.lab.auth_token, &self.lab.lab_id, &env)
    }

    fn test_for(&self, user: &User) -> String {
        self.submit(&self.submission(user)).unwrap().test_id
    }

    fn buy(&self, user: &User, n: u64) -> ControllerResult<Purchase> {
        self.ctl.purchase_tokens(
            &user.reg.auth_token,
            &PurchaseRequest {
                user_id: user.reg.user_id.clone(),
                n,
                payment_proof: PaymentRule::receipt_for(n * self.ctl.config().token_price),
            },
        )
    }

    fn initiate(&self, user: &User, test_id: &str, company: &CompanyOnboarding) -> ControllerResult<TransferInitiated> {
        self.ctl.initiate_transfer(
            &user.reg.auth_token,
            &InitiateTransferRequest {
                user_id: user.reg.user_id.clone(),
                test_id: test_id.into(),
                company_id: company.company_id.clone(),
            },
        )
    }

    fn pay(&self, keys: &SigningKeyPair, to: AccountId, amount: u64, memo: Memo) -> TransactionRecord {
        let tx = Transaction {
            source: keys.account_id(),
            sequence: self.ctl.ledger().next_sequence(&keys.account_id()).unwrap(),
            operations: vec![Operation::Payment {
                destination: to,
                asset: self.ctl.ledger().kyc_asset(),
                amount,
            }],
            memo,
        };
        let receipt = self
            .ctl
            .submit_transaction(&tx.sign(self.ctl.ledger().network_id(), keys))
            .unwrap();
        self.ctl.close_ledger().unwrap();
        self.ctl.get_transaction(&receipt.tx_hash).unwrap()
    }

    /// Full send; returns (user_hash, tx hash, confirmation).
    fn send(&self, user: &User, test_id: &str, company: &CompanyOnboarding) -> (UserHash, TxHash, TransferConfirmed) {
        let init = self.initiate(user, test_id, company).unwrap();
        let rec = self.pay(
            &user.keys,
            init.destination_account,
            1,
            Memo::from_user_hash(&init.user_hash),
        );
        let conf = self
            .ctl
            .confirm_transfer(&user.reg.auth_token, &init.user_hash, &rec.tx_hash)
            .unwrap();
        (init.user_hash, rec.tx_hash, conf)
    }
}

type ControllerResult<T> = std::result::Result<T, ControllerError>;

fn code<T: std::fmt::Debug>(r: ControllerResult<T>) -> &'static str {
    r.unwrap_err().code()
}

#[test]
fn onboarding_requires_admin() {
    let f = fx();
    let req = OnboardLabRequest {
        name: "LabB".into(),
        accreditation_evidence: String::new(),
    };
    assert_eq!(code(f.ctl.onboard_lab("", &req)), "AUTH_FAILURE");
    assert_eq!(code(f.ctl.onboard_lab("nope", &req)), "AUTH_FAILURE");
    let company = OnboardCompanyRequest { name: "X".into() };
    assert_eq!(code(f.ctl.onboard_company(&f.lab.auth_token, &company)), "AUTH_FAILURE");
}

#[test]
fn lab_keys_are_distinct_and_bound_to_the_lab() {
    let f = fx();
    let other = f
        .ctl
        .onboard_lab(
            ADMIN,
            &OnboardLabRequest {
                name: "LabA".into(),
                accreditation_evidence: String::new(),
            },
        )
        .unwrap();
    assert_ne!(other.lab_encryption_key, f.lab.lab_encryption_key);
    assert_ne!(other.lab_id, f.lab.lab_id);
    let u = f.user("ada");
    let env = seal(
        &serde_json::to_vec(&f.submission(&u)).unwrap(),
        &f.lab.lab_encryption_key,
    )
    .unwrap();
    assert_eq!(
        code(f.ctl.submit_test(&other.auth_token, &other.lab_id, &env)),
        "DECRYPT_FAILED"
    );
    assert_eq!(
        code(f.ctl.submit_test(&other.auth_token, &f.lab.lab_id, &env)),
        "AUTH_FAILURE"
    );
    assert_eq!(
        code(f.ctl.submit_test(&other.auth_token, "lab-missing", &env)),
        "UNKNOWN_LAB"
    );
    f.ctl.set_lab_accreditation(ADMIN, &f.lab.lab_id, false).unwrap();
    assert_eq!(
        code(f.ctl.submit_test(&f.lab.auth_token, &f.lab.lab_id, &env)),
        "NOT_ACCREDITED"
    );
    assert_eq!(f.ctl.list_labs().unwrap().len(), 1);
}

#[test]
fn company_account_starts_empty_with_trustline() {
    let f = fx();
    let c = f.company("AirlineX");
    let view = f.ctl.ledger_account(&c.ledger_account).unwrap();
    assert_eq!(view.sequence, 0);
    assert_eq!(view.balance, Some(0));
    let env = seal(b"hello", &f.ctl.registry().get_company(&c.company_id).unwrap().encryption_public_key).unwrap();
    assert_eq!(open(&env, &c.encryption_private_key).unwrap(), b"hello");
}

#[test]
fn registration_rejects_reused_wallet_keys() {
    let f = fx();
    let u = f.user("ada");
    let again = f.ctl.register_user(&RegisterUserRequest {
        identity: IdentityInput {
            name: "eve".into(),
            national_id: "x".into(),
        },
        wallet_public_key: u.keys.account_id(),
    });
    assert_eq!(code(again), "DUPLICATE_KEY");
    assert_eq!(f.ctl.ledger_account(&u.reg.ledger_account).unwrap().balance, Some(0));
    let stored = f.ctl.registry().get_user(&u.reg.user_id).unwrap();
    assert_ne!(stored.identity.national_id_digest.to_vec(), b"id-ada".to_vec());
}

#[test]
fn submit_test_validation() {
    let f = fx();
    let u = f.user("ada");
    let sub = f.submission(&u);
    let t = f.submit(&sub).unwrap();
    assert_eq!(t.valid_until, sub.taken_at + DEFAULT_TEST_VALIDITY_MS);
    let listed = f.ctl.list_valid_tests(&u.reg.auth_token, &u.reg.user_id).unwrap();
    assert_eq!(listed.len(), 1);
    assert_eq!(listed[0].test_id, t.test_id);
    assert_eq!(
        f.ctl.registry().get_user(&u.reg.user_id).unwrap().biometric_digest,
        Some([7; 32])
    );

    let mut ghost = sub.clone();
    ghost.user_id = "user-ghost".into();
    assert_eq!(code(f.submit(&ghost)), "UNKNOWN_USER");

    let env = seal(b"{not json", &f.lab.lab_encryption_key).unwrap();
    assert_eq!(
        code(f.ctl.submit_test(&f.lab.auth_token, &f.lab.lab_id, &env)),
        "MALFORMED_PAYLOAD"
    );
    let wrong = seal(&serde_json::to_vec(&sub).unwrap(), &EncryptionPublicKey([9; 32])).unwrap();
    assert_eq!(
        code(f.ctl.submit_test(&f.lab.auth_token, &f.lab.lab_id, &wrong)),
        "DECRYPT_FAILED"
    );
    let other = f.user("bob");
    assert_eq!(
        code(f.ctl.list_valid_tests(&other.reg.auth_token, &u.reg.user_id)),
        "AUTH_FAILURE"
    );
}

#[test]
fn purchase_rules() {
    let f = fx();
    let u = f.user("ada");
    assert_eq!(code(f.buy(&u, 1)), "NO_VALID_TEST");
    f.test_for(&u);
    let max = f.ctl.config().max_tokens_per_purchase;
    assert_eq!(f.buy(&u, max).unwrap().balance, max);
    assert_eq!(code(f.buy(&u, max + 1)), "OVER_LIMIT");
    let bad = f.ctl.purchase_tokens(
        &u.reg.auth_token,
        &PurchaseRequest {
            user_id: u.reg.user_id.clone(),
            n: 2,
            payment_proof: PaymentRule::receipt_for(1),
        },
    );
    assert_eq!(code(bad), "PAYMENT_REJECTED");
    f.clock.advance(DEFAULT_TEST_VALIDITY_MS);
    assert_eq!(code(f.buy(&u, 1)), "NO_VALID_TEST");
}

#[test]
fn purchase_respects_supply_cap() {
    let f = fx_with(ControllerConfig {
        kyc_supply: 12,
        ..ControllerConfig::on_demand()
    });
    let u = f.user("ada");
    f.test_for(&u);
    f.buy(&u, 10).unwrap();
    assert_eq!(code(f.buy(&u, 3)), "SUPPLY_EXHAUSTED");
    f.buy(&u, 2).unwrap();
    assert_eq!(code(f.buy(&u, 1)), "SUPPLY_EXHAUSTED");
    assert!(f.ctl.ledger().supply().conserved());
}

#[test]
fn initiate_transfer_rules() {
    let f = fx();
    let u = f.user("ada");
    let v = f.user("bob");
    let c = f.company("AirlineX");
    let test = f.test_for(&u);
    assert_eq!(code(f.initiate(&u, &test, &c)), "INSUFFICIENT_TOKENS");
    f.buy(&u, 1).unwrap();
    assert_eq!(code(f.initiate(&u, "test-missing", &c)), "UNKNOWN_TEST");
    assert_eq!(code(f.initiate(&v, &test, &c)), "NOT_OWNER");
    let ghost = CompanyOnboarding {
        company_id: "company-ghost".into(),
        ..c.clone()
    };
    assert_eq!(code(f.initiate(&u, &test, &ghost)), "UNKNOWN_COMPANY");
    let init = f.initiate(&u, &test, &c).unwrap();
    let stored = f.ctl.registry().find_transfer_by_user_hash(&init.user_hash).unwrap();
    assert_eq!(
        derive_user_hash(&test, &u.reg.ledger_account, &c.ledger_account, &stored.nonce),
        init.user_hash
    );
    f.clock.advance(DEFAULT_TEST_VALIDITY_MS);
    assert_eq!(code(f.initiate(&u, &test, &c)), "EXPIRED");
}

#[test]
fn full_send_and_certificate_release() {
    let f = fx();
    let u = f.user("ada");
    let a = f.company("AirlineA");
    let b = f.company("AirlineB");
    let sub = f.submission(&u);
    let test = f.submit(&sub).unwrap();
    f.buy(&u, 3).unwrap();
    let (hash, block_hash, conf) = f.send(&u, &test.test_id, &a);
    assert_eq!(conf.numeric_id, crate::registry::FIRST_NUMERIC_ID);
    assert_eq!(conf.qr_text, qr_text(&block_hash));
    assert_eq!(f.ctl.ledger_account(&u.reg.ledger_account).unwrap().balance, Some(2));

    let env = f.ctl.fetch_certificate(&a.auth_token, &a.company_id, &hash).unwrap();
    let cert = CertificateDocument::from_bytes(&open(&env, &a.encryption_private_key).unwrap()).unwrap();
    assert_eq!(cert.test_id, test.test_id);
    assert_eq!(cert.user_name, "ada");
    assert_eq!(cert.test_type, sub.test_type);
    assert_eq!(cert.result, sub.result);
    assert_eq!(cert.taken_at, sub.taken_at);
    assert_eq!(cert.valid_until, test.valid_until);
    assert_eq!(cert.lab_name, "LabA");
    assert_eq!(cert.biometric_digest, sub.biometric_digest);
    assert!(open(&env, &b.encryption_private_key).is_err());

    assert_eq!(
        code(f.ctl.fetch_certificate(&b.auth_token, &b.company_id, &hash)),
        "NOT_DESTINATION"
    );
    assert_eq!(
        code(f.ctl.fetch_certificate(&b.auth_token, &a.company_id, &hash)),
        "AUTH_FAILURE"
    );

    let qr = f.ctl.get_qr_payload(&u.reg.auth_token, conf.numeric_id).unwrap();
    assert_eq!(qr.qr_text.len(), 75);
    let v = f.user("bob");
    assert_eq!(code(f.ctl.get_qr_payload(&v.reg.auth_token, conf.numeric_id)), "NOT_OWNER");
    assert_eq!(code(f.ctl.get_qr_payload(&u.reg.auth_token, 7)), "NOT_FOUND");
    let again = f.ctl.confirm_transfer(&u.reg.auth_token, &hash, &block_hash).unwrap();
    assert_eq!(again, conf);
    assert_eq!(
        code(f.ctl.confirm_transfer(&u.reg.auth_token, &hash, &TxHash([5; 32]))),
        "ALREADY_BACKFILLED"
    );
}

#[test]
fn confirm_transfer_checks_the_ledger_payment() {
    let f = fx();
    let u = f.user("ada");
    let a = f.company("AirlineA");
    let b = f.company("AirlineB");
    let test = f.test_for(&u);
    f.buy(&u, 10).unwrap();
    let init = f.initiate(&u, &test, &a).unwrap();
    let tok = &u.reg.auth_token;

    assert_eq!(
        code(f.ctl.confirm_transfer(tok, &init.user_hash, &TxHash([1; 32]))),
        "LEDGER_TX_MISSING"
    );
    let mut memo = Memo::from_user_hash(&init.user_hash);
    if let Memo::Hash(ref mut bytes) = memo {
        bytes[3] ^= 0xff;
    }
    let rec = f.pay(&u.keys, a.ledger_account, 1, memo);
    assert_eq!(code(f.ctl.confirm_transfer(tok, &init.user_hash, &rec.tx_hash)), "MEMO_MISMATCH");
    let rec = f.pay(&u.keys, b.ledger_account, 1, Memo::from_user_hash(&init.user_hash));
    assert_eq!(code(f.ctl.confirm_transfer(tok, &init.user_hash, &rec.tx_hash)), "PARTY_MISMATCH");
    let rec = f.pay(&u.keys, a.ledger_account, 50, Memo::from_user_hash(&init.user_hash));
    assert_eq!(rec.result, TxResult::InsufficientBalance);
    assert_eq!(
        code(f.ctl.confirm_transfer(tok, &init.user_hash, &rec.tx_hash)),
        "LEDGER_TX_MISSING"
    );
    assert_eq!(
        code(f.ctl.fetch_certificate(&a.auth_token, &a.company_id, &init.user_hash)),
        "NOT_BACKFILLED"
    );
    assert_eq!(
        code(f.ctl.confirm_transfer(tok, &UserHash([0; 16]), &rec.tx_hash)),
        "NOT_FOUND"
    );
    let rec = f.pay(&u.keys, a.ledger_account, 1, Memo::from_user_hash(&init.user_hash));
    f.ctl.confirm_transfer(tok, &init.user_hash, &rec.tx_hash).unwrap();
}

#[test]
fn buy_back_rules() {
    let f = fx();
    let u = f.user("ada");
    let a = f.company("AirlineA");
    let b = f.company("AirlineB");
    let test = f.test_for(&u);
    f.buy(&u, 10).unwrap();
    for _ in 0..10 {
        f.send(&u, &test, &a);
    }
    let a_keys = SigningKeyPair::from_secret_hex(&a.ledger_secret_key).unwrap();
    let ret = f.pay(&a_keys, f.ctl.issuer(), 10, Memo::None);
    let claim = |company: &CompanyOnboarding, n, tx| {
        f.ctl.buy_back(
            &company.auth_token,
            &BuybackRequest {
                company_id: company.company_id.clone(),
                n,
                return_tx_hash: tx,
            },
        )
    };
    assert_eq!(code(claim(&a, 9, ret.tx_hash)), "AMOUNT_MISMATCH");
    assert_eq!(code(claim(&b, 10, ret.tx_hash)), "WRONG_DIRECTION");
    assert_eq!(code(claim(&a, 10, TxHash([3; 32]))), "LEDGER_TX_MISSING");
    let credit = claim(&a, 10, ret.tx_hash).unwrap();
    assert_eq!(credit.credit, 10);
    assert_eq!(credit.credit_balance, 10);
    assert_eq!(code(claim(&a, 10, ret.tx_hash)), "ALREADY_CLAIMED");
    let supply = f.ctl.ledger().supply();
    assert_eq!(supply.redeemed, 10);
    assert!(supply.conserved());
}

#[test]
fn timer_mode_refuses_manual_close_and_settles_on_the_timer() {
    let cfg = ControllerConfig {
        close_interval_ms: 50,
        ..ControllerConfig::default()
    };
    let ctl = Controller::new(cfg).unwrap();
    assert_eq!(code(ctl.close_ledger()), "CLOSE_DISABLED");
    let c = ctl
        .onboard_company(ADMIN, &OnboardCompanyRequest { name: "X".into() })
        .unwrap();
    assert_eq!(ctl.ledger_account(&c.ledger_account).unwrap().balance, Some(0));
    ctl.shutdown();
}

#[test]
fn persistent_controller_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ControllerConfig {
        data_dir: Some(dir.path().to_path_buf()),
        ..ControllerConfig::on_demand()
    };
    let (issuer, user_id, height) = {
        let f = fx_with(cfg.clone());
        let u = f.user("ada");
        f.test_for(&u);
        f.buy(&u, 2).unwrap();
        (f.ctl.issuer(), u.reg.user_id, f.ctl.ledger().height())
    };
    let ctl = Controller::new(cfg).unwrap();
    assert_eq!(ctl.issuer(), issuer);
    assert_eq!(ctl.ledger().height(), height);
    assert!(ctl.ledger().verify_chain().ok);
    let user = ctl.registry().get_user(&user_id).unwrap();
    assert_eq!(ctl.ledger_account(&user.ledger_account).unwrap().balance, Some(2));
}
