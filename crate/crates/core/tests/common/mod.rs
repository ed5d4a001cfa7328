#![allow(dead_code)]

use std::sync::Arc;

use certchain::controller::{
    http, CompanyOnboarding, Controller, ControllerApi, ControllerConfig, ControllerError,
    InitiateTransferRequest, LabOnboarding, LabSubmission, OnboardCompanyRequest,
    OnboardLabRequest, PaymentRule, Purchase, PurchaseRequest, RegisterUserRequest,
    IdentityInput, ResultDocument, TestSubmitted, TransferConfirmed, TransferInitiated,
    UserRegistration,
};
use certchain::crypto::{seal, SigningKeyPair, UserHash};
use certchain::ledger::{AccountId, Memo, Operation, TransactionRecord, Transaction, TxHash};

pub mod sha256;

pub const ADMIN: &str = "change-me";

pub fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap()
        .as_millis() as u64
}

pub struct User {
    pub keys: SigningKeyPair,
    pub reg: UserRegistration,
}

/// An in-process controller with one accredited lab.
pub struct World {
    pub ctl: Arc<Controller>,
    pub lab: LabOnboarding,
}

impl World {
    pub fn new() -> Self {
        Self::with(ControllerConfig::on_demand())
    }

    pub fn with(config: ControllerConfig) -> Self {
        let ctl = Arc::new(Controller::new(config).unwrap());
        let lab = ctl
            .onboard_lab(
                ADMIN,
                &OnboardLabRequest {
                    name: "Central Lab".into(),
                    accreditation_evidence: "ISO 15189".into(),
                },
            )
            .unwrap();
        Self { ctl, lab }
    }

    pub fn user(&self, name: &str) -> User {
        let keys = SigningKeyPair::generate();
        let reg = self
            .ctl
            .register_user(&RegisterUserRequest {
                identity: IdentityInput {
                    name: name.into(),
                    national_id: format!("nid-{name}"),
                },
                wallet_public_key: keys.account_id(),
            })
            .unwrap();
        User { keys, reg }
    }

    pub fn company(&self, name: &str) -> CompanyOnboarding {
        self.ctl
            .onboard_company(ADMIN, &OnboardCompanyRequest { name: name.into() })
            .unwrap()
    }

    pub fn submission(&self, user_id: &str, result: &str) -> LabSubmission {
        LabSubmission {
            user_id: user_id.into(),
            test_type: "PCR".into(),
            result: ResultDocument {
                result: result.into(),
                details: [("ct".to_string(), "38".to_string())].into(),
            },
            taken_at: now_ms(),
            biometric_digest: None,
        }
    }

    pub fn submit(&self, sub: &LabSubmission) -> TestSubmitted {
        let env = seal(&serde_json::to_vec(sub).unwrap(), &self.lab.lab_encryption_key).unwrap();
        self.ctl
            .submit_test(&self.lab.auth_token, &self.lab.lab_id, &env)
            .unwrap()
    }

    pub fn test_for(&self, user: &User) -> String {
        self.submit(&self.submission(&user.reg.user_id, "negative")).test_id
    }

    pub fn buy(&self, user: &User, n: u64) -> Result<Purchase, ControllerError> {
        self.ctl.purchase_tokens(
            &user.reg.auth_token,
            &PurchaseRequest {
                user_id: user.reg.user_id.clone(),
                n,
                payment_proof: PaymentRule::receipt_for(n * self.ctl.config().token_price),
            },
        )
    }

    pub fn initiate(
        &self,
        user: &User,
        test_id: &str,
        company_id: &str,
    ) -> Result<TransferInitiated, ControllerError> {
        self.ctl.initiate_transfer(
            &user.reg.auth_token,
            &InitiateTransferRequest {
                user_id: user.reg.user_id.clone(),
                test_id: test_id.into(),
                company_id: company_id.into(),
            },
        )
    }

    /// Signs a payment at the next sequence and queues it without closing.
    pub fn queue_payment(&self, keys: &SigningKeyPair, sequence: u64, to: AccountId, amount: u64, memo: Memo) -> TxHash {
        let tx = Transaction {
            source: keys.account_id(),
            sequence,
            operations: vec![Operation::Payment {
                destination: to,
                asset: self.ctl.ledger().kyc_asset(),
                amount,
            }],
            memo,
        };
        self.ctl
            .submit_transaction(&tx.sign(self.ctl.ledger().network_id(), keys))
            .unwrap()
            .tx_hash
    }

    pub fn pay(&self, keys: &SigningKeyPair, to: AccountId, amount: u64, memo: Memo) -> TransactionRecord {
        let seq = self.ctl.ledger().next_sequence(&keys.account_id()).unwrap();
        let hash = self.queue_payment(keys, seq, to, amount, memo);
        self.ctl.close_ledger().unwrap();
        self.ctl.get_transaction(&hash).unwrap()
    }

    /// initiate, pay one token with the memo, confirm.
    pub fn send(&self, user: &User, test_id: &str, company: &CompanyOnboarding) -> (UserHash, TxHash, TransferConfirmed) {
        let init = self.initiate(user, test_id, &company.company_id).unwrap();
        let rec = self.pay(
            &user.keys,
            init.destination_account,
            1,
            Memo::from_user_hash(&init.user_hash),
        );
        assert!(rec.result.is_applied(), "{:?}", rec.result);
        let conf = self
            .ctl
            .confirm_transfer(&user.reg.auth_token, &init.user_hash, &rec.tx_hash)
            .unwrap();
        (init.user_hash, rec.tx_hash, conf)
    }
}

/// A world with the controller also served over HTTP on a loopback port.
pub struct Served {
    pub world: World,
    pub server: http::ServerHandle,
}

impl Served {
    pub fn new() -> Self {
        Self::with(ControllerConfig::on_demand())
    }

    pub fn with(config: ControllerConfig) -> Self {
        let world = World::with(config);
        let server = http::spawn(world.ctl.clone(), "127.0.0.1:0").unwrap();
        Self { world, server }
    }

    pub fn url(&self) -> String {
        self.server.url()
    }

    pub fn api(&self) -> certchain::client::HttpApi {
        certchain::client::HttpApi::new(self.url())
    }
}
