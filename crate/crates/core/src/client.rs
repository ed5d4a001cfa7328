//! Blocking HTTP client for the controller API.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::controller::*;
use crate::crypto::{SealedEnvelope, UserHash};
use crate::ledger::{
    AccountId, NetworkInfo, PendingReceipt, SignedTransaction, SupplySnapshot, TransactionRecord,
    TxHash, VerificationReport,
};

/// [`ControllerApi`] over HTTP. Server errors map back to the same
/// [`ControllerError`] variant; connection failures become `TRANSPORT`.
#[derive(Debug, Clone)]
pub struct HttpApi {
    base: String,
    agent: ureq::Agent,
}

impl HttpApi {
    pub fn new(base: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(5))
            .timeout(Duration::from_secs(60))
            .build();
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn request(&self, method: &str, path: &str, auth: &str) -> ureq::Request {
        let req = self.agent.request(method, &format!("{}{path}", self.base));
        if auth.is_empty() {
            req
        } else {
            req.set("Authorization", &format!("Bearer {auth}"))
        }
    }

    fn finish<T: DeserializeOwned>(res: Result<ureq::Response, ureq::Error>) -> ApiResult<T> {
        match res {
            Ok(resp) => resp
                .into_json()
                .map_err(|e| ControllerError::Transport(format!("bad response body: {e}"))),
            Err(ureq::Error::Status(status, resp)) => match resp.into_json::<ErrorBody>() {
                Ok(body) => Err(ControllerError::from_code(&body.error, body.message)),
                Err(_) => Err(ControllerError::Transport(format!("HTTP {status}"))),
            },
            Err(ureq::Error::Transport(t)) => Err(ControllerError::Transport(t.to_string())),
        }
    }

    fn get<T: DeserializeOwned>(&self, path: &str, auth: &str) -> ApiResult<T> {
        Self::finish(self.request("GET", path, auth).call())
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, auth: &str, body: &B) -> ApiResult<T> {
        Self::finish(self.request("POST", path, auth).send_json(body))
    }

    pub fn supply(&self) -> ApiResult<SupplySnapshot> {
        self.get("/ledger/supply", "")
    }

    pub fn verify_chain(&self) -> ApiResult<VerificationReport> {
        self.get("/ledger/verify", "")
    }
}

impl ControllerApi for HttpApi {
    fn onboard_lab(&self, admin: &str, req: &OnboardLabRequest) -> ApiResult<LabOnboarding> {
        self.post("/labs", admin, req)
    }

    fn set_lab_accreditation(&self, admin: &str, lab_id: &str, accredited: bool) -> ApiResult<LabSummary> {
        self.post(
            &format!("/labs/{lab_id}/accreditation"),
            admin,
            &AccreditationRequest { accredited },
        )
    }

    fn onboard_company(&self, admin: &str, req: &OnboardCompanyRequest) -> ApiResult<CompanyOnboarding> {
        self.post("/companies", admin, req)
    }

    fn register_user(&self, req: &RegisterUserRequest) -> ApiResult<UserRegistration> {
        self.post("/users", "", req)
    }

    fn list_labs(&self) -> ApiResult<Vec<LabSummary>> {
        self.get("/labs", "")
    }

    fn submit_test(&self, auth: &str, lab_id: &str, envelope: &SealedEnvelope) -> ApiResult<TestSubmitted> {
        let req = SubmitTestRequest {
            lab_id: lab_id.to_string(),
            envelope: envelope.clone(),
        };
        self.post("/tests", auth, &req)
    }

    fn list_valid_tests(&self, auth: &str, user_id: &str) -> ApiResult<Vec<TestSummary>> {
        self.get(&format!("/users/{user_id}/tests"), auth)
    }

    fn purchase_tokens(&self, auth: &str, req: &PurchaseRequest) -> ApiResult<Purchase> {
        self.post("/purchases", auth, req)
    }

    fn initiate_transfer(&self, auth: &str, req: &InitiateTransferRequest) -> ApiResult<TransferInitiated> {
        self.post("/transfers", auth, req)
    }

    fn confirm_transfer(&self, auth: &str, user_hash: &UserHash, block_hash: &TxHash) -> ApiResult<TransferConfirmed> {
        self.post(
            &format!("/transfers/{user_hash}/confirm"),
            auth,
            &ConfirmTransferRequest {
                block_hash: *block_hash,
            },
        )
    }

    fn get_qr_payload(&self, auth: &str, numeric_id: u64) -> ApiResult<QrPayload> {
        self.get(&format!("/qr/{numeric_id}"), auth)
    }

    fn fetch_certificate(&self, auth: &str, company_id: &str, user_hash: &UserHash) -> ApiResult<SealedEnvelope> {
        let req = FetchCertificateRequest {
            company_id: company_id.to_string(),
            user_hash: *user_hash,
        };
        let resp: CertificateEnvelope = self.post("/certificates/fetch", auth, &req)?;
        Ok(resp.envelope)
    }

    fn buy_back(&self, auth: &str, req: &BuybackRequest) -> ApiResult<BuybackCredit> {
        self.post("/buybacks", auth, req)
    }

    fn ledger_info(&self) -> ApiResult<NetworkInfo> {
        self.get("/ledger", "")
    }

    fn ledger_account(&self, account: &AccountId) -> ApiResult<AccountView> {
        self.get(&format!("/ledger/accounts/{account}"), "")
    }

    fn submit_transaction(&self, stx: &SignedTransaction) -> ApiResult<PendingReceipt> {
        self.post(
            "/ledger/transactions",
            "",
            &SubmitTransactionRequest {
                transaction: stx.clone(),
            },
        )
    }

    fn get_transaction(&self, tx_hash: &TxHash) -> ApiResult<TransactionRecord> {
        self.get(&format!("/ledger/transactions/{}", tx_hash.to_hex()), "")
    }

    fn close_ledger(&self) -> ApiResult<CloseSummary> {
        self.post("/ledger/close", "", &serde_json::json!({}))
    }
}
