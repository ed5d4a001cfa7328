use crate::crypto::{SealedEnvelope, UserHash};
use crate::ledger::{AccountId, NetworkInfo, PendingReceipt, SignedTransaction, TransactionRecord, TxHash};

use super::types::*;
use super::ControllerError;

pub type ApiResult<T> = Result<T, ControllerError>;

/// Everything clients can ask of the controller.
///
/// Implemented by [`super::Controller`] for in-process use and by
/// [`crate::client::HttpApi`] over the HTTP+JSON interface, so the wallet and
/// verifier run unchanged against either. `auth` arguments are bearer tokens.
pub trait ControllerApi {
    fn onboard_lab(&self, admin: &str, req: &OnboardLabRequest) -> ApiResult<LabOnboarding>;
    fn set_lab_accreditation(&self, admin: &str, lab_id: &str, accredited: bool) -> ApiResult<LabSummary>;
    fn onboard_company(&self, admin: &str, req: &OnboardCompanyRequest) -> ApiResult<CompanyOnboarding>;
    fn register_user(&self, req: &RegisterUserRequest) -> ApiResult<UserRegistration>;
    fn list_labs(&self) -> ApiResult<Vec<LabSummary>>;
    fn submit_test(&self, auth: &str, lab_id: &str, envelope: &SealedEnvelope) -> ApiResult<TestSubmitted>;
    fn list_valid_tests(&self, auth: &str, user_id: &str) -> ApiResult<Vec<TestSummary>>;
    fn purchase_tokens(&self, auth: &str, req: &PurchaseRequest) -> ApiResult<Purchase>;
    fn initiate_transfer(&self, auth: &str, req: &InitiateTransferRequest) -> ApiResult<TransferInitiated>;
    fn confirm_transfer(&self, auth: &str, user_hash: &UserHash, block_hash: &TxHash) -> ApiResult<TransferConfirmed>;
    fn get_qr_payload(&self, auth: &str, numeric_id: u64) -> ApiResult<QrPayload>;
    fn fetch_certificate(&self, auth: &str, company_id: &str, user_hash: &UserHash) -> ApiResult<SealedEnvelope>;
    fn buy_back(&self, auth: &str, req: &BuybackRequest) -> ApiResult<BuybackCredit>;

    fn ledger_info(&self) -> ApiResult<NetworkInfo>;
    fn ledger_account(&self, account: &AccountId) -> ApiResult<AccountView>;
    fn submit_transaction(&self, stx: &SignedTransaction) -> ApiResult<PendingReceipt>;
    fn get_transaction(&self, tx_hash: &TxHash) -> ApiResult<TransactionRecord>;
    /// Closes a ledger now; refused with `CLOSE_DISABLED` in timer mode.
    fn close_ledger(&self) -> ApiResult<CloseSummary>;
}

impl<T: ControllerApi + ?Sized> ControllerApi for std::sync::Arc<T> {
    fn onboard_lab(&self, admin: &str, req: &OnboardLabRequest) -> ApiResult<LabOnboarding> {
        (**self).onboard_lab(admin, req)
    }
    fn set_lab_accreditation(&self, admin: &str, lab_id: &str, accredited: bool) -> ApiResult<LabSummary> {
        (**self).set_lab_accreditation(admin, lab_id, accredited)
    }
    fn onboard_company(&self, admin: &str, req: &OnboardCompanyRequest) -> ApiResult<CompanyOnboarding> {
        (**self).onboard_company(admin, req)
    }
    fn register_user(&self, req: &RegisterUserRequest) -> ApiResult<UserRegistration> {
        (**self).register_user(req)
    }
    fn list_labs(&self) -> ApiResult<Vec<LabSummary>> {
        (**self).list_labs()
    }
    fn submit_test(&self, auth: &str, lab_id: &str, envelope: &SealedEnvelope) -> ApiResult<TestSubmitted> {
        (**self).submit_test(auth, lab_id, envelope)
    }
    fn list_valid_tests(&self, auth: &str, user_id: &str) -> ApiResult<Vec<TestSummary>> {
        (**self).list_valid_tests(auth, user_id)
    }
    fn purchase_tokens(&self, auth: &str, req: &PurchaseRequest) -> ApiResult<Purchase> {
        (**self).purchase_tokens(auth, req)
    }
    fn initiate_transfer(&self, auth: &str, req: &InitiateTransferRequest) -> ApiResult<TransferInitiated> {
        (**self).initiate_transfer(auth, req)
    }
    fn confirm_transfer(&self, auth: &str, user_hash: &UserHash, block_hash: &TxHash) -> ApiResult<TransferConfirmed> {
        (**self).confirm_transfer(auth, user_hash, block_hash)
    }
    fn get_qr_payload(&self, auth: &str, numeric_id: u64) -> ApiResult<QrPayload> {
        (**self).get_qr_payload(auth, numeric_id)
    }
    fn fetch_certificate(&self, auth: &str, company_id: &str, user_hash: &UserHash) -> ApiResult<SealedEnvelope> {
        (**self).fetch_certificate(auth, company_id, user_hash)
    }
    fn buy_back(&self, auth: &str, req: &BuybackRequest) -> ApiResult<BuybackCredit> {
        (**self).buy_back(auth, req)
    }
    fn ledger_info(&self) -> ApiResult<NetworkInfo> {
        (**self).ledger_info()
    }
    fn ledger_account(&self, account: &AccountId) -> ApiResult<AccountView> {
        (**self).ledger_account(account)
    }
    fn submit_transaction(&self, stx: &SignedTransaction) -> ApiResult<PendingReceipt> {
        (**self).submit_transaction(stx)
    }
    fn get_transaction(&self, tx_hash: &TxHash) -> ApiResult<TransactionRecord> {
        (**self).get_transaction(tx_hash)
    }
    fn close_ledger(&self) -> ApiResult<CloseSummary> {
        (**self).close_ledger()
    }
}
