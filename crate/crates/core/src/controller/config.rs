use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ControllerError;
use crate::ledger::DEFAULT_CLOSE_INTERVAL_MS;

pub const DEFAULT_TEST_VALIDITY_MS: u64 = 30 * 24 * 60 * 60 * 1000;
pub const DEFAULT_BUYBACK_DIVISOR: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CloseMode {
    /// Close every `close_interval_ms` on a background thread.
    #[default]
    Timer,
    /// Close whenever a caller asks (controller transactions close immediately).
    OnDemand,
}

/// Acceptance rule of the mock payment gateway.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum PaymentRule {
    AcceptAll,
    RejectAll,
    /// Proof must read `receipt:<amount due>`.
    #[default]
    AmountReceipt,
}

impl PaymentRule {
    pub fn receipt_for(amount: u64) -> String {
        format!("receipt:{amount}")
    }

    pub fn accepts(&self, amount_due: u64, proof: &str) -> bool {
        match self {
            PaymentRule::AcceptAll => true,
            PaymentRule::RejectAll => false,
            PaymentRule::AmountReceipt => proof == Self::receipt_for(amount_due),
        }
    }
}

/// Controller configuration; the TOML config file mirrors these fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub network_id: String,
    pub kyc_supply: u64,
    pub max_tokens_per_purchase: u64,
    pub token_price: u64,
    pub buyback_divisor: u64,
    pub close_interval_ms: u64,
    pub close_mode: CloseMode,
    pub test_validity_ms: u64,
    /// Bearer token accepted for onboarding calls.
    pub admin_token: String,
    pub payment: PaymentRule,
    /// Holds the controller key, block log and registry journal. In-memory when unset.
    pub data_dir: Option<PathBuf>,
    pub listen: String,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            network_id: "certchain-private".into(),
            kyc_supply: 1_000_000,
            max_tokens_per_purchase: 10,
            token_price: 5,
            buyback_divisor: DEFAULT_BUYBACK_DIVISOR,
            close_interval_ms: DEFAULT_CLOSE_INTERVAL_MS,
            close_mode: CloseMode::Timer,
            test_validity_ms: DEFAULT_TEST_VALIDITY_MS,
            admin_token: "change-me".into(),
            payment: PaymentRule::AmountReceipt,
            data_dir: None,
            listen: "127.0.0.1:8080".into(),
        }
    }
}

impl ControllerConfig {
    /// Defaults with on-demand closes, for tests and examples.
    pub fn on_demand() -> Self {
        Self {
            close_mode: CloseMode::OnDemand,
            ..Self::default()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ControllerError> {
        let cfg: Self =
            toml::from_str(s).map_err(|e| ControllerError::BadRequest(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ControllerError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ControllerError::Internal(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: &str| Err(ControllerError::BadRequest(m.to_string()));
        if self.network_id.is_empty() {
            return bad("network_id must not be empty");
        }
        if self.kyc_supply == 0 {
            return bad("kyc_supply must be positive");
        }
        if self.max_tokens_per_purchase == 0 {
            return bad("max_tokens_per_purchase must be positive");
        }
        if self.token_price == 0 {
            return bad("token_price must be positive");
        }
        if self.buyback_divisor == 0 {
            return bad("buyback_divisor must be positive");
        }
        if self.close_interval_ms == 0 {
            return bad("close_interval_ms must be positive");
        }
        if self.test_validity_ms == 0 {
            return bad("test_validity_ms must be positive");
        }
        Ok(())
    }

    /// Credit for returning `n` tokens: `floor(n × token_price / buyback_divisor)`.
    pub fn buyback_credit(&self, n: u64) -> u64 {
        let total = u128::from(n) * u128::from(self.token_price) / u128::from(self.buyback_divisor);
        u64::try_from(total).unwrap_or(u64::MAX)
    }
}

/// Source of wall-clock milliseconds.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        crate::ledger::unix_millis()
    }
}

/// Manually advanced clock for tests.
#[derive(Debug, Clone, Default)]
pub struct ManualClock(Arc<AtomicU64>);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        Self(Arc::new(AtomicU64::new(start_ms)))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}
