use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use certchain::client::HttpApi;
use certchain::controller::{
    http, Controller, ControllerApi, ControllerConfig, ControllerError, LabSubmission,
    OnboardCompanyRequest, OnboardLabRequest, ResultDocument,
};
use certchain::crypto::{seal, EncryptionPublicKey};
use certchain::verifier::{CompanyConfig, Verifier, VerifierError};
use certchain::wallet::{render_labs, CrashPoint, SendOptions, Wallet, WalletError};

#[derive(Parser)]
#[command(name = "certchain", version, about = "Health certificate exchange over a private token ledger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run or configure the controller service.
    Controller {
        #[command(subcommand)]
        command: ControllerCmd,
    },
    /// Onboard labs and companies (admin token required).
    Admin(AdminArgs),
    /// Submit test results as an onboarded lab.
    Lab(LabArgs),
    /// End-user wallet.
    Wallet(WalletArgs),
    /// Destination-company verifier.
    Verifier(VerifierArgs),
}

#[derive(Subcommand)]
enum ControllerCmd {
    /// Serve the HTTP+JSON API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `listen` from the config.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

#[derive(Args)]
struct AdminArgs {
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    server: String,
    #[arg(long, env = "CERTCHAIN_ADMIN_TOKEN")]
    admin_token: String,
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: AdminCmd,
}

#[derive(Subcommand)]
enum AdminCmd {
    OnboardLab {
        name: String,
        #[arg(long, default_value = "")]
        evidence: String,
    },
    /// Onboards a company; `--company-config` writes its verifier config.
    OnboardCompany {
        name: String,
        #[arg(long)]
        company_config: Option<PathBuf>,
    },
    Accredit {
        lab_id: String,
        #[arg(long)]
        revoke: bool,
    },
}

#[derive(Args)]
struct LabArgs {
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    server: String,
    #[arg(long)]
    lab_id: String,
    #[arg(long, env = "CERTCHAIN_LAB_TOKEN")]
    token: String,
    /// Hex public key received at onboarding.
    #[arg(long)]
    lab_key: String,
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: LabCmd,
}

#[derive(Subcommand)]
enum LabCmd {
    Submit {
        #[arg(long)]
        user_id: String,
        #[arg(long)]
        test_type: String,
        #[arg(long)]
        result: String,
        /// Extra result fields as `key=value`.
        #[arg(long = "detail")]
        details: Vec<String>,
        /// Milliseconds since the epoch; defaults to now.
        #[arg(long)]
        taken_at: Option<u64>,
        /// Hex biometric digest.
        #[arg(long)]
        biometric: Option<String>,
    },
}

#[derive(Args)]
struct WalletArgs {
    /// Controller URL; stored in the wallet at `init`, overrides it afterwards.
    #[arg(long)]
    server: Option<String>,
    #[arg(long, default_value = "wallet.json")]
    wallet_file: PathBuf,
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: WalletCmd,
}

#[derive(Subcommand)]
enum WalletCmd {
    /// Create a wallet file with a fresh signing key.
    Init,
    Register {
        #[arg(long)]
        name: String,
        #[arg(long)]
        national_id: String,
    },
    Labs,
    Tests,
    Buy {
        n: u64,
        /// Defaults to the receipt the mock gateway expects.
        #[arg(long)]
        payment_proof: Option<String>,
        #[arg(long, default_value_t = 5)]
        price: u64,
    },
    Send {
        test_id: String,
        company_id: String,
        #[arg(long, hide = true)]
        crash_after: Option<CrashPoint>,
    },
    /// Finish an interrupted send.
    Resume,
    ShowQr {
        numeric_id: u64,
    },
    Balance,
    /// Certificates sent from this wallet.
    Sent,
}

#[derive(Args)]
struct VerifierArgs {
    #[arg(long)]
    company_config: PathBuf,
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: VerifierCmd,
}

#[derive(Subcommand)]
enum VerifierCmd {
    Verify {
        qr_text: String,
        /// Hex biometric digest captured at the counter.
        #[arg(long)]
        biometric: Option<String>,
    },
    /// Return tokens to the issuer and claim the buy-back credit.
    ReturnTokens {
        n: u64,
        /// Claim an already submitted return instead of paying again.
        #[arg(long)]
        tx_hash: Option<String>,
    },
    Balance,
}

struct Failure {
    code: &'static str,
    message: String,
    exit: i32,
}

impl From<ControllerError> for Failure {
    fn from(e: ControllerError) -> Self {
        Self {
            code: e.code(),
            message: e.message().to_string(),
            exit: e.exit_code(),
        }
    }
}

impl From<WalletError> for Failure {
    fn from(e: WalletError) -> Self {
        if let WalletError::Api(e) = e {
            return e.into();
        }
        Self {
            code: e.code(),
            message: e.to_string(),
            exit: e.exit_code(),
        }
    }
}

impl From<VerifierError> for Failure {
    fn from(e: VerifierError) -> Self {
        if let VerifierError::Api(e) = e {
            return e.into();
        }
        Self {
            code: e.code(),
            message: e.to_string(),
            exit: e.exit_code(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: "USAGE",
        message: message.into(),
        exit: 2,
    }
}

type Outcome = Result<(), Failure>;

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce(&T) -> String) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
    } else {
        println!("{}", text(value));
    }
}

fn hex32(s: &str) -> Result<[u8; 32], Failure> {
    hex::FromHex::from_hex(s).map_err(|_| usage(format!("expected 64 hex characters, got {s:?}")))
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("install SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
    tracing::info!("shutting down");
}

fn serve(config: Option<PathBuf>, listen: Option<String>) -> Outcome {
    let mut cfg = match config {
        Some(p) => ControllerConfig::load(p)?,
        None => ControllerConfig::default(),
    };
    if let Some(l) = listen {
        cfg.listen = l;
    }
    let addr = cfg.listen.clone();
    let controller = Arc::new(Controller::new(cfg)?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| usage(e.to_string()))?;
    runtime
        .block_on(async move {
            let listener = tokio::net::TcpListener::bind(&addr).await?;
            tracing::info!(addr = %listener.local_addr()?, issuer = %controller.issuer(), "controller listening");
            let ctl = controller.clone();
            http::serve(ctl, listener, shutdown_signal())
            .await?;
            controller.shutdown();
            Ok::<_, std::io::Error>(())
        })
        .map_err(|e| ControllerError::Internal(e.to_string()).into())
}

fn admin(a: AdminArgs) -> Outcome {
    let api = HttpApi::new(&a.server);
    match a.command {
        AdminCmd::OnboardLab { name, evidence } => {
            let lab = api.onboard_lab(
                &a.admin_token,
                &OnboardLabRequest {
                    name,
                    accreditation_evidence: evidence,
                },
            )?;
            emit(a.json, &lab, |l| {
                format!(
                    "lab_id: {}\nlab_key: {}\ntoken: {}",
                    l.lab_id,
                    hex::encode(l.lab_encryption_key.0),
                    l.auth_token
                )
            });
        }
        AdminCmd::OnboardCompany {
            name,
            company_config,
        } => {
            let company = api.onboard_company(&a.admin_token, &OnboardCompanyRequest { name })?;
            if let Some(path) = company_config {
                let cfg = CompanyConfig::from_onboarding(&a.server, &company);
                std::fs::write(&path, cfg.to_toml())
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            }
            emit(a.json, &company, |c| {
                format!("company_id: {}\nledger_account: {}", c.company_id, c.ledger_account)
            });
        }
        AdminCmd::Accredit { lab_id, revoke } => {
            let lab = api.set_lab_accreditation(&a.admin_token, &lab_id, !revoke)?;
            emit(a.json, &lab, |l| format!("{} accredited: {}", l.lab_id, l.accredited));
        }
    }
    Ok(())
}

fn lab(a: LabArgs) -> Outcome {
    let api = HttpApi::new(&a.server);
    let key = EncryptionPublicKey(hex32(&a.lab_key)?);
    let LabCmd::Submit {
        user_id,
        test_type,
        result,
        details,
        taken_at,
        biometric,
    } = a.command;
    let details = details
        .iter()
        .map(|d| {
            d.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| usage(format!("detail {d:?} is not key=value")))
        })
        .collect::<Result<_, _>>()?;
    let submission = LabSubmission {
        user_id,
        test_type,
        result: ResultDocument { result, details },
        taken_at: taken_at.unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0)
        }),
        biometric_digest: biometric.as_deref().map(hex32).transpose()?,
    };
    let env = seal(&serde_json::to_vec(&submission).expect("submission serializes"), &key)
        .map_err(ControllerError::from)?;
    let submitted = api.submit_test(&a.token, &a.lab_id, &env)?;
    emit(a.json, &submitted, |s| {
        format!("test_id: {}\nvalid_until: {}", s.test_id, s.valid_until)
    });
    Ok(())
}

fn wallet(a: WalletArgs) -> Outcome {
    if let WalletCmd::Init = a.command {
        let server = a.server.as_deref().unwrap_or("http://127.0.0.1:8080");
        let w = Wallet::create(&a.wallet_file, server)?;
        emit(a.json, &serde_json::json!({ "account": w.account() }), |_| {
            format!("account: {}", w.account())
        });
        return Ok(());
    }
    let mut w = Wallet::open(&a.wallet_file)?;
    if let Some(server) = &a.server {
        w.set_server(server)?;
    }
    let api = HttpApi::new(w.server());
    let json = a.json;
    match a.command {
        WalletCmd::Init => unreachable!(),
        WalletCmd::Register { name, national_id } => {
            let reg = w.cmd_register(&api, &name, &national_id)?;
            emit(json, &reg, |r| format!("user_id: {}", r.user_id));
        }
        WalletCmd::Labs => {
            let labs = w.cmd_list_labs(&api)?;
            emit(json, &labs, |l| render_labs(l));
        }
        WalletCmd::Tests => {
            let tests = w.cmd_tests(&api)?;
            emit(json, &tests, |t| {
                if t.is_empty() {
                    return "no valid tests".into();
                }
                t.iter()
                    .map(|t| format!("{}  {}  valid until {}", t.test_id, t.test_type, t.valid_until))
                    .collect::<Vec<_>>()
                    .join("\n")
            });
        }
        WalletCmd::Buy {
            n,
            payment_proof,
            price,
        } => {
            let proof = payment_proof
                .unwrap_or_else(|| certchain::controller::PaymentRule::receipt_for(n * price));
            let purchase = w.cmd_buy(&api, n, &proof)?;
            emit(json, &purchase, |p| {
                format!("tx_hash: {}\nbalance: {}", p.tx_hash.to_hex(), p.balance)
            });
        }
        WalletCmd::Send {
            test_id,
            company_id,
            crash_after,
        } => {
            let opts = SendOptions {
                crash_at: crash_after,
            };
            let out = w.cmd_send(&api, &test_id, &company_id, &opts)?;
            emit(json, &out, |o| format!("numeric_id: {}\nqr: {}", o.numeric_id, o.qr_text));
        }
        WalletCmd::Resume => match w.cmd_resume(&api, &SendOptions::default())? {
            Some(out) => emit(json, &out, |o| format!("numeric_id: {}\nqr: {}", o.numeric_id, o.qr_text)),
            None => emit(json, &serde_json::Value::Null, |_| "nothing to resume".into()),
        },
        WalletCmd::ShowQr { numeric_id } => {
            let qr = w.cmd_show_qr(&api, numeric_id)?;
            emit(json, &qr, |q| q.qr_text.clone());
        }
        WalletCmd::Balance => {
            let b = w.cmd_balance(&api)?;
            emit(json, &b, |b| format!("account: {}\nbalance: {}", b.account, b.balance));
        }
        WalletCmd::Sent => {
            let sent = &w.state().sent;
            emit(json, sent, |s| {
                s.iter()
                    .map(|c| format!("{}  {}  {}", c.numeric_id, c.company_id, c.qr_text))
                    .collect::<Vec<_>>()
                    .join("\n")
            });
        }
    }
    Ok(())
}

fn verifier(a: VerifierArgs) -> Outcome {
    let cfg = CompanyConfig::load(&a.company_config)?;
    let api = HttpApi::new(&cfg.server);
    let v = Verifier::new(cfg, &api);
    match a.command {
        VerifierCmd::Verify { qr_text, biometric } => {
            let presented = biometric.as_deref().map(hex32).transpose()?;
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0);
            let out = v.cmd_verify(&qr_text, now, presented.as_ref())?;
            emit(a.json, &out, |o| {
                let c = &o.certificate;
                let mut lines = vec![
                    format!("decision: {:?}", o.decision).to_uppercase(),
                    format!("holder: {}", c.user_name),
                    format!("test: {} ({}) from {}", c.test_type, c.test_id, c.lab_name),
                    format!("result: {}", c.result.result),
                    format!("valid until: {}", c.valid_until),
                ];
                lines.extend(o.reasons.iter().map(|r| format!("reason: {r}")));
                lines.join("\n")
            });
        }
        VerifierCmd::ReturnTokens { n, tx_hash } => {
            let (hash, credit) = match tx_hash {
                Some(h) => {
                    let hash = certchain::ledger::TxHash::from_hex(&h)
                        .ok_or_else(|| usage(format!("bad tx hash {h:?}")))?;
                    (hash, v.cmd_claim(&hash, n)?)
                }
                None => v.cmd_return_tokens(n)?,
            };
            let out = serde_json::json!({
                "tx_hash": hash,
                "credit": credit.credit,
                "credit_balance": credit.credit_balance,
            });
            emit(a.json, &out, |_| {
                format!(
                    "tx_hash: {}\ncredit: {}\ncredit_balance: {}",
                    hash.to_hex(),
                    credit.credit,
                    credit.credit_balance
                )
            });
        }
        VerifierCmd::Balance => {
            let b = v.balance()?;
            emit(a.json, &serde_json::json!({ "balance": b }), |_| format!("balance: {b}"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    let cli = Cli::parse();
    let json = match &cli.command {
        Command::Admin(a) => a.json,
        Command::Lab(a) => a.json,
        Command::Wallet(a) => a.json,
        Command::Verifier(a) => a.json,
        Command::Controller { .. } => false,
    };
    let result = match cli.command {
        Command::Controller {
            command: ControllerCmd::Serve { config, listen },
        } => serve(config, listen),
        Command::Controller {
            command: ControllerCmd::DefaultConfig,
        } => {
            print!("{}", toml::to_string(&ControllerConfig::default()).expect("config serializes"));
            Ok(())
        }
        Command::Admin(a) => admin(a),
        Command::Lab(a) => lab(a),
        Command::Wallet(a) => wallet(a),
        Command::Verifier(a) => verifier(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if json {
                eprintln!(
                    "{}",
                    serde_json::json!({ "error": f.code, "message": f.message })
                );
            } else {
                eprintln!("error: {}: {}", f.code, f.message);
            }
            ExitCode::from(u8::try_from(f.exit).unwrap_or(1))
        }
    }
}
