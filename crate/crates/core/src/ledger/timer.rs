use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread::JoinHandle;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::LedgerHandle;

/// Default ledger close interval.
pub const DEFAULT_CLOSE_INTERVAL_MS: u64 = 5_000;

pub(crate) fn unix_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Background thread closing a ledger on a fixed cadence.
///
/// Deadlines are `start + k * interval`, so scheduling jitter never
/// accumulates. Dropping the timer stops it.
#[derive(Debug)]
pub struct CloseTimer {
    stop: Option<mpsc::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl CloseTimer {
    pub fn start(ledger: LedgerHandle, interval: Duration) -> Self {
        let (stop, stopped) = mpsc::channel::<()>();
        let thread = std::thread::Builder::new()
            .name("ledger-close".into())
            .spawn(move || {
                let start = Instant::now();
                let mut tick: u32 = 1;
                loop {
                    let deadline = start + interval * tick;
                    let wait = deadline.saturating_duration_since(Instant::now());
                    match stopped.recv_timeout(wait) {
                        Err(RecvTimeoutError::Timeout) => {}
                        _ => return,
                    }
                    if let Err(err) = ledger.close_ledger(unix_millis()) {
                        tracing::error!(%err, "timed ledger close failed");
                    }
                    tick += 1;
                }
            })
            .expect("spawn ledger close thread");
        Self {
            stop: Some(stop),
            thread: Some(thread),
        }
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for CloseTimer {
    fn drop(&mut self) {
        self.shutdown();
    }
}
