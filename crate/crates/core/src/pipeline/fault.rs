//! Deterministic crash injection for resume testing.
//!
//! When `GEOSEG_FAULT_AT=N` is set, the N-th call to [`point`] (counted across
//! all sites in the process, starting at 1) aborts the process without unwinding.
//! Journal commits consult [`torn`] instead, which lets the caller leave a
//! half-written line behind before aborting.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

pub const FAULT_ENV: &str = "GEOSEG_FAULT_AT";

static COUNTER: AtomicU64 = AtomicU64::new(0);
static TARGET: OnceLock<Option<u64>> = OnceLock::new();

fn target() -> Option<u64> {
    *TARGET.get_or_init(|| {
        std::env::var(FAULT_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&n| n > 0)
    })
}

fn fire() -> bool {
    let n = COUNTER.fetch_add(1, Ordering::SeqCst) + 1;
    target() == Some(n)
}

pub fn point(site: &str) {
    if fire() {
        eprintln!("fault injected at {site}");
        std::process::abort();
    }
}

/// Like [`point`], but hands control back so the caller can tear its write first.
/// The caller must abort after tearing.
pub fn torn(site: &str) -> bool {
    if fire() {
        eprintln!("torn write injected at {site}");
        true
    } else {
        false
    }
}

pub fn abort() -> ! {
    std::process::abort()
}

/// Number of fault sites passed so far in this process.
pub fn sites_passed() -> u64 {
    COUNTER.load(Ordering::SeqCst)
}
