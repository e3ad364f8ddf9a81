use std::sync::Mutex;
use std::time::Duration;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponential backoff with multiplicative jitter.
///
/// The delay before retry `k` (the `k+1`-th attempt) is
/// `base_delay × factor^(k−1) × (1 ± jitter)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_secs: f64,
    pub factor: f64,
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay_secs: 1.0,
            factor: 2.0,
            jitter: 0.1,
        }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_attempts < 1 {
            return Err(Error::Validation("retry.max_attempts: must be >= 1".into()));
        }
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.base_delay_secs) || !ok(self.factor) {
            return Err(Error::Validation(
                "retry: base_delay_secs and factor must be nonnegative".into(),
            ));
        }
        if !ok(self.jitter) || self.jitter > 1.0 {
            return Err(Error::Validation("retry.jitter: must lie in [0,1]".into()));
        }
        Ok(())
    }

    /// Delay before retry `k` (1-based) without jitter.
    pub fn nominal_delay(&self, k: u32) -> Duration {
        let exp = k.saturating_sub(1) as i32;
        Duration::from_secs_f64(self.base_delay_secs * self.factor.powi(exp))
    }

    pub fn jittered_delay(&self, k: u32, rng: &mut impl Rng) -> Duration {
        let scale = if self.jitter > 0.0 {
            rng.gen_range(1.0 - self.jitter..=1.0 + self.jitter)
        } else {
            1.0
        };
        self.nominal_delay(k).mul_f64(scale)
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, delay: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, delay: Duration) {
        std::thread::sleep(delay);
    }
}

/// Records requested delays instead of sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    delays: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn delays(&self) -> Vec<Duration> {
        self.delays.lock().unwrap().clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, delay: Duration) {
        self.delays.lock().unwrap().push(delay);
    }
}

/// Runs `op` until it succeeds, fails with a non-retryable error, or the
/// attempts run out. `op` receives the 1-based attempt number. Returns the
/// final outcome and the number of attempts made.
pub fn with_retry<T>(
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
    seed: u64,
    mut op: impl FnMut(u32) -> Result<T>,
) -> (Result<T>, u32) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut attempt = 1;
    loop {
        match op(attempt) {
            Ok(v) => return (Ok(v), attempt),
            Err(e) if e.is_retryable() && attempt < policy.max_attempts => {
                log::debug!("attempt {attempt} failed: {e}; retrying");
                sleeper.sleep(policy.jittered_delay(attempt, &mut rng));
                attempt += 1;
            }
            Err(e) => return (Err(e), attempt),
        }
    }
}
