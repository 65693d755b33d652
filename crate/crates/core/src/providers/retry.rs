//! Retry, rate-limit and concurrency policy shared by chat and embedding clients.

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use super::ProviderError;

/// Time source. Injected so rate limiting and backoff are testable without sleeping.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Virtual clock: `sleep` advances time instantly and is recorded.
#[derive(Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
    sleeps: Mutex<Vec<Duration>>,
}

impl ManualClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.sleeps.lock().unwrap().clone()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.sleeps.lock().unwrap().push(d);
        self.advance(d);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Backoff before retry number `attempt` (0-based): `base * 2^attempt`, capped.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Token bucket. `rps <= 0` disables limiting.
pub struct RateLimiter {
    rps: f64,
    burst: f64,
    state: Mutex<BucketState>,
    clock: Arc<dyn Clock>,
}

struct BucketState {
    tokens: f64,
    last: Duration,
}

impl RateLimiter {
    pub fn new(rps: f64, burst: u32, clock: Arc<dyn Clock>) -> Self {
        let burst = f64::from(burst.max(1));
        let last = clock.now();
        Self { rps, burst, state: Mutex::new(BucketState { tokens: burst, last }), clock }
    }

    pub fn acquire(&self) {
        if self.rps <= 0.0 {
            return;
        }
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = self.clock.now();
                let elapsed = now.saturating_sub(st.last).as_secs_f64();
                st.tokens = (st.tokens + elapsed * self.rps).min(self.burst);
                st.last = now;
                if st.tokens >= 1.0 {
                    st.tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - st.tokens) / self.rps)
            };
            self.clock.sleep(wait);
        }
    }
}

/// Counting semaphore bounding in-flight requests.
pub struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a> {
    sem: &'a Semaphore,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self { permits: Mutex::new(permits.max(1)), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
        Permit { sem: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.sem.permits.lock().unwrap() += 1;
        self.sem.cv.notify_one();
    }
}

/// Bundles the three policies; `run` executes one logical request.
pub struct Reliability {
    pub policy: RetryPolicy,
    limiter: RateLimiter,
    permits: Semaphore,
    clock: Arc<dyn Clock>,
}

impl Reliability {
    pub fn new(policy: RetryPolicy, rps: f64, max_concurrency: usize, clock: Arc<dyn Clock>) -> Self {
        Self {
            policy,
            limiter: RateLimiter::new(rps, 1, clock.clone()),
            permits: Semaphore::new(max_concurrency),
            clock,
        }
    }

    pub fn unlimited() -> Self {
        Self::new(RetryPolicy::default(), 0.0, usize::MAX, Arc::new(SystemClock::default()))
    }

    /// Runs `op` with retries on transient failures. Each attempt passes the
    /// rate limiter; exhaustion yields [`ProviderError::Transport`].
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, ProviderError>) -> Result<T, ProviderError> {
        let _permit = self.permits.acquire();
        let mut attempt = 0u32;
        loop {
            self.limiter.acquire();
            match op() {
                Err(ProviderError::Transient { message, .. }) => {
                    if attempt >= self.policy.max_retries {
                        return Err(ProviderError::Transport { attempts: attempt + 1, message });
                    }
                    self.clock.sleep(self.policy.delay(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_backoff_is_capped() {
        let p = RetryPolicy {
            max_retries: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_secs(1),
        };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(1), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(800));
        assert_eq!(p.delay(4), Duration::from_secs(1));
        assert_eq!(p.delay(40), Duration::from_secs(1));
    }

    #[test]
    fn rate_limiter_never_exceeds_rps() {
        let clock = Arc::new(ManualClock::default());
        let limiter = RateLimiter::new(5.0, 1, clock.clone());
        let mut stamps = Vec::new();
        for _ in 0..50 {
            limiter.acquire();
            stamps.push(clock.now());
        }
        // Any half-open one-second window holds at most 5 requests.
        for (i, &t) in stamps.iter().enumerate() {
            let in_window = stamps[i..].iter().take_while(|&&u| u < t + Duration::from_secs(1)).count();
            assert!(in_window <= 5, "window at {t:?} holds {in_window}");
        }
        let total = stamps.last().unwrap().as_secs_f64();
        assert!((total - 49.0 / 5.0).abs() < 1e-6, "50 requests at 5 rps span {total}s");
    }

    #[test]
    fn retries_then_gives_up() {
        let clock = Arc::new(ManualClock::default());
        let policy = RetryPolicy {
            max_retries: 2,
            base_delay: Duration::from_millis(10),
            max_delay: Duration::from_secs(1),
        };
        let rel = Reliability::new(policy, 0.0, 4, clock.clone());
        let mut calls = 0;
        let out: Result<(), _> = rel.run(|| {
            calls += 1;
            Err(ProviderError::Transient { status: Some(500), message: "boom".into() })
        });
        assert_eq!(calls, 3);
        assert!(matches!(out, Err(ProviderError::Transport { attempts: 3, .. })));
        assert_eq!(clock.sleeps(), vec![Duration::from_millis(10), Duration::from_millis(20)]);
    }

    #[test]
    fn recovers_after_transient_failure() {
        let rel = Reliability::new(RetryPolicy::default(), 0.0, 1, Arc::new(ManualClock::default()));
        let mut calls = 0;
        let out = rel.run(|| {
            calls += 1;
            if calls < 2 {
                Err(ProviderError::Transient { status: Some(503), message: "busy".into() })
            } else {
                Ok(calls)
            }
        });
        assert_eq!(out.unwrap(), 2);
    }

    #[test]
    fn permanent_errors_are_not_retried() {
        let rel = Reliability::new(RetryPolicy::default(), 0.0, 1, Arc::new(ManualClock::default()));
        let mut calls = 0;
        let out: Result<(), _> = rel.run(|| {
            calls += 1;
            Err(ProviderError::Content("refused".into()))
        });
        assert_eq!(calls, 1);
        assert!(matches!(out, Err(ProviderError::Content(_))));
    }
}
