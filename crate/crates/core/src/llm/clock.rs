use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Time source for rate limiting, backoff and transcript timestamps.
pub trait Clock: Send + Sync {
    /// Monotonic time since an arbitrary origin.
    fn now(&self) -> Duration;
    fn sleep(&self, duration: Duration);
    /// Wall-clock time as RFC 3339.
    fn timestamp(&self) -> String;
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }

    fn timestamp(&self) -> String {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
    }
}

/// Virtual clock: `sleep` advances time instantly. Concurrent sleepers move
/// the clock to the latest wake-up time any of them asked for.
#[derive(Debug, Default)]
pub struct ManualClock {
    nanos: AtomicU64,
}

impl ManualClock {
    pub fn advance(&self, by: Duration) {
        self.nanos.fetch_add(by.as_nanos() as u64, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        Duration::from_nanos(self.nanos.load(Ordering::SeqCst))
    }

    fn sleep(&self, duration: Duration) {
        let target = self.now() + duration;
        self.nanos.fetch_max(target.as_nanos() as u64, Ordering::SeqCst);
    }

    fn timestamp(&self) -> String {
        let base = chrono::DateTime::<chrono::Utc>::UNIX_EPOCH;
        let t = base + chrono::Duration::from_std(self.now()).unwrap_or_default();
        t.to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
    }
}

/// Token bucket with a burst of one: successive requests are spaced at least
/// `60 / per_minute` seconds apart.
#[derive(Debug)]
pub struct TokenBucket {
    interval: Duration,
    next_free: Mutex<Option<Duration>>,
}

impl TokenBucket {
    pub fn per_minute(rate: f64) -> Self {
        assert!(rate > 0.0 && rate.is_finite(), "rate limit must be positive");
        TokenBucket {
            interval: Duration::from_secs_f64(60.0 / rate),
            next_free: Mutex::new(None),
        }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Reserves the next slot and sleeps until it arrives.
    pub fn acquire(&self, clock: &dyn Clock) {
        let wait = {
            let mut next = self.next_free.lock().unwrap();
            let now = clock.now();
            let slot = next.map_or(now, |t| t.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            clock.sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn ten_parallel_requests_at_half_per_second() {
        let clock = Arc::new(ManualClock::default());
        let bucket = Arc::new(TokenBucket::per_minute(30.0));
        std::thread::scope(|s| {
            for _ in 0..10 {
                let (clock, bucket) = (clock.clone(), bucket.clone());
                s.spawn(move || bucket.acquire(clock.as_ref()));
            }
        });
        assert!(clock.now() >= Duration::from_secs(18), "{:?}", clock.now());
        assert!(clock.now() < Duration::from_secs(19));
    }

    #[test]
    fn spaced_requests_do_not_wait() {
        let clock = ManualClock::default();
        let bucket = TokenBucket::per_minute(60.0);
        bucket.acquire(&clock);
        clock.advance(Duration::from_secs(5));
        bucket.acquire(&clock);
        assert_eq!(clock.now(), Duration::from_secs(5));
    }

    #[test]
    fn manual_timestamps_are_rfc3339() {
        let clock = ManualClock::default();
        clock.advance(Duration::from_millis(1500));
        assert_eq!(clock.timestamp(), "1970-01-01T00:00:01.500Z");
    }
}
