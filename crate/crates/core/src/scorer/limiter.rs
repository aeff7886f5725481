use std::collections::VecDeque;
use std::time::{Duration, Instant};

/// Slack added to the window so that requests observed by the server, after
/// network jitter, still respect the limit.
const WINDOW_SLACK: Duration = Duration::from_millis(15);

/// Sliding-window rate limiter: at most `capacity` acquisitions in any window
/// of length `window`.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: usize,
    window: Duration,
    sent: VecDeque<Instant>,
}

impl RateLimiter {
    /// Limits to `requests_per_second`. Rates below one become one request
    /// per `1 / rate` seconds.
    pub fn per_second(requests_per_second: f64) -> Self {
        let (capacity, secs) = if requests_per_second >= 1.0 {
            (requests_per_second.floor() as usize, 1.0)
        } else {
            (1, 1.0 / requests_per_second)
        };
        RateLimiter {
            capacity,
            window: Duration::from_secs_f64(secs) + WINDOW_SLACK,
            sent: VecDeque::with_capacity(capacity),
        }
    }

    /// How long a caller must wait at `now` before the next acquisition.
    pub fn delay_at(&mut self, now: Instant) -> Duration {
        while let Some(&t) = self.sent.front() {
            if now.duration_since(t) >= self.window {
                self.sent.pop_front();
            } else {
                break;
            }
        }
        if self.sent.len() < self.capacity {
            Duration::ZERO
        } else {
            (self.sent[0] + self.window).saturating_duration_since(now)
        }
    }

    pub fn record(&mut self, at: Instant) {
        self.sent.push_back(at);
    }

    /// Blocks until a request may be sent, then records it.
    pub fn acquire(&mut self) {
        loop {
            let wait = self.delay_at(Instant::now());
            if wait.is_zero() {
                break;
            }
            std::thread::sleep(wait);
        }
        self.record(Instant::now());
    }
}
