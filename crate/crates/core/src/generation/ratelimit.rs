use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Client-side token bucket shared by all request workers.
pub struct TokenBucket {
    per_second: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    /// A rate of zero, a negative rate or an infinite rate disables limiting.
    pub fn new(requests_per_minute: f64, burst: usize) -> Self {
        let capacity = burst.max(1) as f64;
        TokenBucket {
            per_second: requests_per_minute / 60.0,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    fn unlimited(&self) -> bool {
        !(self.per_second > 0.0 && self.per_second.is_finite())
    }

    /// Blocks until a request may be sent.
    pub fn acquire(&self) {
        if self.unlimited() {
            return;
        }
        loop {
            let wait = {
                let mut guard = self.state.lock().unwrap();
                let (tokens, last) = &mut *guard;
                let now = Instant::now();
                *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.per_second)
                    .min(self.capacity);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                (1.0 - *tokens) / self.per_second
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}
