//! Token-bucket rate limiting for the load phase.

/// Token bucket over a caller-supplied clock (seconds as f64), which keeps
/// the arithmetic testable without real sleeping.
///
/// The bucket starts empty and refills continuously at `rate` tokens/second
/// up to `capacity`. One token is taken per operation. Over any window of
/// one second the number of grants is therefore at most
/// `rate + capacity` — the configured rate plus one bucket of burst.
#[derive(Debug, Clone)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    tokens: f64,
    last_refill: f64,
}

impl TokenBucket {
    pub fn new(rate: f64, capacity: f64, now: f64) -> Self {
        assert!(rate > 0.0 && capacity >= 1.0);
        TokenBucket {
            rate,
            capacity,
            tokens: 0.0,
            last_refill: now,
        }
    }

    /// Bucket sized to one second of tokens, the default burst allowance.
    pub fn per_second(rate: u64, now: f64) -> Self {
        Self::new(rate as f64, (rate as f64).max(1.0), now)
    }

    fn refill(&mut self, now: f64) {
        if now > self.last_refill {
            self.tokens = (self.tokens + (now - self.last_refill) * self.rate).min(self.capacity);
            self.last_refill = now;
        }
    }

    /// Takes one token if available.
    pub fn try_take(&mut self, now: f64) -> bool {
        self.refill(now);
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            true
        } else {
            false
        }
    }

    /// Seconds until the next token becomes available (0 if one is ready).
    pub fn next_available_in(&mut self, now: f64) -> f64 {
        self.refill(now);
        if self.tokens >= 1.0 {
            0.0
        } else {
            (1.0 - self.tokens) / self.rate
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn starts_empty_and_refills_at_rate() {
        let mut b = TokenBucket::per_second(100, 0.0);
        assert!(!b.try_take(0.0));
        assert!(b.try_take(0.01));
        assert!(!b.try_take(0.01));
        // After a long idle stretch the bucket holds at most one second of
        // tokens.
        let mut granted = 0;
        while b.try_take(10.0) {
            granted += 1;
        }
        assert_eq!(granted, 100);
    }

    #[test]
    fn n_ops_take_at_least_n_over_rate_seconds() {
        let rate = 250u64;
        let mut b = TokenBucket::per_second(rate, 0.0);
        let mut now = 0.0;
        let n = 1000u64;
        for _ in 0..n {
            loop {
                let wait = b.next_available_in(now);
                if wait == 0.0 && b.try_take(now) {
                    break;
                }
                now += wait.max(1e-6);
            }
        }
        assert!(now >= (n as f64 / rate as f64) - 1e-6, "elapsed {now}");
    }

    proptest! {
        /// In any 1-second window the grants never exceed rate + one bucket.
        #[test]
        fn window_bound_holds(rate in 1u64..500, offsets in proptest::collection::vec(0.0f64..10.0, 1..800)) {
            let mut times: Vec<f64> = offsets;
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut b = TokenBucket::per_second(rate, 0.0);
            let mut grants: Vec<f64> = Vec::new();
            for t in times {
                if b.try_take(t) {
                    grants.push(t);
                }
            }
            let bound = (rate as f64 + rate as f64).ceil() as usize + 1;
            for (i, &start) in grants.iter().enumerate() {
                let in_window = grants[i..].iter().take_while(|&&t| t < start + 1.0).count();
                prop_assert!(in_window <= bound, "window at {start} saw {in_window} > {bound}");
            }
        }
    }
}
