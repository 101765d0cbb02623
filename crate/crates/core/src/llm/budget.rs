use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::LlmError;

pub const DAY: Duration = Duration::from_secs(24 * 60 * 60);

/// Tokens set aside for one in-flight request. Must be passed back to
/// [`TokenBudget::settle`].
#[derive(Debug)]
#[must_use]
pub struct Reservation {
    amount: u64,
    window: u64,
}

impl Reservation {
    pub fn amount(&self) -> u64 {
        self.amount
    }
}

#[derive(Debug)]
struct State {
    spent: u64,
    reserved: u64,
    window_start: Instant,
    window: u64,
    overshoot: u64,
}

/// Rolling token allowance. `spent + reserved <= limit` always holds;
/// requests that would break it are rejected.
#[derive(Debug)]
pub struct TokenBudget {
    limit: u64,
    window: Duration,
    state: Mutex<State>,
}

impl TokenBudget {
    pub fn new(limit: u64, window: Duration) -> Self {
        TokenBudget {
            limit,
            window,
            state: Mutex::new(State {
                spent: 0,
                reserved: 0,
                window_start: Instant::now(),
                window: 0,
                overshoot: 0,
            }),
        }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn window(&self) -> Duration {
        self.window
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        let mut s = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if s.window_start.elapsed() >= self.window {
            s.window_start = Instant::now();
            s.window += 1;
            s.spent = 0;
        }
        s
    }

    pub fn reserve(&self, amount: u64) -> Result<Reservation, LlmError> {
        let mut s = self.lock();
        let remaining = self.limit - s.spent - s.reserved;
        if amount > remaining {
            return Err(LlmError::BudgetExhausted {
                needed: amount,
                remaining,
            });
        }
        s.reserved += amount;
        Ok(Reservation {
            amount,
            window: s.window,
        })
    }

    /// Releases the reservation and charges `actual`. Usage beyond the
    /// remaining allowance is recorded as overshoot instead of spent.
    pub fn settle(&self, reservation: Reservation, actual: u64) {
        let mut s = self.lock();
        if reservation.window == s.window {
            s.reserved -= reservation.amount;
        }
        let room = self.limit - s.spent - s.reserved;
        let charged = actual.min(room);
        s.overshoot += actual - charged;
        s.spent += charged;
        if actual > reservation.amount {
            log::warn!(
                "request used {actual} tokens, {} reserved",
                reservation.amount
            );
        }
    }

    pub fn spent(&self) -> u64 {
        self.lock().spent
    }

    pub fn remaining(&self) -> u64 {
        let s = self.lock();
        self.limit - s.spent - s.reserved
    }

    /// Tokens used beyond the limit by requests whose usage exceeded their
    /// reservation.
    pub fn overshoot(&self) -> u64 {
        self.lock().overshoot
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserve_then_settle_actual() {
        let b = TokenBudget::new(1000, DAY);
        let r = b.reserve(300).unwrap();
        assert_eq!(b.remaining(), 700);
        b.settle(r, 120);
        assert_eq!((b.spent(), b.remaining()), (120, 880));
    }

    #[test]
    fn rejects_beyond_limit() {
        let b = TokenBudget::new(1000, DAY);
        let _r = b.reserve(900).unwrap();
        assert_eq!(
            b.reserve(101).unwrap_err(),
            LlmError::BudgetExhausted {
                needed: 101,
                remaining: 100
            }
        );
    }

    #[test]
    fn usage_above_reservation_never_breaks_limit() {
        let b = TokenBudget::new(100, DAY);
        let r = b.reserve(80).unwrap();
        b.settle(r, 150);
        assert_eq!((b.spent(), b.overshoot()), (100, 50));
    }

    #[test]
    fn window_rollover_resets_spend() {
        let b = TokenBudget::new(100, Duration::from_millis(30));
        let r = b.reserve(100).unwrap();
        b.settle(r, 100);
        assert!(b.reserve(1).is_err());
        std::thread::sleep(Duration::from_millis(40));
        assert_eq!(b.remaining(), 100);
    }

    #[test]
    fn concurrent_debits_serialize() {
        let b = TokenBudget::new(1000, DAY);
        let granted = std::sync::atomic::AtomicU64::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    for _ in 0..200 {
                        if let Ok(r) = b.reserve(7) {
                            granted.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                            b.settle(r, 7);
                        }
                    }
                });
            }
        });
        let n = granted.into_inner();
        assert_eq!(n, 1000 / 7);
        assert_eq!(b.spent(), n * 7);
        assert!(b.spent() <= b.limit());
    }
}
