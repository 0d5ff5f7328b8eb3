//! Scoped-thread implementation of [`MemberMap`].

use std::num::NonZeroUsize;

use nvpulse_core::exec::MemberMap;
use nvpulse_core::Result;

/// Splits `0..n` into one contiguous chunk per thread and concatenates the
/// chunks in index order, so results do not depend on the thread count.
#[derive(Clone, Copy, Debug)]
pub struct Threaded {
    threads: NonZeroUsize,
}

impl Threaded {
    pub fn new(threads: NonZeroUsize) -> Self {
        Self { threads }
    }

    /// One thread per available core.
    pub fn available() -> Self {
        Self::new(std::thread::available_parallelism().unwrap_or(NonZeroUsize::MIN))
    }

    pub fn threads(&self) -> usize {
        self.threads.get()
    }
}

impl MemberMap for Threaded {
    fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync,
    {
        let workers = self.threads.get().min(n);
        if workers <= 1 {
            return (0..n).map(f).collect();
        }
        let chunk = n.div_ceil(workers);
        let f = &f;
        let parts: Vec<Result<Vec<T>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let range = w * chunk..((w + 1) * chunk).min(n);
                    s.spawn(move || range.map(f).collect::<Result<Vec<T>>>())
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|panic| std::panic::resume_unwind(panic)))
                .collect()
        });
        let mut out = Vec::with_capacity(n);
        for part in parts {
            out.extend(part?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nvpulse_core::exec::Sequential;
    use nvpulse_core::Error;

    #[test]
    fn matches_sequential_order() {
        let f = |i: usize| Ok((i as f64).sqrt().sin());
        let seq = Sequential.map(37, f).unwrap();
        for t in 1..6 {
            let par = Threaded::new(NonZeroUsize::new(t).unwrap()).map(37, f).unwrap();
            assert_eq!(seq, par);
        }
        assert!(Threaded::new(NonZeroUsize::new(4).unwrap()).map(0, f).unwrap().is_empty());
    }

    #[test]
    fn reports_lowest_failing_chunk() {
        let r = Threaded::new(NonZeroUsize::new(3).unwrap()).map(9, |i| {
            if i % 4 == 3 {
                Err(Error::EigenFailure { dim: i })
            } else {
                Ok(i)
            }
        });
        assert_eq!(r, Err(Error::EigenFailure { dim: 3 }));
    }
}
