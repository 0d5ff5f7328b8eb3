//! Evaluation of independent work items with an order-fixed result layout.
//!
//! Ensemble members, grid points and sweep points are independent. A
//! [`MemberMap`] evaluates a closure over indices `0..n` and returns results in
//! index order, so any reduction performed afterwards is deterministic no
//! matter how the work was scheduled.

use alloc::vec::Vec;

use crate::error::Result;

pub trait MemberMap: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync;
}

/// Evaluates items one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl MemberMap for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync,
    {
        (0..n).map(f).collect()
    }
}
