//! Opt-in counters for GEMM invocations, flops, and kernel output allocations.
//!
//! Counters are installed per thread with [`with_counters`]; kernels report to
//! every counter set currently installed on the calling thread. Parallel slab
//! loops report from the dispatching thread, so counts do not depend on the
//! thread configuration.

use std::cell::RefCell;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

#[derive(Debug, Default)]
pub struct KernelCounters {
    gemm_calls: AtomicUsize,
    gemm_flops: AtomicU64,
    output_allocs: AtomicUsize,
    output_elements: AtomicU64,
    largest_output: AtomicUsize,
}

impl KernelCounters {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn gemm_calls(&self) -> usize {
        self.gemm_calls.load(Ordering::Relaxed)
    }

    /// Sum of `2*m*n*k` over all GEMM calls.
    pub fn gemm_flops(&self) -> u64 {
        self.gemm_flops.load(Ordering::Relaxed)
    }

    pub fn output_allocs(&self) -> usize {
        self.output_allocs.load(Ordering::Relaxed)
    }

    pub fn output_elements(&self) -> u64 {
        self.output_elements.load(Ordering::Relaxed)
    }

    pub fn largest_output(&self) -> usize {
        self.largest_output.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.gemm_calls.store(0, Ordering::Relaxed);
        self.gemm_flops.store(0, Ordering::Relaxed);
        self.output_allocs.store(0, Ordering::Relaxed);
        self.output_elements.store(0, Ordering::Relaxed);
        self.largest_output.store(0, Ordering::Relaxed);
    }
}

thread_local! {
    static ACTIVE: RefCell<Vec<Arc<KernelCounters>>> = const { RefCell::new(Vec::new()) };
}

struct PopGuard;

impl Drop for PopGuard {
    fn drop(&mut self) {
        ACTIVE.with(|a| {
            a.borrow_mut().pop();
        });
    }
}

/// Runs `f` with `counters` receiving kernel events from this thread.
pub fn with_counters<R>(counters: &Arc<KernelCounters>, f: impl FnOnce() -> R) -> R {
    ACTIVE.with(|a| a.borrow_mut().push(Arc::clone(counters)));
    let _guard = PopGuard;
    f()
}

fn each(f: impl Fn(&KernelCounters)) {
    ACTIVE.with(|a| {
        for c in a.borrow().iter() {
            f(c);
        }
    });
}

pub(crate) fn record_gemm(m: usize, n: usize, k: usize) {
    each(|c| {
        c.gemm_calls.fetch_add(1, Ordering::Relaxed);
        c.gemm_flops
            .fetch_add(2 * (m as u64) * (n as u64) * (k as u64), Ordering::Relaxed);
    });
}

pub(crate) fn record_alloc(elements: usize) {
    each(|c| {
        c.output_allocs.fetch_add(1, Ordering::Relaxed);
        c.output_elements
            .fetch_add(elements as u64, Ordering::Relaxed);
        c.largest_output.fetch_max(elements, Ordering::Relaxed);
    });
}
