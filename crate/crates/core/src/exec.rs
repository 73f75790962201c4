use alloc::vec::Vec;

/// Runs independent indexed jobs and returns their results in index order.
///
/// Implementations may run jobs concurrently; callers only rely on the
/// returned order, so results do not depend on the implementation.
pub trait Executor: Sync {
    fn map<T: Send>(&self, n: usize, job: &(dyn Fn(usize) -> T + Sync)) -> Vec<T>;
}

/// Runs jobs one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T: Send>(&self, n: usize, job: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        (0..n).map(job).collect()
    }
}
