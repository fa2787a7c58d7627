//! Search runners for recognition batches: a bounded thread pool and a
//! memoizing wrapper shared across sessions.

use std::collections::HashMap;
use std::hash::Hasher;
use std::sync::Mutex;

use pretcil_core::planner::{Clock, PlanOutcome, SearchBudget, SearchMode, SearchStats};
use pretcil_core::recognition::{SearchJob, SearchRunner};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

/// Wall-clock time for search budgets.
pub struct WallClock {
    start: std::time::Instant,
}

impl WallClock {
    pub fn new() -> Self {
        WallClock {
            start: std::time::Instant::now(),
        }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_millis(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }
}

/// Runs the jobs of a batch on a fixed-size pool.
pub struct Pool<'c> {
    pool: rayon::ThreadPool,
    clock: &'c dyn Clock,
}

impl<'c> Pool<'c> {
    pub fn new(threads: usize, clock: &'c dyn Clock) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
        Ok(Pool { pool, clock })
    }
}

impl SearchRunner for Pool<'_> {
    fn solve_all(&self, jobs: &[SearchJob], mode: SearchMode, budget: SearchBudget) -> Vec<(PlanOutcome, SearchStats)> {
        self.pool
            .install(|| jobs.par_iter().map(|job| job.run(mode, budget, self.clock)).collect())
    }
}

struct ShaHasher(Sha256);

impl Hasher for ShaHasher {
    fn finish(&self) -> u64 {
        unreachable!("only the full digest is used")
    }

    fn write(&mut self, bytes: &[u8]) {
        self.0.update(bytes);
    }
}

type Key = [u8; 32];

/// Remembers every search result by job content. Searches are
/// deterministic under an expansion budget, so a repeated job returns what
/// running it again would.
pub struct Memo<R> {
    inner: R,
    cache: Mutex<HashMap<Key, (PlanOutcome, SearchStats)>>,
}

impl<R: SearchRunner> Memo<R> {
    pub fn new(inner: R) -> Self {
        Memo {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("memo lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(job: &SearchJob, mode: SearchMode, budget: SearchBudget) -> Key {
        let mut h = ShaHasher(Sha256::new());
        job.problem.hash_content(&mut h);
        h.write(format!("{:?}|{mode:?}|{}|{}", job.bound, budget.max_expansions, budget.max_millis).as_bytes());
        h.0.finalize().into()
    }
}

impl<R: SearchRunner> SearchRunner for Memo<R> {
    fn solve_all(&self, jobs: &[SearchJob], mode: SearchMode, budget: SearchBudget) -> Vec<(PlanOutcome, SearchStats)> {
        let keys: Vec<Key> = jobs.iter().map(|j| Self::key(j, mode, budget)).collect();
        let mut results: Vec<Option<(PlanOutcome, SearchStats)>> = {
            let cache = self.cache.lock().expect("memo lock");
            keys.iter().map(|k| cache.get(k).cloned()).collect()
        };
        let missing: Vec<usize> = (0..jobs.len()).filter(|&i| results[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<SearchJob> = missing.iter().map(|&i| jobs[i].clone()).collect();
            let solved = self.inner.solve_all(&batch, mode, budget);
            let mut cache = self.cache.lock().expect("memo lock");
            for (&i, result) in missing.iter().zip(solved) {
                cache.insert(keys[i], result.clone());
                results[i] = Some(result);
            }
        }
        results.into_iter().map(|r| r.expect("every job answered")).collect()
    }
}
