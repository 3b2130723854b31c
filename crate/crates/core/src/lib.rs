//! Syntax-guided, semantic-aware preference optimization for code translation,
//! end to end at desk scale.
//!
//! The pipeline: generate a paired corpus ([`microlang`]), finetune a small
//! translator ([`policy`]), sample candidates and judge them with a compiler
//! or grammar ([`oracle`]), mine the closest pass/fail pairs ([`miner`]),
//! train a contrastive cross-lingual encoder ([`encoder`]) whose listwise
//! score biases the preference loss ([`reward`], [`prefopt`]), and evaluate
//! by computational accuracy ([`harness`]).

pub mod encoder;
pub mod harness;
pub mod microlang;
pub mod miner;
pub mod oracle;
pub mod policy;
pub mod prefopt;
pub mod records;
pub mod reward;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for one (seed, stream) combination.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Maps `f` over `items` on up to `workers` scoped threads. Work is claimed
/// item by item; results come back in input order.
pub fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let n = items.len();
    let workers = workers.max(1).min(n.max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every index is claimed once"))
        .collect()
}

/// Worker count for pooled stages: the available parallelism, at least 1.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
