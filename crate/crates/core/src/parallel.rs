//! Order-independent parallel replication loops.
//!
//! Replications are grouped into fixed-size chunks. Chunks run on the rayon
//! pool, each folding its replications sequentially, and the chunk partials
//! are merged in chunk order. Neither the thread count nor scheduling can
//! change the floating-point result.

use rayon::prelude::*;

/// Number of replications folded sequentially inside one work item.
pub const CHUNK: u64 = 1024;

pub fn replicate<A, I, S, M>(replications: u64, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) + Sync,
    M: Fn(&mut A, A),
{
    let chunks = replications.div_ceil(CHUNK);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for r in c * CHUNK..((c + 1) * CHUNK).min(replications) {
                step(&mut acc, r);
            }
            acc
        })
        .collect();
    let mut total = init();
    for p in partials {
        merge(&mut total, p);
    }
    total
}
