//! Parallel replicate execution with deterministic reduction.

use elliprmt::sampler::replicate_rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{McError, McResult};
use crate::result::Row;

/// Runs `f` for replicate indices `offset..offset + reps`.
///
/// Each replicate owns the ChaCha stream of its index, and results come back
/// in index order whatever the thread count.
pub fn run_replicates<T, F>(reps: usize, offset: usize, seed: u64, f: F) -> Vec<McResult<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> McResult<T> + Sync,
{
    (offset..offset + reps)
        .into_par_iter()
        .map(|idx| {
            let mut rng = replicate_rng(seed, idx as u64);
            f(idx, &mut rng)
        })
        .collect()
}

/// Converts replicate results into record rows.
pub fn to_rows(results: Vec<McResult<Vec<f64>>>, offset: usize) -> Vec<Row> {
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(values) => Row { replicate: offset + i, values, error: None },
            Err(e) => Row { replicate: offset + i, values: Vec::new(), error: Some(e.to_string()) },
        })
        .collect()
}

/// Runs `op` on a pool with `jobs` threads, or on the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, op: impl FnOnce() -> T + Send) -> McResult<T> {
    match jobs {
        None => Ok(op()),
        Some(0) => Err(McError::Config("--jobs must be at least 1".into())),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| McError::Config(format!("cannot start {j} worker threads: {e}")))?;
            Ok(pool.install(op))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn order_and_streams_independent_of_threads() {
        let draw = |_: usize, rng: &mut ChaCha8Rng| -> McResult<f64> { Ok(rng.gen::<f64>()) };
        let a: Vec<f64> = with_jobs(Some(1), || run_replicates(64, 0, 9, draw))
            .unwrap()
            .into_iter()
            .map(Result::unwrap)
            .collect();
        let b: Vec<f64> = with_jobs(Some(8), || run_replicates(64, 0, 9, draw))
            .unwrap()
            .into_iter()
            .map(Result::unwrap)
            .collect();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert!(with_jobs(Some(0), || ()).is_err());
    }

    #[test]
    fn failures_become_rows() {
        let res = run_replicates(3, 5, 1, |i, _| {
            if i == 6 {
                Err(McError::Config("boom".into()))
            } else {
                Ok(vec![i as f64])
            }
        });
        let rows = to_rows(res, 5);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].replicate, 6);
        assert!(rows[1].error.as_deref().unwrap().contains("boom"));
    }
}
