//! Worker pool over grid points with ordered collection and cancellation.

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;

use crate::RunError;

/// Results in input order; `None` for points skipped after cancellation.
pub struct Gathered<R> {
    pub results: Vec<Option<R>>,
}

impl<R> Gathered<R> {
    pub fn partial(&self) -> bool {
        self.results.iter().any(Option::is_none)
    }

    pub fn completed(&self) -> impl Iterator<Item = &R> {
        self.results.iter().flatten()
    }
}

/// Maps `f` over `items` on `threads` workers (0: all cores). The first
/// error in grid order wins; points not yet started when `cancel` is set are
/// skipped.
pub fn par_map<T, R, F>(threads: usize, items: &[T], cancel: &AtomicBool, f: F) -> Result<Gathered<R>, RunError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, RunError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
    let raw: Vec<Option<Result<R, RunError>>> = pool.install(|| {
        items
            .par_iter()
            .map(|x| {
                if cancel.load(Ordering::Relaxed) {
                    None
                } else {
                    Some(f(x))
                }
            })
            .collect()
    });
    let mut results = Vec::with_capacity(raw.len());
    for r in raw {
        results.push(r.transpose()?);
    }
    Ok(Gathered { results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<u64> = (0..100).collect();
        let cancel = AtomicBool::new(false);
        let g = par_map(4, &items, &cancel, |&x| Ok(x * x)).unwrap();
        assert!(!g.partial());
        let out: Vec<u64> = g.completed().copied().collect();
        assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn first_error_in_grid_order() {
        let items: Vec<u64> = (0..20).collect();
        let cancel = AtomicBool::new(false);
        let r = par_map(3, &items, &cancel, |&x| {
            if x % 7 == 6 {
                Err(RunError::Config(format!("bad {x}")))
            } else {
                Ok(x)
            }
        });
        match r {
            Err(RunError::Config(m)) => assert_eq!(m, "bad 6"),
            _ => panic!("expected an error"),
        }
    }

    #[test]
    fn cancellation_marks_partial() {
        let items: Vec<u64> = (0..10).collect();
        let cancel = AtomicBool::new(true);
        let g = par_map(1, &items, &cancel, |&x| Ok(x)).unwrap();
        assert!(g.partial());
        assert_eq!(g.completed().count(), 0);
    }
}
