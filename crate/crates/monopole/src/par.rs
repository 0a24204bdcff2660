//! Data-parallel map over independent work items. With the `parallel`
//! feature the work is spread over a rayon pool; otherwise it runs in order.
//! Output order always matches input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Sequential map, always available (reference for the parallel path).
pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_seq(items, f)
}

/// Runs `f` on a pool of `jobs` threads (ignored without the feature).
#[cfg(feature = "parallel")]
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match jobs {
        Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_jobs<R: Send>(_jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    f()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn parallel_matches_sequential(v in proptest::collection::vec(-1e6f64..1e6, 0..200)) {
            let f = |x: &f64| x.sin() * x;
            prop_assert_eq!(map(&v, f), map_seq(&v, f));
        }
    }

    #[test]
    fn pool_size_is_respected() {
        let out = with_jobs(Some(2), || map(&[1, 2, 3], |x| x * 2));
        assert_eq!(out, vec![2, 4, 6]);
    }
}
