//! Order-preserving parallel map helpers.
//!
//! With the `parallel` feature (default) these fan work out on rayon;
//! without it they compile to plain sequential iteration. Results are
//! collected in input order in both modes, so every reduction downstream
//! is an ordered fold over an identical sequence and output bytes do not
//! depend on the feature or the scheduler.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Map `f` over `0..n`, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<U: Send, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, preserving index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Sequential reference path for the criterion benches; identical to
/// [`map_indexed`] with the `parallel` feature disabled.
pub fn map_indexed_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_orders_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let par = map_ordered(&items, |x| x * x);
        let seq: Vec<u64> = items.iter().map(|x| x * x).collect();
        assert_eq!(par, seq);
        assert_eq!(map_indexed(17, |i| 3 * i), map_indexed_seq(17, |i| 3 * i));
    }
}
