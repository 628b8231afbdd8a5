//! Data-parallel helpers. With the `parallel` feature the work is spread
//! over the rayon pool; without it everything runs on the calling thread.
//! Results always come back in index order, so output never depends on
//! scheduling.

/// Maps `f` over `0..n`, in parallel when the feature is enabled.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seq_map(n, f)
    }
}

/// Sequential reference path for [`par_map`].
pub fn seq_map<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let a = par_map(1000, |i| i * i);
        let b = seq_map(1000, |i| i * i);
        assert_eq!(a, b);
        assert!(par_map(0, |i| i).is_empty());
    }
}
