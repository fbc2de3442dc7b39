//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper returns results in input order, so callers get identical
//! output whichever executor runs the work.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_range<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<I, T, F>(exec: Exec, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Index of the first element (in input order) for which `f` returns `Some`.
pub fn find_first<T, F>(exec: Exec, n: usize, f: F) -> Option<(usize, T)>
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().find_map_first(|i| f(i).map(|t| (i, t)))
        }
        _ => (0..n).find_map(|i| f(i).map(|t| (i, t))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn executors_agree() {
        let seq = map_range(Exec::Sequential, 100, |i| i * i);
        let par = map_range(Exec::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
        let f = |i: usize| if i % 7 == 3 && i > 10 { Some(i) } else { None };
        assert_eq!(find_first(Exec::Sequential, 50, f), Some((17, 17)));
        assert_eq!(find_first(Exec::Parallel, 50, f), Some((17, 17)));
    }
}
