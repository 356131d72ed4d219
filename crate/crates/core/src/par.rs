//! Order-preserving data parallelism over independent jobs.
//!
//! With the `parallel` feature (the default) work runs on rayon; without it,
//! or with [`Execution::Sequential`], jobs run in order on the calling thread.
//! Results are identical either way.

/// Environment variable overriding the worker count; `1` forces sequential.
pub const THREADS_ENV: &str = "MEMIX_SIM_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// `None` uses rayon's global pool.
    Parallel {
        threads: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel { threads: None }
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn from_threads(threads: usize) -> Self {
        match threads {
            0 => Execution::default(),
            1 => Execution::Sequential,
            n => Execution::Parallel { threads: Some(n) },
        }
    }

    /// Reads [`THREADS_ENV`]; unset or unparsable means the default.
    pub fn from_env() -> Self {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .map_or_else(Execution::default, Execution::from_threads)
    }
}

/// Applies `f` to every item, returning results in input order.
pub fn map<T, R, F>(items: Vec<T>, exec: Execution, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => items.into_iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel { threads } => {
            use rayon::prelude::*;
            match threads {
                Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    Ok(pool) => pool.install(|| items.into_par_iter().map(f).collect()),
                    Err(_) => items.into_par_iter().map(f).collect(),
                },
                None => items.into_par_iter().map(f).collect(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel { .. } => items.into_iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        let expect: Vec<u64> = items.iter().map(|x| x * x + 1).collect();
        for exec in
            [Execution::Sequential, Execution::Parallel { threads: None }, Execution::Parallel { threads: Some(3) }]
        {
            assert_eq!(map(items.clone(), exec, |x| x * x + 1), expect);
        }
    }

    #[test]
    fn thread_counts() {
        assert_eq!(Execution::from_threads(1), Execution::Sequential);
        assert_eq!(Execution::from_threads(4), Execution::Parallel { threads: Some(4) });
        assert_eq!(Execution::from_threads(0), Execution::default());
    }
}
