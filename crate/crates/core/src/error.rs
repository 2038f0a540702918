use std::fmt;
use std::path::PathBuf;

/// Error type shared by the whole library.
///
/// The variants are grouped by who is at fault: `Argument` for malformed calls,
/// `Domain`/`Precondition`/`Applicability` for mathematically invalid requests,
/// `Budget` for enumeration guards, `Numerical` for convergence failures and
/// `Io`/`Parse` for file handling.
#[derive(Debug)]
pub enum Error {
    /// Malformed call: inconsistent dimensions, out-of-range index, bad parameter.
    Argument(String),
    /// The requested quantity is not defined for this input
    /// (e.g. p >= spark(A), delta >= 1, m <= 2k).
    Domain(String),
    /// A runtime-checked premise of an inequality does not hold for the data
    /// (e.g. the vector is not in the null space, or a claimed alpha is smaller
    /// than the computed one).
    Precondition(String),
    /// The operation only applies to a restricted matrix class and this input
    /// is outside it (e.g. loose baselines require unit-norm columns).
    Applicability(String),
    /// Exhaustive enumeration would exceed the configured subset budget.
    Budget {
        /// Subset size whose enumeration blew the budget.
        subset_size: usize,
        /// Number of subsets that would have to be visited, if it fits in u128.
        subsets: Option<u128>,
        /// The configured ceiling.
        max_subsets: u64,
    },
    /// An iterative numerical routine failed to converge.
    Numerical(String),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Domain(msg) => write!(f, "out of domain: {msg}"),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::Applicability(msg) => write!(f, "not applicable: {msg}"),
            Error::Budget {
                subset_size,
                subsets,
                max_subsets,
            } => {
                match subsets {
                    Some(n) => write!(
                        f,
                        "enumerating {n} column subsets of size {subset_size} exceeds the \
                         budget of {max_subsets}"
                    )?,
                    None => write!(
                        f,
                        "the number of column subsets of size {subset_size} overflows u128 \
                         and exceeds any budget (max {max_subsets})"
                    )?,
                }
                write!(f, "; use a sampled or probabilistic certificate instead")
            }
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Error::Parse { path, line, msg } => {
                write!(f, "{}:{line}: {msg}", path.display())
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    /// True for the variants that describe a mathematically invalid request
    /// rather than a malformed or unreadable one.
    pub fn is_domain_like(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Precondition(_)
                | Error::Applicability(_)
                | Error::Numerical(_)
                | Error::Argument(_)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_message_names_subset_size_and_fallback() {
        let err = Error::Budget {
            subset_size: 6,
            subsets: Some(38_760),
            max_subsets: 1000,
        };
        let msg = err.to_string();
        assert!(msg.contains("size 6"));
        assert!(msg.contains("38760"));
        assert!(msg.contains("sampled or probabilistic"));
    }

    #[test]
    fn budget_message_handles_overflow() {
        let err = Error::Budget {
            subset_size: 64,
            subsets: None,
            max_subsets: 2_000_000,
        };
        assert!(err.to_string().contains("overflows"));
    }
}
