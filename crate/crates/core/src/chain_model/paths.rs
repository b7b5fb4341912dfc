//! Counts of north/east lattice paths by number of diagonal touches.
//!
//! `n(k, l; i)` is the number of paths from the origin to `(k, l)` using unit
//! steps `(1,0)` and `(0,1)` that visit exactly `i` points `(j, j)` with
//! `j > 0`. These counts are the combinatorial core of the honest-pool
//! stationary distribution.

use thiserror::Error;

/// Largest `k + l` for which counts are computed exactly.
pub const MAX_PATH_LENGTH: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathCountError {
    #[error("path length k+l={0} exceeds the exact range ({MAX_PATH_LENGTH})")]
    Overflow(u32),
    #[error("{0}")]
    Domain(String),
}

fn check_length(k: u32, l: u32) -> Result<(), PathCountError> {
    let len = k + l;
    if len > MAX_PATH_LENGTH {
        Err(PathCountError::Overflow(len))
    } else {
        Ok(())
    }
}

/// Exact binomial coefficient `C(n, r)`; zero when `r > n`.
///
/// Every intermediate value is `C(n, j) * (n - j)` which stays inside `u128`
/// for `n <= 64`.
pub fn binomial(n: u32, r: u32) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut c: u128 = 1;
    for j in 0..r {
        c = c * u128::from(n - j) / u128::from(j + 1);
    }
    c
}

/// Table of `n(a, b; i)` for all `a <= max_k`, `b <= max_l`, filled by the
/// recursion
///
/// ```text
/// n(k,l;i) = [k = l] (n(k-1,l;i-1) + n(k,l-1;i-1))
///          + [k != l] (n(k-1,l;i) + n(k,l-1;i))
/// ```
///
/// with `n(k,0;0) = n(0,l;0) = 1`.
#[derive(Debug, Clone)]
pub struct PathTable {
    max_k: u32,
    max_l: u32,
    depth: usize,
    counts: Vec<u128>,
}

impl PathTable {
    pub fn new(max_k: u32, max_l: u32) -> Result<Self, PathCountError> {
        check_length(max_k, max_l)?;
        let depth = max_k.min(max_l) as usize + 1;
        let size = (max_k as usize + 1) * (max_l as usize + 1) * depth;
        let mut table = Self {
            max_k,
            max_l,
            depth,
            counts: vec![0; size],
        };
        for k in 0..=max_k {
            for l in 0..=max_l {
                if k == 0 || l == 0 {
                    let slot = table.slot(k, l, 0);
                    table.counts[slot] = 1;
                    continue;
                }
                let top = k.min(l) as usize;
                for i in 0..=top {
                    let value = if k == l {
                        if i == 0 {
                            0
                        } else {
                            table.get(k - 1, l, i - 1) + table.get(k, l - 1, i - 1)
                        }
                    } else {
                        table.get(k - 1, l, i) + table.get(k, l - 1, i)
                    };
                    let slot = table.slot(k, l, i);
                    table.counts[slot] = value;
                }
            }
        }
        Ok(table)
    }

    fn slot(&self, k: u32, l: u32, i: usize) -> usize {
        ((k as usize) * (self.max_l as usize + 1) + l as usize) * self.depth + i
    }

    fn get(&self, k: u32, l: u32, i: usize) -> u128 {
        if i > k.min(l) as usize || i >= self.depth {
            0
        } else {
            self.counts[self.slot(k, l, i)]
        }
    }

    /// `n(k, l; i)`; panics if `(k, l)` lies outside the table.
    pub fn count(&self, k: u32, l: u32, i: u32) -> u128 {
        assert!(
            k <= self.max_k && l <= self.max_l,
            "({k},{l}) outside table"
        );
        self.get(k, l, i as usize)
    }
}

/// `n(k, l; i)` by memoised recursion.
pub fn count_lattice_paths(k: u32, l: u32, i: u32) -> Result<u128, PathCountError> {
    check_length(k, l)?;
    if i > k.min(l) {
        return Ok(0);
    }
    Ok(PathTable::new(k, l)?.count(k, l, i))
}

/// Grand Dyck count `T(k, i) = i 2^i C(2k-i, k) / (2k-i)`, equal to `n(k, k; i)`.
pub fn grand_dyck_count(k: u32, i: u32) -> Result<u128, PathCountError> {
    if i < 1 || i > k {
        return Err(PathCountError::Domain(format!(
            "grand Dyck count needs 1 <= i <= k, got k={k}, i={i}"
        )));
    }
    check_length(k, k)?;
    let n = 2 * k - i;
    let numerator = u128::from(i) * (1u128 << i) * binomial(n, k);
    Ok(numerator / u128::from(n))
}

/// Closed form of `n(k, l; i)` for `k != l`:
/// `(|k-l| + i) 2^i C(k+l-i, max(k,l)) / (k+l-i)`.
pub fn welsh_count(k: u32, l: u32, i: u32) -> Result<u128, PathCountError> {
    if k == l {
        return Err(PathCountError::Domain(
            "welsh_count needs k != l; use grand_dyck_count on the diagonal".into(),
        ));
    }
    if i > k.min(l) {
        return Err(PathCountError::Domain(format!(
            "i={i} exceeds min(k,l)={}",
            k.min(l)
        )));
    }
    check_length(k, l)?;
    let n = k + l - i;
    let numerator = u128::from(k.abs_diff(l) + i) * (1u128 << i) * binomial(n, k.max(l));
    Ok(numerator / u128::from(n))
}
