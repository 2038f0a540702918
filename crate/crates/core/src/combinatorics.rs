//! Exhaustive enumeration of column subsets.
//!
//! `CombinationCursor` walks all p-element subsets of {0..m-1} in lexicographic
//! order without materializing them. Cursors can start at an arbitrary rank
//! (combinatorial unranking), which is how enumeration is split across workers
//! into contiguous, disjoint ranges.

use crate::error::{Error, Result};
use crate::parallel::chunk_ranges;

/// Number of p-element subsets of an m-element set; `None` if it overflows u128.
pub fn binomial(m: usize, p: usize) -> Option<u128> {
    if p > m {
        return Some(0);
    }
    let p = p.min(m - p);
    let mut acc: u128 = 1;
    // Multiply-then-divide keeps every intermediate value an exact integer:
    // after step i the accumulator equals C(m - p + i, i).
    for i in 1..=p {
        acc = acc.checked_mul((m - p + i) as u128)?;
        acc /= i as u128;
    }
    Some(acc)
}

/// Streaming cursor over p-element subsets of {0..m-1} in lexicographic order.
pub struct CombinationCursor {
    m: usize,
    p: usize,
    indices: Vec<usize>,
    remaining: u128,
    started: bool,
}

impl CombinationCursor {
    /// Cursor over all C(m, p) subsets.
    pub fn new(m: usize, p: usize) -> Self {
        let total = binomial(m, p).unwrap_or(u128::MAX);
        Self {
            m,
            p,
            indices: (0..p).collect(),
            remaining: total,
            started: false,
        }
    }

    /// Cursor over `len` subsets starting at lexicographic rank `start`.
    pub fn with_range(m: usize, p: usize, start: u128, len: u128) -> Result<Self> {
        let total = binomial(m, p).ok_or_else(|| {
            Error::Argument(format!("C({m}, {p}) overflows u128; cannot slice the range"))
        })?;
        if start.checked_add(len).is_none_or(|end| end > total) {
            return Err(Error::Argument(format!(
                "range {start}..{} exceeds C({m}, {p}) = {total}",
                start.saturating_add(len)
            )));
        }
        let indices = if len == 0 {
            (0..p).collect()
        } else {
            unrank(m, p, start)
        };
        Ok(Self {
            m,
            p,
            indices,
            remaining: len,
            started: false,
        })
    }

    /// Split the full enumeration into `chunks` contiguous cursors covering
    /// every subset exactly once.
    pub fn split(m: usize, p: usize, chunks: usize) -> Result<Vec<Self>> {
        let total = binomial(m, p).ok_or_else(|| {
            Error::Argument(format!("C({m}, {p}) overflows u128; cannot split"))
        })?;
        chunk_ranges(total, chunks)
            .into_iter()
            .map(|(start, len)| Self::with_range(m, p, start, len))
            .collect()
    }

    /// Subsets not yet yielded.
    pub fn remaining(&self) -> u128 {
        self.remaining
    }

    /// Advance to the next subset and return it as a sorted index slice.
    pub fn next_subset(&mut self) -> Option<&[usize]> {
        if self.remaining == 0 {
            return None;
        }
        if self.started {
            self.advance();
        }
        self.started = true;
        self.remaining -= 1;
        Some(&self.indices)
    }

    fn advance(&mut self) {
        let (m, p) = (self.m, self.p);
        let mut i = p;
        while i > 0 {
            i -= 1;
            // indices[i] may run up to m - p + i in a lexicographic combination.
            if self.indices[i] < m - p + i {
                self.indices[i] += 1;
                for j in i + 1..p {
                    self.indices[j] = self.indices[j - 1] + 1;
                }
                return;
            }
        }
        unreachable!("advance called past the final combination");
    }
}

/// Subset of {0..m-1} with lexicographic rank `rank` among p-element subsets.
fn unrank(m: usize, p: usize, mut rank: u128) -> Vec<usize> {
    let mut combo = Vec::with_capacity(p);
    let mut x = 0usize;
    for slot in 0..p {
        loop {
            // Subsets beginning with x at this slot: choose the remaining
            // p - slot - 1 elements from {x+1 .. m-1}.
            let c = binomial(m - 1 - x, p - 1 - slot)
                .expect("per-slot counts bounded by a total that fit u128");
            if rank < c {
                combo.push(x);
                x += 1;
                break;
            }
            rank -= c;
            x += 1;
        }
    }
    combo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(0, 0), Some(1));
        assert_eq!(binomial(6, 3), Some(20));
        assert_eq!(binomial(20, 6), Some(38_760));
        assert_eq!(binomial(10, 0), Some(1));
        assert_eq!(binomial(3, 5), Some(0));
        // C(200, 100) ~ 9e58 exceeds u128::MAX ~ 3.4e38.
        assert_eq!(binomial(200, 100), None);
    }

    #[test]
    fn six_choose_three_yields_twenty_distinct_sorted_subsets() {
        let mut cursor = CombinationCursor::new(6, 3);
        let mut seen = Vec::new();
        while let Some(s) = cursor.next_subset() {
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            seen.push(s.to_vec());
        }
        assert_eq!(seen.len(), 20);
        let mut dedup = seen.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 20);
        // Lexicographic order.
        assert_eq!(seen.first().unwrap(), &vec![0, 1, 2]);
        assert_eq!(seen.last().unwrap(), &vec![3, 4, 5]);
        let mut sorted = seen.clone();
        sorted.sort();
        assert_eq!(seen, sorted);
    }

    #[test]
    fn chunked_traversal_matches_serial() {
        let mut serial = Vec::new();
        let mut cursor = CombinationCursor::new(9, 4);
        while let Some(s) = cursor.next_subset() {
            serial.push(s.to_vec());
        }
        for chunks in [1usize, 2, 4, 8, 200] {
            let mut merged = Vec::new();
            for mut part in CombinationCursor::split(9, 4, chunks).unwrap() {
                while let Some(s) = part.next_subset() {
                    merged.push(s.to_vec());
                }
            }
            assert_eq!(serial, merged, "chunks = {chunks}");
        }
    }

    #[test]
    fn unrank_agrees_with_sequential_walk() {
        let mut cursor = CombinationCursor::new(8, 3);
        let mut rank = 0u128;
        while let Some(s) = cursor.next_subset() {
            assert_eq!(unrank(8, 3, rank), s);
            rank += 1;
        }
        assert_eq!(rank, 56);
    }

    #[test]
    fn empty_subset_cases() {
        let mut cursor = CombinationCursor::new(5, 0);
        assert_eq!(cursor.next_subset(), Some(&[][..]));
        assert_eq!(cursor.next_subset(), None);

        let mut none = CombinationCursor::new(3, 5);
        assert_eq!(none.next_subset(), None);
    }

    #[test]
    fn range_validation() {
        assert!(CombinationCursor::with_range(6, 3, 15, 6).is_err());
        let mut tail = CombinationCursor::with_range(6, 3, 19, 1).unwrap();
        assert_eq!(tail.next_subset(), Some(&[3, 4, 5][..]));
        assert_eq!(tail.next_subset(), None);
    }
}
