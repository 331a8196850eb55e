use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Answer normalisation applied to both sides of every comparison.
///
/// Tokens are first mapped to the smallest member of their configured
/// equivalence class, then leading zero-tokens are stripped (keeping a single
/// zero for an all-zero answer, the way `000` reads as `0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Canonicalizer {
    strip_leading_zeros: bool,
    representative: Vec<usize>,
}

impl Canonicalizer {
    pub fn new(vocab_size: usize, strip_leading_zeros: bool, equivalences: &[(usize, usize)]) -> Result<Self> {
        let mut parent: Vec<usize> = (0..vocab_size).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in equivalences {
            if a >= vocab_size || b >= vocab_size {
                return config_err(format!(
                    "equivalence pair ({a}, {b}) outside vocabulary of size {vocab_size}"
                ));
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            // union by smaller id keeps the root the class minimum
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
        let representative = (0..vocab_size).map(|t| find(&mut parent, t)).collect();
        Ok(Self {
            strip_leading_zeros,
            representative,
        })
    }

    pub fn canonicalize(&self, tokens: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = tokens
            .iter()
            .map(|&t| self.representative.get(t).copied().unwrap_or(t))
            .collect();
        if self.strip_leading_zeros && !out.is_empty() {
            let first_nonzero = out.iter().position(|&t| t != 0).unwrap_or(out.len() - 1);
            out.drain(..first_nonzero);
        }
        out
    }
}
