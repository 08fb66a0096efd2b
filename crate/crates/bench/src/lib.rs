//! Fixtures shared by the criterion benches.

use weatlab::weat::Associations;
use weatlab::EmbeddingTable;

/// Deterministic pseudo-random associations for `n` words per target set.
pub fn associations(n: usize) -> Associations {
    let value = |i: usize| ((i as f64 * 0.618_033_988_75).fract() - 0.5) * 0.4;
    Associations {
        x: (0..n).map(|i| value(i) + 0.1).collect(),
        y: (0..n).map(|i| value(i + n)).collect(),
    }
}

/// A table with `count` tokens named `w0..` of dimension `dim`.
pub fn table(count: usize, dim: usize) -> EmbeddingTable {
    let rows = (0..count).map(|i| {
        let v = (0..dim)
            .map(|j| ((i * dim + j) as f64 * 0.754_877_666).fract() - 0.5)
            .collect();
        (format!("w{i}"), v)
    });
    EmbeddingTable::from_rows("bench", dim, rows).expect("valid fixture")
}
