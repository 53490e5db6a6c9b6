//! Perfect classical orderings on a row-major square grid, as packed bit
//! strings in the layout used by [`ShotSet`](crate::measure::ShotSet).

use crate::measure::{set_bit, words_for};

/// Pattern with site `(col, row)` excited when `f(col, row)` holds.
pub fn from_fn(cols: usize, rows: usize, f: impl Fn(usize, usize) -> bool) -> Vec<u64> {
    let mut bits = vec![0u64; words_for(cols * rows)];
    for r in 0..rows {
        for c in 0..cols {
            if f(c, r) {
                set_bit(&mut bits, r * cols + c, true);
            }
        }
    }
    bits
}

/// `(AF₁, AF₂)`: excitations on even and on odd `col + row` respectively.
pub fn checkerboard_pair(cols: usize, rows: usize) -> (Vec<u64>, Vec<u64>) {
    (
        from_fn(cols, rows, |c, r| (c + r) % 2 == 0),
        from_fn(cols, rows, |c, r| (c + r) % 2 == 1),
    )
}

/// Classical striated ordering: the (0,0) sublattice of the 2×2 cell excited.
pub fn striated(cols: usize, rows: usize) -> Vec<u64> {
    from_fn(cols, rows, |c, r| c % 2 == 0 && r % 2 == 0)
}

/// Star ordering with Fourier peaks at `(π/2, π)` and `(π, 0)`: even rows
/// excited at columns `0 mod 4`, odd rows at columns `2 mod 4`.
pub fn star(cols: usize, rows: usize) -> Vec<u64> {
    from_fn(cols, rows, |c, r| c % 4 == 2 * (r % 2))
}

/// Excited sites of a pattern as `(col, row)`.
pub fn sites(bits: &[u64], cols: usize, rows: usize) -> Vec<(usize, usize)> {
    (0..cols * rows)
        .filter(|&i| crate::measure::bit(bits, i))
        .map(|i| (i % cols, i / cols))
        .collect()
}
