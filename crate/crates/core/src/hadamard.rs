//! In-place fast Walsh–Hadamard transform.

/// Unnormalised Walsh–Hadamard transform of `data` (Sylvester ordering).
///
/// Panics if the length is not a power of two.
pub fn fwht(data: &mut [f64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fwht length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}

/// Entry `(row, col)` of the Sylvester Hadamard matrix: `(-1)^{popcount(row & col)}`.
pub fn entry(row: usize, col: usize) -> f64 {
    if (row & col).count_ones() % 2 == 0 { 1.0 } else { -1.0 }
}
