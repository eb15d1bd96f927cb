#![allow(dead_code)]

pub mod fd_bands;

/// Pairs `(i, j)` with `(2j−1)Δ ≤ 2(tb − ta) < (2j+1)Δ`, counted pair by pair.
pub fn brute_force_counts(a: &[u64], b: &[u64], width: u64, half_bins: usize) -> Vec<u64> {
    let k = half_bins as i128;
    let w = width as i128;
    let mut counts = vec![0u64; 2 * half_bins + 1];
    for &ta in a {
        for &tb in b {
            let d2 = 2 * (tb as i128 - ta as i128);
            if d2 < -(2 * k + 1) * w || d2 >= (2 * k + 1) * w {
                continue;
            }
            let mut j = d2 / (2 * w);
            while (2 * j - 1) * w > d2 {
                j -= 1;
            }
            while (2 * j + 1) * w <= d2 {
                j += 1;
            }
            counts[(j + k) as usize] += 1;
        }
    }
    counts
}
