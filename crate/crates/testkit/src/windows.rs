//! Quadratic sliding-window count oracle.

/// Largest number of prompts inside any half-open window `(t - interval, t]`.
///
/// Only windows ending at a prompt need checking: sliding the right edge
/// back to the latest prompt it covers never loses one.
pub fn max_in_any_window(prompts: &[i64], interval: i64) -> usize {
    prompts
        .iter()
        .map(|&end| prompts.iter().filter(|&&t| end - interval < t && t <= end).count())
        .max()
        .unwrap_or(0)
}

/// Count in the window ending at `now`, by linear scan.
pub fn count_in_window(prompts: &[i64], now: i64, interval: i64) -> usize {
    prompts.iter().filter(|&&t| now - interval < t && t <= now).count()
}
