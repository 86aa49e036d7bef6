//! Helpers for inspecting sampled curves.

/// Index of the largest value; ties go to the leftmost sample. `None` for an
/// empty slice or one containing NaN.
pub fn argmax_leftmost(values: &[f64]) -> Option<usize> {
    if values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// A sampled curve is called unimodal here when it has a single interior
/// maximum and both end values are at most `tail_fraction` of the peak.
pub fn is_unimodal(values: &[f64], tail_fraction: f64) -> bool {
    let Some(peak) = argmax_leftmost(values) else {
        return false;
    };
    let n = values.len();
    if n < 3 || peak == 0 || peak == n - 1 {
        return false;
    }
    let top = values[peak];
    if top <= 0.0 {
        return false;
    }
    let tails_ok = values[0] <= tail_fraction * top && values[n - 1] <= tail_fraction * top;
    // non-decreasing up to the peak and non-increasing after, up to round-off
    let slack = 1e-12 * top;
    let rising = values[..=peak].windows(2).all(|w| w[1] >= w[0] - slack);
    let falling = values[peak..].windows(2).all(|w| w[1] <= w[0] + slack);
    tails_ok && rising && falling
}
