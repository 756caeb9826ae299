//! Fixed disparity colormap for visual output.
//!
//! Disparity `d` maps to `t = d / (max_disp - 1)` clamped to `[0, 1]`, then
//! linearly between these stops:
//!
//! | t    | colour          |
//! |------|-----------------|
//! | 0.00 | (0, 0, 128)     |
//! | 0.25 | (0, 0, 255)     |
//! | 0.50 | (0, 255, 255)   |
//! | 0.75 | (255, 255, 0)   |
//! | 1.00 | (255, 0, 0)     |

pub const STOPS: [(f64, [f64; 3]); 5] = [
    (0.0, [0.0, 0.0, 128.0]),
    (0.25, [0.0, 0.0, 255.0]),
    (0.5, [0.0, 255.0, 255.0]),
    (0.75, [255.0, 255.0, 0.0]),
    (1.0, [255.0, 0.0, 0.0]),
];

pub fn color(d: f64, max_disp: usize) -> [u8; 3] {
    let span = max_disp.saturating_sub(1).max(1) as f64;
    let t = if d.is_finite() { (d / span).clamp(0.0, 1.0) } else { 0.0 };
    let k = STOPS.windows(2).position(|w| t <= w[1].0).unwrap_or(STOPS.len() - 2);
    let ((t0, c0), (t1, c1)) = (STOPS[k], STOPS[k + 1]);
    let f = (t - t0) / (t1 - t0);
    std::array::from_fn(|i| (c0[i] + f * (c1[i] - c0[i])).round() as u8)
}

/// Interleaved RGB8 rendering of a row-major disparity map.
pub fn colorize(values: &[f64], max_disp: usize) -> Vec<u8> {
    values.iter().flat_map(|&d| color(d, max_disp)).collect()
}
