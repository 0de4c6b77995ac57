//! Interpolation helpers.

use num_complex::Complex64;

/// Index `i` such that `grid[i] <= x < grid[i+1]`, clamped to the valid range.
pub fn bracket(grid: &[f64], x: f64) -> usize {
    let n = grid.len();
    debug_assert!(n >= 2);
    match grid.partition_point(|&g| g <= x) {
        0 => 0,
        p if p >= n => n - 2,
        p => p - 1,
    }
}

/// Piecewise-linear interpolation of real samples on an ascending grid.
pub fn linear(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let i = bracket(grid, x);
    let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    values[i] + t * (values[i + 1] - values[i])
}

/// Cubic (Catmull–Rom) interpolation of complex samples on a uniform grid
/// starting at `x0` with spacing `dx`.
pub fn cubic_uniform(x0: f64, dx: f64, values: &[Complex64], x: f64) -> Complex64 {
    let n = values.len();
    let s = (x - x0) / dx;
    let i = (s.floor() as isize).clamp(0, n as isize - 2) as usize;
    let t = s - i as f64;
    let p = |k: isize| -> Complex64 {
        let idx = (i as isize + k).clamp(0, n as isize - 1) as usize;
        values[idx]
    };
    let (p0, p1, p2, p3) = (p(-1), p(0), p(1), p(2));
    let t2 = t * t;
    let t3 = t2 * t;
    (p1 * 2.0
        + (p2 - p0) * t
        + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2
        + (-p0 + p1 * 3.0 - p2 * 3.0 + p3) * t3)
        * 0.5
}
