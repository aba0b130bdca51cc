//! Upstream-biased quadratic face reconstruction.
//!
//! The quadratic through three neighbouring cell averages, evaluated at the
//! face, with two cells on the upstream side and one downstream:
//!
//! ```text
//! f_face = (-f_far + 5 f_near + 2 f_down) / 6
//! ```
//!
//! It is exact for polynomials of degree <= 2 and linear in the cell values.

/// Weights for (far upstream, near upstream, downstream).
pub const QUADRATIC_UPWIND: [f64; 3] = [-1.0 / 6.0, 5.0 / 6.0, 2.0 / 6.0];

/// Face value from explicit stencil cells.
pub fn quadratic_face(far: f64, near: f64, down: f64) -> f64 {
    let [w0, w1, w2] = QUADRATIC_UPWIND;
    w0 * far + w1 * near + w2 * down
}

/// Upwind stencil for a face as `(offset, weight)` pairs. Offset `-1` is the
/// nearest cell left of the face, `0` the nearest cell right of it.
/// `left_avail` / `right_avail` count the cells usable on each side. Falls
/// back to first-order upwind when the upstream side has fewer than two
/// cells or the downstream side is empty.
pub fn upwind_stencil(left_avail: usize, right_avail: usize, velocity: f64) -> Vec<(isize, f64)> {
    let [w_far, w_near, w_down] = QUADRATIC_UPWIND;
    if velocity >= 0.0 {
        if left_avail >= 2 && right_avail >= 1 {
            vec![(-2, w_far), (-1, w_near), (0, w_down)]
        } else if left_avail >= 1 {
            vec![(-1, 1.0)]
        } else {
            Vec::new()
        }
    } else if right_avail >= 2 && left_avail >= 1 {
        vec![(1, w_far), (0, w_near), (-1, w_down)]
    } else if right_avail >= 1 {
        vec![(0, 1.0)]
    } else {
        Vec::new()
    }
}

/// Face value between `left` and `right` cell runs (nearest cell last in
/// `left`, first in `right`) for a flow with the sign of `velocity`.
pub fn reconstruct_face(left: &[f64], right: &[f64], velocity: f64) -> f64 {
    upwind_stencil(left.len(), right.len(), velocity)
        .into_iter()
        .map(|(off, w)| {
            let v = if off < 0 {
                left[(left.len() as isize + off) as usize]
            } else {
                right[off as usize]
            };
            w * v
        })
        .sum()
}
