//! Distances between power series and densities.

/// Conservatively move a piecewise-constant density from `src_edges` onto
/// `dst_edges`: each target cell receives the source mass overlapping it,
/// divided by its width. Mass outside the target range is dropped.
pub fn rebin(src_edges: &[f64], density: &[f64], dst_edges: &[f64]) -> Vec<f64> {
    assert_eq!(src_edges.len(), density.len() + 1, "edges/density mismatch");
    let mut out = vec![0.0; dst_edges.len().saturating_sub(1)];
    let (mut i, mut j) = (0, 0);
    while i < density.len() && j < out.len() {
        let lo = src_edges[i].max(dst_edges[j]);
        let hi = src_edges[i + 1].min(dst_edges[j + 1]);
        if hi > lo {
            out[j] += density[i] * (hi - lo);
        }
        if src_edges[i + 1] <= dst_edges[j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v /= dst_edges[k + 1] - dst_edges[k];
    }
    out
}

/// `sum |p - q| * width` over cells of `edges`.
pub fn l1_distance(edges: &[f64], p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .enumerate()
        .map(|(k, (a, b))| (a - b).abs() * (edges[k + 1] - edges[k]))
        .sum()
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

pub fn mean(a: &[f64]) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        a.iter().sum::<f64>() / a.len() as f64
    }
}

/// Binomial standard error of an on-fraction `p` over `n` units.
pub fn binomial_std_error(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Every `factor`-th edge, keeping the last one.
pub fn coarsen_edges(edges: &[f64], factor: usize) -> Vec<f64> {
    let mut out: Vec<f64> = edges.iter().step_by(factor).copied().collect();
    if !(edges.len() - 1).is_multiple_of(factor) {
        out.push(*edges.last().expect("non-empty"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rebin_to_coarser_preserves_mass() {
        let src = [0.0, 0.5, 1.0, 1.5, 2.0];
        let d = [1.0, 3.0, 2.0, 0.0];
        let out = rebin(&src, &d, &[0.0, 1.0, 2.0]);
        assert_eq!(out, vec![2.0, 1.0]);
    }

    #[test]
    fn rebin_splits_partial_overlaps() {
        let out = rebin(&[0.0, 1.0], &[2.0], &[0.0, 0.25, 1.0, 2.0]);
        assert_eq!(out, vec![2.0, 2.0, 0.0]);
    }

    #[test]
    fn coarsen_keeps_ends() {
        assert_eq!(coarsen_edges(&[0.0, 1.0, 2.0, 3.0, 4.0], 2), vec![0.0, 2.0, 4.0]);
        assert_eq!(coarsen_edges(&[0.0, 1.0, 2.0, 3.0], 2), vec![0.0, 2.0, 3.0]);
    }

    #[test]
    fn metric_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 4.0]), 2f64.sqrt());
        assert_eq!(l1_distance(&[0.0, 0.5, 2.0], &[1.0, 1.0], &[0.0, 2.0]), 2.0);
        assert!((binomial_std_error(0.1052, 10_000) - 0.003069).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn rebin_conserves_mass_on_covering_grid(
            d in proptest::collection::vec(0.0f64..5.0, 1..30),
            cuts in proptest::collection::vec(0.01f64..0.99, 0..10),
        ) {
            let n = d.len() as f64;
            let src: Vec<f64> = (0..=d.len()).map(|k| k as f64 / n).collect();
            let mut dst: Vec<f64> = cuts.clone();
            dst.push(0.0);
            dst.push(1.0);
            dst.sort_by(f64::total_cmp);
            dst.dedup();
            let out = rebin(&src, &d, &dst);
            let m0: f64 = d.iter().sum::<f64>() / n;
            let m1: f64 = out.iter().enumerate().map(|(k, v)| v * (dst[k + 1] - dst[k])).sum();
            prop_assert!((m0 - m1).abs() < 1e-12 * m0.max(1.0));
        }

        #[test]
        fn l1_is_symmetric_and_nonnegative(
            p in proptest::collection::vec(-2.0f64..2.0, 5),
            q in proptest::collection::vec(-2.0f64..2.0, 5),
        ) {
            let e: Vec<f64> = (0..6).map(|k| k as f64 * 0.3).collect();
            prop_assert!(l1_distance(&e, &p, &q) >= 0.0);
            prop_assert_eq!(l1_distance(&e, &p, &q), l1_distance(&e, &q, &p));
        }
    }
}
