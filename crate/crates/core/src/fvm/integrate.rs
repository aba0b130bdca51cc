use nalgebra_sparse::CsrMatrix;

/// `y = M x`.
pub fn spmv(m: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    for (row, out) in m.row_iter().zip(y.iter_mut()) {
        *out = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&c, &v)| v * x[c])
            .sum();
    }
}

/// `steps` classical RK4 steps of size `h` for `x' = M x`, in place.
pub fn rk4_advance(m: &CsrMatrix<f64>, x: &mut [f64], h: f64, steps: usize) {
    let n = x.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        spmv(m, x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        spmv(m, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        spmv(m, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        spmv(m, &tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra_sparse::CooMatrix;

    #[test]
    fn scalar_decay_matches_exp() {
        let mut coo = CooMatrix::new(1, 1);
        coo.push(0, 0, -0.3);
        let m = CsrMatrix::from(&coo);
        let mut x = [1.0];
        rk4_advance(&m, &mut x, 0.01, 1000);
        assert!((x[0] - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn rotation_preserves_norm() {
        let mut coo = CooMatrix::new(2, 2);
        coo.push(0, 1, 1.0);
        coo.push(1, 0, -1.0);
        let m = CsrMatrix::from(&coo);
        let mut x = [1.0, 0.0];
        rk4_advance(&m, &mut x, 1e-3, 6283);
        assert!((x[0] * x[0] + x[1] * x[1] - 1.0).abs() < 1e-9);
    }
}
