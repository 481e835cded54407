//! Minimal dense numeric kernels: vectors, matrices, stable softmax, and
//! masked scaled-dot-product causal attention. Everything is `f64`; sizes are
//! desk-scale, so clarity and exactness beat throughput tricks.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::dimension("matrix needs at least one row"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dimension("ragged rows"));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in &rows {
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// `self * other`, validating shapes first.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dimension(format!(
                "matmul shape mismatch: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }
}

/// Numerically stable softmax with max-subtraction.
///
/// Input entries must be finite; the output sums to 1 within 1e-9 and every
/// entry lies in (0, 1].
pub fn softmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::dimension("softmax of empty vector"));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("softmax input contains {bad}")));
    }
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

/// Masked scaled-dot-product causal self-attention.
///
/// `Q`, `K`, `V` must all be `n x d_l`. Returns `(R, A)` where
/// `A = row_softmax(Q K^T / sqrt(d_l) + M)` with `M` the strictly
/// upper-triangular -inf causal mask, and `R = A V`. Masked entries of `A`
/// are exactly zero: the masked positions are simply never exponentiated.
pub fn causal_attention(q: &Matrix, k: &Matrix, v: &Matrix, d_l: usize) -> Result<(Matrix, Matrix)> {
    let n = q.rows();
    if k.rows() != n || v.rows() != n {
        return Err(Error::dimension(format!(
            "attention row mismatch: Q {}x{}, K {}x{}, V {}x{}",
            q.rows(),
            q.cols(),
            k.rows(),
            k.cols(),
            v.rows(),
            v.cols()
        )));
    }
    if q.cols() != d_l || k.cols() != d_l || v.cols() != d_l {
        return Err(Error::dimension(format!(
            "attention col mismatch: expected d_l={d_l}, got Q {}, K {}, V {}",
            q.cols(),
            k.cols(),
            v.cols()
        )));
    }
    if d_l == 0 {
        return Err(Error::dimension("attention with d_l = 0"));
    }
    let scale = 1.0 / (d_l as f64).sqrt();
    let mut a = Matrix::zeros(n, n);
    let mut r = Matrix::zeros(n, d_l);
    let mut scores = vec![0.0f64; n];
    for i in 0..n {
        let qi = q.row(i);
        let visible = i + 1;
        for (j, s) in scores.iter_mut().take(visible).enumerate() {
            let kj = k.row(j);
            let dot: f64 = qi.iter().zip(kj).map(|(a, b)| a * b).sum();
            *s = dot * scale;
        }
        let max = scores[..visible]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::numeric("non-finite attention score"));
        }
        let mut sum = 0.0;
        for s in scores.iter_mut().take(visible) {
            *s = (*s - max).exp();
            sum += *s;
        }
        let a_row = a.row_mut(i);
        for (j, s) in scores.iter().take(visible).enumerate() {
            a_row[j] = s / sum;
        }
        // R[i] = sum_j A[i][j] V[j], over the visible prefix only.
        let (r_rows, v_rows) = (i, visible);
        let r_row = r.row_mut(r_rows);
        for j in 0..v_rows {
            let w = a.get(i, j);
            for (out, &vv) in r_row.iter_mut().zip(v.row(j)) {
                *out += w * vv;
            }
        }
    }
    Ok((r, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn softmax_symmetric_pair() {
        let p = softmax(&[0.0, 0.0]).unwrap();
        assert!(approx(p[0], 0.5, 1e-12) && approx(p[1], 0.5, 1e-12));
    }

    #[test]
    fn softmax_analytic_ln2() {
        let p = softmax(&[2.0f64.ln(), 0.0]).unwrap();
        assert!(approx(p[0], 2.0 / 3.0, 1e-12));
        assert!(approx(p[1], 1.0 / 3.0, 1e-12));
    }

    #[test]
    fn softmax_rejects_empty_and_nonfinite() {
        assert!(matches!(softmax(&[]), Err(Error::Dimension(_))));
        assert!(matches!(softmax(&[1.0, f64::NAN]), Err(Error::Numeric(_))));
        assert!(matches!(
            softmax(&[1.0, f64::INFINITY]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn softmax_shift_invariance_100_random() {
        let mut rng = crate::seed::stream(11, "softmax-shift");
        for _ in 0..100 {
            let n = rng.gen_range(1..12);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let c = rng.gen_range(-50.0..50.0);
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let a = softmax(&x).unwrap();
            let b = softmax(&shifted).unwrap();
            for (p, q) in a.iter().zip(&b) {
                assert!(approx(*p, *q, 1e-9));
            }
        }
    }

    #[test]
    fn attention_single_token() {
        let q = Matrix::from_rows(vec![vec![1.0, -2.0]]).unwrap();
        let k = Matrix::from_rows(vec![vec![0.3, 0.4]]).unwrap();
        let v = Matrix::from_rows(vec![vec![5.0, 6.0]]).unwrap();
        let (r, a) = causal_attention(&q, &k, &v, 2).unwrap();
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(r.row(0), v.row(0));
    }

    #[test]
    fn attention_uniform_over_unmasked() {
        let z = Matrix::zeros(2, 3);
        let v = Matrix::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let (_, a) = causal_attention(&z, &z, &v, 3).unwrap();
        assert_eq!(a.row(0), &[1.0, 0.0]);
        assert!(approx(a.get(1, 0), 0.5, 1e-12) && approx(a.get(1, 1), 0.5, 1e-12));
    }

    /// Brute-force oracle: materialize the additive -inf mask and run a plain
    /// row softmax, independently of the fused implementation.
    fn attention_oracle(q: &Matrix, k: &Matrix, v: &Matrix, d_l: usize) -> (Matrix, Matrix) {
        let n = q.rows();
        let scale = 1.0 / (d_l as f64).sqrt();
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            let mut row: Vec<f64> = (0..n)
                .map(|j| {
                    let dot: f64 = q.row(i).iter().zip(k.row(j)).map(|(x, y)| x * y).sum();
                    dot * scale
                })
                .collect();
            for (j, r) in row.iter_mut().enumerate() {
                if j > i {
                    *r = f64::NEG_INFINITY;
                }
            }
            let max = row.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row
                .iter()
                .map(|x| if x.is_finite() { (x - max).exp() } else { 0.0 })
                .collect();
            let sum: f64 = exps.iter().sum();
            for (j, e) in exps.iter().enumerate() {
                a.set(i, j, e / sum);
            }
        }
        let r = a.matmul(v).unwrap();
        (r, a)
    }

    #[test]
    fn attention_matches_bruteforce_oracle() {
        let mut rng = crate::seed::stream(5, "attn-oracle");
        for _ in 0..20 {
            let n = 5;
            let d = 4;
            let mk = |rng: &mut crate::seed::SplitMix64| {
                Matrix::from_rows(
                    (0..n)
                        .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                        .collect(),
                )
                .unwrap()
            };
            let q = mk(&mut rng);
            let k = mk(&mut rng);
            let v = mk(&mut rng);
            let (r, a) = causal_attention(&q, &k, &v, d).unwrap();
            let (r_o, a_o) = attention_oracle(&q, &k, &v, d);
            for (x, y) in a.data().iter().zip(a_o.data()) {
                assert!(approx(*x, *y, 1e-9));
            }
            for (x, y) in r.data().iter().zip(r_o.data()) {
                assert!(approx(*x, *y, 1e-9));
            }
        }
    }

    #[test]
    fn attention_shape_mismatch_is_error() {
        let q = Matrix::zeros(3, 4);
        let k = Matrix::zeros(2, 4);
        let v = Matrix::zeros(3, 4);
        assert!(matches!(
            causal_attention(&q, &k, &v, 4),
            Err(Error::Dimension(_))
        ));
        let k2 = Matrix::zeros(3, 5);
        assert!(matches!(
            causal_attention(&q, &k2, &v, 4),
            Err(Error::Dimension(_))
        ));
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_preserves_argmax(
            xs in proptest::collection::vec(-30.0f64..30.0, 1..16)
        ) {
            let p = softmax(&xs).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|v| *v > 0.0 && *v <= 1.0));
            let argmax_in = xs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let argmax_out = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            // Ties can legitimately differ; only check when the max is unique.
            let unique = xs.iter().filter(|v| **v == xs[argmax_in]).count() == 1;
            if unique {
                prop_assert_eq!(argmax_in, argmax_out);
            }
        }

        #[test]
        fn attention_rows_stochastic_and_masked_zero(
            seed in 0u64..1000
        ) {
            let mut rng = crate::seed::SplitMix64::new(seed);
            let n = 1 + (seed as usize % 6);
            let d = 3;
            let mk = |rng: &mut crate::seed::SplitMix64| {
                Matrix::from_rows(
                    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect()
                ).unwrap()
            };
            let q = mk(&mut rng);
            let k = mk(&mut rng);
            let v = mk(&mut rng);
            let (_, a) = causal_attention(&q, &k, &v, d).unwrap();
            for i in 0..n {
                let sum: f64 = a.row(i).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                for j in (i + 1)..n {
                    prop_assert!(a.get(i, j).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn final_row_permutation_equivariance() {
        // The last row sees every key; permuting the first n-1 keys/values
        // permutes its attention weights accordingly and leaves R[last]
        // unchanged (equivariance over unmasked keys).
        let mut rng = crate::seed::stream(3, "attn-perm");
        let n = 6;
        let d = 4;
        let mk = |rng: &mut crate::seed::SplitMix64| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect()
        };
        let q_rows = mk(&mut rng);
        let k_rows = mk(&mut rng);
        let v_rows = mk(&mut rng);
        let perm: Vec<usize> = vec![3, 1, 4, 0, 2, 5]; // fixes the last position

        let q = Matrix::from_rows(q_rows.clone()).unwrap();
        let k = Matrix::from_rows(k_rows.clone()).unwrap();
        let v = Matrix::from_rows(v_rows.clone()).unwrap();
        let (r, a) = causal_attention(&q, &k, &v, d).unwrap();

        let permuted =
            |rows: &[Vec<f64>]| -> Vec<Vec<f64>> { perm.iter().map(|&p| rows[p].clone()).collect() };
        let kp = Matrix::from_rows(permuted(&k_rows)).unwrap();
        let vp = Matrix::from_rows(permuted(&v_rows)).unwrap();
        let qp = Matrix::from_rows(permuted(&q_rows)).unwrap();
        let (rp, ap) = causal_attention(&qp, &kp, &vp, d).unwrap();

        let last = n - 1;
        for (new_idx, &old_idx) in perm.iter().enumerate() {
            assert!(approx(ap.get(last, new_idx), a.get(last, old_idx), 1e-12));
        }
        for c in 0..d {
            assert!(approx(rp.get(last, c), r.get(last, c), 1e-9));
        }
    }
}
