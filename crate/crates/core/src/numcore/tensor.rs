//! Dense row-major tensors and the pure numeric kernels used everywhere else.
//!
//! Values are held as `f64` in memory; on-disk formats store `f32` (see the
//! model file module). Reductions accumulate in `f64`. All operations here are
//! pure: identical inputs produce bit-identical outputs.

use crate::error::{Error, Result};

/// Clamp applied to probabilities before taking logarithms.
pub const LOG_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Default for Tensor {
    fn default() -> Self {
        Tensor::scalar(0.0)
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::contract(format!(
                "tensor data length {} does not match shape {:?} (numel {})",
                data.len(),
                shape,
                numel
            )));
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::contract(format!(
                "tensor shape {shape:?} has a zero dimension"
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    /// 2-D tensor from rows; all rows must have equal length.
    pub fn matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::contract("matrix rows have unequal lengths"));
        }
        let mut data = Vec::with_capacity(m * n);
        for r in rows {
            data.extend_from_slice(r);
        }
        Tensor::new(vec![m, n], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    /// Reinterpret the same data under a new shape of equal element count.
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        Tensor::new(shape, self.data.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn rows(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[1]
    }
}

fn check_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::Dimension {
            op,
            lhs: a.shape.clone(),
            rhs: b.shape.clone(),
        });
    }
    Ok(())
}

/// Standard matrix product of a `[m, k]` by a `[k, n]` tensor.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape.len() != 2 || b.shape.len() != 2 || a.shape[1] != b.shape[0] {
        return Err(Error::Dimension {
            op: "matmul",
            lhs: a.shape.clone(),
            rhs: b.shape.clone(),
        });
    }
    let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a.data[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape("add", a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape.clone(), data)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape("sub", a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect();
    Tensor::new(a.shape.clone(), data)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape("mul", a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape.clone(), data)
}

/// Add a `[n]` bias row to every row of a `[m, n]` tensor.
pub fn add_row(a: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if a.shape.len() != 2 || bias.shape.len() != 1 || a.shape[1] != bias.shape[0] {
        return Err(Error::Dimension {
            op: "add_row",
            lhs: a.shape.clone(),
            rhs: bias.shape.clone(),
        });
    }
    let n = a.shape[1];
    let data = a
        .data
        .iter()
        .enumerate()
        .map(|(i, x)| x + bias.data[i % n])
        .collect();
    Tensor::new(a.shape.clone(), data)
}

pub fn leaky_relu(x: &Tensor, alpha: f64) -> Tensor {
    let data = x
        .data
        .iter()
        .map(|&v| if v >= 0.0 { v } else { alpha * v })
        .collect();
    Tensor {
        shape: x.shape.clone(),
        data,
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    let data = x.data.iter().map(|&v| sigmoid_scalar(v)).collect();
    Tensor {
        shape: x.shape.clone(),
        data,
    }
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn abs(x: &Tensor) -> Tensor {
    let data = x.data.iter().map(|v| v.abs()).collect();
    Tensor {
        shape: x.shape.clone(),
        data,
    }
}

/// Max-subtracted softmax over a vector of at least two logits.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.shape.len() != 1 || logits.shape[0] < 2 {
        return Err(Error::contract(format!(
            "softmax expects a vector of length >= 2, got shape {:?}",
            logits.shape
        )));
    }
    let mut out = logits.data.clone();
    softmax_slice(&mut out);
    Tensor::new(logits.shape.clone(), out)
}

/// Row-wise softmax of a `[m, n]` tensor.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    if logits.shape.len() != 2 || logits.shape[1] < 2 {
        return Err(Error::contract(format!(
            "softmax_rows expects [m, n>=2], got shape {:?}",
            logits.shape
        )));
    }
    let n = logits.shape[1];
    let mut out = logits.data.clone();
    for row in out.chunks_mut(n) {
        softmax_slice(row);
    }
    Tensor::new(logits.shape.clone(), out)
}

fn softmax_slice(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(LOG_EPS, 1.0 - LOG_EPS)
}

/// Cross-entropy H(target, pred) = -sum target_i ln(pred_i) between two
/// distributions; predictions are clamped away from 0 and 1 before the log.
pub fn cross_entropy(target: &Tensor, pred: &Tensor) -> Result<f64> {
    check_same_shape("cross_entropy", target, pred)?;
    for (name, t) in [("target", target), ("pred", pred)] {
        let sum: f64 = t.data.iter().sum();
        if (sum - 1.0).abs() > 1e-4 {
            return Err(Error::contract(format!(
                "cross_entropy {name} sums to {sum}, expected 1"
            )));
        }
    }
    let mut h = 0.0;
    for (&t, &p) in target.data.iter().zip(&pred.data) {
        h -= t * clamp_prob(p).ln();
    }
    Ok(h)
}

pub fn norm_l1(x: &Tensor) -> f64 {
    x.data.iter().map(|v| v.abs()).sum()
}

pub fn norm_l2(x: &Tensor) -> f64 {
    x.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn mean(x: &Tensor) -> f64 {
    x.data.iter().sum::<f64>() / x.numel() as f64
}

/// Concatenate two 2-D tensors along columns: `[m, a] ++ [m, b] -> [m, a+b]`.
pub fn concat_cols(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape.len() != 2 || b.shape.len() != 2 || a.shape[0] != b.shape[0] {
        return Err(Error::Dimension {
            op: "concat_cols",
            lhs: a.shape.clone(),
            rhs: b.shape.clone(),
        });
    }
    let (m, na, nb) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut data = Vec::with_capacity(m * (na + nb));
    for i in 0..m {
        data.extend_from_slice(&a.data[i * na..(i + 1) * na]);
        data.extend_from_slice(&b.data[i * nb..(i + 1) * nb]);
    }
    Tensor::new(vec![m, na + nb], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let i = Tensor::matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let b = Tensor::matrix(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        assert_eq!(matmul(&i, &b).unwrap(), b);
    }

    #[test]
    fn matmul_dot() {
        let a = Tensor::matrix(&[vec![1.0, 2.0]]).unwrap();
        let b = Tensor::matrix(&[vec![3.0], vec![4.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[11.0]);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        // Naive triple-loop product as an independent oracle.
        let mut rng = crate::rng::rng_from_seed(7);
        use rand::Rng;
        let a_data: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b_data: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let a = Tensor::new(vec![3, 4], a_data.clone()).unwrap();
        let b = Tensor::new(vec![4, 2], b_data.clone()).unwrap();
        let c = matmul(&a, &b).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += a_data[i * 4 + k] * b_data[k * 2 + j];
                }
                assert!((c.data()[i * 2 + j] - s).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![2, 3]);
        let err = matmul(&a, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "message was: {msg}");
    }

    #[test]
    fn elementwise_basics() {
        let x = Tensor::vector(vec![1.0, -2.0, 3.0]);
        let z = Tensor::zeros(vec![3]);
        assert_eq!(add(&x, &z).unwrap(), x);
        assert_eq!(sigmoid(&Tensor::scalar(0.0)).item(), 0.5);
        let lr = leaky_relu(&Tensor::scalar(-2.0), 0.2);
        assert!((lr.item() + 0.4).abs() < 1e-12);
        let err = add(&x, &Tensor::zeros(vec![4])).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn softmax_symmetry_and_stability() {
        let s = softmax(&Tensor::vector(vec![0.0, 0.0])).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);

        let s = softmax(&Tensor::vector(vec![3.3, 3.3, 3.3, 3.3])).unwrap();
        for &v in s.data() {
            assert!((v - 0.25).abs() < 1e-12);
        }

        let s = softmax(&Tensor::vector(vec![1000.0, 0.0])).unwrap();
        assert!(s.is_finite());
        assert!(s.data()[0] > 1.0 - 1e-6 && s.data()[1] < 1e-6);
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax(&Tensor::vector(vec![0.3, -1.2, 2.0])).unwrap();
        let b = softmax(&Tensor::vector(vec![100.3, 98.8, 102.0])).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-6);
        }
        let sum: f64 = a.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_cases() {
        let onehot = Tensor::vector(vec![1.0, 0.0]);
        let uniform = Tensor::vector(vec![0.5, 0.5]);
        let h = cross_entropy(&onehot, &uniform).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-9);

        let near_perfect = Tensor::vector(vec![1.0 - LOG_EPS, LOG_EPS]);
        let h = cross_entropy(&onehot, &near_perfect).unwrap();
        assert!(h.abs() < 1e-6);

        // H(p, p) equals the entropy of p; value frozen from the formula
        // 0.3*ln(1/0.3) + 0.7*ln(1/0.7).
        let p = Tensor::vector(vec![0.3, 0.7]);
        let h = cross_entropy(&p, &p).unwrap();
        assert!((h - 0.6108643020548935).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_rejects_length_mismatch() {
        let a = Tensor::vector(vec![1.0, 0.0]);
        let b = Tensor::vector(vec![0.2, 0.3, 0.5]);
        assert!(matches!(
            cross_entropy(&a, &b),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn norms() {
        assert_eq!(norm_l2(&Tensor::zeros(vec![4])), 0.0);
        assert!((norm_l2(&Tensor::vector(vec![0.3, 0.4])) - 0.5).abs() < 1e-12);
        assert_eq!(norm_l1(&Tensor::vector(vec![1.0, -1.0, 2.0])), 4.0);
    }

    #[test]
    fn concat_cols_layout() {
        let a = Tensor::matrix(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Tensor::matrix(&[vec![5.0], vec![6.0]]).unwrap();
        let c = concat_cols(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 3]);
        assert_eq!(c.data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
    }
}
