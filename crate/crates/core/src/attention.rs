//! Reference focus-masked self-attention.
//!
//! `softmax((QKᵀ + M) / √d) V`, where the additive mask `M` is 0 between
//! tokens of the same focus region and a large negative sentinel between
//! tokens of different regions. Blocked weights are zeroed exactly after the
//! softmax, so cross-region leakage is identically zero rather than merely
//! tiny.

use crate::defocus::FocusMask;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stand-in for −∞ in the additive mask.
pub const MASK_SENTINEL: f64 = -1e9;

/// `n × dim` row-major token features.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenMatrix<T> {
    n: usize,
    dim: usize,
    values: Vec<T>,
}

impl<T: Scalar> TokenMatrix<T> {
    pub fn new(n: usize, dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "token matrix must be non-empty, got {n}x{dim}"
            )));
        }
        if values.len() != n * dim {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for {n}x{dim}, got {}",
                n * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("token values must be finite".into()));
        }
        Ok(Self { n, dim, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

/// `n × n` additive attention mask.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMask<T> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Scalar> AttentionMask<T> {
    /// Mask that blocks nothing.
    pub fn open(n: usize) -> Self {
        Self {
            n,
            entries: vec![T::zero(); n * n],
        }
    }

    /// Tokens attend to each other iff they carry the same region label.
    pub fn from_regions(labels: &[u32]) -> Self {
        let n = labels.len();
        let sentinel = T::lit(MASK_SENTINEL);
        let mut entries = Vec::with_capacity(n * n);
        for &a in labels {
            for &b in labels {
                entries.push(if a == b { T::zero() } else { sentinel });
            }
        }
        Self { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn is_blocked(&self, i: usize, j: usize) -> bool {
        self.get(i, j).wide() <= 0.5 * MASK_SENTINEL
    }
}

/// Additive mask from a two-region focus mask, tokens in row-major order.
/// An all-ones mask yields an all-zero additive mask.
pub fn build_mask<T: Scalar>(mask: &FocusMask) -> AttentionMask<T> {
    AttentionMask::from_regions(&mask.region_labels())
}

fn check_shapes<T: Scalar>(q: &TokenMatrix<T>, k: &TokenMatrix<T>, mask: &AttentionMask<T>) -> Result<()> {
    if q.n != k.n || q.dim != k.dim {
        return Err(Error::DimensionMismatch {
            expected: (q.n, q.dim),
            actual: (k.n, k.dim),
        });
    }
    if mask.n != q.n {
        return Err(Error::DimensionMismatch {
            expected: (q.n, q.n),
            actual: (mask.n, mask.n),
        });
    }
    if (0..mask.n).any(|i| mask.is_blocked(i, i)) {
        return Err(Error::InvalidParameter(
            "attention mask blocks a token from itself".into(),
        ));
    }
    Ok(())
}

/// Row-stochastic `n × n` attention weights.
pub fn attention_weights<T: Scalar>(q: &TokenMatrix<T>, k: &TokenMatrix<T>, mask: &AttentionMask<T>) -> Result<Vec<T>> {
    check_shapes(q, k, mask)?;
    let n = q.n;
    let scale = T::one() / T::lit(q.dim as f64).sqrt();
    let mut weights = vec![T::zero(); n * n];
    let mut scores = vec![T::zero(); n];
    for i in 0..n {
        let qi = q.row(i);
        for (j, s) in scores.iter_mut().enumerate() {
            let dot: T = qi.iter().zip(k.row(j)).map(|(&a, &b)| a * b).sum();
            *s = (dot + mask.get(i, j)) * scale;
        }
        let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
        let row = &mut weights[i * n..(i + 1) * n];
        let mut total = T::zero();
        for (j, (w, &s)) in row.iter_mut().zip(&scores).enumerate() {
            *w = if mask.is_blocked(i, j) {
                T::zero()
            } else {
                (s - max).exp()
            };
            total += *w;
        }
        for w in row.iter_mut() {
            *w /= total;
        }
    }
    Ok(weights)
}

/// Focus-masked attention output, one row per query token.
pub fn masked_attention<T: Scalar>(
    q: &TokenMatrix<T>,
    k: &TokenMatrix<T>,
    v: &TokenMatrix<T>,
    mask: &AttentionMask<T>,
) -> Result<TokenMatrix<T>> {
    if v.n != k.n {
        return Err(Error::DimensionMismatch {
            expected: (k.n, k.dim),
            actual: (v.n, v.dim),
        });
    }
    let weights = attention_weights(q, k, mask)?;
    let (n, dv) = (q.n, v.dim);
    let mut out = vec![T::zero(); n * dv];
    for i in 0..n {
        let o = &mut out[i * dv..(i + 1) * dv];
        for j in 0..n {
            let w = weights[i * n + j];
            if w == T::zero() {
                continue;
            }
            for (acc, &x) in o.iter_mut().zip(v.row(j)) {
                *acc += w * x;
            }
        }
    }
    TokenMatrix::new(n, dv, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(n: usize, dim: usize, f: impl Fn(usize) -> f64) -> TokenMatrix<f64> {
        TokenMatrix::new(n, dim, (0..n * dim).map(f).collect()).unwrap()
    }

    #[test]
    fn all_ones_focus_mask_gives_open_mask() {
        let m = FocusMask::from_bits(3, 2, vec![true; 6], 1.0).unwrap();
        assert_eq!(build_mask::<f64>(&m), AttentionMask::open(6));
    }

    #[test]
    fn two_regions_block_off_diagonal() {
        let m = FocusMask::from_bits(2, 1, vec![true, false], 1.0).unwrap();
        let a = build_mask::<f32>(&m);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.get(0, 1), MASK_SENTINEL as f32);
        assert_eq!(a.get(1, 0), MASK_SENTINEL as f32);
    }

    #[test]
    fn block_diagonal_pattern() {
        let m = FocusMask::from_bits(4, 1, vec![true, true, false, false], 1.0).unwrap();
        let a = build_mask::<f64>(&m);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a.is_blocked(i, j), (i < 2) != (j < 2), "({i},{j})");
            }
        }
    }

    #[test]
    fn single_token_returns_value() {
        let q = tokens(1, 3, |i| i as f64);
        let v = tokens(1, 3, |i| 10.0 + i as f64);
        let out = masked_attention(&q, &q, &v, &AttentionMask::open(1)).unwrap();
        assert_eq!(out.values(), v.values());
    }

    #[test]
    fn separate_regions_attend_only_to_self() {
        let q = tokens(2, 4, |i| (i as f64 * 0.7).sin());
        let k = tokens(2, 4, |i| (i as f64 * 1.3).cos());
        let v = tokens(2, 4, |i| i as f64);
        let out = masked_attention(&q, &k, &v, &AttentionMask::from_regions(&[0, 1])).unwrap();
        assert_eq!(out.values(), v.values());
    }

    #[test]
    fn shape_and_diagonal_errors() {
        let q = tokens(3, 2, |i| i as f64);
        let k = tokens(2, 2, |i| i as f64);
        assert!(masked_attention(&q, &k, &k, &AttentionMask::open(3)).is_err());
        assert!(masked_attention(&q, &q, &q, &AttentionMask::open(2)).is_err());
        let mut bad = AttentionMask::<f64>::open(3);
        bad.entries[4] = MASK_SENTINEL;
        assert!(masked_attention(&q, &q, &q, &bad).is_err());
        assert!(TokenMatrix::<f64>::new(2, 0, vec![]).is_err());
    }
}
