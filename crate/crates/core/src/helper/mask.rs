//! Three-section attention mask with a learned visual-to-visual block.
//!
//! Sequence layout is `[inquiry (incl. CLS) | response | visual]`. Additive
//! entries are `0` where attention is allowed, `-inf` where it is not, and
//! `log C_ij` on the visual-to-visual block when the conditional mask is on.

use crate::neuralcore::{Result, Scalar, Tape, Tensor, Var};

/// Binary section structure: which (row, col) pairs may attend.
pub fn allowed(lq: usize, lr: usize, validity: &[bool], row: usize, col: usize) -> bool {
    let vis0 = lq + lr;
    if col >= vis0 && !validity[col - vis0] {
        return false;
    }
    if row < lq {
        col < lq || col >= vis0
    } else if row < vis0 {
        col < lq || col >= vis0 || col <= row
    } else {
        col < lq || col >= vis0
    }
}

/// `0 / -inf` additive mask of the binary structure.
pub fn base_mask<T: Scalar>(lq: usize, lr: usize, validity: &[bool]) -> Tensor<T> {
    let n = lq + lr + validity.len();
    let mut m = Tensor::full(n, n, T::neg_infinity());
    for r in 0..n {
        for c in 0..n {
            if allowed(lq, lr, validity, r, c) {
                m.set(r, c, T::zero());
            }
        }
    }
    m
}

/// Mask variable plus the conditional submask `C` when enabled.
#[derive(Debug, Clone, Copy)]
pub struct MaskVars {
    pub mask: Var,
    pub c: Option<Var>,
}

/// Assembles the additive mask; `logits_c` are the pre-sigmoid `M x M` scores.
pub fn assemble_mask<T: Scalar>(
    tape: &mut Tape<T>,
    lq: usize,
    lr: usize,
    validity: &[bool],
    logits_c: Option<Var>,
) -> Result<MaskVars> {
    let base = base_mask::<T>(lq, lr, validity);
    match logits_c {
        None => Ok(MaskVars { mask: tape.leaf(base), c: None }),
        Some(z) => {
            let c = tape.sigmoid(z);
            let log_c = tape.log_sigmoid(z);
            let vis0 = lq + lr;
            let mask = tape.scatter_block(&base, log_c, vis0, vis0)?;
            Ok(MaskVars { mask, c: Some(c) })
        }
    }
}

/// `lambda * sum |C|` on the tape.
pub fn sparsity_loss<T: Scalar>(tape: &mut Tape<T>, c: Var, lambda: f64) -> Var {
    let s = tape.sum_abs(c);
    tape.scale(s, T::c(lambda))
}

/// Closed-form value of the sparsity term.
pub fn sparsity_value(c: &[f64], lambda: f64) -> f64 {
    lambda * c.iter().map(|x| x.abs()).sum::<f64>()
}

/// Materialized mask for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct CosAttentionMask {
    pub dense: Tensor<f64>,
    /// `M x M` conditional submask, absent when the learned block is disabled.
    pub c: Option<Tensor<f64>>,
    pub lambda: f64,
    pub lq: usize,
    pub lr: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_section_structure() {
        let validity = [true; 4];
        let m = base_mask::<f64>(3, 5, &validity);
        assert_eq!(m.shape(), [12, 12]);
        let ok = |r: usize, c: usize| m.get(r, c) == 0.0;
        for r in 0..3 {
            assert!((0..3).all(|c| ok(r, c)));
            assert!((3..8).all(|c| !ok(r, c)));
            assert!((8..12).all(|c| ok(r, c)));
        }
        assert!((4..8).all(|c| !ok(3, c)));
        assert!(ok(3, 3));
        assert!((3..8).all(|c| ok(7, c)));
        for r in 8..12 {
            assert!((0..3).all(|c| ok(r, c)));
            assert!((3..8).all(|c| !ok(r, c)));
            assert!((8..12).all(|c| ok(r, c)));
        }
    }

    #[test]
    fn padded_columns_disallowed() {
        let m = base_mask::<f64>(2, 2, &[true, false]);
        for r in 0..6 {
            assert_eq!(m.get(r, 5), f64::NEG_INFINITY);
        }
    }

    #[test]
    fn sparsity_closed_form() {
        assert!((sparsity_value(&[0.5; 16], 0.1) - 0.8).abs() < 1e-12);
        assert_eq!(sparsity_value(&[0.5; 16], 0.0), 0.0);
        let mut tape = Tape::<f64>::new();
        let c = tape.leaf(Tensor::full(4, 4, 0.5));
        let l = sparsity_loss(&mut tape, c, 0.1);
        assert!((tape.value(l).item() - 0.8).abs() < 1e-12);
    }
}
