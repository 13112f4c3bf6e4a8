//! Small reverse-mode autodiff engine over row-major 2-D tensors.

pub mod checkpoint;
pub mod grad_check;
pub mod optim;
pub mod tape;
pub mod tensor;

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use thiserror::Error;

pub use checkpoint::{Manifest, TensorRecord, CHECKPOINT_VERSION};
pub use grad_check::{grad_check, grad_check_sampled, GradCheckReport};
pub use optim::{AdamW, AdamWConfig};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{ParamStore, Tensor};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    Shape { op: &'static str, left: [usize; 2], right: [usize; 2] },
    #[error("{op}: index {index} out of range {len}")]
    Index { op: &'static str, index: usize, len: usize },
    #[error("non-finite gradient in parameter {0}")]
    NanGradient(String),
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error("unknown parameter {0}")]
    UnknownParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NeuralError> = std::result::Result<T, E>;

/// Element type: `f32` for training, `f64` for gradient checks.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    const DTYPE: &'static str;
    const BYTES: usize;

    /// `c = alpha * a @ b + beta * c` with explicit strides.
    ///
    /// # Safety
    /// Strides and dimensions must describe valid regions of the slices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;

    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("representable constant")
    }
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
    const BYTES: usize = 4;

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
    const BYTES: usize = 8;

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}
