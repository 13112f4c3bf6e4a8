use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{NeuralError, Result, Scalar};

/// Dense row-major matrix. Vectors are `1 x n`, scalars `1 x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn full(rows: usize, cols: usize, v: T) -> Self {
        Self { rows, cols, data: vec![v; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NeuralError::Shape { op: "from_vec", left: [rows, cols], right: [data.len(), 1] });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn scalar(v: T) -> Self {
        Self { rows: 1, cols: 1, data: vec![v] }
    }

    /// Gaussian entries with standard deviation `std`.
    pub fn randn(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| T::c(rng.sample::<f64, _>(StandardNormal) * std)).collect();
        Self { rows, cols, data }
    }

    pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| T::c(rng.gen_range(lo..hi))).collect();
        Self { rows, cols, data }
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn item(&self) -> T {
        self.data[0]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn mean(&self) -> T {
        let s = self.data.iter().fold(T::zero(), |a, &b| a + b);
        s / T::c(self.data.len().max(1) as f64)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| U::c(x.to_f64().unwrap())).collect() }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }
}

/// Logical `(rows, cols)` of `t` under an optional transpose.
fn dims<T>(t: &Tensor<T>, trans: bool) -> (usize, usize) {
    if trans {
        (t.cols, t.rows)
    } else {
        (t.rows, t.cols)
    }
}

fn strides<T>(t: &Tensor<T>, trans: bool) -> (isize, isize) {
    if trans {
        (1, t.cols as isize)
    } else {
        (t.cols as isize, 1)
    }
}

/// `out += op(a) @ op(b)`; `out` must already have the product shape.
pub(crate) fn gemm_acc<T: Scalar>(a: &Tensor<T>, ta: bool, b: &Tensor<T>, tb: bool, out: &mut Tensor<T>, beta: T) {
    let (m, k) = dims(a, ta);
    let (k2, n) = dims(b, tb);
    assert_eq!(k, k2, "gemm inner dimension");
    assert_eq!([m, n], out.shape(), "gemm output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for x in &mut out.data {
            *x = *x * beta;
        }
        return;
    }
    let (rsa, csa) = strides(a, ta);
    let (rsb, csb) = strides(b, tb);
    // SAFETY: dimensions and strides derived from the tensors' own shapes.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::one(),
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `op(a) @ op(b)`.
pub fn matmul<T: Scalar>(a: &Tensor<T>, ta: bool, b: &Tensor<T>, tb: bool) -> Result<Tensor<T>> {
    let (m, k) = dims(a, ta);
    let (k2, n) = dims(b, tb);
    if k != k2 {
        return Err(NeuralError::Shape { op: "matmul", left: [m, k], right: [k2, n] });
    }
    let mut out = Tensor::zeros(m, n);
    gemm_acc(a, ta, b, tb, &mut out, T::zero());
    Ok(out)
}

/// Named, ordered parameter collection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new(), index: HashMap::new() }
    }

    pub fn add(&mut self, name: &str, t: Tensor<T>) -> usize {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        let id = self.tensors.len();
        self.names.push(name.to_string());
        self.tensors.push(t);
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| NeuralError::UnknownParam(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensor(&self, id: usize) -> &Tensor<T> {
        &self.tensors[id]
    }

    pub fn tensor_mut(&mut self, id: usize) -> &mut Tensor<T> {
        &mut self.tensors[id]
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        Ok(&self.tensors[self.id(name)?])
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            index: self.index.clone(),
        }
    }

    pub fn zeros_like(&self) -> Vec<Tensor<T>> {
        self.tensors.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_with_transposes() {
        let a = Tensor::<f64>::from_vec(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::<f64>::from_vec(3, 2, vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let ab = matmul(&a, false, &b, false).unwrap();
        assert_eq!(ab.data, [58., 64., 139., 154.]);
        let at_bt = matmul(&b, true, &a, true).unwrap();
        assert_eq!(at_bt, ab.transpose());
        let aat = matmul(&a, false, &a, true).unwrap();
        assert_eq!(aat.data, [14., 32., 32., 77.]);
        assert!(matmul(&a, false, &a, false).is_err());
    }

    #[test]
    fn store_lookup_and_cast() {
        let mut s = ParamStore::<f32>::new();
        let id = s.add("w", Tensor::full(2, 2, 0.5));
        assert_eq!(s.id("w").unwrap(), id);
        assert!(s.id("nope").is_err());
        let d: ParamStore<f64> = s.cast();
        assert_eq!(d.get("w").unwrap().data, [0.5; 4]);
        assert_eq!(s.num_scalars(), 4);
    }
}
