//! Dense numerical kernel shared by the language model.
//!
//! Everything is generic over [`Real`], implemented for `f32` (standard
//! precision, used for training) and `f64` (high precision, used for gradient
//! checking and exact sanity checks).

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty input")]
    Empty,
    #[error("target {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
}

/// Floating-point element type of matrices and model parameters.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Size of one element in bytes (used by the checkpoint format).
    const WIDTH: usize;

    /// `c = alpha * a · b + beta * c` over strided operands.
    ///
    /// # Safety
    /// All strides must address memory inside the given slices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
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

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }
}

impl Real for f32 {
    const WIDTH: usize = 4;

    unsafe fn gemm_raw(
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
        unsafe { matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc) }
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl Real for f64 {
    const WIDTH: usize = 8;

    unsafe fn gemm_raw(
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
        unsafe { matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc) }
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

/// Whether a row-major operand enters a product as stored or transposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    N,
    T,
}

/// `c (m×n) = op(a) · op(b) + beta · c` for row-major slices, where `op(a)`
/// is m×k and `op(b)` is k×n.
#[allow(clippy::too_many_arguments)]
pub fn gemm<F: Real>(
    op_a: Op,
    op_b: Op,
    m: usize,
    k: usize,
    n: usize,
    a: &[F],
    b: &[F],
    beta: F,
    c: &mut [F],
) {
    assert_eq!(a.len(), m * k, "gemm: lhs has wrong length");
    assert_eq!(b.len(), k * n, "gemm: rhs has wrong length");
    assert_eq!(c.len(), m * n, "gemm: output has wrong length");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = match op_a {
        Op::N => (k as isize, 1),
        Op::T => (1, m as isize),
    };
    let (rsb, csb) = match op_b {
        Op::N => (n as isize, 1),
        Op::T => (1, k as isize),
    };
    // SAFETY: lengths were checked above, so every (row, col) pair addressed
    // through these strides lies within its slice.
    unsafe {
        F::gemm_raw(
            m,
            k,
            n,
            F::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = F::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Standard matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Matrix<F>) -> Result<Matrix<F>, NumericsError> {
        matmul(self, rhs)
    }
}

pub fn matmul<F: Real>(a: &Matrix<F>, b: &Matrix<F>) -> Result<Matrix<F>, NumericsError> {
    if a.cols != b.rows {
        return Err(NumericsError::Dimension(format!(
            "{}x{} · {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    gemm(Op::N, Op::N, a.rows, a.cols, b.cols, &a.data, &b.data, F::zero(), &mut out.data);
    Ok(out)
}

pub fn sigmoid<F: Real>(x: F) -> F {
    // Branching keeps exp() from overflowing for large |x|.
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

fn max_of<F: Real>(xs: &[F]) -> F {
    xs.iter().copied().fold(F::neg_infinity(), F::max)
}

/// `log Σ exp(x)`, shifted by the maximum.
pub fn log_sum_exp<F: Real>(logits: &[F]) -> Result<F, NumericsError> {
    if logits.is_empty() {
        return Err(NumericsError::Empty);
    }
    let m = max_of(logits);
    let s = logits.iter().fold(F::zero(), |acc, &z| acc + (z - m).exp());
    Ok(m + s.ln())
}

pub fn softmax<F: Real>(logits: &[F]) -> Result<Vec<F>, NumericsError> {
    if logits.is_empty() {
        return Err(NumericsError::Empty);
    }
    let m = max_of(logits);
    let mut out: Vec<F> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s = out.iter().fold(F::zero(), |acc, &v| acc + v);
    for v in &mut out {
        *v = *v / s;
    }
    Ok(out)
}

pub fn log_softmax<F: Real>(logits: &[F]) -> Result<Vec<F>, NumericsError> {
    let lse = log_sum_exp(logits)?;
    Ok(logits.iter().map(|&z| z - lse).collect())
}

/// `-log softmax(logits)[target]`, evaluated in log space.
pub fn cross_entropy<F: Real>(logits: &[F], target: usize) -> Result<F, NumericsError> {
    if target >= logits.len() {
        return Err(NumericsError::TargetOutOfRange { target, classes: logits.len() });
    }
    Ok(log_sum_exp(logits)? - logits[target])
}

/// Outcome of a central-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter index where `max_rel_error` was attained.
    pub worst_index: usize,
    pub checked: usize,
}

/// Compares `analytic` against central differences of `f` around `params`.
///
/// Per component the error is `|a - n| / max(1e-8, |a| + |n|)`; the maximum
/// over all components is reported.
pub fn finite_diff_check(
    mut f: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len(), "gradient length must match parameters");
    let mut x = params.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst_index: 0, checked: params.len() };
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = f(&x);
        x[i] = orig - eps;
        let minus = f(&x);
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        let err = (a - numeric).abs() / f64::max(1e-8, a.abs() + numeric.abs());
        if err > report.max_rel_error || err.is_nan() {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    report
}

/// Seeded generator: ChaCha with 8 rounds, seeded through `seed_from_u64`.
///
/// The ChaCha stream is fully specified, so equal seeds give equal draws on
/// every platform. Float draws are built here from raw 64-bit outputs rather
/// than through `rand` distributions, which keeps them stable across crate
/// versions as well.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` (rejection sampling, no modulo bias).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }
}
