//! Householder QR with column pivoting, generic over `f64` and double-double.
//!
//! Only what the moment solver needs: a minimum-norm solve of an
//! underdetermined (or square) system and a triangular condition estimate.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use twofloat::TwoFloat;

use crate::error::{Error, Result};

pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn div(self, rhs: Self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    /// Unit roundoff, used for the numerical rank cut.
    fn epsilon() -> f64;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn div(self, rhs: Self) -> Self {
        self / rhs
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn epsilon() -> f64 {
        f64::EPSILON
    }
}

impl Scalar for TwoFloat {
    fn from_f64(v: f64) -> Self {
        TwoFloat::from(v)
    }
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    fn div(self, rhs: Self) -> Self {
        dd_div(self, rhs)
    }
    fn sqrt(self) -> Self {
        TwoFloat::sqrt(self)
    }
    fn abs(self) -> Self {
        TwoFloat::abs(&self)
    }
    fn epsilon() -> f64 {
        // roughly 2^-104
        4.93e-32
    }
}

/// Double-double quotient by long division. The crate's own `TwoFloat / TwoFloat`
/// returns a zero low word, which would cap the solver at `f64` accuracy.
pub fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| (0..self.cols).fold(T::zero(), |acc, j| acc + self.get(i, j) * x[j]))
            .collect()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| f(*v)).collect() }
    }
}

/// `A P = Q R` for a tall `A` (rows >= cols).
#[derive(Clone, Debug)]
pub struct PivotedQr<T> {
    /// Householder vectors below the diagonal, `R` on and above it.
    qr: Mat<T>,
    /// Householder scalars `tau_k`.
    tau: Vec<T>,
    /// `perm[k]` is the original column at position `k`.
    pub perm: Vec<usize>,
}

impl<T: Scalar> PivotedQr<T> {
    pub fn new(a: &Mat<T>) -> Result<Self> {
        let (m, n) = (a.rows, a.cols);
        if m < n {
            return Err(Error::InvalidInput(format!("QR needs rows >= cols, got {m}x{n}")));
        }
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut tau = Vec::with_capacity(n);
        let col_norm2 = |qr: &Mat<T>, j: usize, from: usize| (from..m).fold(T::zero(), |s, i| s + qr.get(i, j) * qr.get(i, j));
        for k in 0..n {
            // pivot: largest remaining column norm (recomputed, n is small)
            let mut best = k;
            let mut best_v = col_norm2(&qr, k, k);
            for j in k + 1..n {
                let v = col_norm2(&qr, j, k);
                if v > best_v {
                    best = j;
                    best_v = v;
                }
            }
            if best != k {
                for i in 0..m {
                    let t = qr.get(i, k);
                    qr.set(i, k, qr.get(i, best));
                    qr.set(i, best, t);
                }
                perm.swap(k, best);
            }
            let norm = best_v.sqrt();
            if norm.to_f64() == 0.0 {
                tau.push(T::zero());
                continue;
            }
            let x0 = qr.get(k, k);
            let alpha = if x0.to_f64() >= 0.0 { -norm } else { norm };
            // v = x - alpha e1, scaled so v[0] = 1
            let v0 = x0 - alpha;
            for i in k + 1..m {
                qr.set(i, k, qr.get(i, k).div(v0));
            }
            let t = (alpha - x0).div(alpha);
            tau.push(t);
            qr.set(k, k, alpha);
            for j in k + 1..n {
                let mut s = qr.get(k, j);
                for i in k + 1..m {
                    s = s + qr.get(i, k) * qr.get(i, j);
                }
                let s = s * t;
                qr.set(k, j, qr.get(k, j) - s);
                for i in k + 1..m {
                    qr.set(i, j, qr.get(i, j) - s * qr.get(i, k));
                }
            }
        }
        Ok(PivotedQr { qr, tau, perm })
    }

    pub fn r_diag(&self) -> Vec<T> {
        (0..self.qr.cols).map(|k| self.qr.get(k, k)).collect()
    }

    /// `|R_11| / |R_nn|`; infinite when the last pivot vanishes.
    pub fn condition_estimate(&self) -> f64 {
        let d = self.r_diag();
        let first = d[0].abs().to_f64();
        let last = d[d.len() - 1].abs().to_f64();
        if last == 0.0 {
            f64::INFINITY
        } else {
            first / last
        }
    }

    pub fn rank(&self) -> usize {
        let d = self.r_diag();
        let first = d[0].abs().to_f64();
        let cut = first * T::epsilon() * (self.qr.rows.max(self.qr.cols) as f64);
        d.iter().take_while(|v| v.abs().to_f64() > cut).count()
    }

    /// Apply `Q` to `y` (length `rows`).
    fn apply_q(&self, y: &mut [T]) {
        let m = self.qr.rows;
        for k in (0..self.qr.cols).rev() {
            let t = self.tau[k];
            let mut s = y[k];
            for i in k + 1..m {
                s = s + self.qr.get(i, k) * y[i];
            }
            let s = s * t;
            y[k] = y[k] - s;
            for i in k + 1..m {
                y[i] = y[i] - s * self.qr.get(i, k);
            }
        }
    }
}

/// Minimum-norm solution of `G λ = c` for `G` with `rows <= cols`.
///
/// Factorizes `Gᵀ P = Q R`; then `λ = Q_1 R^{-T} Pᵀ c`.
#[derive(Clone, Debug)]
pub struct MinNormSolver<T> {
    qr: PivotedQr<T>,
    rows: usize,
    cols: usize,
}

impl<T: Scalar> MinNormSolver<T> {
    pub fn new(g: &Mat<T>) -> Result<Self> {
        if g.rows > g.cols {
            return Err(Error::InvalidInput(format!(
                "{} moments but only {} basis elements",
                g.rows, g.cols
            )));
        }
        let qr = PivotedQr::new(&g.transpose())?;
        let r = qr.rank();
        if r < g.rows {
            return Err(Error::Numerical(format!("numerical rank {r} below target count {}", g.rows)));
        }
        Ok(MinNormSolver { qr, rows: g.rows, cols: g.cols })
    }

    pub fn condition_estimate(&self) -> f64 {
        self.qr.condition_estimate()
    }

    pub fn solve(&self, c: &[T]) -> Result<Vec<T>> {
        if c.len() != self.rows {
            return Err(Error::InvalidInput(format!("{} targets for {} rows", c.len(), self.rows)));
        }
        let m = self.rows;
        // R^T y = P^T c, forward substitution
        let mut y = vec![T::zero(); self.cols];
        for k in 0..m {
            let mut s = c[self.qr.perm[k]];
            for i in 0..k {
                s = s - self.qr.qr.get(i, k) * y[i];
            }
            y[k] = s.div(self.qr.qr.get(k, k));
        }
        self.qr.apply_q(&mut y);
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_solve_f64_and_dd() {
        let a: Mat<f64> = Mat::from_fn(3, 3, |i, j| 1.0 / (i + j + 1) as f64);
        let x = [1.0, -2.0, 3.0];
        let b = a.mul_vec(&x);
        let s = MinNormSolver::new(&a).unwrap();
        let got = s.solve(&b).unwrap();
        for (g, w) in got.iter().zip(x) {
            assert!((g - w).abs() < 1e-10);
        }
        let ad = a.map(TwoFloat::from);
        let bd: Vec<TwoFloat> = b.iter().map(|v| TwoFloat::from(*v)).collect();
        let got = MinNormSolver::new(&ad).unwrap().solve(&bd).unwrap();
        let res = ad.mul_vec(&got);
        for (r, w) in res.iter().zip(&bd) {
            assert!((*r - *w).abs().to_f64() < 1e-28, "{:?}", *r - *w);
        }
    }

    #[test]
    fn dd_division_keeps_low_word() {
        let q = dd_div(TwoFloat::from(2.0), TwoFloat::from(9.0));
        assert!((q * 9.0 - 2.0).abs().hi() < 1e-31);
    }

    #[test]
    fn underdetermined_is_minimum_norm() {
        // x + y = 2 has minimum-norm solution (1, 1)
        let g = Mat { rows: 1, cols: 2, data: vec![1.0, 1.0] };
        let s = MinNormSolver::new(&g).unwrap();
        let x = s.solve(&[2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        assert_eq!(s.solve(&[0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(s.condition_estimate(), 1.0);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let g = Mat { rows: 2, cols: 2, data: vec![1.0, 2.0, 2.0, 4.0] };
        assert!(MinNormSolver::new(&g).is_err());
    }
}
