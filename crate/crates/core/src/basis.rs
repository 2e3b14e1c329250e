//! Shifted, normalized Legendre polynomials on `[0, 1]`.
//!
//! `L_i` is the degree-`i` polynomial of the orthonormal family for
//! `L^2([0,1])` with positive leading coefficient; explicitly
//! `L_i(x) = sqrt(2i+1) * P_i(2x - 1)` with `P_i` the classic Legendre
//! polynomial. The monomial coefficients are built by the shifted three-term
//! recurrence
//!
//! ```text
//! (i+1) Q_{i+1}(x) = (2i+1)(2x-1) Q_i(x) - i Q_{i-1}(x)
//! ```
//!
//! carried out in exact big-integer arithmetic (the `Q_i` have integer
//! coefficients) and converted to `f64` only at the end, so the stored matrix
//! is correctly rounded entry by entry. Point evaluation deliberately does
//! *not* use those coefficients: the monomial form of high-degree Legendre
//! polynomials cancels catastrophically, while the value recurrence keeps all
//! intermediates of order one.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default cap on the basis order. Single-entry Legendre moments of bodies in
/// the unit square are still well above roundoff at this order, and the
/// coefficient magnitudes (about `4^order`) stay far from `f64` overflow.
pub const DEFAULT_MAX_ORDER: usize = 20;

/// Triangular matrix of monomial coefficients of `L_0 .. L_order`.
///
/// Row `i` holds the coefficients of `L_i` from the constant term up to
/// `x^i`. Row `i` has `i + 1` entries, the leading one equal to
/// `sqrt(2i+1) * C(2i, i) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendreBasis {
    order: usize,
    coeffs: Vec<Vec<f64>>,
}

impl LegendreBasis {
    /// Builds the basis up to `order` (inclusive), capped at
    /// [`DEFAULT_MAX_ORDER`].
    pub fn new(order: usize) -> Result<Self> {
        Self::with_max_order(order, DEFAULT_MAX_ORDER)
    }

    /// Builds the basis with an explicit cap for callers that knowingly want
    /// higher orders.
    pub fn with_max_order(order: usize, max_order: usize) -> Result<Self> {
        if order > max_order {
            return Err(Error::OrderTooLarge { order, max: max_order });
        }
        let rows = shifted_rows_exact(order);
        let coeffs = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let norm = ((2 * i + 1) as f64).sqrt();
                row.iter()
                    .map(|c| norm * c.to_f64().expect("coefficient fits in f64"))
                    .collect()
            })
            .collect();
        Ok(Self { order, coeffs })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Coefficient of `x^j` in `L_i`; zero for `j > i`.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.coeffs[i][j]
        } else {
            0.0
        }
    }

    /// Triangular coefficient rows, row `i` of length `i + 1`.
    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// Evaluates `L_i(x)` by the stable value recurrence.
    ///
    /// Errors if `i` exceeds the basis order. `x` is meant to lie in `[0,1]`
    /// but the recurrence is valid (and stable) for any real `x`.
    pub fn eval(&self, i: usize, x: f64) -> Result<f64> {
        if i > self.order {
            return Err(Error::IndexOutOfRange { index: i, order: self.order });
        }
        let t = 2.0 * x - 1.0;
        let mut q0 = 1.0;
        let mut q1 = t;
        let q = match i {
            0 => 1.0,
            1 => t,
            _ => {
                for k in 1..i {
                    let kf = k as f64;
                    let q2 = ((2.0 * kf + 1.0) * t * q1 - kf * q0) / (kf + 1.0);
                    q0 = q1;
                    q1 = q2;
                }
                q1
            }
        };
        Ok(((2 * i + 1) as f64).sqrt() * q)
    }

    /// Evaluates `L_0(x), ..., L_order(x)` in one recurrence pass. Quadrature
    /// loops use this instead of calling [`Self::eval`] per index.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.order + 1];
        self.eval_all_into(x, &mut out);
        out
    }

    /// Allocation-free form of [`Self::eval_all`]; `out` must hold
    /// `order + 1` slots.
    pub fn eval_all_into(&self, x: f64, out: &mut [f64]) {
        let t = 2.0 * x - 1.0;
        let mut q0 = 1.0;
        out[0] = 1.0;
        if self.order == 0 {
            return;
        }
        let mut q1 = t;
        out[1] = 3.0_f64.sqrt() * q1;
        for k in 1..self.order {
            let kf = k as f64;
            let q2 = ((2.0 * kf + 1.0) * t * q1 - kf * q0) / (kf + 1.0);
            q0 = q1;
            q1 = q2;
            out[k + 1] = ((2 * k + 3) as f64).sqrt() * q1;
        }
    }

    /// Values and first derivatives (with respect to `x`) of all basis
    /// polynomials at `x`, by the coupled stable recurrences.
    pub fn eval_all_with_derivative(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let mut vals = vec![0.0; self.order + 1];
        let mut ders = vec![0.0; self.order + 1];
        self.eval_all_with_derivative_into(x, &mut vals, &mut ders);
        (vals, ders)
    }

    /// Allocation-free form of [`Self::eval_all_with_derivative`].
    pub fn eval_all_with_derivative_into(&self, x: f64, vals: &mut [f64], ders: &mut [f64]) {
        let t = 2.0 * x - 1.0;
        vals[0] = 1.0;
        ders[0] = 0.0;
        if self.order == 0 {
            return;
        }
        // q, dq track the unnormalized shifted polynomials and d/dt
        let mut q0 = 1.0;
        let mut q1 = t;
        let mut d0 = 0.0;
        let mut d1 = 1.0;
        vals[1] = 3.0_f64.sqrt() * q1;
        ders[1] = 3.0_f64.sqrt() * 2.0 * d1;
        for k in 1..self.order {
            let kf = k as f64;
            let q2 = ((2.0 * kf + 1.0) * t * q1 - kf * q0) / (kf + 1.0);
            let d2 = ((2.0 * kf + 1.0) * (q1 + t * d1) - kf * d0) / (kf + 1.0);
            q0 = q1;
            q1 = q2;
            d0 = d1;
            d1 = d2;
            let norm = ((2 * k + 3) as f64).sqrt();
            vals[k + 1] = norm * q1;
            // chain rule: d/dx = 2 d/dt
            ders[k + 1] = norm * 2.0 * d1;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("basis serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let basis: Self =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(format!("basis json: {e}")))?;
        if basis.coeffs.len() != basis.order + 1
            || basis.coeffs.iter().enumerate().any(|(i, row)| row.len() != i + 1)
        {
            return Err(Error::InvalidConfig(
                "basis json: coefficient rows do not match order".into(),
            ));
        }
        Ok(basis)
    }
}

/// Hilbert matrix `H[i][j] = 1/(i + j + 1)` of size `(order+1) x (order+1)`,
/// the Gram matrix of the monomials on `[0,1]`. Its inverse is `C^T C` with
/// `C` the coefficient matrix above; that identity degrades in floating
/// point roughly like the Hilbert condition number `~ e^{3.5 (order+1)}`.
pub fn hilbert_matrix(order: usize) -> Vec<Vec<f64>> {
    (0..=order)
        .map(|i| (0..=order).map(|j| 1.0 / ((i + j + 1) as f64)).collect())
        .collect()
}

/// Exact integer coefficient rows of the shifted (unnormalized) Legendre
/// polynomials `Q_i(x) = P_i(2x - 1)`.
fn shifted_rows_exact(order: usize) -> Vec<Vec<BigInt>> {
    let mut rows: Vec<Vec<BigInt>> = Vec::with_capacity(order + 1);
    rows.push(vec![BigInt::from(1)]);
    if order == 0 {
        return rows;
    }
    rows.push(vec![BigInt::from(-1), BigInt::from(2)]);
    for i in 1..order {
        let prev = &rows[i];
        let prev2 = &rows[i - 1];
        let mut next = vec![BigInt::zero(); i + 2];
        let a = BigInt::from(2 * i as i64 + 1);
        let two_a = &a * 2;
        // (2i+1) * (2x - 1) * Q_i
        for (j, c) in prev.iter().enumerate() {
            next[j + 1] += &two_a * c;
            next[j] -= &a * c;
        }
        // - i * Q_{i-1}
        for (j, c) in prev2.iter().enumerate() {
            next[j] -= c * (i as i64);
        }
        // exact division by (i+1)
        let div = BigInt::from(i as i64 + 1);
        for c in next.iter_mut() {
            debug_assert!((&*c % &div).is_zero(), "recurrence division must be exact");
            *c = &*c / &div;
        }
        rows.push(next);
    }
    rows
}
