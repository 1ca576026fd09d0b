//! Forward-mode automatic differentiation for transform programs.
//!
//! A [`DiffScalar`] carries a primal value together with a tangent vector
//! holding its partial derivatives with respect to a set of seeded inputs.
//! Tangent vectors are stored sparsely at the tail: a constant has an empty
//! tangent, and an input seeded at slot `i` has a tangent of length `i + 1`.
//! Binary operations zero-extend the shorter operand, so intermediate values
//! only pay for the input slots they actually depend on.
//!
//! The module also provides [`log_abs_det`], the log-absolute-determinant of
//! a dense square matrix via partially pivoted LU factorization carried out
//! directly in log space. Exactly singular matrices yield `-inf` rather than
//! an error, matching how a measure-zero proposal is treated downstream.

/// A dual number with a vector-valued tangent.
///
/// Construct inputs with [`DiffScalar::seeded`] (one distinct slot index per
/// independent variable) and literals with [`DiffScalar::constant`] or the
/// `From<f64>` impl. Arithmetic is available on owned values, references, and
/// mixed `f64` operands, so transform code reads like ordinary math:
///
/// ```
/// use imcmc::autodiff::DiffScalar;
///
/// let x = DiffScalar::seeded(3.0, 0);
/// let y = DiffScalar::seeded(0.5, 1);
/// let z = &x * &y + x.sqrt();
/// assert_eq!(z.primal(), 1.5 + 3.0f64.sqrt());
/// assert!((z.derivative(0) - (0.5 + 0.5 / 3.0f64.sqrt())).abs() < 1e-12);
/// assert_eq!(z.derivative(1), 3.0);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DiffScalar {
    primal: f64,
    tangent: Vec<f64>,
}

impl DiffScalar {
    /// A value with no dependence on any input slot.
    pub fn constant(value: f64) -> Self {
        DiffScalar { primal: value, tangent: Vec::new() }
    }

    /// An independent input occupying tangent slot `index`.
    pub fn seeded(value: f64, index: usize) -> Self {
        let mut tangent = vec![0.0; index + 1];
        tangent[index] = 1.0;
        DiffScalar { primal: value, tangent }
    }

    pub fn primal(&self) -> f64 {
        self.primal
    }

    /// The partial derivative with respect to input slot `index`.
    pub fn derivative(&self, index: usize) -> f64 {
        self.tangent.get(index).copied().unwrap_or(0.0)
    }

    /// The tangent as a dense row of length `width`, zero-extended.
    pub fn tangent_row(&self, width: usize) -> Vec<f64> {
        (0..width).map(|i| self.derivative(i)).collect()
    }

    /// True when the value has no dependence on any input.
    pub fn is_constant(&self) -> bool {
        self.tangent.iter().all(|&t| t == 0.0)
    }

    /// Applies a scalar function given its value and derivative at the primal.
    fn chain(&self, value: f64, slope: f64) -> Self {
        DiffScalar {
            primal: value,
            tangent: self.tangent.iter().map(|t| t * slope).collect(),
        }
    }

    pub fn sqrt(&self) -> Self {
        let root = self.primal.sqrt();
        self.chain(root, 0.5 / root)
    }

    pub fn ln(&self) -> Self {
        self.chain(self.primal.ln(), 1.0 / self.primal)
    }

    pub fn exp(&self) -> Self {
        let value = self.primal.exp();
        self.chain(value, value)
    }

    pub fn powi(&self, n: i32) -> Self {
        self.chain(self.primal.powi(n), f64::from(n) * self.primal.powi(n - 1))
    }

    pub fn powf(&self, p: f64) -> Self {
        self.chain(self.primal.powf(p), p * self.primal.powf(p - 1.0))
    }

    pub fn recip(&self) -> Self {
        self.chain(self.primal.recip(), -1.0 / (self.primal * self.primal))
    }

    pub fn abs(&self) -> Self {
        self.chain(self.primal.abs(), self.primal.signum())
    }
}

impl From<f64> for DiffScalar {
    fn from(value: f64) -> Self {
        DiffScalar::constant(value)
    }
}

/// Zips two tangents, treating indices past either end as zero.
fn zip_tangents(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..a.len().max(b.len()))
        .map(|i| {
            f(
                a.get(i).copied().unwrap_or(0.0),
                b.get(i).copied().unwrap_or(0.0),
            )
        })
        .collect()
}

fn add_impl(a: &DiffScalar, b: &DiffScalar) -> DiffScalar {
    DiffScalar {
        primal: a.primal + b.primal,
        tangent: zip_tangents(&a.tangent, &b.tangent, |da, db| da + db),
    }
}

fn sub_impl(a: &DiffScalar, b: &DiffScalar) -> DiffScalar {
    DiffScalar {
        primal: a.primal - b.primal,
        tangent: zip_tangents(&a.tangent, &b.tangent, |da, db| da - db),
    }
}

fn mul_impl(a: &DiffScalar, b: &DiffScalar) -> DiffScalar {
    let (pa, pb) = (a.primal, b.primal);
    DiffScalar {
        primal: pa * pb,
        tangent: zip_tangents(&a.tangent, &b.tangent, |da, db| da * pb + pa * db),
    }
}

fn div_impl(a: &DiffScalar, b: &DiffScalar) -> DiffScalar {
    let (pa, pb) = (a.primal, b.primal);
    DiffScalar {
        primal: pa / pb,
        tangent: zip_tangents(&a.tangent, &b.tangent, |da, db| (da * pb - pa * db) / (pb * pb)),
    }
}

/// Implements a binary operator across owned, borrowed, and `f64` operands.
macro_rules! diff_binop {
    ($trait:ident, $method:ident, $impl_fn:ident) => {
        impl std::ops::$trait for DiffScalar {
            type Output = DiffScalar;
            fn $method(self, rhs: DiffScalar) -> DiffScalar {
                $impl_fn(&self, &rhs)
            }
        }
        impl std::ops::$trait<&DiffScalar> for DiffScalar {
            type Output = DiffScalar;
            fn $method(self, rhs: &DiffScalar) -> DiffScalar {
                $impl_fn(&self, rhs)
            }
        }
        impl std::ops::$trait<DiffScalar> for &DiffScalar {
            type Output = DiffScalar;
            fn $method(self, rhs: DiffScalar) -> DiffScalar {
                $impl_fn(self, &rhs)
            }
        }
        impl std::ops::$trait<&DiffScalar> for &DiffScalar {
            type Output = DiffScalar;
            fn $method(self, rhs: &DiffScalar) -> DiffScalar {
                $impl_fn(self, rhs)
            }
        }
        impl std::ops::$trait<f64> for DiffScalar {
            type Output = DiffScalar;
            fn $method(self, rhs: f64) -> DiffScalar {
                $impl_fn(&self, &DiffScalar::constant(rhs))
            }
        }
        impl std::ops::$trait<f64> for &DiffScalar {
            type Output = DiffScalar;
            fn $method(self, rhs: f64) -> DiffScalar {
                $impl_fn(self, &DiffScalar::constant(rhs))
            }
        }
        impl std::ops::$trait<DiffScalar> for f64 {
            type Output = DiffScalar;
            fn $method(self, rhs: DiffScalar) -> DiffScalar {
                $impl_fn(&DiffScalar::constant(self), &rhs)
            }
        }
        impl std::ops::$trait<&DiffScalar> for f64 {
            type Output = DiffScalar;
            fn $method(self, rhs: &DiffScalar) -> DiffScalar {
                $impl_fn(&DiffScalar::constant(self), rhs)
            }
        }
    };
}

diff_binop!(Add, add, add_impl);
diff_binop!(Sub, sub, sub_impl);
diff_binop!(Mul, mul, mul_impl);
diff_binop!(Div, div, div_impl);

impl std::ops::Neg for DiffScalar {
    type Output = DiffScalar;
    fn neg(self) -> DiffScalar {
        -&self
    }
}

impl std::ops::Neg for &DiffScalar {
    type Output = DiffScalar;
    fn neg(self) -> DiffScalar {
        DiffScalar {
            primal: -self.primal,
            tangent: self.tangent.iter().map(|t| -t).collect(),
        }
    }
}

/// Log of the absolute determinant of a dense square matrix.
///
/// Uses partially pivoted Gaussian elimination, summing `ln |pivot|` instead
/// of multiplying pivots so that determinants far outside the representable
/// range of `f64` are still computed accurately. Returns `-inf` if any pivot
/// is exactly zero (a singular matrix) and `0.0` for the empty matrix, whose
/// determinant is the empty product. NaN entries propagate into the result.
///
/// # Panics
///
/// Panics if any row's length differs from the number of rows.
pub fn log_abs_det(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    for (i, row) in matrix.iter().enumerate() {
        assert!(
            row.len() == n,
            "log_abs_det: row {i} has length {}, expected {n}",
            row.len()
        );
    }
    let mut m: Vec<Vec<f64>> = matrix.to_vec();
    let mut log_det = 0.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| {
                m[a][col]
                    .abs()
                    .partial_cmp(&m[b][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty pivot range");
        let pivot = m[pivot_row][col];
        if pivot == 0.0 {
            return f64::NEG_INFINITY;
        }
        m.swap(col, pivot_row);
        log_det += pivot.abs().ln();
        for row in col + 1..n {
            let factor = m[row][col] / pivot;
            if factor != 0.0 {
                let (upper, lower) = m.split_at_mut(row);
                for (target, &above) in lower[0].iter_mut().zip(&upper[col]).skip(col + 1) {
                    *target -= factor * above;
                }
            }
        }
    }
    log_det
}
