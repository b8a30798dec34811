use crate::error::{Error, Result};
use crate::scalar::{all_finite, Real};

/// Dense row-major matrix. Rows are samples, columns are feature dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Real> Tensor2<T> {
    /// Builds a tensor, rejecting empty shapes, length mismatches and non-finite values.
    pub fn new(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::EmptyBatch);
        }
        if cols == 0 {
            return Err(Error::DimensionMismatch {
                context: "tensor columns",
                expected: 1,
                found: 0,
            });
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "tensor storage",
                expected: rows * cols,
                found: values.len(),
            });
        }
        if !all_finite(&values) {
            return Err(Error::NonFinite("tensor"));
        }
        Ok(Self { rows, cols, values })
    }

    /// Internal constructor for values produced by kernels on finite input.
    pub(crate) fn from_raw(rows: usize, cols: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::EmptyBatch);
        };
        let cols = first.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "tensor rows",
                    expected: cols,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn from_f64_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let converted: Vec<Vec<T>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&v| T::lit(v)).collect())
            .collect();
        Self::from_rows(&converted)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[i * self.cols + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.values)
    }

    pub(crate) fn ensure_finite(&self, context: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(context))
        }
    }

    /// Copies the listed rows, in order, into a new tensor.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Ok(Self::from_raw(indices.len(), self.cols, values))
    }

    /// Writes `src` row `k` into row `indices[k]` of `self`.
    pub(crate) fn scatter_rows(&mut self, indices: &[usize], src: &Self) {
        debug_assert_eq!(indices.len(), src.rows);
        for (k, &i) in indices.iter().enumerate() {
            self.row_mut(i).copy_from_slice(src.row(k));
        }
    }

    /// Horizontal concatenation `[left | right]`.
    pub fn hcat(left: &Self, right: &Self) -> Result<Self> {
        if left.rows != right.rows {
            return Err(Error::DimensionMismatch {
                context: "hcat rows",
                expected: left.rows,
                found: right.rows,
            });
        }
        let cols = left.cols + right.cols;
        let mut values = Vec::with_capacity(left.rows * cols);
        for i in 0..left.rows {
            values.extend_from_slice(left.row(i));
            values.extend_from_slice(right.row(i));
        }
        Ok(Self::from_raw(left.rows, cols, values))
    }

    /// Splits columns at `at` into `(left, right)`.
    pub fn hsplit(&self, at: usize) -> (Self, Self) {
        assert!(at > 0 && at < self.cols, "split point inside the column range");
        let mut left = Vec::with_capacity(self.rows * at);
        let mut right = Vec::with_capacity(self.rows * (self.cols - at));
        for i in 0..self.rows {
            let row = self.row(i);
            left.extend_from_slice(&row[..at]);
            right.extend_from_slice(&row[at..]);
        }
        (
            Self::from_raw(self.rows, at, left),
            Self::from_raw(self.rows, self.cols - at, right),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                context: "elementwise add",
                expected: self.cols,
                found: other.cols,
            });
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect();
        Ok(Self::from_raw(self.rows, self.cols, values))
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        Self::from_raw(self.rows, self.cols, self.values.iter().map(|&v| v * factor).collect())
    }

    /// `self · rhs` for `self: (n × k)` and `rhs: (k × m)`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                context: "matmul inner dimension",
                expected: self.cols,
                found: rhs.rows,
            });
        }
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![T::zero(); n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.values[i * k + p];
                if a == T::zero() {
                    continue;
                }
                let rhs_row = &rhs.values[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self::from_raw(n, m, out))
    }

    pub fn transpose(&self) -> Self {
        let mut out = vec![T::zero(); self.values.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        Self::from_raw(self.cols, self.rows, out)
    }

    /// Euclidean norm of each row.
    pub fn row_norms(&self) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|&v| v * v).sum::<T>().sqrt())
            .collect()
    }
}
