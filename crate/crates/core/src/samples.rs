use crate::error::{Error, Result};

/// A set of points in `dim`-dimensional space, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    data: Vec<f64>,
    dim: usize,
}

impl Samples {
    /// Build from a row-major buffer. `data.len()` must be a multiple of `dim`.
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if data.is_empty() {
            return Err(Error::EmptySamples);
        }
        if data.len() % dim != 0 {
            return Err(Error::RaggedDimension {
                index: data.len() / dim,
                expected: dim,
                found: data.len() % dim,
            });
        }
        Ok(Samples { data, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptySamples)?;
        let dim = first.as_ref().len();
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (index, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::RaggedDimension {
                    index,
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Samples { data, dim })
    }

    /// One-dimensional samples.
    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::from_flat(values, 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Componentwise minimum and maximum.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for row in self.rows() {
            for (j, &v) in row.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        (lo, hi)
    }

    /// Shift every point by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: offset.len(),
            });
        }
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, v)| v + offset[k % self.dim])
            .collect();
        Ok(Samples {
            data,
            dim: self.dim,
        })
    }
}
