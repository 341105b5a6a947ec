use crate::error::{Error, Result};

/// Dense `[batch, channels, length]` array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub data: Vec<f64>,
    pub shape: [usize; 3],
}

impl Tensor {
    pub fn new(data: Vec<f64>, shape: [usize; 3]) -> Result<Self> {
        let expected = shape.iter().product::<usize>();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} values for shape {shape:?}",
                data.len()
            )));
        }
        Ok(Tensor { data, shape })
    }

    pub fn zeros(shape: [usize; 3]) -> Self {
        Tensor {
            data: vec![0.0; shape.iter().product()],
            shape,
        }
    }

    /// One spectrum per batch row, single channel.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let len = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * len);
        for r in rows {
            if r.len() != len {
                return Err(Error::ShapeMismatch(format!(
                    "row of length {} in batch of length {len}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Tensor::new(data, [rows.len(), 1, len])
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `[channels, length]` block of one batch element.
    pub fn sample(&self, b: usize) -> &[f64] {
        let stride = self.shape[1] * self.shape[2];
        &self.data[b * stride..(b + 1) * stride]
    }

    pub fn sample_mut(&mut self, b: usize) -> &mut [f64] {
        let stride = self.shape[1] * self.shape[2];
        &mut self.data[b * stride..(b + 1) * stride]
    }

    pub(crate) fn debug_assert_finite(&self) {
        debug_assert!(
            self.data.iter().all(|v| v.is_finite()),
            "non-finite activation in tensor of shape {:?}",
            self.shape
        );
    }
}
