//! A minimal dense rank-3 tensor, laid out batch-major.

/// `(batch, channels, length)` tensor of `f64`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    pub data: Vec<f64>,
    pub batch: usize,
    pub channels: usize,
    pub len: usize,
}

impl Tensor3 {
    pub fn zeros(batch: usize, channels: usize, len: usize) -> Self {
        Tensor3 {
            data: vec![0.0; batch * channels * len],
            batch,
            channels,
            len,
        }
    }

    pub fn from_vec(data: Vec<f64>, batch: usize, channels: usize, len: usize) -> Self {
        assert_eq!(data.len(), batch * channels * len, "tensor shape mismatch");
        Tensor3 {
            data,
            batch,
            channels,
            len,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.channels, self.len)
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, i: usize) -> f64 {
        self.data[(b * self.channels + c) * self.len + i]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, c: usize, i: usize) -> &mut f64 {
        &mut self.data[(b * self.channels + c) * self.len + i]
    }

    /// Channel `c` of batch item `b` as a slice.
    pub fn row(&self, b: usize, c: usize) -> &[f64] {
        let start = (b * self.channels + c) * self.len;
        &self.data[start..start + self.len]
    }

    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let start = (b * self.channels + c) * self.len;
        &mut self.data[start..start + self.len]
    }

    /// All channels of batch item `b` as one contiguous slice.
    pub fn item(&self, b: usize) -> &[f64] {
        let stride = self.channels * self.len;
        &self.data[b * stride..(b + 1) * stride]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
