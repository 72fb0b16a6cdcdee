//! Dense feature-map container and convolution weight storage.
//!
//! Layout is row-major with channels innermost: element `(y, x, c)` lives at
//! `(y * width + x) * channels + c`. Convolution weights are stored HWIO,
//! `(ky, kx, ci, co)`, so the output-channel loop of a pointwise mix walks
//! contiguous memory.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        check_dims(height, width, channels)?;
        Ok(Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        })
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(height, width, channels)?;
        if data.len() != height * width * channels {
            return Err(Error::contract(format!(
                "tensor data length {} != {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds a tensor by evaluating `f(y, x, c)` at every element.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        check_dims(height, width, channels)?;
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f32) {
        let i = self.index(y, x, c);
        self.data[i] = value;
    }

    /// All channels of one pixel.
    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Copies one channel out as a row-major `height * width` plane.
    pub fn channel_plane(&self, c: usize) -> Vec<f32> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Option<f32> {
        if self.shape() != other.shape() {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f32::max),
        )
    }
}

fn check_dims(height: usize, width: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 || channels == 0 {
        return Err(Error::contract(format!(
            "tensor dimensions must be positive, got {height}x{width}x{channels}"
        )));
    }
    Ok(())
}

/// Filter bank for a dense, depthwise or pointwise convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    kernel_h: usize,
    kernel_w: usize,
    in_channels: usize,
    out_channels: usize,
    depthwise: bool,
    values: Vec<f32>,
    bias: Vec<f32>,
}

impl ConvWeights {
    /// Dense kernel, `values` in `(ky, kx, ci, co)` order.
    pub fn dense(
        kernel_h: usize,
        kernel_w: usize,
        in_channels: usize,
        out_channels: usize,
        values: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        let w = Self {
            kernel_h,
            kernel_w,
            in_channels,
            out_channels,
            depthwise: false,
            values,
            bias,
        };
        w.validate()?;
        Ok(w)
    }

    /// Per-channel kernel, `values` in `(ky, kx, c)` order.
    pub fn depthwise(
        kernel_h: usize,
        kernel_w: usize,
        channels: usize,
        values: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        let w = Self {
            kernel_h,
            kernel_w,
            in_channels: channels,
            out_channels: channels,
            depthwise: true,
            values,
            bias,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn dense_zeros(kh: usize, kw: usize, cin: usize, cout: usize) -> Result<Self> {
        Self::dense(kh, kw, cin, cout, vec![0.0; kh * kw * cin * cout], vec![0.0; cout])
    }

    pub fn depthwise_zeros(kh: usize, kw: usize, channels: usize) -> Result<Self> {
        Self::depthwise(kh, kw, channels, vec![0.0; kh * kw * channels], vec![0.0; channels])
    }

    /// Number of kernel values implied by the geometry.
    pub fn expected_len(&self) -> usize {
        let spatial = self.kernel_h * self.kernel_w;
        if self.depthwise {
            spatial * self.in_channels
        } else {
            spatial * self.in_channels * self.out_channels
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kernel_h == 0 || self.kernel_w == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::contract(format!(
                "conv weights need positive geometry, got {}x{}x{}x{}",
                self.kernel_h, self.kernel_w, self.in_channels, self.out_channels
            )));
        }
        if self.values.len() != self.expected_len() {
            return Err(Error::contract(format!(
                "conv weights have {} values, geometry needs {}",
                self.values.len(),
                self.expected_len()
            )));
        }
        if self.bias.len() != self.out_channels {
            return Err(Error::contract(format!(
                "bias length {} != out_channels {}",
                self.bias.len(),
                self.out_channels
            )));
        }
        Ok(())
    }

    pub fn kernel_h(&self) -> usize {
        self.kernel_h
    }

    pub fn kernel_w(&self) -> usize {
        self.kernel_w
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn is_depthwise(&self) -> bool {
        self.depthwise
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn param_count(&self) -> usize {
        self.values.len() + self.bias.len()
    }

    /// Dense kernel value at `(ky, kx, ci, co)`; for depthwise weights this is
    /// the equivalent diagonal dense kernel.
    pub fn dense_value(&self, ky: usize, kx: usize, ci: usize, co: usize) -> f32 {
        if self.depthwise {
            if ci == co {
                self.values[(ky * self.kernel_w + kx) * self.in_channels + ci]
            } else {
                0.0
            }
        } else {
            self.values[((ky * self.kernel_w + kx) * self.in_channels + ci) * self.out_channels + co]
        }
    }

    /// Kernel dims as stored: `[kh, kw, cin, cout]` or `[kh, kw, c]` for depthwise.
    pub fn dims(&self) -> Vec<usize> {
        if self.depthwise {
            vec![self.kernel_h, self.kernel_w, self.in_channels]
        } else {
            vec![self.kernel_h, self.kernel_w, self.in_channels, self.out_channels]
        }
    }
}
