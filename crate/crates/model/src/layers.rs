//! Convolutional building blocks.

use candle_core::{Module, Tensor};
use candle_nn::GroupNorm;

use crate::error::Result;
use crate::params::ParamStore;

/// Largest divisor of `channels` not exceeding `max_groups`.
pub fn group_count(channels: usize, max_groups: usize) -> usize {
    (1..=max_groups.min(channels)).rev().find(|g| channels % g == 0).unwrap_or(1)
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    weight: Tensor,
    bias: Option<Tensor>,
    stride: usize,
    padding: usize,
}

impl Conv2d {
    pub fn new(
        p: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        bias: bool,
    ) -> Result<Self> {
        let weight = p.he(&format!("{name}.weight"), &[cout, cin, kernel, kernel], cin * kernel * kernel)?;
        let bias = if bias {
            Some(p.constant(&format!("{name}.bias"), &[cout], 0.0)?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            stride,
            padding: kernel / 2,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(&self.weight, self.padding, self.stride, 1, 1)?;
        Ok(match &self.bias {
            Some(b) => y.broadcast_add(&b.reshape((1, b.dim(0)?, 1, 1))?)?,
            None => y,
        })
    }
}

/// 4×4 stride-2 transposed convolution; doubles the spatial size.
#[derive(Debug, Clone)]
pub struct ConvTranspose2x {
    weight: Tensor,
}

impl ConvTranspose2x {
    pub fn new(p: &mut ParamStore, name: &str, cin: usize, cout: usize) -> Result<Self> {
        // each output pixel receives 4 taps from each input channel
        let weight = p.he(&format!("{name}.weight"), &[cin, cout, 4, 4], cin * 4)?;
        Ok(Self { weight })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.conv_transpose2d(&self.weight, 1, 0, 2, 1)?)
    }
}

#[derive(Debug, Clone)]
pub struct Norm(GroupNorm);

impl Norm {
    pub fn new(p: &mut ParamStore, name: &str, channels: usize, max_groups: usize) -> Result<Self> {
        let w = p.constant(&format!("{name}.weight"), &[channels], 1.0)?;
        let b = p.constant(&format!("{name}.bias"), &[channels], 0.0)?;
        Ok(Self(GroupNorm::new(w, b, channels, group_count(channels, max_groups), 1e-5)?))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.0.forward(x)?)
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    weight: Tensor,
    bias: Option<Tensor>,
}

impl Linear {
    pub fn new(p: &mut ParamStore, name: &str, din: usize, dout: usize, bias: bool) -> Result<Self> {
        let weight = p.uniform(&format!("{name}.weight"), &[din, dout], (1.0 / din as f64).sqrt())?;
        let bias = if bias {
            Some(p.constant(&format!("{name}.bias"), &[dout], 0.0)?)
        } else {
            None
        };
        Ok(Self { weight, bias })
    }

    pub fn zeros(p: &mut ParamStore, name: &str, din: usize, dout: usize) -> Result<Self> {
        Ok(Self {
            weight: p.constant(&format!("{name}.weight"), &[din, dout], 0.0)?,
            bias: Some(p.constant(&format!("{name}.bias"), &[dout], 0.0)?),
        })
    }

    /// `x · W (+ b)` for `x` of shape `(batch, din)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.matmul(&self.weight)?;
        Ok(match &self.bias {
            Some(b) => y.broadcast_add(b)?,
            None => y,
        })
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }
}

/// Conv, norm, relu.
#[derive(Debug, Clone)]
pub struct ConvBlock {
    conv: Conv2d,
    norm: Norm,
}

impl ConvBlock {
    pub fn new(p: &mut ParamStore, name: &str, cin: usize, cout: usize, stride: usize, groups: usize) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(p, &format!("{name}.conv"), cin, cout, 3, stride, false)?,
            norm: Norm::new(p, &format!("{name}.norm"), cout, groups)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.norm.forward(&self.conv.forward(x)?)?.relu()?)
    }
}

/// Basic two-convolution residual block with a projection shortcut when the
/// shape changes.
#[derive(Debug, Clone)]
pub struct ResBlock {
    conv1: Conv2d,
    norm1: Norm,
    conv2: Conv2d,
    norm2: Norm,
    shortcut: Option<(Conv2d, Norm)>,
}

impl ResBlock {
    pub fn new(p: &mut ParamStore, name: &str, cin: usize, cout: usize, stride: usize, groups: usize) -> Result<Self> {
        let shortcut = if stride != 1 || cin != cout {
            Some((
                Conv2d::new(p, &format!("{name}.short.conv"), cin, cout, 1, stride, false)?,
                Norm::new(p, &format!("{name}.short.norm"), cout, groups)?,
            ))
        } else {
            None
        };
        Ok(Self {
            conv1: Conv2d::new(p, &format!("{name}.conv1"), cin, cout, 3, stride, false)?,
            norm1: Norm::new(p, &format!("{name}.norm1"), cout, groups)?,
            conv2: Conv2d::new(p, &format!("{name}.conv2"), cout, cout, 3, 1, false)?,
            norm2: Norm::new(p, &format!("{name}.norm2"), cout, groups)?,
            shortcut,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.norm1.forward(&self.conv1.forward(x)?)?.relu()?;
        let h = self.norm2.forward(&self.conv2.forward(&h)?)?;
        let s = match &self.shortcut {
            Some((c, n)) => n.forward(&c.forward(x)?)?,
            None => x.clone(),
        };
        Ok((h + s)?.relu()?)
    }
}

/// A stage of residual blocks; only the first block changes shape.
#[derive(Debug, Clone)]
pub struct Stage(Vec<ResBlock>);

impl Stage {
    pub fn new(
        p: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        stride: usize,
        blocks: usize,
        groups: usize,
    ) -> Result<Self> {
        let mut v = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let (i, s) = if b == 0 { (cin, stride) } else { (cout, 1) };
            v.push(ResBlock::new(p, &format!("{name}.{b}"), i, cout, s, groups)?);
        }
        Ok(Self(v))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for b in &self.0 {
            h = b.forward(&h)?;
        }
        Ok(h)
    }
}

/// Residual upsampling block: transposed-conv main path, nearest-upsample
/// plus 1×1 projection shortcut.
#[derive(Debug, Clone)]
pub struct UpBlock {
    up: ConvTranspose2x,
    norm1: Norm,
    conv: Conv2d,
    norm2: Norm,
    short: Conv2d,
    short_norm: Norm,
}

impl UpBlock {
    pub fn new(p: &mut ParamStore, name: &str, cin: usize, cout: usize, groups: usize) -> Result<Self> {
        Ok(Self {
            up: ConvTranspose2x::new(p, &format!("{name}.up"), cin, cout)?,
            norm1: Norm::new(p, &format!("{name}.norm1"), cout, groups)?,
            conv: Conv2d::new(p, &format!("{name}.conv"), cout, cout, 3, 1, false)?,
            norm2: Norm::new(p, &format!("{name}.norm2"), cout, groups)?,
            short: Conv2d::new(p, &format!("{name}.short.conv"), cin, cout, 1, 1, false)?,
            short_norm: Norm::new(p, &format!("{name}.short.norm"), cout, groups)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, _, h, w) = x.dims4()?;
        let m = self.norm1.forward(&self.up.forward(x)?)?.relu()?;
        let m = self.norm2.forward(&self.conv.forward(&m)?)?;
        let s = self.short_norm.forward(&self.short.forward(&x.upsample_nearest2d(2 * h, 2 * w)?)?)?;
        Ok((m + s)?.relu()?)
    }
}

/// Per-channel spatial mean: `(B, C, H, W) -> (B, C)`.
pub fn global_average_pool(x: &Tensor) -> Result<Tensor> {
    Ok(x.mean((2, 3))?)
}

/// `log(1 + e^x)` in a form that does not overflow.
pub fn softplus(x: &Tensor) -> Result<Tensor> {
    let pos = x.relu()?;
    let tail = (x.abs()?.neg()?.exp()? + 1.0)?.log()?;
    Ok((pos + tail)?)
}
