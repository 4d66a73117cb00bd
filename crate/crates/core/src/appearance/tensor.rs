//! Minimal CHW tensors with the conv / upsample / activation ops the
//! appearance network needs, each with its backward.

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }
}

pub const LEAKY_SLOPE: f64 = 0.01;

/// 3x3 convolution with zero padding; `weights` are `[out][in][3][3]`.
pub fn conv3x3(input: &Tensor, weights: &[f64], bias: &[f64], out_channels: usize) -> Tensor {
    let (h, w, cin) = (input.height, input.width, input.channels);
    let mut out = Tensor::zeros(out_channels, h, w);
    for oc in 0..out_channels {
        let plane = out.plane_mut(oc);
        plane.iter_mut().for_each(|v| *v = bias[oc]);
        for ic in 0..cin {
            let src = input.plane(ic);
            for ky in 0..3 {
                for kx in 0..3 {
                    let k = weights[((oc * cin + ic) * 3 + ky) * 3 + kx];
                    if k == 0.0 {
                        continue;
                    }
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let srow = &src[sy as usize * w..(sy as usize + 1) * w];
                        let orow = &mut plane[y * w..(y + 1) * w];
                        let (x0, x1) = (if kx == 0 { 1 } else { 0 }, if kx == 2 { w.saturating_sub(1) } else { w });
                        for x in x0..x1 {
                            orow[x] += k * srow[x + kx - 1];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Backward of [`conv3x3`]: accumulates weight and bias gradients and returns
/// the gradient w.r.t. the input.
pub fn conv3x3_backward(
    input: &Tensor,
    weights: &[f64],
    grad_out: &Tensor,
    d_weights: &mut [f64],
    d_bias: &mut [f64],
    need_input_grad: bool,
) -> Tensor {
    let (h, w, cin) = (input.height, input.width, input.channels);
    let cout = grad_out.channels;
    let mut d_input = Tensor::zeros(cin, h, w);
    for oc in 0..cout {
        let g = grad_out.plane(oc);
        d_bias[oc] += g.iter().sum::<f64>();
        for ic in 0..cin {
            let src = input.plane(ic);
            for ky in 0..3 {
                for kx in 0..3 {
                    let widx = ((oc * cin + ic) * 3 + ky) * 3 + kx;
                    let k = weights[widx];
                    let mut acc = 0.0;
                    let (x0, x1) = (if kx == 0 { 1 } else { 0 }, if kx == 2 { w.saturating_sub(1) } else { w });
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let sy = sy as usize;
                        let grow = &g[y * w..(y + 1) * w];
                        let srow = &src[sy * w..(sy + 1) * w];
                        for x in x0..x1 {
                            acc += grow[x] * srow[x + kx - 1];
                        }
                        if need_input_grad && k != 0.0 {
                            let drow = &mut d_input.data[(ic * h + sy) * w..(ic * h + sy + 1) * w];
                            for x in x0..x1 {
                                drow[x + kx - 1] += k * grow[x];
                            }
                        }
                    }
                    d_weights[widx] += acc;
                }
            }
        }
    }
    d_input
}

pub fn leaky_relu(t: &Tensor) -> Tensor {
    Tensor {
        data: t.data.iter().map(|&v| if v > 0.0 { v } else { LEAKY_SLOPE * v }).collect(),
        ..*t
    }
}

/// Gradient through leaky ReLU given the pre-activation.
pub fn leaky_relu_backward(pre: &Tensor, grad: &Tensor) -> Tensor {
    Tensor {
        data: pre.data.iter().zip(&grad.data).map(|(&v, &g)| if v > 0.0 { g } else { LEAKY_SLOPE * g }).collect(),
        ..*pre
    }
}

/// Nearest-neighbor x2 upsampling.
pub fn upsample2(t: &Tensor) -> Tensor {
    let (h, w) = (t.height * 2, t.width * 2);
    let mut out = Tensor::zeros(t.channels, h, w);
    for c in 0..t.channels {
        for y in 0..h {
            for x in 0..w {
                out.data[(c * h + y) * w + x] = t.at(c, y / 2, x / 2);
            }
        }
    }
    out
}

pub fn upsample2_backward(grad: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(grad.channels, grad.height / 2, grad.width / 2);
    for c in 0..grad.channels {
        for y in 0..grad.height {
            for x in 0..grad.width {
                out.data[(c * out.height + y / 2) * out.width + x / 2] += grad.at(c, y, x);
            }
        }
    }
    out
}

/// Window `[y0, y0+h) x [x0, x0+w)` of every channel.
pub fn crop(t: &Tensor, y0: usize, x0: usize, h: usize, w: usize) -> Tensor {
    let mut out = Tensor::zeros(t.channels, h, w);
    for c in 0..t.channels {
        for y in 0..h {
            for x in 0..w {
                out.data[(c * h + y) * w + x] = t.at(c, y + y0, x + x0);
            }
        }
    }
    out
}

pub fn crop_backward(grad: &Tensor, y0: usize, x0: usize, full_h: usize, full_w: usize) -> Tensor {
    let mut out = Tensor::zeros(grad.channels, full_h, full_w);
    for c in 0..grad.channels {
        for y in 0..grad.height {
            for x in 0..grad.width {
                out.data[(c * full_h + y + y0) * full_w + x + x0] = grad.at(c, y, x);
            }
        }
    }
    out
}
