use super::tensor::{Scalar, Tensor};
use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

fn missing(layer: &str) -> NnError {
    NnError::State(format!("{layer}: backward called before forward"))
}

#[derive(Clone, Debug)]
struct ConvCache<F> {
    cols: Vec<F>,
    input: (usize, usize, usize, usize),
    out: (usize, usize),
}

/// 2-D cross-correlation with zero padding.
#[derive(Clone, Debug)]
pub struct Conv2d<F> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    /// `(out, in, k, k)`
    pub weight: Tensor<F>,
    pub bias: Option<Tensor<F>>,
    cache: Option<ConvCache<F>>,
}

impl<F: Scalar> Conv2d<F> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        dilation: usize,
        weight: Vec<F>,
        bias: Option<Vec<F>>,
    ) -> Result<Self, NnError> {
        if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 || dilation == 0 {
            return Err(NnError::Config("conv dimensions must be positive".into()));
        }
        if weight.len() != out_channels * in_channels * kernel * kernel {
            return Err(NnError::Shape(format!(
                "conv weight has {} values",
                weight.len()
            )));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            dilation,
            weight: Tensor::param(vec![out_channels, in_channels, kernel, kernel], weight),
            bias: bias.map(|b| Tensor::param(vec![out_channels], b)),
            cache: None,
        })
    }

    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize), NnError> {
        let span = self.dilation * (self.kernel - 1) + 1;
        if h + 2 * self.padding < span || w + 2 * self.padding < span {
            return Err(NnError::Shape(format!(
                "{h}x{w} input too small for a {span}-wide kernel"
            )));
        }
        Ok((
            (h + 2 * self.padding - span) / self.stride + 1,
            (w + 2 * self.padding - span) / self.stride + 1,
        ))
    }

    fn im2col(&self, x: &[F], h: usize, w: usize, oh: usize, ow: usize, cols: &mut [F]) {
        let (k, s, d, p) = (
            self.kernel,
            self.stride,
            self.dilation,
            self.padding as isize,
        );
        let ohw = oh * ow;
        for c in 0..self.in_channels {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut cols[((c * k + ky) * k + kx) * ohw..][..ohw];
                    for oy in 0..oh {
                        let iy = (oy * s + ky * d) as isize - p;
                        let dst = &mut row[oy * ow..(oy + 1) * ow];
                        if iy < 0 || iy >= h as isize {
                            dst.iter_mut().for_each(|v| *v = F::zero());
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, v) in dst.iter_mut().enumerate() {
                            let ix = (ox * s + kx * d) as isize - p;
                            *v = if ix < 0 || ix >= w as isize {
                                F::zero()
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[F], h: usize, w: usize, oh: usize, ow: usize, dx: &mut [F]) {
        let (k, s, d, p) = (
            self.kernel,
            self.stride,
            self.dilation,
            self.padding as isize,
        );
        let ohw = oh * ow;
        for c in 0..self.in_channels {
            let plane = &mut dx[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &cols[((c * k + ky) * k + kx) * ohw..][..ohw];
                    for oy in 0..oh {
                        let iy = (oy * s + ky * d) as isize - p;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = (ox * s + kx * d) as isize - p;
                            if ix >= 0 && ix < w as isize {
                                plane[iy as usize * w + ix as usize] += row[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.in_channels {
            return Err(NnError::Shape(format!(
                "conv expects {} channels, got {c}",
                self.in_channels
            )));
        }
        let (oh, ow) = self.output_size(h, w)?;
        let ckk = c * self.kernel * self.kernel;
        let ohw = oh * ow;
        let mut cols = vec![F::zero(); n * ckk * ohw];
        let mut out = vec![F::zero(); n * self.out_channels * ohw];
        for b in 0..n {
            let cb = &mut cols[b * ckk * ohw..(b + 1) * ckk * ohw];
            self.im2col(
                &x.data()[b * c * h * w..(b + 1) * c * h * w],
                h,
                w,
                oh,
                ow,
                cb,
            );
            let ob = &mut out[b * self.out_channels * ohw..(b + 1) * self.out_channels * ohw];
            if let Some(bias) = &self.bias {
                for (o, &bv) in bias.data().iter().enumerate() {
                    ob[o * ohw..(o + 1) * ohw].iter_mut().for_each(|v| *v = bv);
                }
            }
            let beta = if self.bias.is_some() {
                F::one()
            } else {
                F::zero()
            };
            F::gemm(
                self.out_channels,
                ckk,
                ohw,
                F::one(),
                self.weight.data(),
                ckk as isize,
                1,
                cb,
                ohw as isize,
                1,
                beta,
                ob,
                ohw as isize,
                1,
            );
        }
        self.cache = Some(ConvCache {
            cols,
            input: (n, c, h, w),
            out: (oh, ow),
        });
        Tensor::new(vec![n, self.out_channels, oh, ow], out)
    }

    pub fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let cache = self.cache.as_ref().ok_or_else(|| missing("conv"))?;
        let (n, c, h, w) = cache.input;
        let (oh, ow) = cache.out;
        if g.shape() != [n, self.out_channels, oh, ow] {
            return Err(NnError::Shape(format!(
                "conv gradient shape {:?}",
                g.shape()
            )));
        }
        let ckk = c * self.kernel * self.kernel;
        let ohw = oh * ow;
        let o = self.out_channels;
        let mut dx = vec![F::zero(); n * c * h * w];
        let mut dcols = vec![F::zero(); ckk * ohw];
        for b in 0..n {
            let gb = &g.data()[b * o * ohw..(b + 1) * o * ohw];
            let cb = &cache.cols[b * ckk * ohw..(b + 1) * ckk * ohw];
            let (wdata, wgrad) = self.weight.data_and_grad_mut();
            let wgrad = wgrad.expect("conv weight is a parameter");
            F::gemm(
                o,
                ohw,
                ckk,
                F::one(),
                gb,
                ohw as isize,
                1,
                cb,
                1,
                ohw as isize,
                F::one(),
                wgrad,
                ckk as isize,
                1,
            );
            if let Some(bias) = &mut self.bias {
                let bg = bias.grad_mut().expect("conv bias is a parameter");
                for (oc, v) in bg.iter_mut().enumerate() {
                    *v += gb[oc * ohw..(oc + 1) * ohw].iter().copied().sum::<F>();
                }
            }
            F::gemm(
                ckk,
                o,
                ohw,
                F::one(),
                wdata,
                1,
                ckk as isize,
                gb,
                ohw as isize,
                1,
                F::zero(),
                &mut dcols,
                ohw as isize,
                1,
            );
            self.col2im(
                &dcols,
                h,
                w,
                oh,
                ow,
                &mut dx[b * c * h * w..(b + 1) * c * h * w],
            );
        }
        Tensor::new(vec![n, c, h, w], dx)
    }
}

#[derive(Clone, Debug)]
struct BnCache<F> {
    xhat: Vec<F>,
    inv_std: Vec<F>,
    shape: (usize, usize, usize, usize),
    mode: Mode,
}

/// Per-channel batch normalization over `(n, h, w)`.
#[derive(Clone, Debug)]
pub struct BatchNorm<F> {
    pub channels: usize,
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
    /// Weight of the previous running value in the update.
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BnCache<F>>,
}

impl<F: Scalar> BatchNorm<F> {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Tensor::param(vec![channels], vec![F::one(); channels]),
            beta: Tensor::param(vec![channels], vec![F::zero(); channels]),
            running_mean: vec![F::zero(); channels],
            running_var: vec![F::one(); channels],
            momentum: 0.9,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>, NnError> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.channels {
            return Err(NnError::Shape(format!(
                "batch norm expects {} channels, got {c}",
                self.channels
            )));
        }
        let hw = h * w;
        let m = n * hw;
        if m == 0 {
            return Err(NnError::EmptyBatch);
        }
        let xd = x.data();
        let mut xhat = vec![F::zero(); xd.len()];
        let mut out = vec![F::zero(); xd.len()];
        let mut inv_std = vec![F::zero(); c];
        for ch in 0..c {
            let (mean, var) = match mode {
                Mode::Train => {
                    let mut s = 0.0;
                    for b in 0..n {
                        s += xd[(b * c + ch) * hw..(b * c + ch + 1) * hw]
                            .iter()
                            .map(|v| v.f64())
                            .sum::<f64>();
                    }
                    let mean = s / m as f64;
                    let mut ss = 0.0;
                    for b in 0..n {
                        ss += xd[(b * c + ch) * hw..(b * c + ch + 1) * hw]
                            .iter()
                            .map(|v| (v.f64() - mean).powi(2))
                            .sum::<f64>();
                    }
                    let var = ss / m as f64;
                    let unbiased = if m > 1 { ss / (m - 1) as f64 } else { var };
                    let mo = self.momentum;
                    self.running_mean[ch] =
                        F::of(mo * self.running_mean[ch].f64() + (1.0 - mo) * mean);
                    self.running_var[ch] =
                        F::of(mo * self.running_var[ch].f64() + (1.0 - mo) * unbiased);
                    (mean, var)
                }
                Mode::Eval => (self.running_mean[ch].f64(), self.running_var[ch].f64()),
            };
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[ch] = F::of(is);
            let (gm, bt) = (self.gamma.data()[ch], self.beta.data()[ch]);
            let (mean, is) = (F::of(mean), F::of(is));
            for b in 0..n {
                for i in (b * c + ch) * hw..(b * c + ch + 1) * hw {
                    let xh = (xd[i] - mean) * is;
                    xhat[i] = xh;
                    out[i] = gm * xh + bt;
                }
            }
        }
        self.cache = Some(BnCache {
            xhat,
            inv_std,
            shape: (n, c, h, w),
            mode,
        });
        Tensor::new(vec![n, c, h, w], out)
    }

    pub fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let cache = self.cache.as_ref().ok_or_else(|| missing("batch norm"))?;
        let (n, c, h, w) = cache.shape;
        if g.shape() != [n, c, h, w] {
            return Err(NnError::Shape(format!(
                "batch norm gradient shape {:?}",
                g.shape()
            )));
        }
        let hw = h * w;
        let m = (n * hw) as f64;
        let gd = g.data();
        let mut dx = vec![F::zero(); gd.len()];
        for ch in 0..c {
            let idx = || (0..n).flat_map(move |b| (b * c + ch) * hw..(b * c + ch + 1) * hw);
            let sum_g: f64 = idx().map(|i| gd[i].f64()).sum();
            let sum_gx: f64 = idx().map(|i| gd[i].f64() * cache.xhat[i].f64()).sum();
            self.gamma.grad_mut().expect("param")[ch] += F::of(sum_gx);
            self.beta.grad_mut().expect("param")[ch] += F::of(sum_g);
            let scale = self.gamma.data()[ch].f64() * cache.inv_std[ch].f64();
            match cache.mode {
                Mode::Train => {
                    for i in idx() {
                        let v =
                            scale * (gd[i].f64() - sum_g / m - cache.xhat[i].f64() * sum_gx / m);
                        dx[i] = F::of(v);
                    }
                }
                Mode::Eval => {
                    for i in idx() {
                        dx[i] = F::of(scale * gd[i].f64());
                    }
                }
            }
        }
        Tensor::new(vec![n, c, h, w], dx)
    }
}

/// Affine map on `(n, features)` inputs; `weight` is `(out, in)`.
#[derive(Clone, Debug)]
pub struct Linear<F> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
    cache: Option<Tensor<F>>,
}

impl<F: Scalar> Linear<F> {
    pub fn new(
        inputs: usize,
        outputs: usize,
        weight: Vec<F>,
        bias: Vec<F>,
    ) -> Result<Self, NnError> {
        if weight.len() != inputs * outputs || bias.len() != outputs {
            return Err(NnError::Shape("linear parameter sizes".into()));
        }
        Ok(Self {
            inputs,
            outputs,
            weight: Tensor::param(vec![outputs, inputs], weight),
            bias: Tensor::param(vec![outputs], bias),
            cache: None,
        })
    }

    pub fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let n = x.shape()[0];
        if x.len() != n * self.inputs {
            return Err(NnError::Shape(format!(
                "linear expects {} features, got {:?}",
                self.inputs,
                x.shape()
            )));
        }
        let mut out = Vec::with_capacity(n * self.outputs);
        for _ in 0..n {
            out.extend_from_slice(self.bias.data());
        }
        F::gemm(
            n,
            self.inputs,
            self.outputs,
            F::one(),
            x.data(),
            self.inputs as isize,
            1,
            self.weight.data(),
            1,
            self.inputs as isize,
            F::one(),
            &mut out,
            self.outputs as isize,
            1,
        );
        self.cache = Some(x.clone());
        Tensor::new(vec![n, self.outputs], out)
    }

    pub fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let x = self.cache.as_ref().ok_or_else(|| missing("linear"))?;
        let n = x.shape()[0];
        if g.len() != n * self.outputs {
            return Err(NnError::Shape(format!(
                "linear gradient shape {:?}",
                g.shape()
            )));
        }
        let (i, o) = (self.inputs, self.outputs);
        let wg = self.weight.grad_mut().expect("param");
        // dW (o x i) += g^T (o x n) * x (n x i)
        F::gemm(
            o,
            n,
            i,
            F::one(),
            g.data(),
            1,
            o as isize,
            x.data(),
            i as isize,
            1,
            F::one(),
            wg,
            i as isize,
            1,
        );
        let bg = self.bias.grad_mut().expect("param");
        for b in 0..n {
            for (k, v) in bg.iter_mut().enumerate() {
                *v += g.data()[b * o + k];
            }
        }
        let mut dx = vec![F::zero(); n * i];
        F::gemm(
            n,
            o,
            i,
            F::one(),
            g.data(),
            o as isize,
            1,
            self.weight.data(),
            i as isize,
            1,
            F::zero(),
            &mut dx,
            i as isize,
            1,
        );
        Tensor::new(x.shape().to_vec(), dx)
    }
}

/// A layer of a network; containers hold nested sequences.
#[derive(Clone, Debug)]
pub enum Layer<F> {
    Conv(Conv2d<F>),
    BatchNorm(BatchNorm<F>),
    Relu {
        mask: Option<Vec<bool>>,
    },
    Sigmoid {
        out: Option<Tensor<F>>,
    },
    /// `(n, c, h, w) -> (n, c)`
    GlobalAvgPool {
        shape: Option<Vec<usize>>,
    },
    Linear(Linear<F>),
    /// `body(x) + x`, optionally followed by ReLU.
    Residual {
        body: Vec<Layer<F>>,
        post_relu: bool,
        mask: Option<Vec<bool>>,
    },
    /// Split input channels by `splits`, run one sequence per group and
    /// concatenate the outputs along channels.
    Branches {
        splits: Vec<usize>,
        branches: Vec<Vec<Layer<F>>>,
        out_channels: Option<Vec<usize>>,
    },
}

pub fn forward_seq<F: Scalar>(
    layers: &mut [Layer<F>],
    x: &Tensor<F>,
    mode: Mode,
) -> Result<Tensor<F>, NnError> {
    let mut cur = x.clone();
    for l in layers.iter_mut() {
        cur = l.forward(&cur, mode)?;
    }
    Ok(cur)
}

pub fn backward_seq<F: Scalar>(
    layers: &mut [Layer<F>],
    g: &Tensor<F>,
) -> Result<Tensor<F>, NnError> {
    let mut cur = g.clone();
    for l in layers.iter_mut().rev() {
        cur = l.backward(&cur)?;
    }
    Ok(cur)
}

fn relu_fwd<F: Scalar>(x: &Tensor<F>) -> (Tensor<F>, Vec<bool>) {
    let mask: Vec<bool> = x.data().iter().map(|&v| v > F::zero()).collect();
    let data = x
        .data()
        .iter()
        .map(|&v| if v > F::zero() { v } else { F::zero() })
        .collect();
    (
        Tensor::new(x.shape().to_vec(), data).expect("same shape"),
        mask,
    )
}

fn relu_bwd<F: Scalar>(g: &Tensor<F>, mask: &[bool]) -> Tensor<F> {
    let data = g
        .data()
        .iter()
        .zip(mask)
        .map(|(&v, &m)| if m { v } else { F::zero() })
        .collect();
    Tensor::new(g.shape().to_vec(), data).expect("same shape")
}

impl<F: Scalar> Layer<F> {
    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>, NnError> {
        match self {
            Layer::Conv(c) => c.forward(x),
            Layer::BatchNorm(b) => b.forward(x, mode),
            Layer::Relu { mask } => {
                let (out, m) = relu_fwd(x);
                *mask = Some(m);
                Ok(out)
            }
            Layer::Sigmoid { out } => {
                let data = x
                    .data()
                    .iter()
                    .map(|&v| F::one() / (F::one() + (-v).exp()))
                    .collect();
                let t = Tensor::new(x.shape().to_vec(), data)?;
                *out = Some(t.clone());
                Ok(t)
            }
            Layer::GlobalAvgPool { shape } => {
                let (n, c, h, w) = x.dims4()?;
                let hw = h * w;
                let inv = 1.0 / hw as f64;
                let data = (0..n * c)
                    .map(|i| {
                        F::of(
                            x.data()[i * hw..(i + 1) * hw]
                                .iter()
                                .map(|v| v.f64())
                                .sum::<f64>()
                                * inv,
                        )
                    })
                    .collect();
                *shape = Some(x.shape().to_vec());
                Tensor::new(vec![n, c], data)
            }
            Layer::Linear(l) => l.forward(x),
            Layer::Residual {
                body,
                post_relu,
                mask,
            } => {
                let y = forward_seq(body, x, mode)?;
                if y.shape() != x.shape() {
                    return Err(NnError::Shape(format!(
                        "residual body maps {:?} to {:?}",
                        x.shape(),
                        y.shape()
                    )));
                }
                let data = y
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&a, &b)| a + b)
                    .collect();
                let sum = Tensor::new(x.shape().to_vec(), data)?;
                if *post_relu {
                    let (out, m) = relu_fwd(&sum);
                    *mask = Some(m);
                    Ok(out)
                } else {
                    Ok(sum)
                }
            }
            Layer::Branches {
                splits,
                branches,
                out_channels,
            } => {
                let (_, c, _, _) = x.dims4()?;
                if splits.iter().sum::<usize>() != c {
                    return Err(NnError::Shape(format!(
                        "branch splits {splits:?} do not cover {c} channels"
                    )));
                }
                let mut outs = Vec::with_capacity(branches.len());
                let mut from = 0;
                for (&k, branch) in splits.iter().zip(branches.iter_mut()) {
                    outs.push(forward_seq(branch, &x.channel_slice(from, k)?, mode)?);
                    from += k;
                }
                *out_channels = Some(outs.iter().map(|t| t.shape()[1]).collect());
                Tensor::concat_channels(&outs)
            }
        }
    }

    pub fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        match self {
            Layer::Conv(c) => c.backward(g),
            Layer::BatchNorm(b) => b.backward(g),
            Layer::Relu { mask } => Ok(relu_bwd(g, mask.as_ref().ok_or_else(|| missing("relu"))?)),
            Layer::Sigmoid { out } => {
                let y = out.as_ref().ok_or_else(|| missing("sigmoid"))?;
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gv, &yv)| gv * yv * (F::one() - yv))
                    .collect();
                Tensor::new(g.shape().to_vec(), data)
            }
            Layer::GlobalAvgPool { shape } => {
                let shape = shape.as_ref().ok_or_else(|| missing("global pool"))?;
                let hw = shape[2] * shape[3];
                let inv = F::of(1.0 / hw as f64);
                let mut data = Vec::with_capacity(shape.iter().product());
                for &gv in g.data() {
                    data.extend(std::iter::repeat_n(gv * inv, hw));
                }
                Tensor::new(shape.clone(), data)
            }
            Layer::Linear(l) => l.backward(g),
            Layer::Residual {
                body,
                post_relu,
                mask,
            } => {
                let g = if *post_relu {
                    relu_bwd(g, mask.as_ref().ok_or_else(|| missing("residual"))?)
                } else {
                    g.clone()
                };
                let gb = backward_seq(body, &g)?;
                let data = gb
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&a, &b)| a + b)
                    .collect();
                Tensor::new(g.shape().to_vec(), data)
            }
            Layer::Branches {
                branches,
                out_channels,
                ..
            } => {
                let outs = out_channels.as_ref().ok_or_else(|| missing("branches"))?;
                let mut grads = Vec::with_capacity(branches.len());
                let mut from = 0;
                for (&k, branch) in outs.iter().zip(branches.iter_mut()) {
                    grads.push(backward_seq(branch, &g.channel_slice(from, k)?)?);
                    from += k;
                }
                Tensor::concat_channels(&grads)
            }
        }
    }

    /// Visit trainable parameters with stable dotted names.
    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor<F>)) {
        match self {
            Layer::Conv(c) => {
                f(format!("{prefix}.weight"), &mut c.weight);
                if let Some(b) = &mut c.bias {
                    f(format!("{prefix}.bias"), b);
                }
            }
            Layer::BatchNorm(b) => {
                f(format!("{prefix}.gamma"), &mut b.gamma);
                f(format!("{prefix}.beta"), &mut b.beta);
            }
            Layer::Linear(l) => {
                f(format!("{prefix}.weight"), &mut l.weight);
                f(format!("{prefix}.bias"), &mut l.bias);
            }
            Layer::Residual { body, .. } => {
                for (i, l) in body.iter_mut().enumerate() {
                    l.visit_params(&format!("{prefix}.{i}"), f);
                }
            }
            Layer::Branches { branches, .. } => {
                for (b, seq) in branches.iter_mut().enumerate() {
                    for (i, l) in seq.iter_mut().enumerate() {
                        l.visit_params(&format!("{prefix}.b{b}.{i}"), f);
                    }
                }
            }
            Layer::Relu { .. } | Layer::Sigmoid { .. } | Layer::GlobalAvgPool { .. } => {}
        }
    }

    /// Visit non-trainable state (batch-norm running statistics).
    pub fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Vec<F>)) {
        match self {
            Layer::BatchNorm(b) => {
                f(format!("{prefix}.running_mean"), &mut b.running_mean);
                f(format!("{prefix}.running_var"), &mut b.running_var);
            }
            Layer::Residual { body, .. } => {
                for (i, l) in body.iter_mut().enumerate() {
                    l.visit_buffers(&format!("{prefix}.{i}"), f);
                }
            }
            Layer::Branches { branches, .. } => {
                for (b, seq) in branches.iter_mut().enumerate() {
                    for (i, l) in seq.iter_mut().enumerate() {
                        l.visit_buffers(&format!("{prefix}.b{b}.{i}"), f);
                    }
                }
            }
            _ => {}
        }
    }
}
