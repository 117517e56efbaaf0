use super::layers::{backward_seq, forward_seq, BatchNorm, Conv2d, Layer, Linear, Mode};
use super::tensor::{Scalar, Tensor};
use super::NnError;
use crate::media::TensorArchive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Declarative description of one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        dilation: usize,
        bias: bool,
    },
    BatchNorm,
    Relu,
    Sigmoid,
    GlobalAvgPool,
    Linear {
        out: usize,
    },
    Residual {
        body: Vec<LayerSpec>,
        post_relu: bool,
    },
    Branches {
        splits: Vec<usize>,
        branches: Vec<Vec<LayerSpec>>,
    },
}

impl LayerSpec {
    /// `Conv(d, f, s, p)` with dilation 1 and a bias.
    pub fn conv(filters: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        LayerSpec::Conv {
            filters,
            kernel,
            stride,
            padding,
            dilation: 1,
            bias: true,
        }
    }

    pub fn dilated(filters: usize, dilation: usize) -> Self {
        LayerSpec::Conv {
            filters,
            kernel: 3,
            stride: 1,
            padding: dilation,
            dilation,
            bias: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Flow {
    Map(usize),
    Flat(usize),
}

fn walk(layers: &[LayerSpec], mut flow: Flow, params: &mut usize) -> Result<Flow, NnError> {
    for l in layers {
        flow = match (l, flow) {
            (
                LayerSpec::Conv {
                    filters,
                    kernel,
                    stride,
                    dilation,
                    bias,
                    ..
                },
                Flow::Map(c),
            ) => {
                if *filters == 0 || *kernel == 0 || *stride == 0 || *dilation == 0 {
                    return Err(NnError::Config(format!("invalid conv {l:?}")));
                }
                *params += filters * c * kernel * kernel + if *bias { *filters } else { 0 };
                Flow::Map(*filters)
            }
            (LayerSpec::BatchNorm, Flow::Map(c)) => {
                *params += 2 * c;
                Flow::Map(c)
            }
            (LayerSpec::Relu | LayerSpec::Sigmoid, f) => f,
            (LayerSpec::GlobalAvgPool, Flow::Map(c)) => Flow::Flat(c),
            (LayerSpec::Linear { out }, Flow::Flat(n)) => {
                if *out == 0 {
                    return Err(NnError::Config("linear layer with 0 outputs".into()));
                }
                *params += out * n + out;
                Flow::Flat(*out)
            }
            (LayerSpec::Residual { body, .. }, Flow::Map(c)) => {
                if walk(body, Flow::Map(c), params)? != Flow::Map(c) {
                    return Err(NnError::Config(
                        "residual body must preserve channels".into(),
                    ));
                }
                Flow::Map(c)
            }
            (LayerSpec::Branches { splits, branches }, Flow::Map(c)) => {
                if splits.len() != branches.len()
                    || splits.iter().sum::<usize>() != c
                    || splits.contains(&0)
                {
                    return Err(NnError::Config(format!(
                        "branch splits {splits:?} do not match {c} channels"
                    )));
                }
                let mut total = 0;
                for (&k, b) in splits.iter().zip(branches) {
                    match walk(b, Flow::Map(k), params)? {
                        Flow::Map(o) => total += o,
                        Flow::Flat(_) => {
                            return Err(NnError::Config("branches must output maps".into()))
                        }
                    }
                }
                Flow::Map(total)
            }
            (l, f) => return Err(NnError::Config(format!("{l:?} cannot follow {f:?}"))),
        };
    }
    Ok(flow)
}

fn rf_walk(layers: &[LayerSpec], rf: &mut usize, jump: &mut usize) {
    for l in layers {
        match l {
            LayerSpec::Conv {
                kernel,
                stride,
                dilation,
                ..
            } => {
                *rf += (kernel - 1) * dilation * *jump;
                *jump *= stride;
            }
            LayerSpec::Residual { body, .. } => rf_walk(body, rf, jump),
            LayerSpec::Branches { branches, .. } => {
                let (mut best_rf, mut best_jump) = (*rf, *jump);
                for b in branches {
                    let (mut r, mut j) = (*rf, *jump);
                    rf_walk(b, &mut r, &mut j);
                    if r > best_rf {
                        best_rf = r;
                        best_jump = j;
                    }
                }
                *rf = best_rf;
                *jump = best_jump;
            }
            _ => {}
        }
    }
}

impl ModelSpec {
    /// Check shape compatibility; returns the output width (channels or features).
    pub fn validate(&self) -> Result<usize, NnError> {
        if self.input_channels == 0 {
            return Err(NnError::Config("input needs at least one channel".into()));
        }
        let mut p = 0;
        Ok(
            match walk(&self.layers, Flow::Map(self.input_channels), &mut p)? {
                Flow::Map(c) | Flow::Flat(c) => c,
            },
        )
    }

    pub fn parameter_count(&self) -> Result<usize, NnError> {
        let mut p = 0;
        walk(&self.layers, Flow::Map(self.input_channels), &mut p)?;
        Ok(p)
    }

    /// Receptive field (in input pixels) of one output position before any
    /// global pooling; residual skips do not widen it.
    pub fn receptive_field(&self) -> usize {
        let (mut rf, mut jump) = (1, 1);
        rf_walk(&self.layers, &mut rf, &mut jump);
        rf
    }
}

pub const FULL_GENERATOR: (usize, usize) = (10, 64);
pub const DESK_GENERATOR: (usize, usize) = (4, 16);

/// Quality-map generator: head conv, `depth` residual blocks, one-channel
/// tail and a sigmoid. Spatial size is preserved.
pub fn build_generator(depth: usize, width: usize) -> Result<ModelSpec, NnError> {
    if depth == 0 || width == 0 {
        return Err(NnError::Config(format!(
            "generator needs depth and width >= 1, got {depth}, {width}"
        )));
    }
    let mut layers = vec![
        LayerSpec::conv(width, 3, 1, 1),
        LayerSpec::BatchNorm,
        LayerSpec::Relu,
    ];
    for _ in 0..depth {
        layers.push(LayerSpec::Residual {
            body: vec![
                LayerSpec::conv(width, 3, 1, 1),
                LayerSpec::BatchNorm,
                LayerSpec::Relu,
                LayerSpec::conv(width, 3, 1, 1),
                LayerSpec::BatchNorm,
            ],
            post_relu: false,
        });
    }
    layers.push(LayerSpec::conv(1, 3, 1, 1));
    layers.push(LayerSpec::Sigmoid);
    Ok(ModelSpec {
        name: format!("generator-d{depth}-w{width}"),
        input_channels: 1,
        layers,
    })
}

pub const POOLING_DILATIONS: [usize; 4] = [1, 2, 4, 2];
pub const POOLING_HIDDEN: usize = 32;

/// Pooling regressor: one conv branch per input group, concatenation,
/// four dilated residual blocks, global average pooling and two FC layers.
pub fn build_pooling_net(
    source_channels: usize,
    transcoded_channels: usize,
    width: usize,
) -> Result<ModelSpec, NnError> {
    if source_channels == 0 || transcoded_channels == 0 {
        return Err(NnError::Config(
            "both map groups need at least one channel".into(),
        ));
    }
    if width < 2 || !width.is_multiple_of(2) {
        return Err(NnError::Config(format!(
            "pooling width must be even and >= 2, got {width}"
        )));
    }
    let branch = || {
        vec![
            LayerSpec::conv(width / 2, 3, 1, 1),
            LayerSpec::BatchNorm,
            LayerSpec::Relu,
        ]
    };
    let mut layers = vec![LayerSpec::Branches {
        splits: vec![source_channels, transcoded_channels],
        branches: vec![branch(), branch()],
    }];
    for d in POOLING_DILATIONS {
        layers.push(LayerSpec::Residual {
            body: vec![
                LayerSpec::dilated(width, d),
                LayerSpec::BatchNorm,
                LayerSpec::Relu,
                LayerSpec::dilated(width, d),
                LayerSpec::BatchNorm,
            ],
            post_relu: true,
        });
    }
    layers.extend([
        LayerSpec::GlobalAvgPool,
        LayerSpec::Linear {
            out: POOLING_HIDDEN,
        },
        LayerSpec::Relu,
        LayerSpec::Linear { out: 1 },
    ]);
    Ok(ModelSpec {
        name: format!("pooling-s{source_channels}-t{transcoded_channels}-w{width}"),
        input_channels: source_channels + transcoded_channels,
        layers,
    })
}

fn he_uniform<F: Scalar>(rng: &mut ChaCha8Rng, fan_in: usize, n: usize) -> Vec<F> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n)
        .map(|_| F::of(rng.random_range(-bound..bound)))
        .collect()
}

fn instantiate<F: Scalar>(
    specs: &[LayerSpec],
    mut c: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Layer<F>> {
    let mut out = Vec::with_capacity(specs.len());
    for s in specs {
        let layer = match s {
            LayerSpec::Conv {
                filters,
                kernel,
                stride,
                padding,
                dilation,
                bias,
            } => {
                let w = he_uniform(rng, c * kernel * kernel, filters * c * kernel * kernel);
                let b = bias.then(|| vec![F::zero(); *filters]);
                let conv = Conv2d::new(c, *filters, *kernel, *stride, *padding, *dilation, w, b)
                    .expect("validated");
                c = *filters;
                Layer::Conv(conv)
            }
            LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm::new(c)),
            LayerSpec::Relu => Layer::Relu { mask: None },
            LayerSpec::Sigmoid => Layer::Sigmoid { out: None },
            LayerSpec::GlobalAvgPool => Layer::GlobalAvgPool { shape: None },
            LayerSpec::Linear { out: o } => {
                let w = he_uniform(rng, c, o * c);
                let lin = Linear::new(c, *o, w, vec![F::zero(); *o]).expect("validated");
                c = *o;
                Layer::Linear(lin)
            }
            LayerSpec::Residual { body, post_relu } => Layer::Residual {
                body: instantiate(body, c, rng),
                post_relu: *post_relu,
                mask: None,
            },
            LayerSpec::Branches { splits, branches } => {
                let built: Vec<Vec<Layer<F>>> = splits
                    .iter()
                    .zip(branches)
                    .map(|(&k, b)| instantiate(b, k, rng))
                    .collect();
                c = branches
                    .iter()
                    .zip(splits)
                    .map(|(b, &k)| {
                        b.iter().fold(k, |acc, l| match l {
                            LayerSpec::Conv { filters, .. } => *filters,
                            _ => acc,
                        })
                    })
                    .sum();
                Layer::Branches {
                    splits: splits.clone(),
                    branches: built,
                    out_channels: None,
                }
            }
        };
        out.push(layer);
    }
    out
}

pub const ARCH_ENTRY: &str = "__arch__";

/// A built model: spec plus live layers.
#[derive(Clone, Debug)]
pub struct Network<F = f32> {
    pub spec: ModelSpec,
    pub layers: Vec<Layer<F>>,
}

impl<F: Scalar> Network<F> {
    /// He-uniform conv and FC weights, zero biases, unit BN scale; seeded.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self, NnError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = instantiate(&spec.layers, spec.input_channels, &mut rng);
        Ok(Self { spec, layers })
    }

    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>, NnError> {
        let (_, c, _, _) = x.dims4()?;
        if c != self.spec.input_channels {
            return Err(NnError::Shape(format!(
                "{} expects {} channels, got {c}",
                self.spec.name, self.spec.input_channels
            )));
        }
        forward_seq(&mut self.layers, x, mode)
    }

    /// Backpropagate `g` (gradient w.r.t. the last output), accumulating
    /// parameter gradients; returns the input gradient.
    pub fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        backward_seq(&mut self.layers, g)
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(String, &mut Tensor<F>)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_params(&format!("layers.{i}"), f);
        }
    }

    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(String, &mut Vec<F>)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_buffers(&format!("layers.{i}"), f);
        }
    }

    pub fn zero_grad(&mut self) {
        self.visit_params(&mut |_, t| t.zero_grad());
    }

    pub fn parameter_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, t| n += t.len());
        n
    }

    pub fn to_archive(&mut self) -> TensorArchive {
        let mut a = TensorArchive::new();
        let arch = serde_json::to_vec(&self.spec).expect("spec serializes");
        a.insert(
            ARCH_ENTRY,
            vec![arch.len()],
            arch.iter().map(|&b| b as f32).collect(),
        )
        .expect("fresh archive");
        self.visit_params(&mut |name, t| {
            a.insert(
                name,
                t.shape().to_vec(),
                t.data().iter().map(|v| v.f64() as f32).collect(),
            )
            .expect("unique names");
        });
        self.visit_buffers(&mut |name, v| {
            a.insert(
                name,
                vec![v.len()],
                v.iter().map(|x| x.f64() as f32).collect(),
            )
            .expect("unique names");
        });
        a
    }

    pub fn from_archive(archive: &TensorArchive) -> Result<Self, NnError> {
        let arch = archive
            .get(ARCH_ENTRY)
            .ok_or_else(|| NnError::Weights(format!("missing {ARCH_ENTRY} entry")))?;
        let bytes: Vec<u8> = arch.data.iter().map(|&v| v as u8).collect();
        let spec: ModelSpec = serde_json::from_slice(&bytes)
            .map_err(|e| NnError::Weights(format!("bad architecture entry: {e}")))?;
        let mut net = Network::new(spec, 0)?;
        net.load_weights(archive)?;
        Ok(net)
    }

    /// Copy every parameter and buffer from `archive`; names and shapes must match.
    pub fn load_weights(&mut self, archive: &TensorArchive) -> Result<(), NnError> {
        let mut err = None;
        self.visit_params(&mut |name, t| match archive.get(&name) {
            Some(e) if e.shape == t.shape() => {
                for (d, &s) in t.data_mut().iter_mut().zip(&e.data) {
                    *d = F::of(s as f64);
                }
            }
            Some(e) => {
                err = Some(NnError::Weights(format!(
                    "{name}: shape {:?} vs {:?}",
                    e.shape,
                    t.shape()
                )))
            }
            None => err = Some(NnError::Weights(format!("missing weights for {name}"))),
        });
        self.visit_buffers(&mut |name, v| match archive.get(&name) {
            Some(e) if e.data.len() == v.len() => {
                for (d, &s) in v.iter_mut().zip(&e.data) {
                    *d = F::of(s as f64);
                }
            }
            _ => {
                err = Some(NnError::Weights(format!(
                    "missing or mis-sized buffer {name}"
                )))
            }
        });
        err.map_or(Ok(()), Err)
    }

    /// Same model in another precision.
    pub fn cast<G: Scalar>(&mut self) -> Network<G> {
        let mut other = Network::<G>::new(self.spec.clone(), 0).expect("spec already validated");
        let mut values = Vec::new();
        self.visit_params(&mut |_, t| {
            values.push(t.data().iter().map(|v| v.f64()).collect::<Vec<_>>())
        });
        let mut it = values.into_iter();
        other.visit_params(&mut |_, t| {
            for (d, s) in t.data_mut().iter_mut().zip(it.next().expect("same layout")) {
                *d = G::of(s);
            }
        });
        let mut bufs = Vec::new();
        self.visit_buffers(&mut |_, v| bufs.push(v.iter().map(|x| x.f64()).collect::<Vec<_>>()));
        let mut it = bufs.into_iter();
        other.visit_buffers(&mut |_, v| {
            for (d, s) in v.iter_mut().zip(it.next().expect("same layout")) {
                *d = G::of(s);
            }
        });
        other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_generator_parameter_count() {
        let spec = build_generator(FULL_GENERATOR.0, FULL_GENERATOR.1).unwrap();
        // head conv + BN, 10 x (2 convs + 2 BNs), tail conv; conv biases included
        let head = 64 * 9 + 64 + 2 * 64;
        let block = 2 * (64 * 64 * 9 + 64) + 2 * 2 * 64;
        let tail = 64 * 9 + 1;
        assert_eq!(head + 10 * block + tail, 742_465);
        assert_eq!(spec.parameter_count().unwrap(), 742_465);
        let mut net = Network::<f32>::new(build_generator(2, 4).unwrap(), 0).unwrap();
        assert_eq!(net.parameter_count(), net.spec.parameter_count().unwrap());
    }

    #[test]
    fn tiny_generator_shape_contract() {
        let mut net = Network::<f32>::new(build_generator(1, 1).unwrap(), 3).unwrap();
        let x = Tensor::new(vec![1, 1, 8, 8], (0..64).map(|v| v as f32 / 64.0).collect()).unwrap();
        let y = net.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[1, 1, 8, 8]);
        assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(build_generator(0, 4).is_err() && build_generator(2, 0).is_err());
    }

    #[test]
    fn zeroed_residual_branches_are_skipped() {
        let mut net = Network::<f64>::new(build_generator(3, 4).unwrap(), 5).unwrap();
        let x = Tensor::new(
            vec![1, 1, 6, 6],
            (0..36).map(|v| (v as f64 * 0.37).sin()).collect(),
        )
        .unwrap();
        for l in net.layers.iter_mut() {
            if let Layer::Residual { body, .. } = l {
                if let Layer::BatchNorm(bn) = body.last_mut().unwrap() {
                    bn.gamma.data_mut().iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
        let full = net.forward(&x, Mode::Eval).unwrap();
        let n = net.layers.len();
        let mut short: Vec<Layer<f64>> = net.layers[..3].to_vec();
        short.extend(net.layers[n - 2..].iter().cloned());
        let direct = forward_seq(&mut short, &x, Mode::Eval).unwrap();
        assert_eq!(full, direct);
    }

    #[test]
    fn pooling_net_contract() {
        let spec = build_pooling_net(2, 2, 16).unwrap();
        assert_eq!(spec.receptive_field(), 3 + 4 * (1 + 2 + 4 + 2));
        assert_eq!(spec.receptive_field(), 39);
        let mut net = Network::<f32>::new(spec, 1).unwrap();
        let before = net.parameter_count();
        for side in [32, 64] {
            let x = Tensor::filled(vec![2, 4, side, side], 0.3);
            let y = net.forward(&x, Mode::Eval).unwrap();
            assert_eq!(y.shape(), &[2, 1]);
        }
        assert_eq!(net.parameter_count(), before);
        assert!(build_pooling_net(1, 1, 15).is_err() && build_pooling_net(0, 1, 16).is_err());
    }

    #[test]
    fn bad_specs_are_rejected() {
        let spec = ModelSpec {
            name: "x".into(),
            input_channels: 1,
            layers: vec![LayerSpec::Linear { out: 2 }],
        };
        assert!(spec.validate().is_err());
        let spec = ModelSpec {
            name: "x".into(),
            input_channels: 2,
            layers: vec![LayerSpec::Residual {
                body: vec![LayerSpec::conv(3, 3, 1, 1)],
                post_relu: false,
            }],
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn archive_round_trip() {
        let mut net = Network::<f32>::new(build_pooling_net(1, 2, 4).unwrap(), 9).unwrap();
        let x = Tensor::filled(vec![3, 3, 12, 12], 0.5);
        net.forward(
            &Tensor::new(
                vec![3, 3, 12, 12],
                (0..1296).map(|v| (v % 17) as f32 / 17.0).collect(),
            )
            .unwrap(),
            Mode::Train,
        )
        .unwrap();
        let archive = net.to_archive();
        let bytes = archive.to_bytes();
        let mut back =
            Network::<f32>::from_archive(&TensorArchive::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back.spec, net.spec);
        assert_eq!(
            back.forward(&x, Mode::Eval).unwrap(),
            net.forward(&x, Mode::Eval).unwrap()
        );
        let mut other = Network::<f32>::new(build_pooling_net(1, 2, 6).unwrap(), 0).unwrap();
        assert!(other.load_weights(&archive).is_err());
        assert!(Network::<f32>::from_archive(&TensorArchive::new()).is_err());
    }
}
