use super::layers::Mode;
use super::loss::LossOutput;
use super::network::Network;
use super::tensor::{Scalar, Tensor};
use super::NnError;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Central-difference half step.
    pub step: f64,
    /// Coordinates probed per tensor; all of them when the tensor is smaller.
    pub samples_per_tensor: usize,
    /// Denominator floor as a fraction of the largest gradient anywhere in
    /// the network. Keeps tensors whose true gradient is exactly zero (a
    /// conv bias feeding a train-mode batch norm) from reporting noise/noise.
    pub scale_floor: f64,
    pub seed: u64,
}

impl GradCheckConfig {
    pub fn f32() -> Self {
        Self {
            step: 1e-2,
            samples_per_tensor: 24,
            scale_floor: 1e-3,
            seed: 0,
        }
    }

    pub fn f64() -> Self {
        Self {
            step: 1e-5,
            samples_per_tensor: 24,
            scale_floor: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradEntry {
    pub name: String,
    pub error: f64,
    pub checked: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradReport {
    pub entries: Vec<GradEntry>,
}

impl GradReport {
    pub fn max_error(&self) -> f64 {
        self.entries.iter().map(|e| e.error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&GradEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.error.total_cmp(&b.error))
    }
}

impl fmt::Display for GradReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.worst() {
            Some(w) => write!(
                f,
                "max relative error {:.3e} over {} tensors (worst: {}, {} coords)",
                w.error,
                self.entries.len(),
                w.name,
                w.checked
            ),
            None => write!(f, "no tensors checked"),
        }
    }
}

/// `max|a - n| / max(max|a|, max|n|)`, 0 when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    floored_error(analytic, numeric, 0.0)
}

fn floored_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(floor, f64::max);
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

fn pick(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<usize> {
    if len <= k {
        (0..len).collect()
    } else {
        let mut v = sample(rng, len, k).into_vec();
        v.sort_unstable();
        v
    }
}

fn perturbed<F: Scalar>(v: F, h: f64) -> (F, F, f64) {
    let up = F::of(v.f64() + h);
    let down = F::of(v.f64() - h);
    (up, down, up.f64() - down.f64())
}

/// Check the gradient a loss-like function reports for its input.
pub fn check_function<F: Scalar>(
    name: &str,
    mut f: impl FnMut(&Tensor<F>) -> Result<LossOutput<F>, NnError>,
    x: &Tensor<F>,
    config: &GradCheckConfig,
) -> Result<GradEntry, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let analytic_all = f(x)?.grad;
    let idx = pick(&mut rng, x.len(), config.samples_per_tensor);
    let mut analytic = Vec::with_capacity(idx.len());
    let mut numeric = Vec::with_capacity(idx.len());
    let mut probe = x.clone();
    for &i in &idx {
        let orig = probe.data()[i];
        let (up, down, span) = perturbed(orig, config.step);
        probe.data_mut()[i] = up;
        let lp = f(&probe)?.value;
        probe.data_mut()[i] = down;
        let lm = f(&probe)?.value;
        probe.data_mut()[i] = orig;
        analytic.push(analytic_all.data()[i].f64());
        numeric.push((lp - lm) / span);
    }
    Ok(GradEntry {
        name: name.to_string(),
        error: relative_error(&analytic, &numeric),
        checked: idx.len(),
    })
}

fn projected<F: Scalar>(out: &Tensor<F>, r: &[f64]) -> f64 {
    out.data().iter().zip(r).map(|(o, w)| o.f64() * w).sum()
}

/// Rewrite coordinate `i` of the `k`-th parameter; returns the old value.
fn nudge<F: Scalar>(net: &mut Network<F>, k: usize, i: usize, f: impl Fn(F) -> F) -> F {
    let mut j = 0;
    let mut res = F::zero();
    net.visit_params(&mut |_, t| {
        if j == k {
            let old = t.data()[i];
            let new = f(old);
            t.data_mut()[i] = new;
            res = old;
        }
        j += 1;
    });
    res
}

/// Compare backpropagated gradients of `sum(r * net(x))`, `r` a fixed random
/// projection, against central differences for the input and every
/// parameter tensor.
pub fn gradient_check<F: Scalar>(
    net: &mut Network<F>,
    input: &Tensor<F>,
    mode: Mode,
    config: &GradCheckConfig,
) -> Result<GradReport, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let out = net.forward(input, mode)?;
    let r: Vec<f64> = (0..out.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let g = Tensor::new(out.shape().to_vec(), r.iter().map(|&v| F::of(v)).collect())?;
    net.zero_grad();
    let dx = net.backward(&g)?;

    let mut grads: Vec<(String, Vec<f64>)> = Vec::new();
    net.visit_params(&mut |name, t| {
        grads.push((
            name,
            t.grad()
                .expect("parameter")
                .iter()
                .map(|v| v.f64())
                .collect(),
        ));
    });

    let mut report = GradReport::default();
    let mut x = input.clone();
    let idx = pick(&mut rng, x.len(), config.samples_per_tensor);
    let (mut a, mut n) = (Vec::new(), Vec::new());
    for &i in &idx {
        let orig = x.data()[i];
        let (up, down, span) = perturbed(orig, config.step);
        x.data_mut()[i] = up;
        let lp = projected(&net.forward(&x, mode)?, &r);
        x.data_mut()[i] = down;
        let lm = projected(&net.forward(&x, mode)?, &r);
        x.data_mut()[i] = orig;
        a.push(dx.data()[i].f64());
        n.push((lp - lm) / span);
    }
    let mut raw = vec![("input".to_string(), a, n)];

    for (k, (name, grad)) in grads.iter().enumerate() {
        let idx = pick(&mut rng, grad.len(), config.samples_per_tensor);
        let (mut a, mut n) = (Vec::new(), Vec::new());
        for &i in &idx {
            let orig = nudge(net, k, i, |v| v);
            let (up, down, span) = perturbed(orig, config.step);
            nudge(net, k, i, |_| up);
            let lp = projected(&net.forward(input, mode)?, &r);
            nudge(net, k, i, |_| down);
            let lm = projected(&net.forward(input, mode)?, &r);
            nudge(net, k, i, |_| orig);
            a.push(grad[i]);
            n.push((lp - lm) / span);
        }
        raw.push((name.clone(), a, n));
    }
    let global = raw
        .iter()
        .flat_map(|(_, a, n)| a.iter().chain(n))
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    for (name, a, n) in raw {
        let error = floored_error(&a, &n, config.scale_floor * global);
        report.entries.push(GradEntry {
            name,
            error,
            checked: a.len(),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::{LayerSpec, ModelSpec};

    #[test]
    fn relative_error_cases() {
        assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!((relative_error(&[1.0, 2.0], &[1.0, 2.2]) - 0.2 / 2.2).abs() < 1e-12);
    }

    #[test]
    fn linear_layer_is_exact() {
        let spec = ModelSpec {
            name: "fc".into(),
            input_channels: 3,
            layers: vec![LayerSpec::GlobalAvgPool, LayerSpec::Linear { out: 4 }],
        };
        let mut net = Network::<f64>::new(spec, 1).unwrap();
        let x = Tensor::new(
            vec![2, 3, 2, 2],
            (0..24).map(|v| (v as f64 * 0.7).cos()).collect(),
        )
        .unwrap();
        let report = gradient_check(&mut net, &x, Mode::Train, &GradCheckConfig::f64()).unwrap();
        assert!(report.max_error() < 1e-6, "{report}");
        assert_eq!(report.entries.len(), 3);
        let text = report.to_string();
        assert!(text.contains("worst:"), "{text}");
    }

    fn random<F: Scalar>(shape: Vec<usize>, seed: u64, lo: f64, hi: f64) -> Tensor<F> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::new(
            shape,
            (0..n).map(|_| F::of(rng.random_range(lo..hi))).collect(),
        )
        .unwrap()
    }

    fn single(input_channels: usize, layers: Vec<LayerSpec>) -> ModelSpec {
        ModelSpec {
            name: "probe".into(),
            input_channels,
            layers,
        }
    }

    fn layer_cases() -> Vec<(&'static str, ModelSpec, Vec<usize>)> {
        vec![
            (
                "conv",
                single(2, vec![LayerSpec::conv(3, 3, 1, 1)]),
                vec![2, 2, 6, 5],
            ),
            (
                "strided",
                single(2, vec![LayerSpec::conv(2, 3, 2, 0)]),
                vec![1, 2, 7, 7],
            ),
            (
                "dilated",
                single(2, vec![LayerSpec::dilated(2, 2)]),
                vec![2, 2, 6, 6],
            ),
            (
                "batchnorm",
                single(2, vec![LayerSpec::BatchNorm]),
                vec![3, 2, 3, 3],
            ),
            (
                "sigmoid",
                single(1, vec![LayerSpec::Sigmoid]),
                vec![2, 1, 3, 3],
            ),
            ("relu", single(1, vec![LayerSpec::Relu]), vec![2, 1, 3, 3]),
            (
                "pool+fc",
                single(
                    3,
                    vec![LayerSpec::GlobalAvgPool, LayerSpec::Linear { out: 2 }],
                ),
                vec![2, 3, 4, 4],
            ),
        ]
    }

    #[test]
    fn every_layer_in_both_precisions() {
        for (name, spec, shape) in layer_cases() {
            let mut net64 = Network::<f64>::new(spec.clone(), 7).unwrap();
            let x64 = random::<f64>(shape.clone(), 11, -1.0, 1.0);
            let r = gradient_check(&mut net64, &x64, Mode::Train, &GradCheckConfig::f64()).unwrap();
            assert!(r.max_error() < 1e-6, "{name} f64: {r}");

            let mut net32 = Network::<f32>::new(spec, 7).unwrap();
            let x32 = random::<f32>(shape, 11, -1.0, 1.0);
            let r = gradient_check(&mut net32, &x32, Mode::Train, &GradCheckConfig::f32()).unwrap();
            assert!(r.max_error() < 1e-3, "{name} f32: {r}");
        }
    }

    #[test]
    fn batchnorm_eval_mode() {
        let mut net = Network::<f64>::new(
            single(2, vec![LayerSpec::conv(2, 3, 1, 1), LayerSpec::BatchNorm]),
            3,
        )
        .unwrap();
        let x = random::<f64>(vec![2, 2, 5, 5], 4, -1.0, 1.0);
        net.forward(&x, Mode::Train).unwrap();
        let r = gradient_check(&mut net, &x, Mode::Eval, &GradCheckConfig::f64()).unwrap();
        assert!(r.max_error() < 1e-6, "{r}");
    }

    #[test]
    fn generator_depth_two() {
        let spec = crate::nn::build_generator(2, 4).unwrap();
        let mut net = Network::<f64>::new(spec, 5).unwrap();
        let x = random::<f64>(vec![2, 1, 8, 8], 6, 0.0, 1.0);
        let r = gradient_check(&mut net, &x, Mode::Train, &GradCheckConfig::f64()).unwrap();
        assert!(r.max_error() < 1e-6, "{r}");
        let mut tensors = 0;
        net.visit_params(&mut |_, _| tensors += 1);
        assert_eq!(r.entries.len(), 1 + tensors);
    }

    #[test]
    fn pooling_net() {
        let spec = crate::nn::build_pooling_net(1, 2, 4).unwrap();
        let mut net = Network::<f64>::new(spec, 8).unwrap();
        let x = random::<f64>(vec![3, 3, 8, 8], 9, 0.0, 1.0);
        let r = gradient_check(&mut net, &x, Mode::Train, &GradCheckConfig::f64()).unwrap();
        assert!(r.max_error() < 1e-6, "{r}");
    }

    #[test]
    fn losses() {
        use crate::nn::loss::{loss_generator, loss_mse, loss_ssim};
        let p0 = random::<f64>(vec![2, 1, 16, 16], 1, 0.05, 0.95);
        let p = random::<f64>(vec![2, 1, 16, 16], 2, 0.05, 0.95);
        let c = GradCheckConfig::f64();
        let e = check_function("ssim", |t| loss_ssim(t, &p0), &p, &c).unwrap();
        assert!(e.error < 1e-6, "{e:?}");
        let e = check_function("generator", |t| loss_generator(t, &p0, 0.84), &p, &c).unwrap();
        assert!(e.error < 1e-6, "{e:?}");
        let targets = [1.0, 3.0, 4.5];
        let s = random::<f64>(vec![3, 1], 3, 0.0, 5.0);
        let e = check_function("mse", |t| loss_mse(t, &targets), &s, &c).unwrap();
        assert!(e.error < 1e-6, "{e:?}");

        let p0 = p0.cast::<f32>();
        let p = p.cast::<f32>();
        let c = GradCheckConfig {
            step: 1e-3,
            ..GradCheckConfig::f32()
        };
        let e = check_function("ssim", |t| loss_ssim(t, &p0), &p, &c).unwrap();
        assert!(e.error < 1e-3, "{e:?}");
        let e = check_function("generator", |t| loss_generator(t, &p0, 0.84), &p, &c).unwrap();
        assert!(e.error < 1e-3, "{e:?}");
    }
}
