use super::layers::Mode;
use super::loss::{loss_generator, loss_mse};
use super::network::Network;
use super::optim::{Adam, TrainConfig};
use super::tensor::Tensor;
use super::NnError;
use crate::media::Plane;
use crate::quality::QualityMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A distorted-frame patch and the matching label-map patch.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    pub input: Plane<f32>,
    pub label: Plane<f32>,
}

/// One frame for the pooling net: source and transcoded channel stacks
/// (each `channels x H x W`) plus the clip score broadcast to the frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolingSample {
    pub source: Tensor<f32>,
    pub transcoded: Tensor<f32>,
    pub label: f64,
}

impl PoolingSample {
    fn dims(&self) -> Result<(usize, usize, usize, usize), NnError> {
        match (self.source.shape(), self.transcoded.shape()) {
            ([cs, h, w], [ct, h2, w2]) if h == h2 && w == w2 => Ok((*cs, *ct, *h, *w)),
            (a, b) => Err(NnError::Shape(format!(
                "source stack {a:?} and transcoded stack {b:?} disagree"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss of the untrained network over the dataset.
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses
            .last()
            .copied()
            .unwrap_or(self.initial_loss)
    }
}

/// Non-overlapping `size x size` patches of `frame` with the co-located
/// patches of `label`. The map is valid-mode, so pixel `p` of the frame
/// sits at `p - border` in the map; only patches fully covered by the map
/// are taken.
pub fn extract_patches(
    frame: &Plane<f32>,
    label: &QualityMap,
    size: usize,
) -> Result<Vec<PatchPair>, NnError> {
    let b = label.border;
    if size == 0 || label.width + 2 * b != frame.width() || label.height + 2 * b != frame.height() {
        return Err(NnError::Shape(format!(
            "{}x{} map with border {b} does not cover a {}x{} frame",
            label.width,
            label.height,
            frame.width(),
            frame.height()
        )));
    }
    let map = label.to_plane();
    let mut out = Vec::new();
    let mut y = 0;
    while y + size <= label.height {
        let mut x = 0;
        while x + size <= label.width {
            let input = frame
                .crop(x + b, y + b, size, size)
                .map_err(|e| NnError::Shape(e.to_string()))?;
            let lab = map
                .crop(x, y, size, size)
                .map_err(|e| NnError::Shape(e.to_string()))?;
            out.push(PatchPair { input, label: lab });
            x += size;
        }
        y += size;
    }
    Ok(out)
}

fn plane_tensor(planes: &[&Plane<f32>]) -> Result<Tensor<f32>, NnError> {
    let (w, h) = (planes[0].width(), planes[0].height());
    let mut data = Vec::with_capacity(planes.len() * w * h);
    for p in planes {
        if p.width() != w || p.height() != h {
            return Err(NnError::Shape("patches in a batch differ in size".into()));
        }
        data.extend_from_slice(p.data());
    }
    Tensor::new(vec![planes.len(), 1, h, w], data)
}

/// Run the generator on one frame in eval mode.
pub fn generate_map(net: &mut Network<f32>, frame: &Plane<f32>) -> Result<Plane<f32>, NnError> {
    let out = net.forward(&plane_tensor(&[frame])?, Mode::Eval)?;
    let (_, _, h, w) = out.dims4()?;
    Plane::new(w, h, out.into_data()).map_err(|e| NnError::Shape(e.to_string()))
}

fn pooling_batch(items: &[&PoolingSample]) -> Result<(Tensor<f32>, Vec<f64>), NnError> {
    let (cs, ct, h, w) = items[0].dims()?;
    let mut data = Vec::with_capacity(items.len() * (cs + ct) * h * w);
    for s in items {
        if s.dims()? != (cs, ct, h, w) {
            return Err(NnError::Shape("pooling samples differ in shape".into()));
        }
        data.extend_from_slice(s.source.data());
        data.extend_from_slice(s.transcoded.data());
    }
    Ok((
        Tensor::new(vec![items.len(), cs + ct, h, w], data)?,
        items.iter().map(|s| s.label).collect(),
    ))
}

/// Mini-batch Adam loop shared by both models. `step` runs forward, loss and
/// backward for one batch and returns the batch loss.
fn fit<T>(
    net: &mut Network<f32>,
    data: &[T],
    config: &TrainConfig,
    mut step: impl FnMut(&mut Network<f32>, &[&T], Mode, bool) -> Result<f64, NnError>,
    mut after_epoch: impl FnMut(usize, &mut Network<f32>) -> Result<(), NnError>,
) -> Result<TrainReport, NnError> {
    config.validate()?;
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let batches = |order: &[usize]| -> Vec<Vec<usize>> {
        order
            .chunks(config.batch_size)
            .map(|c| c.to_vec())
            .collect()
    };
    let mut order: Vec<usize> = (0..data.len()).collect();

    // train-mode statistics, but on a copy so running stats stay untouched
    let mut probe = net.clone();
    let mut initial = 0.0;
    for b in batches(&order) {
        let items: Vec<&T> = b.iter().map(|&i| &data[i]).collect();
        initial += step(&mut probe, &items, Mode::Train, false)? * items.len() as f64;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::from_config(config);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        adam.lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for b in batches(&order) {
            let items: Vec<&T> = b.iter().map(|&i| &data[i]).collect();
            net.zero_grad();
            total += step(net, &items, Mode::Train, true)? * items.len() as f64;
            adam.step_network(net)?;
        }
        epoch_losses.push(total / data.len() as f64);
        after_epoch(epoch, net)?;
    }
    Ok(TrainReport {
        initial_loss: initial / data.len() as f64,
        epoch_losses,
    })
}

/// Fit the generator to label-map patches with the SSIM + L1 loss.
pub fn train_generator(
    net: &mut Network<f32>,
    data: &[PatchPair],
    config: &TrainConfig,
) -> Result<TrainReport, NnError> {
    let alpha = config.alpha;
    fit(
        net,
        data,
        config,
        |net, items, mode, learn| {
            let inputs: Vec<&Plane<f32>> = items.iter().map(|p| &p.input).collect();
            let labels: Vec<&Plane<f32>> = items.iter().map(|p| &p.label).collect();
            let x = plane_tensor(&inputs)?;
            let y = plane_tensor(&labels)?;
            let out = net.forward(&x, mode)?;
            let loss = loss_generator(&out, &y, alpha)?;
            if learn {
                net.backward(&loss.grad)?;
            }
            Ok(loss.value)
        },
        |_, _| Ok(()),
    )
}

/// Fit the pooling net to per-frame scores with MSE. The generator that
/// produced the source maps is not touched here.
pub fn train_pooling(
    net: &mut Network<f32>,
    data: &[PoolingSample],
    config: &TrainConfig,
) -> Result<TrainReport, NnError> {
    train_pooling_monitored(net, data, config, |_, _| Ok(()))
}

/// [`train_pooling`] with a hook run after every epoch, e.g. for
/// validation-based checkpointing.
pub fn train_pooling_monitored(
    net: &mut Network<f32>,
    data: &[PoolingSample],
    config: &TrainConfig,
    after_epoch: impl FnMut(usize, &mut Network<f32>) -> Result<(), NnError>,
) -> Result<TrainReport, NnError> {
    fit(
        net,
        data,
        config,
        |net, items, mode, learn| {
            let (x, labels) = pooling_batch(items)?;
            let out = net.forward(&x, mode)?;
            let loss = loss_mse(&out, &labels)?;
            if learn {
                net.backward(&loss.grad)?;
            }
            Ok(loss.value)
        },
        after_epoch,
    )
}

/// Score one frame in eval mode.
pub fn pooling_forward(net: &mut Network<f32>, sample: &PoolingSample) -> Result<f64, NnError> {
    let (x, _) = pooling_batch(&[sample])?;
    Ok(net.forward(&x, Mode::Eval)?.data()[0] as f64)
}
