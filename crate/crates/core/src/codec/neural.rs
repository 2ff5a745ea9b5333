//! Fully-connected autoencoder codec and its SGD trainer.
//!
//! Encoder: `W*H -> hidden... -> m` (tanh hidden, linear bottleneck).
//! Decoder: `m -> reversed hidden... -> W*H` (tanh hidden, sigmoid output).
//! Pixels are normalized to `[0, 1]`; the loss is the mean squared error over
//! pixels, averaged over the batch.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dct::to_pixel;
use super::mlp::{Activation, Grads, Mlp};
use super::{CodecError, LatentVector};
use crate::image::GrayImage;

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralCodec {
    width: usize,
    height: usize,
    encoder: Mlp,
    decoder: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub m: usize,
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    /// Step size for the per-image squared error (MSE times pixel count).
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            m: super::DEFAULT_M,
            hidden: vec![64],
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<(), CodecError> {
        if self.m == 0 {
            return Err(CodecError::Config("m must be at least 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(CodecError::Config("hidden layers must be non-empty".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(CodecError::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(CodecError::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: NeuralCodec,
    /// Dataset loss of the freshly initialized model.
    pub initial_loss: f64,
    /// Dataset loss after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Result of one autoencoder gradient evaluation.
pub(crate) struct AeGrads {
    pub loss: f64,
    pub encoder: Grads,
    pub decoder: Grads,
}

impl NeuralCodec {
    /// Glorot-initialized model drawn from `rng`.
    pub fn random<R: rand::Rng + ?Sized>(
        width: usize,
        height: usize,
        m: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        let (enc_dims, dec_dims) = layer_dims(width * height, m, hidden);
        let encoder = Mlp::glorot(&enc_dims, Activation::Identity, rng);
        let decoder = Mlp::glorot(&dec_dims, Activation::Sigmoid, rng);
        Self {
            width,
            height,
            encoder,
            decoder,
        }
    }

    /// All weights and biases zero.
    pub fn zeros(width: usize, height: usize, m: usize, hidden: &[usize]) -> Self {
        let (enc_dims, dec_dims) = layer_dims(width * height, m, hidden);
        Self {
            width,
            height,
            encoder: Mlp::zeros(&enc_dims, Activation::Identity),
            decoder: Mlp::zeros(&dec_dims, Activation::Sigmoid),
        }
    }

    /// The model a trainer starts from under `config`.
    pub fn initialize(width: usize, height: usize, config: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::random(width, height, config.m, &config.hidden, &mut rng)
    }

    pub fn from_parts(
        width: usize,
        height: usize,
        encoder: Mlp,
        decoder: Mlp,
    ) -> Result<Self, CodecError> {
        let pixels = width * height;
        let chained = |net: &Mlp| net.layers.windows(2).all(|w| w[0].outputs == w[1].inputs);
        let shapes_ok = pixels > 0
            && !encoder.layers.is_empty()
            && !decoder.layers.is_empty()
            && chained(&encoder)
            && chained(&decoder)
            && encoder.input_dim() == pixels
            && decoder.output_dim() == pixels
            && encoder.output_dim() == decoder.input_dim()
            && encoder.output_dim() > 0;
        if !shapes_ok {
            return Err(CodecError::ShapeMismatch(format!(
                "encoder {:?} / decoder {:?} do not fit {width}x{height} images",
                encoder.dims(),
                decoder.dims()
            )));
        }
        let weights_ok = encoder
            .layers
            .iter()
            .chain(&decoder.layers)
            .all(|l| l.weights.len() == l.inputs * l.outputs && l.bias.len() == l.outputs);
        if !weights_ok {
            return Err(CodecError::ShapeMismatch("parameter buffer sizes".into()));
        }
        if encoder
            .params()
            .chain(decoder.params())
            .any(|p| !p.is_finite())
        {
            return Err(CodecError::ModelFormat("non-finite weight".into()));
        }
        Ok(Self {
            width,
            height,
            encoder: Mlp {
                output: Activation::Identity,
                ..encoder
            },
            decoder: Mlp {
                output: Activation::Sigmoid,
                ..decoder
            },
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn m(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    fn check_image(&self, img: &GrayImage) -> Result<(), CodecError> {
        if (img.width(), img.height()) != (self.width, self.height) {
            return Err(CodecError::ShapeMismatch(format!(
                "model expects {}x{} images, got {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }

    pub fn encode(&self, img: &GrayImage) -> Result<LatentVector, CodecError> {
        self.check_image(img)?;
        LatentVector::from_f64(&self.encoder.forward(&img.normalized()))
    }

    pub fn decode(&self, v: &LatentVector) -> Result<GrayImage, CodecError> {
        if v.len() != self.m() {
            return Err(CodecError::ShapeMismatch(format!(
                "latent has {} values, model expects {}",
                v.len(),
                self.m()
            )));
        }
        let out = self.decoder.forward(&v.to_f64());
        let pixels = out.iter().map(|&y| to_pixel(y * 255.0)).collect();
        Ok(GrayImage::new(self.width, self.height, pixels)?)
    }

    /// Unquantized reconstruction of a normalized image.
    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        self.decoder.forward(&self.encoder.forward(x))
    }

    /// Mean over samples of the per-pixel squared error.
    pub fn loss(&self, data: &[Vec<f64>]) -> f64 {
        let total: f64 = data
            .iter()
            .map(|x| {
                let y = self.reconstruct(x);
                y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
            })
            .sum();
        total / data.len() as f64
    }

    /// Batch loss and its gradient, flattened as encoder then decoder
    /// parameters (same order as [`NeuralCodec::params`]).
    pub fn loss_and_gradient(&self, batch: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let refs: Vec<&[f64]> = batch.iter().map(Vec::as_slice).collect();
        let g = self.gradients(&refs, |_| None);
        let mut flat = g.encoder.flatten();
        flat.extend(g.decoder.flatten());
        (g.loss, flat)
    }

    pub fn params(&self) -> Vec<f64> {
        self.encoder
            .params()
            .chain(self.decoder.params())
            .copied()
            .collect()
    }

    pub fn set_params(&mut self, values: &[f64]) {
        assert_eq!(
            values.len(),
            self.encoder.param_count() + self.decoder.param_count()
        );
        for (p, v) in self
            .encoder
            .params_mut()
            .chain(self.decoder.params_mut())
            .zip(values)
        {
            *p = *v;
        }
    }

    /// Backpropagate the batch MSE. `extra` may add a further gradient with
    /// respect to each reconstruction (already scaled by the caller).
    pub(crate) fn gradients(
        &self,
        batch: &[&[f64]],
        mut extra: impl FnMut(&[f64]) -> Option<Vec<f64>>,
    ) -> AeGrads {
        let mut encoder = self.encoder.zero_grads();
        let mut decoder = self.decoder.zero_grads();
        let mut loss = 0.0;
        let b = batch.len() as f64;
        for x in batch {
            let n = x.len() as f64;
            let enc_trace = self.encoder.forward_trace(x);
            let dec_trace = self.decoder.forward_trace(enc_trace.output());
            let y = dec_trace.output();
            loss += y
                .iter()
                .zip(*x)
                .map(|(a, t)| (a - t) * (a - t))
                .sum::<f64>()
                / n
                / b;
            let mut g: Vec<f64> = y
                .iter()
                .zip(*x)
                .map(|(a, t)| 2.0 * (a - t) / (n * b))
                .collect();
            if let Some(add) = extra(y) {
                g.iter_mut().zip(add).for_each(|(g, a)| *g += a);
            }
            let dz = self
                .decoder
                .backward(&dec_trace, &g, &mut decoder, true)
                .expect("input gradient requested");
            self.encoder.backward(&enc_trace, &dz, &mut encoder, false);
        }
        AeGrads {
            loss,
            encoder,
            decoder,
        }
    }

    /// One SGD step. `rate` applies to the pixel-summed objective, so the
    /// mean-per-pixel gradient is scaled by the pixel count; otherwise output
    /// layer steps shrink as `1 / (W*H)`.
    pub(crate) fn descend(&mut self, grads: &AeGrads, rate: f64) {
        let step = rate * (self.width * self.height) as f64;
        self.encoder.descend(&grads.encoder, step);
        self.decoder.descend(&grads.decoder, step);
    }
}

fn layer_dims(pixels: usize, m: usize, hidden: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut enc = vec![pixels];
    enc.extend_from_slice(hidden);
    enc.push(m);
    let dec: Vec<usize> = enc.iter().rev().copied().collect();
    (enc, dec)
}

/// Shared dataset checks; returns the common dimensions and normalized pixels.
pub(crate) fn prepare_dataset(
    dataset: &[GrayImage],
) -> Result<(usize, usize, Vec<Vec<f64>>), CodecError> {
    let first = dataset
        .first()
        .ok_or_else(|| CodecError::Config("dataset is empty".into()))?;
    let (w, h) = (first.width(), first.height());
    if let Some(bad) = dataset
        .iter()
        .find(|img| (img.width(), img.height()) != (w, h))
    {
        return Err(CodecError::ShapeMismatch(format!(
            "dataset mixes {w}x{h} and {}x{} images",
            bad.width(),
            bad.height()
        )));
    }
    Ok((w, h, dataset.iter().map(GrayImage::normalized).collect()))
}

/// One epoch's mini-batches over a freshly shuffled order.
pub(crate) fn epoch_batches(rng: &mut ChaCha8Rng, n: usize, batch_size: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Mini-batch SGD on pixel MSE. Deterministic for a fixed `config.seed`.
pub fn train_autoencoder(
    dataset: &[GrayImage],
    config: &TrainConfig,
) -> Result<TrainReport, CodecError> {
    config.validate()?;
    let (width, height, data) = prepare_dataset(dataset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = NeuralCodec::random(width, height, config.m, &config.hidden, &mut rng);
    let initial_loss = model.loss(&data);
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        for batch in epoch_batches(&mut rng, data.len(), config.batch_size) {
            let refs: Vec<&[f64]> = batch.iter().map(|&i| data[i].as_slice()).collect();
            let grads = model.gradients(&refs, |_| None);
            if !grads.loss.is_finite() || !grads.encoder.is_finite() || !grads.decoder.is_finite() {
                return Err(CodecError::NonFiniteLoss { epoch });
            }
            model.descend(&grads, config.learning_rate);
        }
        let loss = model.loss(&data);
        if !loss.is_finite() {
            return Err(CodecError::NonFiniteLoss { epoch });
        }
        loss_trace.push(loss);
    }

    Ok(TrainReport {
        model,
        initial_loss,
        loss_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |_, _| rng.gen()).unwrap()
    }

    #[test]
    fn zero_model_examples() {
        let codec = NeuralCodec::zeros(4, 4, 3, &[5]);
        let img = GrayImage::from_fn(4, 4, |x, y| (x * 50 + y) as u8).unwrap();
        assert_eq!(codec.encode(&img).unwrap().values(), &[0.0, 0.0, 0.0]);
        let v = LatentVector::new(vec![1.5, -2.0, 0.25]).unwrap();
        let out = codec.decode(&v).unwrap();
        assert!(out.pixels().iter().all(|&p| p == 128));
    }

    #[test]
    fn shape_mismatch_errors() {
        let codec = NeuralCodec::zeros(4, 4, 3, &[5]);
        assert!(matches!(
            codec.encode(&GrayImage::filled(5, 4, 0).unwrap()),
            Err(CodecError::ShapeMismatch(_))
        ));
        assert!(codec
            .decode(&LatentVector::new(vec![0.0; 4]).unwrap())
            .is_err());
    }

    #[test]
    fn from_parts_checks_chaining() {
        let enc = Mlp::zeros(&[16, 5, 3], Activation::Identity);
        let dec = Mlp::zeros(&[3, 5, 16], Activation::Sigmoid);
        assert!(NeuralCodec::from_parts(4, 4, enc.clone(), dec.clone()).is_ok());
        assert!(NeuralCodec::from_parts(4, 5, enc.clone(), dec.clone()).is_err());
        let bad_dec = Mlp::zeros(&[4, 5, 16], Activation::Sigmoid);
        assert!(NeuralCodec::from_parts(4, 4, enc, bad_dec).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let codec = NeuralCodec::random(6, 6, 3, &[5], &mut rng);
        let batch: Vec<Vec<f64>> = (0..2)
            .map(|_| random_image(&mut rng, 6, 6).normalized())
            .collect();
        let (_, analytic) = codec.loss_and_gradient(&batch);
        let params = codec.params();
        let h = 1e-5;
        let mut probe = codec.clone();
        let mut worst: f64 = 0.0;
        for k in 0..params.len() {
            let mut p = params.clone();
            p[k] += h;
            probe.set_params(&p);
            let up = probe.loss(&batch);
            p[k] -= 2.0 * h;
            probe.set_params(&p);
            let down = probe.loss(&batch);
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic[k].abs().max(numeric.abs()).max(1e-7);
            worst = worst.max((analytic[k] - numeric).abs() / denom);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = vec![random_image(&mut rng, 4, 4)];
        let config = TrainConfig {
            m: 2,
            hidden: vec![3],
            epochs: 0,
            seed: 9,
            ..Default::default()
        };
        let report = train_autoencoder(&data, &config).unwrap();
        assert!(report.loss_trace.is_empty());
        assert_eq!(report.model, NeuralCodec::initialize(4, 4, &config));
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<_> = (0..5).map(|_| random_image(&mut rng, 5, 5)).collect();
        let config = TrainConfig {
            m: 3,
            hidden: vec![6],
            epochs: 5,
            batch_size: 2,
            seed: 4,
            ..Default::default()
        };
        let a = train_autoencoder(&data, &config).unwrap();
        let b = train_autoencoder(&data, &config).unwrap();
        let bits = |m: &NeuralCodec| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.model), bits(&b.model));
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn divergent_learning_rate_reports_non_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = vec![random_image(&mut rng, 4, 4)];
        let config = TrainConfig {
            m: 2,
            hidden: vec![3],
            epochs: 5,
            learning_rate: 1e308,
            ..Default::default()
        };
        assert!(matches!(
            train_autoencoder(&data, &config),
            Err(CodecError::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn config_and_dataset_validation() {
        let img = GrayImage::filled(4, 4, 1).unwrap();
        let ok = TrainConfig {
            m: 2,
            hidden: vec![3],
            epochs: 1,
            ..Default::default()
        };
        assert!(train_autoencoder(&[], &ok).is_err());
        let mixed = [img.clone(), GrayImage::filled(3, 4, 1).unwrap()];
        assert!(matches!(
            train_autoencoder(&mixed, &ok),
            Err(CodecError::ShapeMismatch(_))
        ));
        for bad in [
            TrainConfig { m: 0, ..ok.clone() },
            TrainConfig {
                batch_size: 0,
                ..ok.clone()
            },
            TrainConfig {
                learning_rate: -1.0,
                ..ok.clone()
            },
            TrainConfig {
                hidden: vec![0],
                ..ok.clone()
            },
        ] {
            assert!(matches!(
                train_autoencoder(std::slice::from_ref(&img), &bad),
                Err(CodecError::Config(_))
            ));
        }
    }
}
