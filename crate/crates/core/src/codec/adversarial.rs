//! Minimax training of the autoencoder against an image discriminator.
//!
//! The discriminator ascends
//! `mean log D(x) + mean log(1 - D(G(E(x))))`; the autoencoder descends the
//! pixel MSE plus `lambda` times the second (generator) term. Probabilities
//! entering a logarithm are clamped to `[1e-12, 1 - 1e-12]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{Activation, Mlp};
use super::neural::{epoch_batches, prepare_dataset, NeuralCodec, TrainConfig};
use super::CodecError;
use crate::image::GrayImage;

pub const PROB_EPSILON: f64 = 1e-12;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
}

fn is_clamped(p: f64) -> bool {
    !(PROB_EPSILON..=1.0 - PROB_EPSILON).contains(&p)
}

/// Empirical minimax value: `mean ln d_real + mean ln(1 - d_fake)`.
pub fn gan_objective(d_real: &[f64], d_fake: &[f64]) -> Result<f64, CodecError> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(CodecError::EmptyBatch);
    }
    Ok(mean_log(d_real) + generator_term(d_fake)?)
}

/// `mean ln(1 - d_fake)`, the part of the objective the generator controls.
pub fn generator_term(d_fake: &[f64]) -> Result<f64, CodecError> {
    if d_fake.is_empty() {
        return Err(CodecError::EmptyBatch);
    }
    let complement: Vec<f64> = d_fake.iter().map(|&p| 1.0 - clamp_prob(p)).collect();
    Ok(mean_log(&complement))
}

fn mean_log(ps: &[f64]) -> f64 {
    ps.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / ps.len() as f64
}

/// `d/dp ln p`, zero where the clamp is active.
fn dlog(p: f64) -> f64 {
    if is_clamped(p) {
        0.0
    } else {
        1.0 / p
    }
}

/// `d/dp ln(1 - p)`, zero where the clamp is active.
fn dlog_complement(p: f64) -> f64 {
    if is_clamped(p) {
        0.0
    } else {
        -1.0 / (1.0 - p)
    }
}

/// Image discriminator: `W*H -> hidden... -> 1`, sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    net: Mlp,
}

impl Discriminator {
    pub fn random<R: Rng + ?Sized>(pixels: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut dims = vec![pixels];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Self {
            net: Mlp::glorot(&dims, Activation::Sigmoid, rng),
        }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    /// Probability that `x` (normalized pixels) is a real image.
    pub fn prob(&self, x: &[f64]) -> f64 {
        self.net.forward(x)[0]
    }

    /// Fraction of correct calls at threshold 0.5 over both sets.
    pub fn accuracy(&self, real: &[Vec<f64>], fake: &[Vec<f64>]) -> f64 {
        let hits = real.iter().filter(|x| self.prob(x) > 0.5).count()
            + fake.iter().filter(|x| self.prob(x) <= 0.5).count();
        hits as f64 / (real.len() + fake.len()) as f64
    }

    /// One ascent step on the objective for the given batch.
    fn ascend(&mut self, real: &[&[f64]], fake: &[Vec<f64>], rate: f64) -> Result<(), ()> {
        let mut grads = self.net.zero_grads();
        for (set, is_real) in [
            (real.to_vec(), true),
            (fake.iter().map(Vec::as_slice).collect(), false),
        ] {
            let scale = 1.0 / set.len() as f64;
            for x in set {
                let trace = self.net.forward_trace(x);
                let p = trace.output()[0];
                let g = if is_real { dlog(p) } else { dlog_complement(p) };
                self.net.backward(&trace, &[scale * g], &mut grads, false);
            }
        }
        if !grads.is_finite() {
            return Err(());
        }
        self.net.ascend(&grads, rate);
        Ok(())
    }

    /// `weight * d/dx ln(1 - D(x))`.
    fn generator_input_grad(&self, x: &[f64], weight: f64) -> Vec<f64> {
        let trace = self.net.forward_trace(x);
        let p = trace.output()[0];
        let mut scratch = self.net.zero_grads();
        self.net
            .backward(&trace, &[weight * dlog_complement(p)], &mut scratch, true)
            .expect("input gradient requested")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialConfig {
    pub autoencoder: TrainConfig,
    pub disc_hidden: Vec<usize>,
    pub disc_learning_rate: f64,
    /// Weight of the generator term in the autoencoder loss, in `[0, 1]`.
    pub lambda: f64,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self {
            autoencoder: TrainConfig::default(),
            disc_hidden: vec![32],
            disc_learning_rate: 0.05,
            lambda: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdversarialReport {
    pub model: NeuralCodec,
    pub discriminator: Discriminator,
    pub initial_loss: f64,
    /// Reconstruction MSE after each epoch.
    pub loss_trace: Vec<f64>,
    /// Minimax objective on the training set after each epoch.
    pub objective_trace: Vec<f64>,
    /// Generator term on the training set after each epoch.
    pub generator_trace: Vec<f64>,
}

/// Alternating updates: discriminator ascent, then autoencoder descent on
/// `MSE + lambda * generator_term`. With `lambda == 0` the autoencoder follows
/// exactly the [`super::train_autoencoder`] trajectory.
pub fn train_adversarial(
    dataset: &[GrayImage],
    config: &AdversarialConfig,
) -> Result<AdversarialReport, CodecError> {
    let ae = &config.autoencoder;
    ae.validate()?;
    if !(0.0..=1.0).contains(&config.lambda) {
        return Err(CodecError::Config(format!(
            "lambda {} outside [0, 1]",
            config.lambda
        )));
    }
    if !(config.disc_learning_rate.is_finite() && config.disc_learning_rate > 0.0) {
        return Err(CodecError::Config(
            "discriminator learning rate must be positive".into(),
        ));
    }
    if config.disc_hidden.contains(&0) {
        return Err(CodecError::Config(
            "discriminator hidden layers must be non-empty".into(),
        ));
    }
    let (width, height, data) = prepare_dataset(dataset)?;

    let mut rng = ChaCha8Rng::seed_from_u64(ae.seed);
    let mut disc_rng = ChaCha8Rng::seed_from_u64(ae.seed);
    disc_rng.set_stream(1);

    let mut model = NeuralCodec::random(width, height, ae.m, &ae.hidden, &mut rng);
    let mut disc = Discriminator::random(width * height, &config.disc_hidden, &mut disc_rng);
    let initial_loss = model.loss(&data);
    let mut report = AdversarialReport {
        model: model.clone(),
        discriminator: disc.clone(),
        initial_loss,
        loss_trace: Vec::with_capacity(ae.epochs),
        objective_trace: Vec::with_capacity(ae.epochs),
        generator_trace: Vec::with_capacity(ae.epochs),
    };

    for epoch in 0..ae.epochs {
        for batch in epoch_batches(&mut rng, data.len(), ae.batch_size) {
            let refs: Vec<&[f64]> = batch.iter().map(|&i| data[i].as_slice()).collect();

            let fakes: Vec<Vec<f64>> = refs.iter().map(|x| model.reconstruct(x)).collect();
            disc.ascend(&refs, &fakes, config.disc_learning_rate)
                .map_err(|_| CodecError::NonFiniteLoss { epoch })?;

            let weight = config.lambda / refs.len() as f64;
            let grads = if config.lambda == 0.0 {
                model.gradients(&refs, |_| None)
            } else {
                model.gradients(&refs, |y| Some(disc.generator_input_grad(y, weight)))
            };
            if !grads.loss.is_finite() || !grads.encoder.is_finite() || !grads.decoder.is_finite() {
                return Err(CodecError::NonFiniteLoss { epoch });
            }
            model.descend(&grads, ae.learning_rate);
        }

        let loss = model.loss(&data);
        let real: Vec<f64> = data.iter().map(|x| disc.prob(x)).collect();
        let fake: Vec<f64> = data
            .iter()
            .map(|x| disc.prob(&model.reconstruct(x)))
            .collect();
        let objective = gan_objective(&real, &fake)?;
        let gen = generator_term(&fake)?;
        if !(loss.is_finite() && objective.is_finite() && gen.is_finite()) {
            return Err(CodecError::NonFiniteLoss { epoch });
        }
        report.loss_trace.push(loss);
        report.objective_trace.push(objective);
        report.generator_trace.push(gen);
    }

    report.model = model;
    report.discriminator = disc;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::train_autoencoder;

    fn random_images(seed: u64, n: usize, w: usize, h: usize) -> Vec<GrayImage> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| GrayImage::from_fn(w, h, |_, _| rng.gen()).unwrap())
            .collect()
    }

    #[test]
    fn objective_examples() {
        let half = gan_objective(&[0.5], &[0.5]).unwrap();
        assert!((half + 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(gan_objective(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), half);
        let eps = 1e-9;
        assert!(gan_objective(&[1.0 - eps], &[eps]).unwrap().abs() < 1e-8);
        assert!(matches!(
            gan_objective(&[], &[0.5]),
            Err(CodecError::EmptyBatch)
        ));
        assert!(matches!(
            gan_objective(&[0.5], &[]),
            Err(CodecError::EmptyBatch)
        ));
    }

    #[test]
    fn objective_is_finite_at_the_boundaries() {
        let v = gan_objective(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(v.is_finite());
        assert!(v <= 0.0);
        assert!((v - PROB_EPSILON.ln()).abs() < 1e-3);
    }

    #[test]
    fn generator_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let codec = NeuralCodec::random(4, 4, 3, &[5], &mut rng);
        let disc = Discriminator::random(16, &[6], &mut rng);
        let data: Vec<Vec<f64>> = random_images(6, 3, 4, 4)
            .iter()
            .map(GrayImage::normalized)
            .collect();
        let lambda = 0.7;
        let objective = |m: &NeuralCodec| {
            let fake: Vec<f64> = data.iter().map(|x| disc.prob(&m.reconstruct(x))).collect();
            m.loss(&data) + lambda * generator_term(&fake).unwrap()
        };
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let weight = lambda / refs.len() as f64;
        let g = codec.gradients(&refs, |y| Some(disc.generator_input_grad(y, weight)));
        let mut analytic = g.encoder.flatten();
        analytic.extend(g.decoder.flatten());

        let params = codec.params();
        let mut probe = codec.clone();
        let mut worst: f64 = 0.0;
        for k in 0..params.len() {
            let mut p = params.clone();
            p[k] += 1e-5;
            probe.set_params(&p);
            let up = objective(&probe);
            p[k] -= 2e-5;
            probe.set_params(&p);
            let down = objective(&probe);
            let numeric = (up - down) / 2e-5;
            let denom = analytic[k].abs().max(numeric.abs()).max(1e-7);
            worst = worst.max((analytic[k] - numeric).abs() / denom);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn discriminator_step_ascends_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut disc = Discriminator::random(16, &[6], &mut rng);
        let real: Vec<Vec<f64>> = (0..4).map(|_| vec![0.9; 16]).collect();
        let fake: Vec<Vec<f64>> = (0..4).map(|_| vec![0.1; 16]).collect();
        let value = |d: &Discriminator| {
            let r: Vec<f64> = real.iter().map(|x| d.prob(x)).collect();
            let f: Vec<f64> = fake.iter().map(|x| d.prob(x)).collect();
            gan_objective(&r, &f).unwrap()
        };
        let before = value(&disc);
        let refs: Vec<&[f64]> = real.iter().map(Vec::as_slice).collect();
        disc.ascend(&refs, &fake, 0.05).unwrap();
        assert!(value(&disc) > before);
    }

    #[test]
    fn lambda_zero_matches_plain_training() {
        let data = random_images(9, 6, 5, 5);
        let base = TrainConfig {
            m: 3,
            hidden: vec![6],
            epochs: 4,
            batch_size: 4,
            seed: 12,
            ..Default::default()
        };
        let plain = train_autoencoder(&data, &base).unwrap();
        let adv = train_adversarial(
            &data,
            &AdversarialConfig {
                autoencoder: base,
                lambda: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let bits = |m: &NeuralCodec| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&plain.model), bits(&adv.model));
        assert_eq!(plain.loss_trace, adv.loss_trace);
    }

    #[test]
    fn adversarial_training_is_deterministic_and_finite() {
        let data = random_images(10, 6, 5, 5);
        let config = AdversarialConfig {
            autoencoder: TrainConfig {
                m: 3,
                hidden: vec![6],
                epochs: 3,
                batch_size: 3,
                seed: 2,
                ..Default::default()
            },
            disc_hidden: vec![4],
            lambda: 0.5,
            ..Default::default()
        };
        let a = train_adversarial(&data, &config).unwrap();
        let b = train_adversarial(&data, &config).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.discriminator, b.discriminator);
        assert!(a.objective_trace.iter().all(|v| v.is_finite() && *v <= 0.0));
        assert!(a.generator_trace.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_lambda() {
        let data = random_images(1, 1, 3, 3);
        let config = AdversarialConfig {
            lambda: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            train_adversarial(&data, &config),
            Err(CodecError::Config(_))
        ));
    }
}
