use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp};
use super::nets::{
    backward, combine, AdversarialNets, GeneratorNet, GradientSet, LossParts, UpdateTarget,
};
use super::{Adam, AdvConfig, AdvError, AdvVariant};
use crate::dataset::{
    decode_rows, encode_rows, fit_normalization, majority_rate, EncodedMatrix, FeatureSchema,
    Labels, RecordTable,
};
use crate::mechanism::MechanismOutput;
use crate::metrics::tradeoff_ratio;
use crate::scalar::Scalar;

/// Row-weighted means over one epoch of generator steps. `total` is
/// recomputed from the averaged components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub c: f64,
    pub l_p: f64,
    pub l_u: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochLosses>,
    /// `M_u - M_p` on the validation rows after each epoch (early stop only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub validation_scores: Vec<f64>,
    pub stopped_early: bool,
    /// Epoch (1-based) whose generator was returned.
    pub returned_epoch: usize,
}

/// Optimization state of the three networks.
#[derive(Clone, Debug)]
pub struct Trainer<T: Scalar> {
    pub nets: AdversarialNets<T>,
    pub opt_private: Adam<T>,
    pub opt_generator: Adam<T>,
    pub cfg: AdvConfig,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(d: usize, cfg: &AdvConfig, variant: AdvVariant) -> Result<Self, AdvError> {
        cfg.validate()?;
        if d == 0 {
            return Err(AdvError::EmptyData);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let nets = AdversarialNets::init(d, cfg, variant.noise_sigma(cfg), &mut rng);
        let lr = T::of(cfg.learning_rate);
        Ok(Trainer {
            nets,
            opt_private: Adam::new(lr),
            opt_generator: Adam::new(lr),
            cfg: cfg.clone(),
            rng,
        })
    }

    fn gradients(
        &mut self,
        batch: ArrayView2<T>,
        private: &[usize],
        utility: &[usize],
        target: UpdateTarget,
    ) -> Result<GradientSet<T>, AdvError> {
        let noise = self
            .nets
            .generator
            .sample_noise(batch.nrows(), &mut self.rng);
        backward(
            &self.nets,
            batch,
            noise.as_ref(),
            private,
            utility,
            &self.cfg,
            target,
        )
    }

    /// One ascent step of `L` on the private discriminator.
    pub fn step_private(
        &mut self,
        batch: ArrayView2<T>,
        private: &[usize],
        utility: &[usize],
    ) -> Result<GradientSet<T>, AdvError> {
        let g = self.gradients(batch, private, utility, UpdateTarget::PrivateDiscriminator)?;
        let grads = g.private_head.as_ref().expect("targeted").slices();
        self.opt_private
            .step(self.nets.private_head.param_slices_mut(), &grads, -T::one());
        Ok(g)
    }

    /// One descent step of `L` on encoder, decoder and utility discriminator.
    pub fn step_generator(
        &mut self,
        batch: ArrayView2<T>,
        private: &[usize],
        utility: &[usize],
    ) -> Result<GradientSet<T>, AdvError> {
        let g = self.gradients(batch, private, utility, UpdateTarget::GeneratorAndUtility)?;
        let grads: Vec<&[T]> = g.parts().flat_map(|p| p.slices()).collect();
        let nets = &mut self.nets;
        let mut params = nets.generator.encoder.param_slices_mut();
        params.extend(nets.generator.decoder.param_slices_mut());
        params.extend(nets.utility_head.param_slices_mut());
        self.opt_generator.step(params, &grads, T::one());
        Ok(g)
    }

    /// Shuffles the rows and runs the alternating step pair on every batch.
    pub fn epoch(
        &mut self,
        data: ArrayView2<T>,
        private: &[usize],
        utility: &[usize],
    ) -> Result<EpochLosses, AdvError> {
        let n = data.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        let mut sums = [0.0f64; 3];
        for chunk in order.chunks(self.cfg.batch_size) {
            let batch = data.select(Axis(0), chunk);
            let p: Vec<usize> = chunk.iter().map(|&i| private[i]).collect();
            let u: Vec<usize> = chunk.iter().map(|&i| utility[i]).collect();
            self.step_private(batch.view(), &p, &u)?;
            let LossParts { c, l_p, l_u, .. } = self.step_generator(batch.view(), &p, &u)?.losses;
            let w = chunk.len() as f64;
            sums[0] += c.as_f64() * w;
            sums[1] += l_p.as_f64() * w;
            sums[2] += l_u.as_f64() * w;
        }
        let [c, l_p, l_u] = sums.map(|s| s / n as f64);
        let out = EpochLosses {
            c,
            l_p,
            l_u,
            total: combine(c, l_p, l_u, &self.cfg),
        };
        if ![c, l_p, l_u, out.total].iter().all(|v| v.is_finite()) {
            return Err(AdvError::NonFiniteGradient);
        }
        Ok(out)
    }

    pub fn generator(&self) -> &GeneratorNet<T> {
        &self.nets.generator
    }
}

/// Trains the generator with strictly alternating single steps per batch.
pub fn train<T: Scalar>(
    data: &EncodedMatrix<T>,
    labels: &[Labels],
    cfg: &AdvConfig,
    variant: AdvVariant,
) -> Result<(GeneratorNet<T>, TrainTrace), AdvError> {
    if data.n_rows() == 0 {
        return Err(AdvError::EmptyData);
    }
    if labels.len() != data.n_rows() {
        return Err(AdvError::DimensionMismatch {
            expected: data.n_rows(),
            got: labels.len(),
        });
    }
    let private: Vec<usize> = labels.iter().map(|l| l.private).collect();
    let utility: Vec<usize> = labels.iter().map(|l| l.utility).collect();
    let mut trainer = Trainer::<T>::new(data.n_dims, cfg, variant)?;
    let mut trace = TrainTrace::default();

    let Some(es) = cfg.early_stop.clone() else {
        for _ in 0..cfg.epochs {
            let e = trainer.epoch(data.values.view(), &private, &utility)?;
            trace.epochs.push(e);
        }
        trace.returned_epoch = cfg.epochs;
        return Ok((trainer.nets.generator, trace));
    };

    let (fit_idx, val_idx) = validation_split(data.n_rows(), es.validation_fraction, cfg.seed);
    let fit = data.values.select(Axis(0), &fit_idx);
    let val = data.values.select(Axis(0), &val_idx);
    let pick = |v: &[usize], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let (fp, fu) = (pick(&private, &fit_idx), pick(&utility, &fit_idx));
    let (vp, vu) = (pick(&private, &val_idx), pick(&utility, &val_idx));
    let probe_rng = &mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let raw_p = probe_accuracy(fit.view(), &fp, val.view(), &vp, cfg, probe_rng)?;
    let raw_u = probe_accuracy(fit.view(), &fu, val.view(), &vu, cfg, probe_rng)?;
    let (rate_p, rate_u) = (majority_rate(&vp)?, majority_rate(&vu)?);

    let mut best = (f64::NEG_INFINITY, trainer.nets.generator.clone(), 0);
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        let e = trainer.epoch(fit.view(), &fp, &fu)?;
        trace.epochs.push(e);
        let sanitized = trainer.nets.generator.forward(val.view(), probe_rng)?;
        let acc_p = head_accuracy(&trainer.nets.private_head, sanitized.view(), &vp)?;
        let acc_u = head_accuracy(&trainer.nets.utility_head, sanitized.view(), &vu)?;
        // a degenerate baseline (raw probe no better than majority) scores as no signal
        let m_p = tradeoff_ratio(raw_p, acc_p, rate_p).map_or(0.0, |t| t.clamped);
        let m_u = tradeoff_ratio(raw_u, acc_u, rate_u).map_or(0.0, |t| t.clamped);
        let score = m_u - m_p;
        trace.validation_scores.push(score);
        if score > best.0 + es.min_delta {
            best = (score, trainer.nets.generator.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= es.patience {
                trace.stopped_early = epoch < cfg.epochs;
                break;
            }
        }
    }
    trace.returned_epoch = best.2;
    Ok((best.1, trace))
}

fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x7a1d));
    let n_val = ((n as f64 * fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

fn head_accuracy<T: Scalar>(
    head: &Mlp<T>,
    x: ArrayView2<T>,
    labels: &[usize],
) -> Result<f64, AdvError> {
    let probs = head.forward(x)?;
    let hits = probs
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(r, &y)| usize::from(r[1] > r[0]) == y)
        .count();
    Ok(hits as f64 / labels.len().max(1) as f64)
}

/// Validation accuracy of a linear softmax probe fitted on raw features.
fn probe_accuracy<T: Scalar>(
    fit: ArrayView2<T>,
    fit_labels: &[usize],
    val: ArrayView2<T>,
    val_labels: &[usize],
    cfg: &AdvConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64, AdvError> {
    const PROBE_EPOCHS: usize = 5;
    let mut probe = Mlp::<T>::init(
        &[fit.ncols(), 2],
        Activation::Relu,
        Activation::Softmax,
        rng,
    );
    let mut opt = Adam::new(T::of(1e-2));
    let mut order: Vec<usize> = (0..fit.nrows()).collect();
    for _ in 0..PROBE_EPOCHS {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let x = fit.select(Axis(0), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| fit_labels[i]).collect();
            let trace = probe.forward_trace(x.view())?;
            let grad = ce_grad(trace.logits(), &y);
            let (g, _) = probe.backward(&trace, grad, super::GradAt::Logits);
            opt.step(probe.param_slices_mut(), &g.slices(), T::one());
        }
    }
    head_accuracy(&probe, val, val_labels)
}

fn ce_grad<T: Scalar>(logits: &Array2<T>, labels: &[usize]) -> Array2<T> {
    let n = T::of(labels.len() as f64);
    let mut g = super::softmax_rows(logits);
    for (mut row, &y) in g.rows_mut().into_iter().zip(labels) {
        row[y] = row[y] - T::one();
    }
    g.mapv_inplace(|v| v / n);
    g
}

/// Trained generator bound to the schema (with normalization statistics)
/// it was fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdversarialSanitizer<T> {
    pub variant: AdvVariant,
    pub config: AdvConfig,
    pub schema: FeatureSchema,
    pub generator: GeneratorNet<T>,
    pub trace: TrainTrace,
}

impl<T: Scalar> AdversarialSanitizer<T> {
    /// Fits normalization statistics on `train` and trains the generator.
    pub fn fit(
        train_table: &RecordTable,
        cfg: &AdvConfig,
        variant: AdvVariant,
    ) -> Result<Self, AdvError> {
        let schema = fit_normalization(train_table)?;
        let data = encode_rows::<T>(&schema, &train_table.rows)?;
        let (generator, trace) = train(&data, &train_table.labels, cfg, variant)?;
        Ok(AdversarialSanitizer {
            variant,
            config: cfg.clone(),
            schema,
            generator,
            trace,
        })
    }

    /// Encodes, runs the generator (with latent noise when configured) and
    /// decodes back to schema-valid records. Labels are carried over.
    pub fn sanitize_table(&self, table: &RecordTable) -> Result<MechanismOutput, AdvError> {
        let (want, got) = (self.schema.fingerprint(), table.schema.fingerprint());
        if want != got {
            return Err(AdvError::SchemaMismatch {
                expected: want,
                got,
            });
        }
        let mut enc = encode_rows::<T>(&self.schema, &table.rows)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(1);
        if !table.is_empty() {
            enc.values = self.generator.forward(enc.values.view(), &mut rng)?;
        }
        let rows = decode_rows(&enc, &self.schema)?;
        let out = RecordTable::new(table.schema.clone(), rows, table.labels.clone())?;
        let settings = serde_json::json!({
            "variant": self.variant.label(),
            "config": self.config,
            "latent_noise_sigma": self.generator.latent_noise_sigma.as_f64(),
            "epochs_trained": self.trace.epochs.len(),
            "returned_epoch": self.trace.returned_epoch,
            "stopped_early": self.trace.stopped_early,
        });
        Ok(MechanismOutput::complete(
            self.variant.id(),
            Some(self.variant.label().to_string()),
            out,
            settings,
        ))
    }
}
