use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{sigmoid, AdamState, Tensor2, PROB_CLAMP};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dense ReLU network with one sigmoid output.
///
/// `weights[l]` has shape `layer_dims[l + 1] × layer_dims[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    weights: Vec<Tensor2>,
    biases: Vec<Vec<f64>>,
    // Bumped on every parameter mutation so stale caches can be detected.
    version: u64,
}

/// Activations kept by [`MlpModel::forward`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    model_version: u64,
    layer_dims: Vec<usize>,
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Tensor2>,
    /// Pre-activation output of each layer.
    pre: Vec<Tensor2>,
    probs: Vec<f64>,
}

impl ForwardCache {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Per-parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Tensor2>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model
                .weights
                .iter()
                .map(|w| Tensor2::zeros(w.rows(), w.cols()))
                .collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// All gradient entries, layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

/// Mean binary cross-entropy with probabilities clamped to `[1e-12, 1 − 1e-12]`.
pub fn bce_loss(probs: &[f64], labels: &[f64]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Length {
            left: probs.len(),
            right: labels.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / probs.len() as f64)
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::Config(
            "a network needs at least an input and an output dimension".into(),
        ));
    }
    if layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::Config(format!(
            "layer dimensions must be positive: {layer_dims:?}"
        )));
    }
    if *layer_dims.last().expect("checked length") != 1 {
        return Err(Error::Config(format!(
            "output dimension must be 1, got {layer_dims:?}"
        )));
    }
    Ok(())
}

/// He-uniform weights in `±sqrt(6 / d_in)` and zero biases.
pub fn init_weights(layer_dims: &[usize], rng: &mut Rng) -> Result<MlpModel> {
    check_dims(layer_dims)?;
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for pair in layer_dims.windows(2) {
        let (d_in, d_out) = (pair[0], pair[1]);
        let bound = (6.0 / d_in as f64).sqrt();
        let data = (0..d_in * d_out)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        weights.push(Tensor2::from_vec(d_out, d_in, data)?);
        biases.push(vec![0.0; d_out]);
    }
    Ok(MlpModel {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
        version: 0,
    })
}

impl MlpModel {
    /// All-zero network; every output is exactly 0.5.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        let weights = layer_dims
            .windows(2)
            .map(|p| Tensor2::zeros(p[1], p[0]))
            .collect();
        let biases = layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            version: 0,
        })
    }

    pub fn from_parameters(
        layer_dims: Vec<usize>,
        weights: Vec<Tensor2>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_dims(&layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::Length {
                left: weights.len().max(biases.len()),
                right: layers,
            });
        }
        for (l, pair) in layer_dims.windows(2).enumerate() {
            if weights[l].shape() != (pair[1], pair[0]) {
                return Err(Error::Dimension {
                    expected: pair[1] * pair[0],
                    found: weights[l].rows() * weights[l].cols(),
                });
            }
            if biases[l].len() != pair[1] {
                return Err(Error::Dimension {
                    expected: pair[1],
                    found: biases[l].len(),
                });
            }
        }
        Ok(Self {
            layer_dims,
            weights,
            biases,
            version: 0,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Tensor2] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn num_parameters(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.as_slice().len() + b.len())
            .sum()
    }

    /// Flattened parameters in the same order as [`Gradients::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    /// Applies `f` to every parameter slice (weights then bias, per layer).
    pub(crate) fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, &mut [f64])) {
        self.version += 1;
        for l in 0..self.weights.len() {
            f(2 * l, self.weights[l].as_mut_slice());
            f(2 * l + 1, &mut self.biases[l]);
        }
    }

    /// Overwrites a single flattened parameter.
    pub fn set_flat(&mut self, index: usize, value: f64) {
        let mut offset = 0;
        self.for_each_param_mut(|_, slice| {
            if index >= offset && index < offset + slice.len() {
                slice[index - offset] = value;
            }
            offset += slice.len();
        });
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                found: cols,
            });
        }
        Ok(())
    }

    /// Output probability for a single input row.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x.len())?;
        let mut current = x.to_vec();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let hidden = l + 1 < self.weights.len();
            current = (0..w.rows())
                .map(|o| {
                    let z = b[o] + dot(w.row(o), &current);
                    if hidden {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
        }
        Ok(sigmoid(current[0]))
    }

    pub fn forward(&self, batch: &Tensor2) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(batch.cols())?;
        let n = batch.rows();
        let mut inputs = Vec::with_capacity(self.weights.len());
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut current = batch.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = Tensor2::zeros(n, w.rows());
            for r in 0..n {
                let x = current.row(r);
                let out = z.row_mut(r);
                for (o, slot) in out.iter_mut().enumerate() {
                    *slot = b[o] + dot(w.row(o), x);
                }
            }
            let hidden = l + 1 < self.weights.len();
            let next = if hidden {
                let mut a = z.clone();
                a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
                a
            } else {
                z.clone()
            };
            inputs.push(current);
            pre.push(z);
            current = next;
        }
        let probs: Vec<f64> = current.as_slice().iter().map(|&z| sigmoid(z)).collect();
        let cache = ForwardCache {
            model_version: self.version,
            layer_dims: self.layer_dims.clone(),
            inputs,
            pre,
            probs: probs.clone(),
        };
        Ok((probs, cache))
    }

    /// Gradients of mean BCE with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, labels: &[f64]) -> Result<Gradients> {
        if cache.model_version != self.version || cache.layer_dims != self.layer_dims {
            return Err(Error::StaleCache(format!(
                "cache from model version {} ({:?}), model is at version {} ({:?})",
                cache.model_version, cache.layer_dims, self.version, self.layer_dims
            )));
        }
        let n = cache.probs.len();
        if labels.len() != n {
            return Err(Error::Length {
                left: labels.len(),
                right: n,
            });
        }
        if n == 0 {
            return Err(Error::Empty("batch"));
        }
        let mut grads = Gradients::zeros_like(self);
        // dL/dz at the output for sigmoid + mean BCE.
        let mut delta = Tensor2::from_vec(
            n,
            1,
            cache
                .probs
                .iter()
                .zip(labels)
                .map(|(p, y)| (p - y) / n as f64)
                .collect(),
        )?;
        for l in (0..self.weights.len()).rev() {
            let input = &cache.inputs[l];
            let w = &self.weights[l];
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            for r in 0..n {
                let x = input.row(r);
                for (o, &d) in delta.row(r).iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, x, gw.row_mut(o));
                        gb[o] += d;
                    }
                }
            }
            if l > 0 {
                let pre = &cache.pre[l - 1];
                let mut prev = Tensor2::zeros(n, w.cols());
                for r in 0..n {
                    let out = prev.row_mut(r);
                    for (o, &d) in delta.row(r).iter().enumerate() {
                        if d != 0.0 {
                            axpy(d, w.row(o), out);
                        }
                    }
                    for (v, &z) in out.iter_mut().zip(pre.row(r)) {
                        if z <= 0.0 {
                            *v = 0.0;
                        }
                    }
                }
                delta = prev;
            }
        }
        Ok(grads)
    }

    /// One Adam update from `grads`.
    pub fn adam_step(&mut self, grads: &Gradients, state: &mut AdamState) -> Result<()> {
        state.apply(self, grads)
    }

    pub fn to_checkpoint(&self, adam: Option<&AdamState>) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            layer_dims: self.layer_dims.clone(),
            weights: self.weights.iter().map(|w| w.as_slice().to_vec()).collect(),
            biases: self.biases.clone(),
            adam: adam.cloned(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Self, Option<AdamState>)> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        check_dims(&ckpt.layer_dims)?;
        let weights = ckpt
            .layer_dims
            .windows(2)
            .zip(&ckpt.weights)
            .map(|(p, data)| Tensor2::from_vec(p[1], p[0], data.clone()))
            .collect::<Result<Vec<_>>>()?;
        let model = Self::from_parameters(ckpt.layer_dims.clone(), weights, ckpt.biases.clone())?;
        if let Some(adam) = &ckpt.adam {
            adam.check_shapes(&model)?;
        }
        Ok((model, ckpt.adam.clone()))
    }
}

const CHECKPOINT_FORMAT: &str = "driftgale-mlp";
const CHECKPOINT_VERSION: u32 = 1;

/// Versioned JSON checkpoint of a model and, optionally, its optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub adam: Option<AdamState>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_gradients, GradCheckConfig};

    fn batch(seed: u64, rows: usize, cols: usize) -> Tensor2 {
        let mut rng = Rng::from_seed(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor2::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn zero_network_outputs_one_half() {
        let model = MlpModel::zeros(&[5, 3, 1]).unwrap();
        let (probs, _) = model.forward(&batch(1, 4, 5)).unwrap();
        assert!(probs.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn single_linear_layer_matches_scalar_sigmoid() {
        let w = Tensor2::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let model = MlpModel::from_parameters(vec![2, 1], vec![w], vec![vec![0.0]]).unwrap();
        let x = Tensor2::from_rows(&[[3.0, 9.0]]).unwrap();
        let (probs, _) = model.forward(&x).unwrap();
        assert!((probs[0] - 0.952_574_126_822_433_2).abs() < 1e-15);
        assert_eq!(model.predict_proba(&[3.0, 9.0]).unwrap(), probs[0]);
    }

    #[test]
    fn identical_rows_give_identical_probs() {
        let mut rng = Rng::from_seed(3);
        let model = init_weights(&[4, 8, 1], &mut rng).unwrap();
        let x = Tensor2::from_rows(&vec![vec![0.3, -0.2, 1.5, 0.0]; 6]).unwrap();
        let (probs, _) = model.forward(&x).unwrap();
        assert!(probs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let model = MlpModel::zeros(&[4, 1]).unwrap();
        assert!(matches!(
            model.forward(&Tensor2::zeros(2, 3)),
            Err(Error::Dimension { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn bce_reference_values() {
        let l = bce_loss(&[0.5, 0.5], &[0.0, 1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(&[1.0 - 1e-12], &[1.0]).unwrap() < 1e-11);
        let l = bce_loss(&[0.8], &[0.0]).unwrap();
        assert!((l - 1.609_437_912_434_100_4).abs() < 1e-12);
        assert!(bce_loss(&[0.5], &[0.0, 1.0]).is_err());
        assert!(bce_loss(&[0.0, 1.0], &[1.0, 0.0]).unwrap().is_finite());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::from_seed(17);
        let model = init_weights(&[4, 2, 1], &mut rng).unwrap();
        let x = batch(18, 8, 4);
        let labels: Vec<f64> = (0..8).map(|i| (i % 2) as f64).collect();
        let report = check_gradients(&model, &x, &labels, &GradCheckConfig::default()).unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn balanced_labels_on_zero_net_give_zero_output_bias_gradient() {
        let model = MlpModel::zeros(&[3, 4, 1]).unwrap();
        let x = batch(4, 6, 3);
        let labels = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let (_, cache) = model.forward(&x).unwrap();
        let g = model.backward(&cache, &labels).unwrap();
        assert_eq!(g.biases.last().unwrap()[0], 0.0);
    }

    #[test]
    fn duplicated_batch_leaves_gradients_unchanged() {
        let mut rng = Rng::from_seed(21);
        let model = init_weights(&[3, 5, 1], &mut rng).unwrap();
        let x = batch(22, 5, 3);
        let labels = [1.0, 0.0, 1.0, 1.0, 0.0];
        let (_, cache) = model.forward(&x).unwrap();
        let g1 = model.backward(&cache, &labels).unwrap();
        let rows: Vec<Vec<f64>> = (0..10).map(|i| x.row(i % 5).to_vec()).collect();
        let x2 = Tensor2::from_rows(&rows).unwrap();
        let labels2: Vec<f64> = (0..10).map(|i| labels[i % 5]).collect();
        let (_, cache2) = model.forward(&x2).unwrap();
        let g2 = model.backward(&cache2, &labels2).unwrap();
        for (a, b) in g1.flatten().iter().zip(g2.flatten()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300) + 1e-17, "{a} vs {b}");
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = Rng::from_seed(2);
        let mut model = init_weights(&[2, 3, 1], &mut rng).unwrap();
        let x = batch(3, 4, 2);
        let labels = [0.0, 1.0, 1.0, 0.0];
        let (_, cache) = model.forward(&x).unwrap();
        let g = model.backward(&cache, &labels).unwrap();
        let mut adam = AdamState::new(&model);
        model.adam_step(&g, &mut adam).unwrap();
        assert!(matches!(model.backward(&cache, &labels), Err(Error::StaleCache(_))));
        let other = MlpModel::zeros(&[2, 4, 1]).unwrap();
        assert!(other.backward(&cache, &labels).is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_weights(&[4, 8, 1], &mut Rng::from_seed(9)).unwrap();
        let b = init_weights(&[4, 8, 1], &mut Rng::from_seed(9)).unwrap();
        assert_eq!(a, b);
        for (l, w) in a.weights().iter().enumerate() {
            let bound = (6.0 / a.layer_dims()[l] as f64).sqrt();
            assert!(w.as_slice().iter().all(|v| v.abs() <= bound));
        }
        assert!(a.biases().iter().flatten().all(|&b| b == 0.0));
    }

    #[test]
    fn init_rejects_bad_dims() {
        let mut rng = Rng::from_seed(1);
        assert!(init_weights(&[], &mut rng).is_err());
        assert!(init_weights(&[4], &mut rng).is_err());
        assert!(init_weights(&[4, 0, 1], &mut rng).is_err());
        assert!(init_weights(&[4, 2], &mut rng).is_err());
    }

    #[test]
    fn loss_drops_on_separable_pairs() {
        // Pairs (a, b) in 2-D; label 1 when b has the larger first coordinate.
        let mut successes = 0;
        for seed in 0..20u64 {
            let mut rng = Rng::from_seed(1000 + seed);
            let mut model = init_weights(&[4, 8, 1], &mut rng).unwrap();
            let mut adam = AdamState::with_learning_rate(&model, 1e-2);
            let rows: Vec<Vec<f64>> = (0..64)
                .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let labels: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r[2] > r[0]))).collect();
            let x = Tensor2::from_rows(&rows).unwrap();
            let (p0, _) = model.forward(&x).unwrap();
            let initial = bce_loss(&p0, &labels).unwrap();
            for _ in 0..100 {
                let (_, cache) = model.forward(&x).unwrap();
                let g = model.backward(&cache, &labels).unwrap();
                model.adam_step(&g, &mut adam).unwrap();
            }
            let (p1, _) = model.forward(&x).unwrap();
            if bce_loss(&p1, &labels).unwrap() <= 0.5 * initial {
                successes += 1;
            }
        }
        assert!(successes >= 19, "{successes}/20");
    }

    #[test]
    fn checkpoint_round_trips_exactly() {
        let mut rng = Rng::from_seed(12);
        let mut model = init_weights(&[6, 5, 3, 1], &mut rng).unwrap();
        let mut adam = AdamState::new(&model);
        let x = batch(13, 7, 6);
        let labels = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0];
        for _ in 0..3 {
            let (_, cache) = model.forward(&x).unwrap();
            let g = model.backward(&cache, &labels).unwrap();
            model.adam_step(&g, &mut adam).unwrap();
        }
        let json = serde_json::to_string(&model.to_checkpoint(Some(&adam))).unwrap();
        let ckpt: Checkpoint = serde_json::from_str(&json).unwrap();
        let (back, back_adam) = MlpModel::from_checkpoint(&ckpt).unwrap();
        assert_eq!(back.flatten(), model.flatten());
        assert_eq!(back_adam.unwrap(), adam);
    }
}
