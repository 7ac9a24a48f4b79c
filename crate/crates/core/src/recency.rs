//! Self-supervised recency classification.
//!
//! Training data `D_orig` is split three ways: an *unseen* set held back for
//! test-time pairing, an *older* set and a *more recent* set (by id). A network
//! `f` learns which element of a pair `{older, recent}` is the recent one. At
//! test time a new episode `X'_j` is paired with an unseen `X_i`, and the
//! correctness indicator
//!
//! ```text
//! Y_j = 1  if f predicts X'_j as the more recent element
//!       0  otherwise
//! ```
//!
//! feeds the martingale. The two elements are placed into slots by a fair
//! coin independent of everything else. If the stream is exchangeable, the
//! unordered pair carries no information about which element is newer, so
//! `Pr[Y_j = 1] = 1/2` for any deterministic `f`.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::nn::{init_weights, AdamState, Checkpoint, MlpModel, Tensor2};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Hidden layer widths; the input is `2·d` and the output is 1.
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub initial_epochs: usize,
    pub finetune_steps_per_episode: usize,
    pub learning_rate: f64,
    /// `(unseen, older, recent)` fractions of the training episodes.
    pub fractions: [f64; 3],
    /// Keep only the newest `n` episodes in the recent pool.
    pub recent_window: Option<usize>,
    /// Score pairs as `½(f(a,b) + 1 − f(b,a))`.
    pub symmetrized: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 16],
            batch_size: 32,
            initial_epochs: 20,
            finetune_steps_per_episode: 5,
            learning_rate: AdamState::DEFAULT_LEARNING_RATE,
            fractions: [1.0 / 3.0; 3],
            recent_window: None,
            symmetrized: false,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if self.recent_window == Some(0) {
            return Err(Error::Config("recent_window must be positive".into()));
        }
        validate_fractions(self.fractions)
    }
}

fn validate_fractions(fractions: [f64; 3]) -> Result<()> {
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::Config(format!("fractions must be positive, got {fractions:?}")));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("fractions must sum to 1, got {sum}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDatasets {
    pub unseen: Vec<Episode>,
    pub older: Vec<Episode>,
    pub recent: Vec<Episode>,
}

impl SplitDatasets {
    /// Appends a test episode to the recent pool, evicting the oldest entries
    /// beyond `window`.
    pub fn push_recent(&mut self, episode: Episode, window: Option<usize>) {
        self.recent.push(episode);
        if let Some(w) = window {
            if self.recent.len() > w {
                let excess = self.recent.len() - w;
                self.recent.drain(..excess);
            }
        }
    }

    /// Checks that no id occurs in two partitions.
    pub fn is_disjoint(&self) -> bool {
        let mut ids: Vec<u64> = self
            .unseen
            .iter()
            .chain(&self.older)
            .chain(&self.recent)
            .map(|e| e.id)
            .collect();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        ids.len() == n
    }

    pub fn dim(&self) -> usize {
        self.older.first().map_or(0, Episode::dim)
    }
}

/// Three-way split: `round(n·f_unseen)` episodes drawn uniformly as the unseen
/// set, the rest ordered by id with the first `round(n·f_older)` as older.
pub fn make_split(d_orig: &[Episode], fractions: [f64; 3], rng: &mut Rng) -> Result<SplitDatasets> {
    validate_fractions(fractions)?;
    let n = d_orig.len();
    let n_unseen = (n as f64 * fractions[0]).round() as usize;
    let n_older = (n as f64 * fractions[1]).round() as usize;
    if n < 3 || n_unseen == 0 || n_older == 0 || n_unseen + n_older >= n {
        return Err(Error::InsufficientData(format!(
            "{n} episodes cannot be split by {fractions:?} into three nonempty sets"
        )));
    }
    let mut chosen = vec![false; n];
    for i in sample(rng, n, n_unseen) {
        chosen[i] = true;
    }
    let mut unseen = Vec::with_capacity(n_unseen);
    let mut rest = Vec::with_capacity(n - n_unseen);
    for (episode, &c) in d_orig.iter().zip(&chosen) {
        if c {
            unseen.push(episode.clone());
        } else {
            rest.push(episode.clone());
        }
    }
    rest.sort_by_key(|e| e.id);
    let recent = rest.split_off(n_older);
    Ok(SplitDatasets {
        unseen,
        older: rest,
        recent,
    })
}

/// A pair presented to the classifier. `label = 1` means `slot_b` holds the
/// more recent element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairExample {
    pub slot_a: Vec<f64>,
    pub slot_b: Vec<f64>,
    pub label: u8,
    /// 0 places the recent element in `slot_b`, 1 in `slot_a`.
    pub slot_bit: u8,
    pub older_id: u64,
    pub recent_id: u64,
}

impl PairExample {
    pub fn arrange(older: &Episode, recent: &Episode, slot_bit: u8) -> Self {
        let (slot_a, slot_b) = if slot_bit == 0 {
            (older.features.clone(), recent.features.clone())
        } else {
            (recent.features.clone(), older.features.clone())
        };
        Self {
            slot_a,
            slot_b,
            label: 1 - (slot_bit & 1),
            slot_bit: slot_bit & 1,
            older_id: older.id,
            recent_id: recent.id,
        }
    }

    /// The same pair with its slots exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            slot_a: self.slot_b.clone(),
            slot_b: self.slot_a.clone(),
            label: 1 - self.label,
            slot_bit: 1 - self.slot_bit,
            older_id: self.older_id,
            recent_id: self.recent_id,
        }
    }

    pub fn concatenated(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.slot_a.len() * 2);
        x.extend_from_slice(&self.slot_a);
        x.extend_from_slice(&self.slot_b);
        x
    }
}

/// Uniform draw from each pool, uniform slotting.
pub fn sample_pair(older_pool: &[Episode], recent_pool: &[Episode], rng: &mut Rng) -> Result<PairExample> {
    if older_pool.is_empty() {
        return Err(Error::Empty("older pool"));
    }
    if recent_pool.is_empty() {
        return Err(Error::Empty("recent pool"));
    }
    let older = &older_pool[rng.random_range(0..older_pool.len())];
    let recent = &recent_pool[rng.random_range(0..recent_pool.len())];
    let bit = u8::from(rng.random_bool(0.5));
    Ok(PairExample::arrange(older, recent, bit))
}

/// Interface shared by the trainable classifier and scripted stand-ins.
pub trait RecencyModel: Send {
    fn train_initial(&mut self, split: &SplitDatasets, rng: &mut Rng) -> Result<()>;

    /// Predicted label (1 = `slot_b` is more recent).
    fn predict(&mut self, pair: &PairExample) -> Result<u8>;

    fn finetune_step(&mut self, split: &SplitDatasets, rng: &mut Rng) -> Result<()>;

    fn checkpoint(&self) -> Option<Checkpoint> {
        None
    }
}

/// Returns `(predicted_label, y)` where `y = 1` iff the prediction is right.
pub fn predict_pair(model: &mut dyn RecencyModel, pair: &PairExample) -> Result<(u8, u8)> {
    let predicted = model.predict(pair)?;
    Ok((predicted, u8::from(predicted == pair.label)))
}

/// Fraction of `pairs` the model gets right.
pub fn pair_accuracy(model: &mut dyn RecencyModel, pairs: &[PairExample]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("pairs"));
    }
    let mut correct = 0usize;
    for pair in pairs {
        correct += usize::from(predict_pair(model, pair)?.1);
    }
    Ok(correct as f64 / pairs.len() as f64)
}

/// MLP recency classifier `f: 𝒳² → {0, 1}` over concatenated pairs.
#[derive(Debug, Clone)]
pub struct RecencyClassifier {
    model: MlpModel,
    adam: AdamState,
    config: ClassifierConfig,
}

impl RecencyClassifier {
    pub fn new(feature_dim: usize, config: ClassifierConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        if feature_dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        let mut dims = vec![2 * feature_dim];
        dims.extend(&config.hidden);
        dims.push(1);
        let model = init_weights(&dims, rng)?;
        Ok(Self::from_model(model, config))
    }

    pub fn from_model(model: MlpModel, config: ClassifierConfig) -> Self {
        let adam = AdamState::with_learning_rate(&model, config.learning_rate);
        Self { model, adam, config }
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.model.input_dim() / 2
    }

    /// Probability that `slot_b` is the more recent element.
    pub fn score(&self, pair: &PairExample) -> Result<f64> {
        let forward = self.model.predict_proba(&pair.concatenated())?;
        if self.config.symmetrized {
            let backward = self.model.predict_proba(&pair.swapped().concatenated())?;
            Ok(0.5 * (forward + 1.0 - backward))
        } else {
            Ok(forward)
        }
    }

    /// One Adam step on a fresh minibatch of pairs. Returns the batch loss.
    pub fn train_batch(&mut self, older: &[Episode], recent: &[Episode], rng: &mut Rng) -> Result<f64> {
        let d2 = self.model.input_dim();
        let bs = self.config.batch_size;
        let mut data = Vec::with_capacity(bs * d2);
        let mut labels = Vec::with_capacity(bs);
        for _ in 0..bs {
            let pair = sample_pair(older, recent, rng)?;
            if pair.slot_a.len() * 2 != d2 {
                return Err(Error::Dimension {
                    expected: d2 / 2,
                    found: pair.slot_a.len(),
                });
            }
            data.extend_from_slice(&pair.slot_a);
            data.extend_from_slice(&pair.slot_b);
            labels.push(f64::from(pair.label));
        }
        let batch = Tensor2::from_vec(bs, d2, data)?;
        let (probs, cache) = self.model.forward(&batch)?;
        let loss = crate::nn::bce_loss(&probs, &labels)?;
        let grads = self.model.backward(&cache, &labels)?;
        self.model.adam_step(&grads, &mut self.adam)?;
        Ok(loss)
    }

    fn steps_per_epoch(&self, split: &SplitDatasets) -> usize {
        split.older.len().max(split.recent.len()).div_ceil(self.config.batch_size)
    }
}

impl RecencyModel for RecencyClassifier {
    /// `initial_epochs` passes, each of `⌈max(|older|, |recent|) / batch⌉`
    /// steps on freshly drawn pairs.
    fn train_initial(&mut self, split: &SplitDatasets, rng: &mut Rng) -> Result<()> {
        let steps = self.config.initial_epochs * self.steps_per_epoch(split);
        for _ in 0..steps {
            self.train_batch(&split.older, &split.recent, rng)?;
        }
        Ok(())
    }

    /// Tie at exactly 0.5 resolves to label 1.
    fn predict(&mut self, pair: &PairExample) -> Result<u8> {
        Ok(u8::from(self.score(pair)? >= 0.5))
    }

    fn finetune_step(&mut self, split: &SplitDatasets, rng: &mut Rng) -> Result<()> {
        if split.recent.is_empty() {
            return Err(Error::Empty("recent pool"));
        }
        for _ in 0..self.config.finetune_steps_per_episode {
            self.train_batch(&split.older, &split.recent, rng)?;
        }
        Ok(())
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        Some(self.model.to_checkpoint(Some(&self.adam)))
    }
}

/// Always predicts label 1. With fair slotting this makes `Y` a fair coin.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantClassifier;

impl RecencyModel for ConstantClassifier {
    fn train_initial(&mut self, _: &SplitDatasets, _: &mut Rng) -> Result<()> {
        Ok(())
    }

    fn predict(&mut self, _: &PairExample) -> Result<u8> {
        Ok(1)
    }

    fn finetune_step(&mut self, _: &SplitDatasets, _: &mut Rng) -> Result<()> {
        Ok(())
    }
}

/// Answers correctly or not according to a fixed script, then falls back to
/// `fallback` once the script runs out.
#[derive(Debug, Clone)]
pub struct ScriptedClassifier {
    script: Vec<bool>,
    cursor: usize,
    fallback: bool,
}

impl ScriptedClassifier {
    pub fn new(script: Vec<bool>, fallback: bool) -> Self {
        Self {
            script,
            cursor: 0,
            fallback,
        }
    }
}

impl RecencyModel for ScriptedClassifier {
    fn train_initial(&mut self, _: &SplitDatasets, _: &mut Rng) -> Result<()> {
        Ok(())
    }

    fn predict(&mut self, pair: &PairExample) -> Result<u8> {
        let correct = self.script.get(self.cursor).copied().unwrap_or(self.fallback);
        self.cursor += 1;
        Ok(if correct { pair.label } else { 1 - pair.label })
    }

    fn finetune_step(&mut self, _: &SplitDatasets, _: &mut Rng) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn episodes(n: usize, dim: usize, mean: f64, first_id: u64, rng: &mut Rng) -> Vec<Episode> {
        (0..n)
            .map(|i| {
                let f = (0..dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut *rng);
                        mean + z
                    })
                    .collect::<Vec<f64>>();
                Episode::new(first_id + i as u64, f).unwrap()
            })
            .collect()
    }

    fn numbered(n: usize) -> Vec<Episode> {
        (0..n).map(|i| Episode::new(i as u64, vec![i as f64]).unwrap()).collect()
    }

    fn split_of(older: Vec<Episode>, recent: Vec<Episode>) -> SplitDatasets {
        SplitDatasets {
            unseen: Vec::new(),
            older,
            recent,
        }
    }

    #[test]
    fn paper_sized_split_is_even() {
        let mut rng = Rng::from_seed(1);
        let s = make_split(&numbered(639), [1.0 / 3.0; 3], &mut rng).unwrap();
        assert_eq!((s.unseen.len(), s.older.len(), s.recent.len()), (213, 213, 213));
        assert!(s.is_disjoint());
        let last_older = s.older.iter().map(|e| e.id).max().unwrap();
        assert!(s.recent.iter().all(|e| e.id > last_older));
    }

    #[test]
    fn minimal_split_orders_remaining_pair() {
        for seed in 0..10 {
            let mut rng = Rng::from_seed(seed);
            let s = make_split(&numbered(3), [1.0 / 3.0; 3], &mut rng).unwrap();
            assert_eq!((s.unseen.len(), s.older.len(), s.recent.len()), (1, 1, 1));
            assert!(s.older[0].id < s.recent[0].id);
        }
    }

    #[test]
    fn uneven_fractions() {
        let mut rng = Rng::from_seed(2);
        let s = make_split(&numbered(100), [0.5, 0.25, 0.25], &mut rng).unwrap();
        assert_eq!((s.unseen.len(), s.older.len(), s.recent.len()), (50, 25, 25));
        assert!(s.is_disjoint());
    }

    #[test]
    fn split_rejects_too_few_or_bad_fractions() {
        let mut rng = Rng::from_seed(3);
        assert!(matches!(
            make_split(&numbered(2), [1.0 / 3.0; 3], &mut rng),
            Err(Error::InsufficientData(_))
        ));
        assert!(make_split(&numbered(10), [0.5, 0.5, 0.0], &mut rng).is_err());
        assert!(make_split(&numbered(10), [0.5, 0.3, 0.3], &mut rng).is_err());
    }

    #[test]
    fn unseen_set_is_uniform() {
        // Each index should land in unseen about one third of the time.
        let data = numbered(30);
        let mut hits = [0u32; 30];
        for seed in 0..3000 {
            let mut rng = Rng::from_seed(seed);
            for e in make_split(&data, [1.0 / 3.0; 3], &mut rng).unwrap().unseen {
                hits[e.id as usize] += 1;
            }
        }
        for h in hits {
            assert!((h as f64 / 3000.0 - 1.0 / 3.0).abs() < 0.05, "{hits:?}");
        }
    }

    #[test]
    fn slot_bit_forces_assignment() {
        let older = Episode::new(1, vec![0.0]).unwrap();
        let recent = Episode::new(2, vec![9.0]).unwrap();
        let p0 = PairExample::arrange(&older, &recent, 0);
        assert_eq!((p0.slot_b.clone(), p0.label), (vec![9.0], 1));
        let p1 = PairExample::arrange(&older, &recent, 1);
        assert_eq!((p1.slot_a.clone(), p1.label), (vec![9.0], 0));
        assert_eq!(p0.swapped(), p1);
    }

    #[test]
    fn slotting_is_fair() {
        let mut rng = Rng::from_seed(11);
        let older = numbered(5);
        let recent = numbered(7);
        let n = 10_000;
        let ones: u32 = (0..n)
            .map(|_| u32::from(sample_pair(&older, &recent, &mut rng).unwrap().label))
            .sum();
        assert!((f64::from(ones) / n as f64 - 0.5).abs() <= 0.02);
    }

    #[test]
    fn empty_pool_is_an_error() {
        let mut rng = Rng::from_seed(0);
        assert!(sample_pair(&[], &numbered(1), &mut rng).is_err());
        assert!(sample_pair(&numbered(1), &[], &mut rng).is_err());
    }

    #[test]
    fn zero_model_ties_to_label_one() {
        let model = MlpModel::zeros(&[4, 3, 1]).unwrap();
        let mut clf = RecencyClassifier::from_model(model, ClassifierConfig::default());
        let a = Episode::new(0, vec![1.0, -2.0]).unwrap();
        let b = Episode::new(1, vec![5.0, 0.5]).unwrap();
        for bit in [0, 1] {
            let pair = PairExample::arrange(&a, &b, bit);
            assert_eq!(predict_pair(&mut clf, &pair).unwrap().0, 1);
        }
    }

    #[test]
    fn flipped_label_gives_zero_indicator() {
        // Logit 10·b[0]: confidently "slot b is recent" when b[0] = 1.
        let w = Tensor2::from_vec(1, 2, vec![0.0, 10.0]).unwrap();
        let model = MlpModel::from_parameters(vec![2, 1], vec![w], vec![vec![0.0]]).unwrap();
        let mut clf = RecencyClassifier::from_model(model, ClassifierConfig::default());
        let a = Episode::new(0, vec![0.0]).unwrap();
        let b = Episode::new(1, vec![1.0]).unwrap();
        let mut pair = PairExample::arrange(&a, &b, 0);
        assert_eq!(predict_pair(&mut clf, &pair).unwrap(), (1, 1));
        pair.label = 0;
        assert_eq!(predict_pair(&mut clf, &pair).unwrap(), (1, 0));
    }

    #[test]
    fn scripted_classifier_follows_script() {
        let mut clf = ScriptedClassifier::new(vec![true, false], true);
        let a = Episode::new(0, vec![0.0]).unwrap();
        let b = Episode::new(1, vec![1.0]).unwrap();
        let ys: Vec<u8> = (0..4)
            .map(|i| predict_pair(&mut clf, &PairExample::arrange(&a, &b, i % 2)).unwrap().1)
            .collect();
        assert_eq!(ys, vec![1, 0, 1, 1]);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let mut rng = Rng::from_seed(0);
        let mut clf = RecencyClassifier::new(3, ClassifierConfig::default(), &mut rng).unwrap();
        assert_eq!(clf.model().input_dim(), 6);
        let a = Episode::new(0, vec![0.0; 2]).unwrap();
        let pair = PairExample::arrange(&a, &a, 0);
        assert!(predict_pair(&mut clf, &pair).is_err());
    }

    fn trained_on_shift(seed: u64, config: ClassifierConfig) -> RecencyClassifier {
        let root = Rng::from_seed(seed);
        let mut data = root.split("data");
        let older = episodes(100, 4, 0.0, 0, &mut data);
        let recent = episodes(100, 4, 3.0, 100, &mut data);
        let split = split_of(older, recent);
        let mut clf = RecencyClassifier::new(4, config, &mut root.split("init")).unwrap();
        clf.train_initial(&split, &mut root.split("train")).unwrap();
        clf
    }

    fn held_out_pairs(seed: u64, n: usize, recent_mean: f64) -> Vec<PairExample> {
        let mut rng = Rng::from_seed(seed).split("heldout");
        let older = episodes(n, 4, 0.0, 0, &mut rng);
        let recent = episodes(n, 4, recent_mean, n as u64, &mut rng);
        older
            .iter()
            .zip(&recent)
            .map(|(o, r)| {
                let bit = u8::from(rng.random_bool(0.5));
                PairExample::arrange(o, r, bit)
            })
            .collect()
    }

    #[test]
    fn learns_a_separable_shift() {
        let config = ClassifierConfig {
            initial_epochs: 50,
            ..ClassifierConfig::default()
        };
        let mut clf = trained_on_shift(5, config);
        let acc = pair_accuracy(&mut clf, &held_out_pairs(99, 1000, 3.0)).unwrap();
        assert!(acc >= 0.9, "accuracy {acc}");
    }

    #[test]
    fn identical_distributions_stay_at_chance() {
        let root = Rng::from_seed(6);
        let mut data = root.split("data");
        let older = episodes(100, 4, 0.0, 0, &mut data);
        let recent = episodes(100, 4, 0.0, 100, &mut data);
        let split = split_of(older, recent);
        let mut clf = RecencyClassifier::new(4, ClassifierConfig::default(), &mut root.split("init")).unwrap();
        clf.train_initial(&split, &mut root.split("train")).unwrap();
        let acc = pair_accuracy(&mut clf, &held_out_pairs(7, 1000, 0.0)).unwrap();
        assert!((acc - 0.5).abs() <= 0.05, "accuracy {acc}");
    }

    #[test]
    fn zero_epochs_and_zero_steps_leave_model_unchanged() {
        let config = ClassifierConfig {
            initial_epochs: 0,
            finetune_steps_per_episode: 0,
            ..ClassifierConfig::default()
        };
        let mut rng = Rng::from_seed(8);
        let mut clf = RecencyClassifier::new(2, config, &mut rng).unwrap();
        let before = clf.model().flatten();
        let split = split_of(numbered(3), numbered(3));
        let split = SplitDatasets {
            older: split.older.into_iter().map(|e| Episode::new(e.id, vec![0.0, 1.0]).unwrap()).collect(),
            recent: split.recent.into_iter().map(|e| Episode::new(e.id, vec![1.0, 0.0]).unwrap()).collect(),
            unseen: Vec::new(),
        };
        clf.train_initial(&split, &mut rng).unwrap();
        clf.finetune_step(&split, &mut rng).unwrap();
        assert_eq!(clf.model().flatten(), before);
        assert_eq!(clf.adam().step_count, 0);
    }

    #[test]
    fn training_is_deterministic() {
        let a = trained_on_shift(9, ClassifierConfig::default());
        let b = trained_on_shift(9, ClassifierConfig::default());
        assert_eq!(a.model().flatten(), b.model().flatten());
        assert_eq!(a.adam(), b.adam());
    }

    #[test]
    fn symmetrized_score_is_antisymmetric() {
        let config = ClassifierConfig {
            symmetrized: true,
            ..ClassifierConfig::default()
        };
        let mut rng = Rng::from_seed(10);
        let clf = RecencyClassifier::new(3, config, &mut rng).unwrap();
        let a = Episode::new(0, vec![0.3, -1.0, 2.0]).unwrap();
        let b = Episode::new(1, vec![1.5, 0.2, -0.7]).unwrap();
        let pair = PairExample::arrange(&a, &b, 0);
        let s = clf.score(&pair).unwrap();
        let t = clf.score(&pair.swapped()).unwrap();
        assert!((s + t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_evicts_oldest_recent_entries() {
        let mut split = split_of(numbered(2), numbered(3));
        split.push_recent(Episode::new(10, vec![0.0]).unwrap(), Some(2));
        let ids: Vec<u64> = split.recent.iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![2, 10]);
    }
}
