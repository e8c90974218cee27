//! Linear-chain conditional random field over observation sequences.
//!
//! Features are dense indicators: one transition feature per ordered label
//! pair and one state feature per (label, symbol) pair. Inference runs in
//! log space (forward for the partition function, forward-backward for the
//! marginals the gradient needs, max-sum for decoding). Training maximizes
//! the Gaussian-penalized conditional log-likelihood by L-BFGS; sequences
//! labeled with a task class train under that class repeated at every step.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::TrainMeta;
use crate::optim::lbfgs_minimize;
use crate::vectorize::ObservationSequence;

/// On-disk model format version.
pub const CRF_FORMAT_VERSION: u32 = 1;

/// The dense feature index space: `|Y|^2` transition features followed by
/// `|Y| * |M|` state features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSpace {
    n_labels: usize,
    n_symbols: usize,
}

impl FeatureSpace {
    pub fn new(n_labels: usize, n_symbols: usize) -> Self {
        Self {
            n_labels,
            n_symbols,
        }
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn transition_index(&self, from: usize, to: usize) -> usize {
        from * self.n_labels + to
    }

    pub fn state_index(&self, label: usize, symbol: usize) -> usize {
        self.n_labels * self.n_labels + label * self.n_symbols + symbol
    }

    pub fn len(&self) -> usize {
        self.n_labels * self.n_labels + self.n_labels * self.n_symbols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A sequence paired with one label per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPath {
    symbols: Vec<String>,
    labels: Vec<String>,
}

impl LabeledPath {
    pub fn new(symbols: Vec<String>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != symbols.len() {
            return Err(Error::LengthMismatch {
                symbols: symbols.len(),
                labels: labels.len(),
            });
        }
        Ok(Self { symbols, labels })
    }

    /// Builds the constant label path (the sequence's task class at every
    /// step), which is how whole-sequence classes enter CRF training.
    pub fn constant(seq: &ObservationSequence) -> Result<Self> {
        let class = seq.label.clone().ok_or_else(|| {
            Error::UnlabeledSequence(seq.source.clone().unwrap_or_else(|| "<unnamed>".into()))
        })?;
        Ok(Self {
            labels: vec![class; seq.symbols.len()],
            symbols: seq.symbols.clone(),
        })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Exponentiated weights, rebuilt once per objective evaluation so the
/// lattice passes run on multiply-adds instead of per-cell `exp` calls.
struct ExpTables {
    trans: Vec<f64>,
    state: Vec<f64>,
    n_labels: usize,
    n_symbols: usize,
}

impl ExpTables {
    fn new(model: &CrfModel) -> Self {
        let n = model.labels.len();
        let m = model.alphabet.len();
        let mut trans = vec![0.0; n * n];
        let mut state = vec![0.0; n * m];
        for a in 0..n {
            for b in 0..n {
                trans[a * n + b] = model.transition_weights[a][b].exp();
            }
        }
        for y in 0..n {
            for k in 0..m {
                state[y * m + k] = model.state_weights[y][k].exp();
            }
        }
        Self {
            trans,
            state,
            n_labels: n,
            n_symbols: m,
        }
    }

    #[inline]
    fn trans(&self, a: usize, b: usize) -> f64 {
        self.trans[a * self.n_labels + b]
    }

    #[inline]
    fn state(&self, y: usize, symbol: usize) -> f64 {
        self.state[y * self.n_symbols + symbol]
    }
}

/// Scaled forward pass over the label lattice into flat `t * n` scratch:
/// normalized alphas plus the per-step scale sums, whose log-sum is `log Z`.
fn scaled_forward_into(
    tables: &ExpTables,
    xs: &[usize],
    alpha: &mut Vec<f64>,
    scales: &mut Vec<f64>,
) {
    let n = tables.n_labels;
    let t_len = xs.len();
    alpha.clear();
    alpha.resize(t_len * n, 0.0);
    scales.clear();
    scales.resize(t_len, 0.0);
    for y in 0..n {
        alpha[y] = tables.state(y, xs[0]);
    }
    for t in 0..t_len {
        if t > 0 {
            let (prev_rows, cur_rows) = alpha.split_at_mut(t * n);
            let prev = &prev_rows[(t - 1) * n..];
            let cur = &mut cur_rows[..n];
            for (y, out) in cur.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (p, &a) in prev.iter().enumerate().take(n) {
                    acc += a * tables.trans(p, y);
                }
                *out = acc * tables.state(y, xs[t]);
            }
        }
        let row = &mut alpha[t * n..(t + 1) * n];
        let s: f64 = row.iter().sum();
        scales[t] = s;
        if s > 0.0 && s.is_finite() {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
    }
}

/// Backward pass under the forward scales; normalized so that
/// `alpha[t][y] * beta[t][y]` is the exact unary posterior.
fn scaled_backward_into(tables: &ExpTables, xs: &[usize], scales: &[f64], beta: &mut Vec<f64>) {
    let n = tables.n_labels;
    let t_len = xs.len();
    beta.clear();
    beta.resize(t_len * n, 0.0);
    for v in beta[(t_len - 1) * n..].iter_mut() {
        *v = 1.0;
    }
    for t in (0..t_len - 1).rev() {
        let (cur_rows, next_rows) = beta.split_at_mut((t + 1) * n);
        let next = &next_rows[..n];
        let cur = &mut cur_rows[t * n..];
        let scale = scales[t + 1];
        let usable = scale > 0.0 && scale.is_finite();
        for (y, out) in cur.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += tables.trans(y, j) * tables.state(j, xs[t + 1]) * next[j];
            }
            *out = if usable { acc / scale } else { 0.0 };
        }
    }
}

fn log_scales(scales: &[f64]) -> f64 {
    scales
        .iter()
        .map(|&s| if s > 0.0 { s.ln() } else { f64::NEG_INFINITY })
        .sum()
}

/// A label path pre-encoded to symbol and label indices.
struct EncodedPath {
    xs: Vec<usize>,
    ys: Vec<usize>,
}

#[derive(Default)]
struct CrfScratch {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    scales: Vec<f64>,
}

/// Linear-chain CRF parameters: per-(label, label) transition weights and
/// per-(label, symbol) state weights, with a Gaussian prior variance.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    labels: Vec<String>,
    alphabet: Vec<String>,
    sigma2: f64,
    transition_weights: Vec<Vec<f64>>,
    state_weights: Vec<Vec<f64>>,
    train_meta: Option<TrainMeta>,
    label_index: HashMap<String, usize>,
    symbol_index: HashMap<String, usize>,
}

impl CrfModel {
    /// A model with all weights zero.
    pub fn zeroed(labels: Vec<String>, alphabet: Vec<String>, sigma2: f64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidModel("label set is empty".into()));
        }
        if alphabet.is_empty() {
            return Err(Error::InvalidModel("alphabet is empty".into()));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive (got {sigma2})"
            )));
        }
        let mut label_index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if label_index.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidModel(format!("duplicate label `{l}`")));
            }
        }
        let mut symbol_index = HashMap::new();
        for (k, s) in alphabet.iter().enumerate() {
            if symbol_index.insert(s.clone(), k).is_some() {
                return Err(Error::InvalidModel(format!("duplicate symbol `{s}`")));
            }
        }
        let n = labels.len();
        let m = alphabet.len();
        Ok(Self {
            labels,
            alphabet,
            sigma2,
            transition_weights: vec![vec![0.0; n]; n],
            state_weights: vec![vec![0.0; m]; n],
            train_meta: None,
            label_index,
            symbol_index,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn transition_weights(&self) -> &[Vec<f64>] {
        &self.transition_weights
    }

    pub fn state_weights(&self) -> &[Vec<f64>] {
        &self.state_weights
    }

    pub fn train_meta(&self) -> Option<&TrainMeta> {
        self.train_meta.as_ref()
    }

    pub fn feature_space(&self) -> FeatureSpace {
        FeatureSpace::new(self.labels.len(), self.alphabet.len())
    }

    /// Weights flattened in [`FeatureSpace`] order.
    pub fn weights_flat(&self) -> Vec<f64> {
        let space = self.feature_space();
        let mut w = vec![0.0; space.len()];
        for (a, row) in self.transition_weights.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                w[space.transition_index(a, b)] = v;
            }
        }
        for (y, row) in self.state_weights.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                w[space.state_index(y, k)] = v;
            }
        }
        w
    }

    pub fn set_weights_flat(&mut self, weights: &[f64]) -> Result<()> {
        let space = self.feature_space();
        if weights.len() != space.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} weights, got {}",
                space.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidModel("weights must be finite".into()));
        }
        for a in 0..self.labels.len() {
            for b in 0..self.labels.len() {
                self.transition_weights[a][b] = weights[space.transition_index(a, b)];
            }
        }
        for y in 0..self.labels.len() {
            for k in 0..self.alphabet.len() {
                self.state_weights[y][k] = weights[space.state_index(y, k)];
            }
        }
        Ok(())
    }

    fn encode_symbols(&self, symbols: &[String]) -> Result<Vec<usize>> {
        if symbols.is_empty() {
            return Err(Error::EmptySequence);
        }
        symbols
            .iter()
            .map(|s| {
                self.symbol_index
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::UnknownSymbol(s.clone()))
            })
            .collect()
    }

    fn encode_labels(&self, labels: &[String]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.label_index
                    .get(l)
                    .copied()
                    .ok_or_else(|| Error::UnknownLabel(l.clone()))
            })
            .collect()
    }

    /// Unnormalized log-score of one label path for one sequence.
    pub fn path_score(&self, path: &LabeledPath) -> Result<f64> {
        let xs = self.encode_symbols(path.symbols())?;
        let ys = self.encode_labels(path.labels())?;
        let mut score = self.state_weights[ys[0]][xs[0]];
        for t in 1..xs.len() {
            score += self.transition_weights[ys[t - 1]][ys[t]] + self.state_weights[ys[t]][xs[t]];
        }
        Ok(score)
    }

    fn encode_path(&self, path: &LabeledPath) -> Result<EncodedPath> {
        Ok(EncodedPath {
            xs: self.encode_symbols(path.symbols())?,
            ys: self.encode_labels(path.labels())?,
        })
    }

    /// Log of the partition function `Z(X)` over all label paths.
    pub fn log_partition(&self, seq: &ObservationSequence) -> Result<f64> {
        let xs = self.encode_symbols(&seq.symbols)?;
        let tables = ExpTables::new(self);
        let mut scratch = CrfScratch::default();
        scaled_forward_into(&tables, &xs, &mut scratch.alpha, &mut scratch.scales);
        Ok(log_scales(&scratch.scales))
    }

    fn path_score_encoded(&self, path: &EncodedPath) -> f64 {
        let (xs, ys) = (&path.xs, &path.ys);
        let mut score = self.state_weights[ys[0]][xs[0]];
        for t in 1..xs.len() {
            score += self.transition_weights[ys[t - 1]][ys[t]] + self.state_weights[ys[t]][xs[t]];
        }
        score
    }

    fn penalty(&self) -> f64 {
        if !self.sigma2.is_finite() {
            return 0.0;
        }
        self.weights_flat()
            .iter()
            .map(|w| w * w / (2.0 * self.sigma2))
            .sum()
    }

    /// Penalized conditional log-likelihood and its gradient in one pass
    /// (the lattice passes are shared between the two).
    fn value_and_gradient_encoded(
        &self,
        corpus: &[EncodedPath],
        scratch: &mut CrfScratch,
    ) -> (f64, Vec<f64>) {
        let space = self.feature_space();
        let n = self.labels.len();
        let tables = ExpTables::new(self);
        let mut value = 0.0;
        let mut grad = vec![0.0; space.len()];
        for path in corpus {
            let (xs, ys) = (&path.xs, &path.ys);
            let t_len = xs.len();
            scaled_forward_into(&tables, xs, &mut scratch.alpha, &mut scratch.scales);
            scaled_backward_into(&tables, xs, &scratch.scales, &mut scratch.beta);
            value += self.path_score_encoded(path) - log_scales(&scratch.scales);

            grad[space.state_index(ys[0], xs[0])] += 1.0;
            for t in 1..t_len {
                grad[space.transition_index(ys[t - 1], ys[t])] += 1.0;
                grad[space.state_index(ys[t], xs[t])] += 1.0;
            }
            for t in 0..t_len {
                let a_row = &scratch.alpha[t * n..(t + 1) * n];
                let b_row = &scratch.beta[t * n..(t + 1) * n];
                for y in 0..n {
                    grad[space.state_index(y, xs[t])] -= a_row[y] * b_row[y];
                }
            }
            for t in 1..t_len {
                let scale = scratch.scales[t];
                if !(scale > 0.0 && scale.is_finite()) {
                    continue;
                }
                let a_prev = &scratch.alpha[(t - 1) * n..t * n];
                let b_cur = &scratch.beta[t * n..(t + 1) * n];
                for a in 0..n {
                    for b in 0..n {
                        let marginal = a_prev[a]
                            * tables.trans(a, b)
                            * tables.state(b, xs[t])
                            * b_cur[b]
                            / scale;
                        grad[space.transition_index(a, b)] -= marginal;
                    }
                }
            }
        }
        value -= self.penalty();
        if self.sigma2.is_finite() {
            for (g, w) in grad.iter_mut().zip(self.weights_flat()) {
                *g -= w / self.sigma2;
            }
        }
        (value, grad)
    }

    /// Penalized conditional log-likelihood of a labeled corpus:
    /// `sum_i [score(y_i, x_i) - log Z(x_i)] - sum_k w_k^2 / (2 sigma2)`.
    pub fn conditional_log_likelihood(&self, corpus: &[LabeledPath]) -> Result<f64> {
        let tables = ExpTables::new(self);
        let mut scratch = CrfScratch::default();
        let mut total = 0.0;
        for path in corpus {
            let encoded = self.encode_path(path)?;
            scaled_forward_into(&tables, &encoded.xs, &mut scratch.alpha, &mut scratch.scales);
            total += self.path_score_encoded(&encoded) - log_scales(&scratch.scales);
        }
        Ok(total - self.penalty())
    }

    /// Gradient of the penalized conditional log-likelihood, in
    /// [`FeatureSpace`] order: empirical counts minus expected counts under
    /// the model, minus `w / sigma2`.
    /// Gradient of the penalized conditional log-likelihood, in
    /// [`FeatureSpace`] order: empirical counts minus expected counts under
    /// the model (via forward-backward marginals), minus `w / sigma2`.
    pub fn gradient(&self, corpus: &[LabeledPath]) -> Result<Vec<f64>> {
        let encoded = corpus
            .iter()
            .map(|p| self.encode_path(p))
            .collect::<Result<Vec<_>>>()?;
        let mut scratch = CrfScratch::default();
        Ok(self.value_and_gradient_encoded(&encoded, &mut scratch).1)
    }

    /// Most probable label path; ties resolve to the lowest label index.
    pub fn viterbi_labels(&self, seq: &ObservationSequence) -> Result<Vec<String>> {
        let xs = self.encode_symbols(&seq.symbols)?;
        let n = self.labels.len();
        let t_len = xs.len();
        let mut delta: Vec<f64> = (0..n).map(|y| self.state_weights[y][xs[0]]).collect();
        let mut backptr = vec![vec![0usize; n]; t_len];
        for t in 1..t_len {
            let mut next = vec![f64::NEG_INFINITY; n];
            for y in 0..n {
                let mut best_prev = 0usize;
                let mut best = f64::NEG_INFINITY;
                for prev in 0..n {
                    let cand = delta[prev] + self.transition_weights[prev][y];
                    if cand > best {
                        best = cand;
                        best_prev = prev;
                    }
                }
                next[y] = best + self.state_weights[y][xs[t]];
                backptr[t][y] = best_prev;
            }
            delta = next;
        }
        let mut last = 0usize;
        for y in 1..n {
            if delta[y] > delta[last] {
                last = y;
            }
        }
        let mut path = vec![0usize; t_len];
        path[t_len - 1] = last;
        for t in (1..t_len).rev() {
            path[t - 1] = backptr[t][path[t]];
        }
        Ok(path.into_iter().map(|y| self.labels[y].clone()).collect())
    }

    /// Sequence class: the majority label of the decoded path, ties going
    /// to the lowest label index.
    pub fn classify(&self, seq: &ObservationSequence) -> Result<String> {
        let path = self.viterbi_labels(seq)?;
        let mut counts = vec![0usize; self.labels.len()];
        for label in &path {
            counts[self.label_index[label]] += 1;
        }
        let mut best = 0usize;
        for y in 1..counts.len() {
            if counts[y] > counts[best] {
                best = y;
            }
        }
        Ok(self.labels[best].clone())
    }

    pub fn to_json(&self) -> String {
        let file = CrfModelFile {
            version: CRF_FORMAT_VERSION,
            labels: self.labels.clone(),
            alphabet: self.alphabet.clone(),
            sigma2: self.sigma2,
            transition_weights: self.transition_weights.clone(),
            state_weights: self.state_weights.clone(),
            train_meta: self.train_meta,
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CrfModelFile = serde_json::from_str(text)?;
        if file.version != CRF_FORMAT_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported model format version {}",
                file.version
            )));
        }
        let mut model = Self::zeroed(file.labels, file.alphabet, file.sigma2)?;
        let n = model.labels.len();
        let m = model.alphabet.len();
        if file.transition_weights.len() != n
            || file.transition_weights.iter().any(|r| r.len() != n)
        {
            return Err(Error::InvalidModel(format!(
                "transition weights must be {n} x {n}"
            )));
        }
        if file.state_weights.len() != n || file.state_weights.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidModel(format!(
                "state weights must be {n} x {m}"
            )));
        }
        let all_finite = file
            .transition_weights
            .iter()
            .chain(&file.state_weights)
            .all(|row| row.iter().all(|w| w.is_finite()));
        if !all_finite {
            return Err(Error::InvalidModel("weights must be finite".into()));
        }
        model.transition_weights = file.transition_weights;
        model.state_weights = file.state_weights;
        model.train_meta = file.train_meta;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct CrfModelFile {
    version: u32,
    labels: Vec<String>,
    alphabet: Vec<String>,
    sigma2: f64,
    transition_weights: Vec<Vec<f64>>,
    state_weights: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    train_meta: Option<TrainMeta>,
}

/// CRF training settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrfTrainConfig {
    /// Gaussian prior variance of the weight penalty.
    pub sigma2: f64,
    /// Convergence threshold on the gradient infinity norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Recorded in the model metadata; training itself is deterministic.
    pub seed: u64,
}

impl Default for CrfTrainConfig {
    fn default() -> Self {
        Self {
            sigma2: 10.0,
            tolerance: 1e-3,
            max_iterations: 200,
            seed: 0,
        }
    }
}

/// Trains a single CRF on class-labeled sequences over a fixed alphabet and
/// returns the model with the (maximized) objective trace across accepted
/// optimizer steps.
pub fn train_crf_traced(
    corpus: &[ObservationSequence],
    alphabet: &[String],
    config: &CrfTrainConfig,
) -> Result<(CrfModel, Vec<f64>)> {
    let mut classes = BTreeSet::new();
    let mut paths = Vec::new();
    for seq in corpus {
        if seq.is_empty() {
            continue; // nothing to score
        }
        let path = LabeledPath::constant(seq)?;
        classes.insert(path.labels()[0].clone());
        paths.push(path);
    }
    if paths.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if classes.len() < 2 {
        return Err(Error::DegenerateCorpus);
    }
    let labels: Vec<String> = classes.into_iter().collect();
    let mut model = CrfModel::zeroed(labels, alphabet.to_vec(), config.sigma2)?;

    // Encode once; the optimizer closure then runs allocation-light.
    let encoded = paths
        .iter()
        .map(|p| model.encode_path(p))
        .collect::<Result<Vec<_>>>()?;

    let x0 = model.weights_flat();
    let mut worker = model.clone();
    let mut scratch = CrfScratch::default();
    let objective = |w: &[f64]| {
        worker.set_weights_flat(w).expect("dimensions fixed");
        let (value, grad) = worker.value_and_gradient_encoded(&encoded, &mut scratch);
        (-value, grad.into_iter().map(|g| -g).collect())
    };
    let outcome = lbfgs_minimize(objective, x0, config.tolerance, config.max_iterations);

    model.set_weights_flat(&outcome.x)?;
    model.train_meta = Some(TrainMeta {
        seed: config.seed,
        iters: outcome.iterations,
        loglik: -outcome.value,
    });
    let trace = outcome.trace.into_iter().map(|v| -v).collect();
    Ok((model, trace))
}

/// Trains a single CRF on class-labeled sequences.
pub fn train_crf(
    corpus: &[ObservationSequence],
    alphabet: &[String],
    config: &CrfTrainConfig,
) -> Result<CrfModel> {
    train_crf_traced(corpus, alphabet, config).map(|(model, _)| model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(symbols: &[&str], label: Option<&str>) -> ObservationSequence {
        ObservationSequence::new(
            symbols.iter().map(|s| s.to_string()).collect(),
            label.map(str::to_string),
        )
    }

    /// Independent log-sum-exp for the enumeration oracles.
    fn log_sum_exp(values: &[f64]) -> f64 {
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
    }

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn random_model(rng: &mut ChaCha8Rng, n_labels: usize, n_symbols: usize) -> CrfModel {
        let labels: Vec<String> = (0..n_labels).map(|i| format!("L{i}")).collect();
        let alphabet: Vec<String> = (0..n_symbols).map(|i| format!("s{i}")).collect();
        let mut model = CrfModel::zeroed(labels, alphabet, 10.0).unwrap();
        let w: Vec<f64> = (0..model.feature_space().len())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        model.set_weights_flat(&w).unwrap();
        model
    }

    /// All label paths of a given length, in odometer order.
    fn all_paths(n_labels: usize, len: usize) -> Vec<Vec<usize>> {
        let mut paths = vec![vec![0usize; len]];
        let mut current = vec![0usize; len];
        loop {
            let mut k = len;
            loop {
                if k == 0 {
                    return paths;
                }
                k -= 1;
                current[k] += 1;
                if current[k] < n_labels {
                    break;
                }
                current[k] = 0;
            }
            paths.push(current.clone());
        }
    }

    fn path_of(model: &CrfModel, symbols: &[&str], ys: &[usize]) -> LabeledPath {
        LabeledPath::new(
            symbols.iter().map(|s| s.to_string()).collect(),
            ys.iter().map(|&y| model.labels()[y].clone()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_partition_is_uniform() {
        let model = CrfModel::zeroed(names(&["a", "b", "c"]), names(&["x", "y"]), 10.0).unwrap();
        let s = seq(&["x", "y", "x", "x"], None);
        assert_relative_eq!(
            model.log_partition(&s).unwrap(),
            4.0 * 3.0_f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn constant_state_weight_shift_moves_log_partition_by_ct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = random_model(&mut rng, 3, 2);
        let s = seq(&["s0", "s1", "s0", "s1", "s1"], None);
        let before = model.log_partition(&s).unwrap();
        let space = model.feature_space();
        let mut w = model.weights_flat();
        let c = 0.7;
        for y in 0..3 {
            for k in 0..2 {
                w[space.state_index(y, k)] += c;
            }
        }
        model.set_weights_flat(&w).unwrap();
        let after = model.log_partition(&s).unwrap();
        assert_relative_eq!(after, before + c * 5.0, epsilon = 1e-9);
    }

    #[test]
    fn partition_and_viterbi_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let n_labels = rng.random_range(1..=3);
            let n_symbols = rng.random_range(1..=3);
            let t_len = rng.random_range(1..=5);
            let model = random_model(&mut rng, n_labels, n_symbols);
            let symbol_names: Vec<String> =
                (0..t_len).map(|_| format!("s{}", rng.random_range(0..n_symbols))).collect();
            let symbols: Vec<&str> = symbol_names.iter().map(|s| s.as_str()).collect();
            let s = seq(&symbols, None);

            let mut scores = Vec::new();
            for ys in all_paths(n_labels, t_len) {
                scores.push(model.path_score(&path_of(&model, &symbols, &ys)).unwrap());
            }
            let brute_log_z = log_sum_exp(&scores);
            let log_z = model.log_partition(&s).unwrap();
            assert_relative_eq!(log_z, brute_log_z, epsilon = 1e-8);

            // The conditional distribution must normalize.
            let total: f64 = scores.iter().map(|sc| (sc - log_z).exp()).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-8);

            // Decoded path reaches the enumerated maximum score.
            let decoded = model.viterbi_labels(&s).unwrap();
            let decoded_path = LabeledPath::new(
                symbol_names.clone(),
                decoded,
            )
            .unwrap();
            let decoded_score = model.path_score(&decoded_path).unwrap();
            let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_relative_eq!(decoded_score, best, epsilon = 1e-8);
        }
    }

    #[test]
    fn zero_weight_likelihood_is_uniform() {
        let model = CrfModel::zeroed(names(&["a", "b"]), names(&["x"]), f64::INFINITY).unwrap();
        let paths = vec![
            LabeledPath::new(names(&["x", "x", "x"]), names(&["a", "a", "a"])).unwrap(),
            LabeledPath::new(names(&["x", "x"]), names(&["b", "b"])).unwrap(),
        ];
        let expected = -(3.0 + 2.0) * 2.0_f64.ln();
        assert_relative_eq!(
            model.conditional_log_likelihood(&paths).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gradient_hand_oracle_uniform_marginals() {
        // Zero weights, one sequence of a single repeated symbol, |Y| = 2,
        // true label the first one: state gradient is T * (1 - 1/2).
        let model = CrfModel::zeroed(names(&["a", "b"]), names(&["x"]), f64::INFINITY).unwrap();
        let t_len = 6;
        let path = LabeledPath::new(
            vec!["x".to_string(); t_len],
            vec!["a".to_string(); t_len],
        )
        .unwrap();
        let grad = model.gradient(&[path]).unwrap();
        let space = model.feature_space();
        assert_relative_eq!(
            grad[space.state_index(0, 0)],
            t_len as f64 * 0.5,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            grad[space.state_index(1, 0)],
            -(t_len as f64) * 0.5,
            epsilon = 1e-10
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let corpus = vec![
            path_of(
                &random_model(&mut rng, 3, 3),
                &["s0", "s2", "s1", "s1"],
                &[0, 1, 2, 1],
            ),
            path_of(
                &random_model(&mut rng, 3, 3),
                &["s1", "s0"],
                &[2, 0],
            ),
        ];
        for round in 0..20 {
            let mut model = random_model(&mut rng, 3, 3, );
            let w = model.weights_flat();
            let grad = model.gradient(&corpus).unwrap();
            let step = 1e-5;
            // Probe a handful of coordinates per round.
            for probe in 0..4 {
                let k = (round * 7 + probe * 5) % w.len();
                let mut plus = w.clone();
                plus[k] += step;
                model.set_weights_flat(&plus).unwrap();
                let up = model.conditional_log_likelihood(&corpus).unwrap();
                let mut minus = w.clone();
                minus[k] -= step;
                model.set_weights_flat(&minus).unwrap();
                let down = model.conditional_log_likelihood(&corpus).unwrap();
                let fd = (up - down) / (2.0 * step);
                let denom = grad[k].abs().max(1e-8);
                assert!(
                    (grad[k] - fd).abs() / denom < 1e-4,
                    "coordinate {k}: analytic {} vs fd {}",
                    grad[k],
                    fd
                );
            }
        }
    }

    #[test]
    fn training_separable_corpus_classifies_itself() {
        let alphabet = names(&["p", "q", "r"]);
        let corpus = vec![
            seq(&["p", "p", "p", "r"], Some("P")),
            seq(&["p", "r", "p", "p"], Some("P")),
            seq(&["q", "q", "r", "q"], Some("Q")),
            seq(&["q", "r", "q"], Some("Q")),
        ];
        let model = train_crf(&corpus, &alphabet, &CrfTrainConfig::default()).unwrap();
        for s in &corpus {
            assert_eq!(model.classify(s).unwrap(), s.label.clone().unwrap());
        }
    }

    #[test]
    fn gradient_vanishes_at_the_unregularized_optimum() {
        // Label noise keeps the unpenalized maximum finite; driving the
        // optimizer to a tight tolerance must leave a stationary point.
        let alphabet = names(&["p", "q"]);
        let corpus = vec![
            seq(&["p", "p", "q"], Some("P")),
            seq(&["p", "q", "p"], Some("P")),
            seq(&["q", "q", "p"], Some("Q")),
            seq(&["q", "p", "q"], Some("Q")),
        ];
        let config = CrfTrainConfig {
            sigma2: f64::INFINITY,
            tolerance: 1e-6,
            max_iterations: 500,
            seed: 0,
        };
        let model = train_crf(&corpus, &alphabet, &config).unwrap();
        let paths: Vec<LabeledPath> = corpus
            .iter()
            .map(|s| LabeledPath::constant(s).unwrap())
            .collect();
        let grad = model.gradient(&paths).unwrap();
        let norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        assert!(norm < 1e-6, "gradient norm {norm} at the returned weights");
    }

    #[test]
    fn dominant_weights_drive_conditional_probability_to_one() {
        let mut model =
            CrfModel::zeroed(names(&["a", "b"]), names(&["x", "y"]), f64::INFINITY).unwrap();
        let space = model.feature_space();
        let mut w = model.weights_flat();
        w[space.state_index(0, 0)] = 40.0; // label a owns symbol x
        w[space.state_index(1, 1)] = 40.0; // label b owns symbol y
        model.set_weights_flat(&w).unwrap();
        let path = LabeledPath::new(
            names(&["x", "y", "x"]),
            names(&["a", "b", "a"]),
        )
        .unwrap();
        // log P(Y|X) approaches 0 as the weights dominate; at these weights
        // the competing paths underflow entirely, so 0 itself is reachable.
        let cll = model.conditional_log_likelihood(&[path]).unwrap();
        assert!(cll <= 0.0 && cll > -1e-10, "got {cll}");
    }

    #[test]
    fn tiny_sigma2_keeps_weights_near_zero() {
        let alphabet = names(&["p", "q"]);
        let corpus = vec![
            seq(&["p", "p", "p"], Some("P")),
            seq(&["q", "q", "q"], Some("Q")),
        ];
        let config = CrfTrainConfig {
            sigma2: 1e-7,
            ..CrfTrainConfig::default()
        };
        let model = train_crf(&corpus, &alphabet, &config).unwrap();
        for &w in &model.weights_flat() {
            assert!(w.abs() < 1e-3, "weight {w} escaped the penalty");
        }
    }

    #[test]
    fn training_trace_is_monotone_and_deterministic() {
        let alphabet = names(&["p", "q", "r"]);
        let corpus = vec![
            seq(&["p", "q", "p"], Some("P")),
            seq(&["q", "p", "q", "r"], Some("Q")),
            seq(&["r", "r", "q"], Some("R")),
        ];
        let config = CrfTrainConfig::default();
        let (m1, trace) = train_crf_traced(&corpus, &alphabet, &config).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "objective dropped: {} -> {}", w[0], w[1]);
        }
        let (m2, _) = train_crf_traced(&corpus, &alphabet, &config).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn degenerate_corpus_is_rejected() {
        let alphabet = names(&["p"]);
        let corpus = vec![seq(&["p"], Some("P")), seq(&["p", "p"], Some("P"))];
        assert!(matches!(
            train_crf(&corpus, &alphabet, &CrfTrainConfig::default()),
            Err(Error::DegenerateCorpus)
        ));
        let unlabeled = vec![seq(&["p"], None)];
        assert!(matches!(
            train_crf(&unlabeled, &alphabet, &CrfTrainConfig::default()),
            Err(Error::UnlabeledSequence(_))
        ));
    }

    #[test]
    fn zero_weights_decode_to_first_label() {
        let model = CrfModel::zeroed(names(&["a", "b"]), names(&["x", "y"]), 10.0).unwrap();
        let path = model.viterbi_labels(&seq(&["x", "y", "x"], None)).unwrap();
        assert_eq!(path, vec!["a", "a", "a"]);
    }

    #[test]
    fn strong_state_weights_pin_the_path() {
        let mut model = CrfModel::zeroed(names(&["a", "b"]), names(&["x", "y"]), 10.0).unwrap();
        let space = model.feature_space();
        let mut w = model.weights_flat();
        w[space.state_index(0, 0)] = 8.0; // label a loves symbol x
        w[space.state_index(1, 1)] = 8.0; // label b loves symbol y
        model.set_weights_flat(&w).unwrap();
        let path = model.viterbi_labels(&seq(&["x", "y", "y", "x"], None)).unwrap();
        assert_eq!(path, vec!["a", "b", "b", "a"]);
    }

    #[test]
    fn transition_shift_leaves_decoding_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let mut model = random_model(&mut rng, 3, 3);
            let s = seq(&["s0", "s2", "s1", "s0", "s1"], None);
            let before = model.viterbi_labels(&s).unwrap();
            let space = model.feature_space();
            let mut w = model.weights_flat();
            let c = rng.random_range(-3.0..3.0);
            for a in 0..3 {
                for b in 0..3 {
                    w[space.transition_index(a, b)] += c;
                }
            }
            model.set_weights_flat(&w).unwrap();
            assert_eq!(model.viterbi_labels(&s).unwrap(), before);
        }
    }

    #[test]
    fn classify_majority_and_ties() {
        let model = CrfModel::zeroed(names(&["a", "b"]), names(&["x"]), 10.0).unwrap();
        // Zero weights decode everything as `a`; force paths via helper
        // by checking counting logic through viterbi on symbols only.
        assert_eq!(model.classify(&seq(&["x", "x"], None)).unwrap(), "a");

        let mut biased = CrfModel::zeroed(names(&["a", "b"]), names(&["x", "y"]), 10.0).unwrap();
        let space = biased.feature_space();
        let mut w = biased.weights_flat();
        w[space.state_index(0, 0)] = 5.0;
        w[space.state_index(1, 1)] = 5.0;
        biased.set_weights_flat(&w).unwrap();
        // 3 of 5 symbols decode to label b.
        assert_eq!(
            biased.classify(&seq(&["y", "x", "y", "y", "x"], None)).unwrap(),
            "b"
        );
        // 2-2 tie goes to the lowest label index.
        assert_eq!(
            biased.classify(&seq(&["y", "x", "y", "x"], None)).unwrap(),
            "a"
        );
    }

    #[test]
    fn model_json_roundtrip() {
        let alphabet = names(&["p", "q"]);
        let corpus = vec![
            seq(&["p", "p"], Some("P")),
            seq(&["q", "q"], Some("Q")),
        ];
        let model = train_crf(&corpus, &alphabet, &CrfTrainConfig::default()).unwrap();
        let back = CrfModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model, back);

        let mut file: serde_json::Value = serde_json::from_str(&model.to_json()).unwrap();
        file["state_weights"][0] = serde_json::json!([1.0]);
        assert!(matches!(
            CrfModel::from_json(&file.to_string()),
            Err(Error::InvalidModel(_))
        ));
    }
}
