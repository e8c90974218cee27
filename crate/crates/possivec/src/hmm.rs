//! Discrete-observation hidden Markov model.
//!
//! Training is Baum-Welch over pooled expected counts from all training
//! sequences, with per-step scaling for numerical stability. The M-step
//! maximizes the expected complete-data log-likelihood over the *floored*
//! simplex (every probability at least `floor`), which keeps the usual EM
//! monotonicity guarantee while guaranteeing finite likelihoods for
//! symbols unseen in a training fold.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_indexed_seed;
use crate::vectorize::ObservationSequence;

/// On-disk model format version.
pub const HMM_FORMAT_VERSION: u32 = 1;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Provenance of a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub iters: usize,
    pub loglik: f64,
}

/// A trained (or hand-built) discrete HMM: transition matrix, emission
/// matrix and initial state distribution over a fixed symbol alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    alphabet: Vec<String>,
    transition: Vec<Vec<f64>>,
    emission: Vec<Vec<f64>>,
    initial: Vec<f64>,
    train_meta: Option<TrainMeta>,
    symbol_index: HashMap<String, usize>,
}

fn check_row(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
        return Err(Error::InvalidModel(format!(
            "{what} contains a negative or non-finite entry"
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::InvalidModel(format!(
            "{what} sums to {sum}, expected 1 within {ROW_SUM_TOLERANCE}"
        )));
    }
    Ok(())
}

impl HmmModel {
    /// Validates dimensions and stochasticity (row sums within `1e-9` of 1).
    pub fn new(
        alphabet: Vec<String>,
        transition: Vec<Vec<f64>>,
        emission: Vec<Vec<f64>>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let n = initial.len();
        let m = alphabet.len();
        if n == 0 {
            return Err(Error::InvalidModel("model needs at least one state".into()));
        }
        if m == 0 {
            return Err(Error::InvalidModel("alphabet is empty".into()));
        }
        if transition.len() != n || transition.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidModel(format!(
                "transition matrix must be {n} x {n}"
            )));
        }
        if emission.len() != n || emission.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidModel(format!(
                "emission matrix must be {n} x {m}"
            )));
        }
        for (i, row) in transition.iter().enumerate() {
            check_row(row, &format!("transition row {i}"))?;
        }
        for (i, row) in emission.iter().enumerate() {
            check_row(row, &format!("emission row {i}"))?;
        }
        check_row(&initial, "initial distribution")?;
        let mut symbol_index = HashMap::with_capacity(m);
        for (k, s) in alphabet.iter().enumerate() {
            if symbol_index.insert(s.clone(), k).is_some() {
                return Err(Error::InvalidModel(format!("duplicate symbol `{s}`")));
            }
        }
        Ok(Self {
            alphabet,
            transition,
            emission,
            initial,
            train_meta: None,
            symbol_index,
        })
    }

    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn emission(&self) -> &[Vec<f64>] {
        &self.emission
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn train_meta(&self) -> Option<&TrainMeta> {
        self.train_meta.as_ref()
    }

    fn encode(&self, seq: &ObservationSequence) -> Result<Vec<usize>> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        seq.symbols
            .iter()
            .map(|s| {
                self.symbol_index
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::UnknownSymbol(s.clone()))
            })
            .collect()
    }

    /// Scaled forward pass into flat scratch buffers (`alpha` is `t * n`
    /// row-major). A zero scale means the observation prefix has
    /// probability 0.
    fn forward_into(&self, obs: &[usize], alpha: &mut Vec<f64>, scales: &mut Vec<f64>) {
        let n = self.n_states();
        let t_len = obs.len();
        alpha.clear();
        alpha.resize(t_len * n, 0.0);
        scales.clear();
        scales.resize(t_len, 0.0);
        for i in 0..n {
            alpha[i] = self.initial[i] * self.emission[i][obs[0]];
        }
        for t in 0..t_len {
            if t > 0 {
                let (prev_rows, cur_rows) = alpha.split_at_mut(t * n);
                let prev = &prev_rows[(t - 1) * n..];
                let cur = &mut cur_rows[..n];
                for (j, out) in cur.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (i, &p) in prev.iter().enumerate().take(n) {
                        acc += p * self.transition[i][j];
                    }
                    *out = acc * self.emission[j][obs[t]];
                }
            }
            let row = &mut alpha[t * n..(t + 1) * n];
            let s: f64 = row.iter().sum();
            scales[t] = s;
            if s > 0.0 {
                for v in row.iter_mut() {
                    *v /= s;
                }
            }
        }
    }

    /// Backward pass under the forward scales, into a flat `t * n` buffer.
    fn backward_into(&self, obs: &[usize], scales: &[f64], beta: &mut Vec<f64>) {
        let n = self.n_states();
        let t_len = obs.len();
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
            for (i, out) in cur.iter_mut().enumerate() {
                let row = &self.transition[i];
                let mut acc = 0.0;
                for j in 0..n {
                    acc += row[j] * self.emission[j][obs[t + 1]] * next[j];
                }
                *out = if scale > 0.0 { acc / scale } else { 0.0 };
            }
        }
    }

    /// Log-probability of the sequence under the model, computed with
    /// per-step scaling. `-inf` when the model assigns probability zero.
    pub fn log_likelihood(&self, seq: &ObservationSequence) -> Result<f64> {
        let obs = self.encode(seq)?;
        let mut alpha = Vec::new();
        let mut scales = Vec::new();
        self.forward_into(&obs, &mut alpha, &mut scales);
        Ok(log_scales(&scales))
    }

    /// Most probable state path; ties resolve to the lowest state index.
    pub fn viterbi(&self, seq: &ObservationSequence) -> Result<Vec<usize>> {
        let obs = self.encode(seq)?;
        let n = self.n_states();
        let t_len = obs.len();
        let log = |v: f64| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY };
        let mut delta: Vec<f64> = (0..n)
            .map(|i| log(self.initial[i]) + log(self.emission[i][obs[0]]))
            .collect();
        let mut backptr = vec![vec![0usize; n]; t_len];
        for t in 1..t_len {
            let mut next = vec![f64::NEG_INFINITY; n];
            for j in 0..n {
                let mut best_i = 0usize;
                let mut best = f64::NEG_INFINITY;
                for i in 0..n {
                    let cand = delta[i] + log(self.transition[i][j]);
                    if cand > best {
                        best = cand;
                        best_i = i;
                    }
                }
                next[j] = best + log(self.emission[j][obs[t]]);
                backptr[t][j] = best_i;
            }
            delta = next;
        }
        let mut last = 0usize;
        for j in 1..n {
            if delta[j] > delta[last] {
                last = j;
            }
        }
        let mut path = vec![0usize; t_len];
        path[t_len - 1] = last;
        for t in (1..t_len).rev() {
            path[t - 1] = backptr[t][path[t]];
        }
        Ok(path)
    }

    /// Joint log-probability of a given state path and the sequence.
    pub fn path_log_probability(&self, seq: &ObservationSequence, path: &[usize]) -> Result<f64> {
        let obs = self.encode(seq)?;
        if path.len() != obs.len() {
            return Err(Error::LengthMismatch {
                symbols: obs.len(),
                labels: path.len(),
            });
        }
        let log = |v: f64| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY };
        let mut lp = log(self.initial[path[0]]) + log(self.emission[path[0]][obs[0]]);
        for t in 1..obs.len() {
            lp += log(self.transition[path[t - 1]][path[t]])
                + log(self.emission[path[t]][obs[t]]);
        }
        Ok(lp)
    }

    pub fn to_json(&self) -> String {
        let file = HmmModelFile {
            version: HMM_FORMAT_VERSION,
            alphabet: self.alphabet.clone(),
            n_states: self.n_states(),
            a: self.transition.clone(),
            b: self.emission.clone(),
            pi: self.initial.clone(),
            train_meta: self.train_meta,
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    /// Parses and revalidates a model file (dimensions and stochasticity).
    pub fn from_json(text: &str) -> Result<Self> {
        let file: HmmModelFile = serde_json::from_str(text)?;
        if file.version != HMM_FORMAT_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported model format version {}",
                file.version
            )));
        }
        if file.n_states != file.pi.len() {
            return Err(Error::InvalidModel(format!(
                "n_states = {} does not match pi length {}",
                file.n_states,
                file.pi.len()
            )));
        }
        let mut model = Self::new(file.alphabet, file.a, file.b, file.pi)?;
        model.train_meta = file.train_meta;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct HmmModelFile {
    version: u32,
    alphabet: Vec<String>,
    n_states: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    pi: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    train_meta: Option<TrainMeta>,
}

/// Baum-Welch settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmmTrainConfig {
    pub n_states: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop once the total log-likelihood improves by less than this.
    pub tolerance: f64,
    /// Random restarts; the restart with the best final likelihood wins.
    pub restarts: usize,
    /// Probability floor applied to every parameter after each M-step.
    pub floor: f64,
}

impl Default for HmmTrainConfig {
    fn default() -> Self {
        Self {
            n_states: 5,
            seed: 0,
            max_iterations: 40,
            tolerance: 1e-3,
            restarts: 3,
            floor: 1e-6,
        }
    }
}

impl HmmTrainConfig {
    fn validate(&self, n_symbols: usize) -> Result<()> {
        if self.n_states == 0 {
            return Err(Error::InvalidParameter("n_states must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        let widest = self.n_states.max(n_symbols) as f64;
        if !(self.floor > 0.0 && self.floor * widest < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "floor {} is incompatible with {} states / {} symbols",
                self.floor, self.n_states, n_symbols
            )));
        }
        Ok(())
    }
}

/// Maximizer of `sum_k counts[k] * ln(p[k])` over the simplex intersected
/// with `p[k] >= floor`: proportional allocation with under-floor entries
/// pinned at the floor (KKT water-filling). Zero total counts fall back to
/// the uniform row.
fn project_row(counts: &[f64], floor: f64) -> Vec<f64> {
    let k = counts.len();
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return vec![1.0 / k as f64; k];
    }
    let mut fixed = vec![false; k];
    loop {
        let n_fixed = fixed.iter().filter(|&&f| f).count();
        let free_mass = 1.0 - floor * n_fixed as f64;
        let free_total: f64 = counts
            .iter()
            .zip(&fixed)
            .filter(|&(_, &f)| !f)
            .map(|(&c, _)| c)
            .sum();
        if free_total <= 0.0 {
            let share = free_mass / (k - n_fixed) as f64;
            return fixed
                .iter()
                .map(|&f| if f { floor } else { share })
                .collect();
        }
        let scale = free_mass / free_total;
        let mut changed = false;
        for i in 0..k {
            if !fixed[i] && counts[i] * scale < floor {
                fixed[i] = true;
                changed = true;
            }
        }
        if !changed {
            return counts
                .iter()
                .zip(&fixed)
                .map(|(&c, &f)| if f { floor } else { c * scale })
                .collect();
        }
    }
}

fn log_scales(scales: &[f64]) -> f64 {
    scales
        .iter()
        .map(|&s| if s > 0.0 { s.ln() } else { f64::NEG_INFINITY })
        .sum()
}

struct ExpectedCounts {
    transition: Vec<Vec<f64>>,
    emission: Vec<Vec<f64>>,
    initial: Vec<f64>,
}

/// Scratch buffers reused across sequences and iterations; the tight EM
/// loops must not allocate per time step.
#[derive(Default)]
struct EmScratch {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    scales: Vec<f64>,
    gamma: Vec<f64>,
    xi: Vec<f64>,
}

/// One E-step over every sequence; returns pooled expected counts and the
/// total log-likelihood under the current parameters.
fn e_step(
    model: &HmmModel,
    sequences: &[Vec<usize>],
    scratch: &mut EmScratch,
) -> (ExpectedCounts, f64) {
    let n = model.n_states();
    let m = model.alphabet.len();
    let mut counts = ExpectedCounts {
        transition: vec![vec![0.0; n]; n],
        emission: vec![vec![0.0; m]; n],
        initial: vec![0.0; n],
    };
    scratch.gamma.clear();
    scratch.gamma.resize(n, 0.0);
    scratch.xi.clear();
    scratch.xi.resize(n * n, 0.0);
    let mut total_ll = 0.0;
    for obs in sequences {
        let t_len = obs.len();
        model.forward_into(obs, &mut scratch.alpha, &mut scratch.scales);
        model.backward_into(obs, &scratch.scales, &mut scratch.beta);
        total_ll += log_scales(&scratch.scales);
        let alpha = &scratch.alpha;
        let beta = &scratch.beta;

        for t in 0..t_len {
            let a_row = &alpha[t * n..(t + 1) * n];
            let b_row = &beta[t * n..(t + 1) * n];
            let mut norm = 0.0;
            for i in 0..n {
                scratch.gamma[i] = a_row[i] * b_row[i];
                norm += scratch.gamma[i];
            }
            if norm <= 0.0 {
                continue;
            }
            for i in 0..n {
                let g = scratch.gamma[i] / norm;
                counts.emission[i][obs[t]] += g;
                if t == 0 {
                    counts.initial[i] += g;
                }
            }
        }

        for t in 0..t_len - 1 {
            let a_row = &alpha[t * n..(t + 1) * n];
            let b_next = &beta[(t + 1) * n..(t + 2) * n];
            let emit_next = obs[t + 1];
            let mut norm = 0.0;
            for i in 0..n {
                let trans_row = &model.transition[i];
                let base = a_row[i];
                for j in 0..n {
                    let v = base * trans_row[j] * model.emission[j][emit_next] * b_next[j];
                    scratch.xi[i * n + j] = v;
                    norm += v;
                }
            }
            if norm <= 0.0 {
                continue;
            }
            for i in 0..n {
                let row = &mut counts.transition[i];
                for j in 0..n {
                    row[j] += scratch.xi[i * n + j] / norm;
                }
            }
        }
    }
    (counts, total_ll)
}

fn random_row<R: Rng>(rng: &mut R, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| 0.1 + rng.random::<f64>()).collect();
    project_row(&raw, floor)
}

fn random_model(alphabet: &[String], config: &HmmTrainConfig, seed: u64) -> HmmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.n_states;
    let transition: Vec<Vec<f64>> = (0..n).map(|_| random_row(&mut rng, n, config.floor)).collect();
    let emission: Vec<Vec<f64>> = (0..n)
        .map(|_| random_row(&mut rng, alphabet.len(), config.floor))
        .collect();
    let initial = random_row(&mut rng, n, config.floor);
    HmmModel::new(alphabet.to_vec(), transition, emission, initial)
        .expect("random stochastic model is valid")
}

fn em_run(
    mut model: HmmModel,
    sequences: &[Vec<usize>],
    config: &HmmTrainConfig,
) -> (HmmModel, Vec<f64>, usize) {
    let mut scratch = EmScratch::default();
    let mut trace = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut iterations = 0usize;
    loop {
        let (counts, ll) = e_step(&model, sequences, &mut scratch);
        trace.push(ll);
        if iterations > 0 && ll - prev_ll < config.tolerance {
            break;
        }
        if iterations == config.max_iterations {
            break;
        }
        let transition = counts
            .transition
            .iter()
            .map(|row| project_row(row, config.floor))
            .collect();
        let emission = counts
            .emission
            .iter()
            .map(|row| project_row(row, config.floor))
            .collect();
        let initial = project_row(&counts.initial, config.floor);
        model = HmmModel::new(model.alphabet.clone(), transition, emission, initial)
            .expect("projected rows are stochastic");
        prev_ll = ll;
        iterations += 1;
    }
    (model, trace, iterations)
}

/// Trains an HMM on the given sequences over a fixed alphabet, returning
/// the model together with the log-likelihood trace of the winning restart
/// (one entry per EM iteration, ending at the final parameters).
pub fn baum_welch_train_traced(
    sequences: &[ObservationSequence],
    alphabet: &[String],
    config: &HmmTrainConfig,
) -> Result<(HmmModel, Vec<f64>)> {
    config.validate(alphabet.len())?;
    if alphabet.is_empty() {
        return Err(Error::InvalidModel("alphabet is empty".into()));
    }
    let mut index = HashMap::new();
    for (k, s) in alphabet.iter().enumerate() {
        if index.insert(s.as_str(), k).is_some() {
            return Err(Error::InvalidModel(format!("duplicate symbol `{s}`")));
        }
    }
    let mut encoded = Vec::new();
    for seq in sequences {
        if seq.is_empty() {
            continue; // contributes nothing to the expected counts
        }
        let obs = seq
            .symbols
            .iter()
            .map(|s| {
                index
                    .get(s.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownSymbol(s.clone()))
            })
            .collect::<Result<Vec<usize>>>()?;
        encoded.push(obs);
    }
    if encoded.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }

    let mut best: Option<(HmmModel, Vec<f64>, usize)> = None;
    for restart in 0..config.restarts {
        let restart_seed = derive_indexed_seed(config.seed, "hmm-restart", restart as u64);
        let init = random_model(alphabet, config, restart_seed);
        let (model, trace, iterations) = em_run(init, &encoded, config);
        let final_ll = *trace.last().expect("trace is never empty");
        let better = match &best {
            None => true,
            Some((_, best_trace, _)) => final_ll > *best_trace.last().unwrap(),
        };
        if better {
            best = Some((model, trace, iterations));
        }
    }
    let (mut model, trace, iterations) = best.expect("at least one restart ran");
    model.train_meta = Some(TrainMeta {
        seed: config.seed,
        iters: iterations,
        loglik: *trace.last().unwrap(),
    });
    Ok((model, trace))
}

/// Trains an HMM and discards the likelihood trace.
pub fn baum_welch_train(
    sequences: &[ObservationSequence],
    alphabet: &[String],
    config: &HmmTrainConfig,
) -> Result<HmmModel> {
    baum_welch_train_traced(sequences, alphabet, config).map(|(model, _)| model)
}

/// Scores the sequence under every per-class model and returns the class
/// with the highest log-likelihood; ties resolve to the earlier class.
pub fn classify_hmm(models: &[(String, HmmModel)], seq: &ObservationSequence) -> Result<String> {
    if models.len() < 2 {
        return Err(Error::InvalidParameter(
            "classification needs at least two class models".into(),
        ));
    }
    let alphabet = models[0].1.alphabet();
    if models.iter().any(|(_, m)| m.alphabet() != alphabet) {
        return Err(Error::AlphabetMismatch);
    }
    let mut best_class = 0usize;
    let mut best_ll = f64::NEG_INFINITY;
    for (i, (_, model)) in models.iter().enumerate() {
        let ll = model.log_likelihood(seq)?;
        if ll > best_ll {
            best_ll = ll;
            best_class = i;
        }
    }
    Ok(models[best_class].0.clone())
}
