// SPDX-License-Identifier: Apache-2.0

//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::KeywordError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topics: 10,
            alpha: 0.1,
            beta: 0.01,
            iterations: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub config: LdaConfig,
    /// Sorted vocabulary; column `w` of `phi` is `vocab[w]`.
    pub vocab: Vec<String>,
    /// Document-topic distribution, D × K.
    pub theta: Vec<Vec<f64>>,
    /// Topic-word distribution, K × V.
    pub phi: Vec<Vec<f64>>,
}

impl LdaModel {
    /// The `m` most probable words of topic `k`, ties broken by word.
    pub fn top_words(&self, k: usize, m: usize) -> Vec<String> {
        let mut idx: Vec<usize> = (0..self.vocab.len()).collect();
        idx.sort_by(|&a, &b| self.phi[k][b].total_cmp(&self.phi[k][a]).then_with(|| self.vocab[a].cmp(&self.vocab[b])));
        idx.into_iter().take(m).map(|w| self.vocab[w].clone()).collect()
    }
}

/// Fits `cfg.topics` topics to tokenized documents. Empty documents are
/// allowed and get a uniform θ row.
pub fn fit_lda(docs: &[Vec<String>], cfg: &LdaConfig) -> Result<LdaModel, KeywordError> {
    if cfg.topics < 2 {
        return Err(KeywordError::BadConfig("LDA needs at least 2 topics".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.beta > 0.0 && cfg.alpha.is_finite() && cfg.beta.is_finite()) {
        return Err(KeywordError::BadConfig("alpha and beta must be positive".into()));
    }
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        for w in d {
            index.insert(w.as_str(), 0);
        }
    }
    if index.is_empty() {
        return Err(KeywordError::EmptyCorpus);
    }
    if index.len() < cfg.topics {
        return Err(KeywordError::BadConfig(format!(
            "vocabulary of {} words is smaller than {} topics",
            index.len(),
            cfg.topics
        )));
    }
    for (i, v) in index.values_mut().enumerate() {
        *v = i;
    }
    let vocab: Vec<String> = index.keys().map(|s| s.to_string()).collect();
    let words: Vec<Vec<usize>> = docs.iter().map(|d| d.iter().map(|w| index[w.as_str()]).collect()).collect();

    let k = cfg.topics;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut n_dk = vec![vec![0usize; k]; docs.len()];
    let mut n_kw = vec![vec![0usize; v]; k];
    let mut n_k = vec![0usize; k];
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, ws) in words.iter().enumerate() {
        let zs: Vec<usize> = ws
            .iter()
            .map(|&w| {
                let t = rng.gen_range(0..k);
                n_dk[d][t] += 1;
                n_kw[t][w] += 1;
                n_k[t] += 1;
                t
            })
            .collect();
        z.push(zs);
    }
    let vbeta = v as f64 * cfg.beta;
    let mut weights = vec![0.0; k];
    for _ in 0..cfg.iterations {
        for (d, ws) in words.iter().enumerate() {
            for (i, &w) in ws.iter().enumerate() {
                let old = z[d][i];
                n_dk[d][old] -= 1;
                n_kw[old][w] -= 1;
                n_k[old] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    let p = (n_dk[d][t] as f64 + cfg.alpha) * (n_kw[t][w] as f64 + cfg.beta) / (n_k[t] as f64 + vbeta);
                    total += p;
                    weights[t] = total;
                }
                let u = rng.gen::<f64>() * total;
                let new = weights.iter().position(|&c| u < c).unwrap_or(k - 1);
                z[d][i] = new;
                n_dk[d][new] += 1;
                n_kw[new][w] += 1;
                n_k[new] += 1;
            }
        }
    }
    let theta = n_dk
        .iter()
        .map(|row| normalize(row.iter().map(|&c| c as f64 + cfg.alpha).collect()))
        .collect();
    let phi = n_kw
        .iter()
        .map(|row| normalize(row.iter().map(|&c| c as f64 + cfg.beta).collect()))
        .collect();
    Ok(LdaModel {
        config: cfg.clone(),
        vocab,
        theta,
        phi,
    })
}

fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= s);
    row
}
