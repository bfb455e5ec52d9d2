//! Likelihood-ratio scoring with an add-k smoothed n-gram language model.
//!
//! The in-domain model is fitted on training utterances and the background
//! model on the same utterances after random token substitution. Likelihoods
//! produced elsewhere (for instance by neural language models) can be fed to
//! [`llr_score`] directly.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::random::seeded;

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_SMOOTHING: f64 = 1.0;
pub const DEFAULT_NOISE: f64 = 0.5;

const UNK_ID: u32 = 0;
const EOS_ID: u32 = 1;
const BOS_ID: u32 = 2;
const FIRST_WORD_ID: u32 = 3;

/// `-log(L(x) / L_bg(x)) = log L_bg(x) - log L(x)`.
pub fn llr_score(log_l: f64, log_l_bg: f64) -> f64 {
    log_l_bg - log_l
}

/// Lowercased whitespace tokenization.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Add-k smoothed n-gram model.
///
/// For order `n >= 2` every utterance is padded with `n - 1` begin markers
/// and one end marker, and the end marker is part of the predicted
/// vocabulary. A unigram model (`n = 1`) has no context and scores tokens
/// only, so its predicted vocabulary is the training words plus `<unk>`.
///
/// `P(w | h) = (c(h, w) + k) / (c(h) + k |V|)`.
#[derive(Debug, Clone)]
pub struct NgramLm {
    order: usize,
    smoothing: f64,
    words: HashMap<String, u32>,
    counts: HashMap<Vec<u32>, ContextCounts>,
}

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

impl NgramLm {
    pub fn fit(corpus: &[Vec<String>], order: usize, smoothing: f64) -> Result<Self> {
        if order < 1 {
            return Err(Error::invalid("n-gram order must be at least 1"));
        }
        if !(smoothing > 0.0) || !smoothing.is_finite() {
            return Err(Error::invalid(format!(
                "smoothing constant must be finite and positive, got {smoothing}"
            )));
        }
        if corpus.is_empty() {
            return Err(Error::invalid("language model corpus is empty"));
        }
        let vocab: BTreeSet<&str> = corpus
            .iter()
            .flatten()
            .map(String::as_str)
            .filter(|w| ![UNK, BOS, EOS].contains(w))
            .collect();
        let words = vocab
            .into_iter()
            .enumerate()
            .map(|(i, w)| (w.to_owned(), FIRST_WORD_ID + i as u32))
            .collect();
        let mut lm = NgramLm { order, smoothing, words, counts: HashMap::new() };
        for utterance in corpus {
            let ids = lm.encode(utterance);
            for (context, token) in lm.events(&ids) {
                let entry = lm.counts.entry(context.to_vec()).or_default();
                entry.total += 1;
                *entry.next.entry(token).or_default() += 1;
            }
        }
        Ok(lm)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Size of the predicted vocabulary `|V|`.
    pub fn support_size(&self) -> usize {
        self.words.len() + if self.order >= 2 { 2 } else { 1 }
    }

    /// Tokens a conditional distribution is defined over.
    pub fn support(&self) -> Vec<String> {
        let mut out: Vec<String> = vec![UNK.to_owned()];
        if self.order >= 2 {
            out.push(EOS.to_owned());
        }
        let mut words: Vec<(&String, &u32)> = self.words.iter().collect();
        words.sort_by_key(|(_, &id)| id);
        out.extend(words.into_iter().map(|(w, _)| w.clone()));
        out
    }

    /// `P(token | context)`; `context` holds the previous `order - 1` tokens,
    /// using [`BOS`] for positions before the utterance start.
    pub fn prob(&self, context: &[String], token: &str) -> Result<f64> {
        if context.len() + 1 != self.order {
            return Err(Error::DimensionMismatch { expected: self.order - 1, found: context.len() });
        }
        let ctx: Vec<u32> = context.iter().map(|w| self.id(w)).collect();
        Ok(self.prob_ids(&ctx, self.id(token)))
    }

    /// Sum of smoothed conditional log-probabilities of the padded utterance.
    pub fn log_likelihood(&self, utterance: &[String]) -> f64 {
        let ids = self.encode(utterance);
        self.events(&ids).map(|(ctx, tok)| self.prob_ids(ctx, tok).ln()).sum()
    }

    fn id(&self, token: &str) -> u32 {
        match token {
            BOS => BOS_ID,
            EOS => EOS_ID,
            _ => self.words.get(token).copied().unwrap_or(UNK_ID),
        }
    }

    fn encode(&self, utterance: &[String]) -> Vec<u32> {
        if self.order == 1 {
            return utterance.iter().map(|w| self.id(w)).collect();
        }
        let mut ids = vec![BOS_ID; self.order - 1];
        ids.extend(utterance.iter().map(|w| self.id(w)));
        ids.push(EOS_ID);
        ids
    }

    /// `(context, token)` pairs of an encoded utterance.
    fn events<'a>(&self, ids: &'a [u32]) -> impl Iterator<Item = (&'a [u32], u32)> + 'a {
        let h = self.order - 1;
        (h..ids.len()).map(move |i| (&ids[i - h..i], ids[i]))
    }

    fn prob_ids(&self, context: &[u32], token: u32) -> f64 {
        let v = self.support_size() as f64;
        let k = self.smoothing;
        let (count, total) = match self.counts.get(context) {
            Some(c) => (c.next.get(&token).copied().unwrap_or(0), c.total),
            None => (0, 0),
        };
        (count as f64 + k) / (total as f64 + k * v)
    }
}

pub fn ngram_fit(corpus: &[Vec<String>], order: usize, smoothing: f64) -> Result<NgramLm> {
    NgramLm::fit(corpus, order, smoothing)
}

pub fn ngram_loglik(lm: &NgramLm, utterance: &[String]) -> f64 {
    lm.log_likelihood(utterance)
}

/// Corpus after random token substitution.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted {
    pub corpus: Vec<Vec<String>>,
    /// Number of positions where a substitution was drawn (the drawn token
    /// may coincide with the original).
    pub replaced: usize,
}

/// Replaces each token, independently with probability `noise_p`, by a token
/// drawn uniformly from the corpus vocabulary.
pub fn corrupt_corpus(corpus: &[Vec<String>], noise_p: f64, seed: u64) -> Result<Corrupted> {
    if !(0.0..=1.0).contains(&noise_p) {
        return Err(Error::invalid(format!("noise probability must lie in [0, 1], got {noise_p}")));
    }
    let vocab: Vec<&String> =
        corpus.iter().flatten().collect::<BTreeSet<_>>().into_iter().collect();
    let mut rng = seeded(seed);
    let mut replaced = 0;
    let out = corpus
        .iter()
        .map(|utt| {
            utt.iter()
                .map(|tok| {
                    if noise_p > 0.0 && rng.random::<f64>() < noise_p {
                        replaced += 1;
                        vocab[rng.random_range(0..vocab.len())].clone()
                    } else {
                        tok.clone()
                    }
                })
                .collect()
        })
        .collect();
    Ok(Corrupted { corpus: out, replaced })
}

/// In-domain and background models for likelihood-ratio scoring.
#[derive(Debug, Clone)]
pub struct LlrScorer {
    pub in_domain: NgramLm,
    pub background: NgramLm,
}

impl LlrScorer {
    pub fn fit(
        corpus: &[Vec<String>],
        order: usize,
        smoothing: f64,
        noise_p: f64,
        seed: u64,
    ) -> Result<Self> {
        let in_domain = NgramLm::fit(corpus, order, smoothing)?;
        let noisy = corrupt_corpus(corpus, noise_p, seed)?;
        let background = NgramLm::fit(&noisy.corpus, order, smoothing)?;
        Ok(LlrScorer { in_domain, background })
    }

    pub fn score(&self, utterance: &[String]) -> f64 {
        llr_score(
            self.in_domain.log_likelihood(utterance),
            self.background.log_likelihood(utterance),
        )
    }
}
