//! Seeded generator of labeled synthetic corpora.
//!
//! Comments are bags of tokens drawn from a per-class mixture: class terms
//! (memorial vocabulary after death, greetings and slang before), a small
//! share of the other class's terms, function words, and a Zipf-weighted
//! pool of pronounceable filler words. Profiles of the deceased get
//! pre-mortem comments before a death time and post-mortem comments at or
//! after it; the remaining profiles only have pre-mortem comments.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, Corpus, Label, Profile};
use crate::error::{Error, Result};

const DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_profiles: usize,
    /// Share of profiles whose owner died, in (0, 1].
    pub post_profile_fraction: f64,
    pub mean_pre_comments: f64,
    pub mean_post_comments: f64,
    pub pre_length_mean: f64,
    pub post_length_mean: f64,
    /// Number of distinct filler words.
    pub filler_vocab_size: usize,
    pub post_terms: Vec<WeightedTerm>,
    pub pre_terms: Vec<WeightedTerm>,
    pub function_words: Vec<String>,
    /// Per-token probability of drawing from the comment's own class terms.
    pub class_term_rate: f64,
    /// Per-token probability of drawing from the other class's terms.
    pub cross_term_rate: f64,
    pub function_word_rate: f64,
    /// Chance that a deceased profile's commenters use "rip" at all.
    pub rip_profile_probability: f64,
    /// Chance that a pre-mortem comment mentions "rip" anyway.
    pub pre_rip_probability: f64,
    /// Share of post-mortem comments written in the casual pre-mortem style.
    pub casual_post_fraction: f64,
    pub pre_question_probability: f64,
    pub post_exclamation_probability: f64,
    /// Death times are uniform in this closed range of epoch seconds.
    pub death_window: [i64; 2],
    pub pre_span_days: i64,
    pub post_span_days: i64,
}

fn terms(list: &[(&str, f64)]) -> Vec<WeightedTerm> {
    list.iter()
        .map(|&(term, weight)| WeightedTerm {
            term: term.to_string(),
            weight,
        })
        .collect()
}

impl Default for SynthConfig {
    /// The "desk-200" configuration.
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            n_profiles: 200,
            post_profile_fraction: 0.8,
            mean_pre_comments: 8.0,
            mean_post_comments: 10.0,
            pre_length_mean: 23.0,
            post_length_mean: 49.0,
            filler_vocab_size: 600,
            post_terms: terms(&[
                ("miss", 10.0),
                ("love", 9.0),
                ("rip", 8.0),
                ("heaven", 5.0),
                ("gone", 5.0),
                ("wish", 4.0),
                ("angel", 4.0),
                ("peace", 3.0),
                ("rest", 3.0),
                ("remember", 3.0),
                ("sad", 3.0),
                ("grief", 2.0),
                ("cry", 2.0),
                ("forever", 2.0),
                ("memories", 2.0),
                ("sorry", 2.0),
                ("loss", 2.0),
                ("hurts", 2.0),
                ("tears", 2.0),
                ("prayers", 2.0),
            ]),
            pre_terms: terms(&[
                ("hey", 10.0),
                ("lol", 9.0),
                ("yo", 6.0),
                ("wait", 5.0),
                ("haha", 5.0),
                ("yeah", 5.0),
                ("hang", 3.0),
                ("soon", 3.0),
                ("party", 3.0),
                ("call", 3.0),
                ("tonight", 3.0),
                ("omg", 3.0),
                ("dude", 3.0),
                ("whats", 3.0),
                ("weekend", 2.0),
                ("cool", 2.0),
                ("fun", 2.0),
                ("text", 2.0),
            ]),
            function_words: [
                "i", "you", "the", "a", "to", "and", "so", "is", "it", "that", "we", "my", "of", "in", "for",
                "me", "this", "was", "your", "be", "have", "on", "with", "all", "are", "just", "but", "what",
                "know", "im",
            ]
            .map(String::from)
            .to_vec(),
            class_term_rate: 0.12,
            cross_term_rate: 0.02,
            function_word_rate: 0.4,
            rip_profile_probability: 0.55,
            pre_rip_probability: 0.01,
            casual_post_fraction: 0.1,
            pre_question_probability: 0.35,
            post_exclamation_probability: 0.2,
            death_window: [1_200_000_000, 1_300_000_000],
            pre_span_days: 365,
            post_span_days: 30,
        }
    }
}

impl SynthConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if self.n_profiles == 0 {
            return bad("n_profiles must be at least 1");
        }
        if !(self.post_profile_fraction > 0.0 && self.post_profile_fraction <= 1.0) {
            return bad("post_profile_fraction must lie in (0, 1]");
        }
        for (name, v) in [
            ("mean_pre_comments", self.mean_pre_comments),
            ("mean_post_comments", self.mean_post_comments),
            ("pre_length_mean", self.pre_length_mean),
            ("post_length_mean", self.post_length_mean),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("class_term_rate", self.class_term_rate),
            ("cross_term_rate", self.cross_term_rate),
            ("function_word_rate", self.function_word_rate),
            ("rip_profile_probability", self.rip_profile_probability),
            ("pre_rip_probability", self.pre_rip_probability),
            ("casual_post_fraction", self.casual_post_fraction),
            ("pre_question_probability", self.pre_question_probability),
            ("post_exclamation_probability", self.post_exclamation_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.class_term_rate + self.cross_term_rate + self.function_word_rate > 1.0 {
            return bad("token mixture rates sum above 1");
        }
        if self.filler_vocab_size == 0 || self.function_words.is_empty() {
            return bad("filler and function word pools must be non-empty");
        }
        if self.post_terms.is_empty() || self.pre_terms.is_empty() {
            return bad("term lists must be non-empty");
        }
        let [lo, hi] = self.death_window;
        if lo > hi || lo - self.pre_span_days * DAY <= 1 {
            return bad("death_window must be ordered and leave room for pre-mortem timestamps");
        }
        if self.pre_span_days < 1 || self.post_span_days < 0 {
            return bad("comment spans must be non-negative (pre at least one day)");
        }
        Ok(())
    }
}

/// Deterministic pronounceable pseudo-words.
fn filler_words(n: usize) -> Vec<String> {
    const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
    const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
    let syllables: Vec<String> = ONSETS
        .iter()
        .flat_map(|o| VOWELS.iter().map(move |v| format!("{o}{v}")))
        .collect();
    let s = syllables.len();
    (0..n)
        .map(|i| {
            // three syllables, mixed so neighbouring indices differ early
            let a = i % s;
            let b = (i / s + 7 * a) % s;
            let c = (i / (s * s) + 3 * b + 1) % s;
            format!("{}{}{}", syllables[a], syllables[b], syllables[c])
        })
        .collect()
}

struct Sampler<'a> {
    cfg: &'a SynthConfig,
    post: (Vec<&'a str>, WeightedIndex<f64>),
    post_no_rip: (Vec<&'a str>, WeightedIndex<f64>),
    pre: (Vec<&'a str>, WeightedIndex<f64>),
    filler: Vec<String>,
    filler_dist: WeightedIndex<f64>,
}

fn weighted<'a>(list: impl Iterator<Item = &'a WeightedTerm>) -> Result<(Vec<&'a str>, WeightedIndex<f64>)> {
    let (words, weights): (Vec<&str>, Vec<f64>) = list.map(|t| (t.term.as_str(), t.weight)).unzip();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::invalid(format!("term weights: {e}")))?;
    Ok((words, dist))
}

#[derive(Clone, Copy, PartialEq)]
enum Style {
    Pre,
    Post { rip: bool },
}

impl<'a> Sampler<'a> {
    fn new(cfg: &'a SynthConfig) -> Result<Self> {
        let filler = filler_words(cfg.filler_vocab_size);
        let filler_dist = WeightedIndex::new((0..filler.len()).map(|r| 1.0 / (r as f64 + 1.0)))
            .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Sampler {
            cfg,
            post: weighted(cfg.post_terms.iter())?,
            post_no_rip: weighted(cfg.post_terms.iter().filter(|t| t.term != "rip"))?,
            pre: weighted(cfg.pre_terms.iter())?,
            filler,
            filler_dist,
        })
    }

    fn pick<'s>(set: &'s (Vec<&'a str>, WeightedIndex<f64>), rng: &mut ChaCha8Rng) -> &'s str {
        set.0[set.1.sample(rng)]
    }

    fn token(&self, style: Style, rng: &mut ChaCha8Rng) -> String {
        let own = match style {
            Style::Pre => &self.pre,
            Style::Post { rip: true } => &self.post,
            Style::Post { rip: false } => &self.post_no_rip,
        };
        let other = match style {
            Style::Pre => &self.post_no_rip,
            Style::Post { .. } => &self.pre,
        };
        let c = self.cfg;
        let u: f64 = rng.random();
        if u < c.class_term_rate {
            Self::pick(own, rng).to_string()
        } else if u < c.class_term_rate + c.cross_term_rate {
            Self::pick(other, rng).to_string()
        } else if u < c.class_term_rate + c.cross_term_rate + c.function_word_rate {
            c.function_words[rng.random_range(0..c.function_words.len())].clone()
        } else {
            self.filler[self.filler_dist.sample(rng)].clone()
        }
    }

    fn comment_text(&self, style: Style, length_mean: f64, rng: &mut ChaCha8Rng) -> Result<String> {
        let n = poisson(length_mean, rng)?.max(1);
        let mut tokens: Vec<String> = (0..n).map(|_| self.token(style, rng)).collect();
        if style == Style::Pre && rng.random_bool(self.cfg.pre_rip_probability) {
            let at = rng.random_range(0..tokens.len());
            tokens[at] = "rip".into();
        }
        let mut text = tokens.join(" ");
        match style {
            Style::Pre if rng.random_bool(self.cfg.pre_question_probability) => text.push('?'),
            Style::Post { .. } if rng.random_bool(self.cfg.post_exclamation_probability) => text.push('!'),
            _ => {}
        }
        Ok(text)
    }
}

fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> Result<usize> {
    let d = Poisson::new(mean).map_err(|e| Error::invalid(format!("poisson mean {mean}: {e}")))?;
    Ok(d.sample(rng) as usize)
}

/// Generates a corpus; identical configs give identical corpora.
pub fn generate(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let sampler = Sampler::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_profiles;
    let n_dead = ((cfg.post_profile_fraction * n as f64).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut dead = vec![false; n];
    for &i in &order[..n_dead] {
        dead[i] = true;
    }

    let [lo, hi] = cfg.death_window;
    let pre_span = cfg.pre_span_days * DAY;
    let post_span = (cfg.post_span_days * DAY) as f64;
    let mut profiles = Vec::with_capacity(n);
    for (p, &is_dead) in dead.iter().enumerate() {
        let pid = format!("p{p:04}");
        let death = rng.random_range(lo..=hi);
        let mut stamps: Vec<(i64, Style)> = Vec::new();
        if is_dead {
            let rip = rng.random_bool(cfg.rip_profile_probability);
            for _ in 0..poisson(cfg.mean_pre_comments, &mut rng)? {
                stamps.push((death - rng.random_range(1..=pre_span), Style::Pre));
            }
            let n_post = 1 + poisson(cfg.mean_post_comments - 1.0, &mut rng).unwrap_or(0);
            for _ in 0..n_post {
                // cubed uniform: most memorial comments arrive soon after death
                let u: f64 = rng.random();
                let style = if rng.random_bool(cfg.casual_post_fraction) {
                    Style::Pre
                } else {
                    Style::Post { rip }
                };
                stamps.push((death + (post_span * u * u * u) as i64, style));
            }
        } else {
            let count = 1 + poisson(cfg.mean_pre_comments + cfg.mean_post_comments - 1.0, &mut rng)?;
            for _ in 0..count {
                stamps.push((rng.random_range(lo - pre_span..=hi), Style::Pre));
            }
        }
        stamps.sort_by_key(|s| s.0);
        let mut comments = Vec::with_capacity(stamps.len());
        for (c, (timestamp, style)) in stamps.into_iter().enumerate() {
            // casual post-mortem comments keep post-mortem length
            let length = match (style, is_dead && timestamp >= death) {
                (Style::Post { .. }, _) | (Style::Pre, true) => cfg.post_length_mean,
                (Style::Pre, false) => cfg.pre_length_mean,
            };
            comments.push(Comment {
                comment_id: format!("{pid}-c{c:04}"),
                profile_id: pid.clone(),
                timestamp,
                text: sampler.comment_text(style, length, &mut rng)?,
                label: Some(Label::from_post(is_dead && timestamp >= death)),
            });
        }
        profiles.push(Profile::new(pid, is_dead.then_some(death), comments));
    }
    Corpus::from_profiles(profiles)
}
