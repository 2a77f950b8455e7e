//! Comments, profiles and classification documents.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{extract_ngrams, remove_stopwords, tokenize, NgramRange, Stopwords};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Pre,
    Post,
}

impl Label {
    pub fn is_post(self) -> bool {
        self == Label::Post
    }

    pub fn from_post(post: bool) -> Self {
        if post {
            Label::Post
        } else {
            Label::Pre
        }
    }

    /// `+1.0` for post, `-1.0` for pre.
    pub fn sign(self) -> f64 {
        if self.is_post() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Pre => "pre",
            Label::Post => "post",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" => Ok(Label::Pre),
            "post" => Ok(Label::Post),
            other => Err(Error::invalid(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: String,
    pub profile_id: String,
    /// Epoch seconds, UTC.
    pub timestamp: i64,
    pub text: String,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub profile_id: String,
    pub death_time: Option<i64>,
    /// Ascending by timestamp, ties by comment_id.
    pub comments: Vec<Comment>,
}

fn comment_order(a: &Comment, b: &Comment) -> std::cmp::Ordering {
    (a.timestamp, &a.comment_id).cmp(&(b.timestamp, &b.comment_id))
}

impl Profile {
    pub fn new(profile_id: impl Into<String>, death_time: Option<i64>, mut comments: Vec<Comment>) -> Self {
        comments.sort_by(comment_order);
        Profile {
            profile_id: profile_id.into(),
            death_time,
            comments,
        }
    }

    pub fn is_post_mortem(&self) -> bool {
        self.death_time.is_some()
    }

    /// Member comment texts in chronological order joined by one space.
    pub fn concatenated_text(&self) -> String {
        join_texts(self.comments.iter().map(|c| c.text.as_str()))
    }
}

pub(crate) fn join_texts<'a>(texts: impl Iterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for (i, t) in texts.enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

/// Labels every comment of a profile from its death_time: `post` iff the
/// comment timestamp is at or after the death.
pub fn derive_labels(profile: &Profile) -> Result<Profile> {
    let death = profile
        .death_time
        .ok_or_else(|| Error::CannotDerive(profile.profile_id.clone()))?;
    let mut out = profile.clone();
    for c in &mut out.comments {
        let derived = Label::from_post(c.timestamp >= death);
        match c.label {
            Some(l) if l != derived => return Err(Error::LabelConflict(c.comment_id.clone())),
            _ => c.label = Some(derived),
        }
    }
    Ok(out)
}

/// A labeled corpus: profiles sorted by profile_id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub profiles: Vec<Profile>,
}

/// One line of the corpus JSONL format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommentRecord {
    pub comment_id: String,
    pub profile_id: String,
    pub timestamp: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death_time: Option<i64>,
}

impl Corpus {
    /// Groups comments into profiles, sorts everything, validates ids and
    /// derives missing labels for profiles with a death_time.
    pub fn from_profiles(profiles: Vec<Profile>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut ids = HashSet::new();
        let mut out = Vec::with_capacity(profiles.len());
        for p in profiles {
            if !ids.insert(p.profile_id.clone()) {
                return Err(Error::invalid(format!("duplicate profile_id {:?}", p.profile_id)));
            }
            for c in &p.comments {
                if c.profile_id != p.profile_id {
                    return Err(Error::invalid(format!(
                        "comment {:?} belongs to {:?}, not {:?}",
                        c.comment_id, c.profile_id, p.profile_id
                    )));
                }
                if c.timestamp <= 0 {
                    return Err(Error::invalid(format!(
                        "comment {:?} has non-positive timestamp",
                        c.comment_id
                    )));
                }
                if !seen.insert(c.comment_id.clone()) {
                    return Err(Error::DuplicateCommentId(c.comment_id.clone()));
                }
            }
            let p = Profile::new(p.profile_id, p.death_time, p.comments);
            out.push(if p.death_time.is_some() { derive_labels(&p)? } else { p });
        }
        out.sort_by(|a, b| a.profile_id.cmp(&b.profile_id));
        Ok(Corpus { profiles: out })
    }

    pub fn from_jsonl_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut comments: BTreeMap<String, Vec<Comment>> = BTreeMap::new();
        let mut deaths: HashMap<String, Option<i64>> = HashMap::new();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CommentRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            if rec.timestamp <= 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("timestamp must be positive, got {}", rec.timestamp),
                });
            }
            if !seen.insert(rec.comment_id.clone()) {
                return Err(Error::Parse {
                    line: lineno,
                    message: Error::DuplicateCommentId(rec.comment_id).to_string(),
                });
            }
            match deaths.get(&rec.profile_id) {
                Some(d) if *d != rec.death_time => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!(
                            "death_time for profile {:?} differs from earlier records",
                            rec.profile_id
                        ),
                    })
                }
                Some(_) => {}
                None => {
                    deaths.insert(rec.profile_id.clone(), rec.death_time);
                }
            }
            comments.entry(rec.profile_id.clone()).or_default().push(Comment {
                comment_id: rec.comment_id,
                profile_id: rec.profile_id,
                timestamp: rec.timestamp,
                text: rec.text,
                label: rec.label,
            });
        }
        let profiles = comments
            .into_iter()
            .map(|(id, cs)| {
                let death = deaths[&id];
                Profile::new(id, death, cs)
            })
            .collect();
        Self::from_profiles(profiles)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for p in &self.profiles {
            for c in &p.comments {
                let rec = CommentRecord {
                    comment_id: c.comment_id.clone(),
                    profile_id: c.profile_id.clone(),
                    timestamp: c.timestamp,
                    text: c.text.clone(),
                    label: c.label,
                    death_time: p.death_time,
                };
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn n_comments(&self) -> usize {
        self.profiles.iter().map(|p| p.comments.len()).sum()
    }

    pub fn comments(&self) -> impl Iterator<Item = &Comment> {
        self.profiles.iter().flat_map(|p| p.comments.iter())
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.comments().all(|c| c.label.is_some())
    }
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Corpus::from_jsonl_reader(BufReader::new(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Profile,
    Comment,
}

impl FromStr for UnitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "profile" => Ok(UnitKind::Profile),
            "comment" => Ok(UnitKind::Comment),
            other => Err(Error::invalid(format!("unknown unit {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub unit_kind: UnitKind,
    pub source_id: String,
    pub text: String,
    pub label: Option<Label>,
}

/// Turns a corpus into classification units.
///
/// Profile documents concatenate every comment of the profile and carry the
/// profile's mortality as label. Comment documents carry the comment label and
/// fail on unlabeled comments.
pub fn make_documents(corpus: &Corpus, unit: UnitKind) -> Result<Vec<Document>> {
    match unit {
        UnitKind::Profile => Ok(corpus
            .profiles
            .iter()
            .map(|p| Document {
                unit_kind: UnitKind::Profile,
                source_id: p.profile_id.clone(),
                text: p.concatenated_text(),
                label: Some(Label::from_post(p.is_post_mortem())),
            })
            .collect()),
        UnitKind::Comment => corpus
            .comments()
            .map(|c| {
                let label = c.label.ok_or_else(|| Error::Unlabeled(c.comment_id.clone()))?;
                Ok(Document {
                    unit_kind: UnitKind::Comment,
                    source_id: c.comment_id.clone(),
                    text: c.text.clone(),
                    label: Some(label),
                })
            })
            .collect(),
    }
}

/// Splits document indices into `k` stratified folds.
///
/// Each class is shuffled with a seeded ChaCha stream and dealt round-robin,
/// continuing the fold cursor across classes so fold sizes stay balanced.
/// Indices inside each fold are ascending.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut cursor = 0;
    for class in [Label::Pre, Label::Post] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::invalid(format!(
                "class {class} has {} members, fewer than k={k}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            folds[cursor % k].push(i);
            cursor += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Seeded train/test split of profiles; the test side holds
/// `round(test_fraction * N)` profiles. Both sides keep profile_id order.
pub fn split_profiles(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if corpus.profiles.is_empty() {
        return Err(Error::invalid("cannot split an empty corpus"));
    }
    let n = corpus.profiles.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test: HashSet<usize> = order[..n_test].iter().copied().collect();
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (i, p) in corpus.profiles.iter().enumerate() {
        if test.contains(&i) {
            held.push(p.clone());
        } else {
            train.push(p.clone());
        }
    }
    Ok((Corpus { profiles: train }, Corpus { profiles: held }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_comments: usize,
    pub total_profiles: usize,
    pub post_comments: usize,
    pub post_fraction: f64,
    pub pre_comments: usize,
    pub pre_fraction: f64,
    pub mean_comments_per_profile: f64,
    pub median_comments_per_profile: f64,
    pub mean_words_per_comment: f64,
    pub mean_words_per_post_comment: f64,
    pub mean_words_per_pre_comment: f64,
    pub mean_post_comments_per_profile: f64,
    pub mean_pre_comments_per_profile: f64,
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len().is_multiple_of(2) {
        (values[m - 1] + values[m]) / 2.0
    } else {
        values[m]
    }
}

/// Descriptive statistics; word counts use [`tokenize`].
pub fn corpus_stats(corpus: &Corpus) -> Result<CorpusStats> {
    let mut post = 0;
    let mut pre = 0;
    let mut words = [0usize; 2];
    for c in corpus.comments() {
        let n = tokenize(&c.text).total_tokens();
        match c.label.ok_or_else(|| Error::Unlabeled(c.comment_id.clone()))? {
            Label::Post => {
                post += 1;
                words[1] += n;
            }
            Label::Pre => {
                pre += 1;
                words[0] += n;
            }
        }
    }
    let total = post + pre;
    let profiles = corpus.profiles.len();
    let mut per_profile: Vec<f64> = corpus
        .profiles
        .iter()
        .map(|p| p.comments.len() as f64)
        .collect();
    let post_fraction = mean(post as f64, total);
    Ok(CorpusStats {
        total_comments: total,
        total_profiles: profiles,
        post_comments: post,
        post_fraction,
        pre_comments: pre,
        pre_fraction: if total == 0 { 0.0 } else { 1.0 - post_fraction },
        mean_comments_per_profile: mean(total as f64, profiles),
        median_comments_per_profile: median(&mut per_profile),
        mean_words_per_comment: mean((words[0] + words[1]) as f64, total),
        mean_words_per_post_comment: mean(words[1] as f64, post),
        mean_words_per_pre_comment: mean(words[0] as f64, pre),
        mean_post_comments_per_profile: mean(post as f64, profiles),
        mean_pre_comments_per_profile: mean(pre as f64, profiles),
    })
}

/// Most frequent stopword-filtered n-grams of order `n` among comments of one
/// class; descending by count, ties lexicographic.
pub fn top_ngrams(
    corpus: &Corpus,
    n: usize,
    k: usize,
    class: Label,
    stopwords: &Stopwords,
) -> Result<Vec<(String, usize)>> {
    let range = NgramRange::exactly(n)?;
    let mut counts: HashMap<String, usize> = HashMap::new();
    for c in corpus.comments().filter(|c| c.label == Some(class)) {
        let tokens = remove_stopwords(&tokenize(&c.text).tokens, stopwords);
        for g in extract_ngrams(&tokens, range) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    let mut rows: Vec<(String, usize)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.truncate(k);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, profile: &str, ts: i64, text: &str, death: Option<i64>) -> String {
        let mut v = serde_json::json!({
            "comment_id": id, "profile_id": profile, "timestamp": ts, "text": text,
        });
        if let Some(d) = death {
            v["death_time"] = d.into();
        }
        v.to_string()
    }

    fn sample() -> String {
        [
            rec("a1", "A", 10, "hey there", Some(20)),
            rec("a3", "A", 30, "rip miss you", Some(20)),
            rec("a2", "A", 20, "miss miss you", Some(20)),
            rec("b1", "B", 5, "lol wait", None),
            rec("b2", "B", 6, "yo", None),
        ]
        .join("\n")
    }

    fn load(s: &str) -> Result<Corpus> {
        Corpus::from_jsonl_reader(s.as_bytes())
    }

    #[test]
    fn load_counts_sorts_and_labels() {
        let mut s = sample();
        s.push('\n');
        let c = load(&s).unwrap();
        assert_eq!(c.profiles.len(), 2);
        assert_eq!(c.n_comments(), 5);
        let a = &c.profiles[0];
        let ids: Vec<_> = a.comments.iter().map(|c| c.comment_id.as_str()).collect();
        assert_eq!(ids, ["a1", "a2", "a3"]);
        let labels: Vec<_> = a.comments.iter().map(|c| c.label).collect();
        assert_eq!(labels, [Some(Label::Pre), Some(Label::Post), Some(Label::Post)]);
        assert!(c.profiles[1].comments.iter().all(|c| c.label.is_none()));
    }

    #[test]
    fn load_reports_line_of_bad_record() {
        let s = [
            rec("a1", "A", 10, "x", None),
            rec("a2", "A", 11, "y", None),
            r#"{"comment_id": "a3", "profile_id": "A", "timestamp": 12}"#.to_string(),
        ]
        .join("\n");
        match load(&s) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("text"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let s = r#"{"comment_id": "a", "profile_id": "A", "timestamp": 1.5, "text": ""}"#;
        assert!(matches!(load(s), Err(Error::Parse { line: 1, .. })));
        let s = r#"{"comment_id": "a", "profile_id": "A", "timestamp": 0, "text": ""}"#;
        assert!(matches!(load(s), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn load_rejects_duplicate_ids() {
        let s = [rec("x", "A", 1, "a", None), rec("x", "B", 2, "b", None)].join("\n");
        let err = load(&s).unwrap_err();
        assert!(err.to_string().contains("duplicate comment_id"));
    }

    #[test]
    fn derive_label_boundaries() {
        let mk = |ts| Comment {
            comment_id: format!("c{ts}"),
            profile_id: "p".into(),
            timestamp: ts,
            text: String::new(),
            label: None,
        };
        let p = Profile::new("p", Some(100), vec![mk(100), mk(99)]);
        let d = derive_labels(&p).unwrap();
        assert_eq!(d.comments[0].label, Some(Label::Pre));
        assert_eq!(d.comments[1].label, Some(Label::Post));

        let alive = Profile::new("p", None, vec![mk(1)]);
        assert!(matches!(derive_labels(&alive), Err(Error::CannotDerive(_))));

        let mut bad = mk(150);
        bad.label = Some(Label::Pre);
        let conflict = Profile::new("p", Some(100), vec![bad]);
        assert!(matches!(derive_labels(&conflict), Err(Error::LabelConflict(id)) if id == "c150"));
    }

    #[test]
    fn profile_and_comment_documents() {
        let cs = vec![
            Comment { comment_id: "1".into(), profile_id: "p".into(), timestamp: 1, text: "hey".into(), label: None },
            Comment { comment_id: "2".into(), profile_id: "p".into(), timestamp: 5, text: "rip".into(), label: None },
        ];
        let corpus = Corpus::from_profiles(vec![Profile::new("p", Some(5), cs.clone())]).unwrap();
        let docs = make_documents(&corpus, UnitKind::Profile).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].text, "hey rip");
        assert_eq!(docs[0].label, Some(Label::Post));

        let docs = make_documents(&corpus, UnitKind::Comment).unwrap();
        let labels: Vec<_> = docs.iter().map(|d| d.label.unwrap()).collect();
        assert_eq!(labels, [Label::Pre, Label::Post]);

        let alive = Corpus::from_profiles(vec![Profile::new("p", None, cs)]).unwrap();
        let docs = make_documents(&alive, UnitKind::Profile).unwrap();
        assert_eq!(docs[0].label, Some(Label::Pre));
        assert!(matches!(make_documents(&alive, UnitKind::Comment), Err(Error::Unlabeled(_))));
    }

    #[test]
    fn kfold_forced_stratification() {
        let labels: Vec<Label> = (0..10).map(|i| Label::from_post(i % 2 == 0)).collect();
        let folds = stratified_kfold(&labels, 5, 3).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 2);
            assert_eq!(f.iter().filter(|&&i| labels[i].is_post()).count(), 1);
        }
        assert_eq!(folds, stratified_kfold(&labels, 5, 3).unwrap());
        assert!(stratified_kfold(&labels, 11, 3).is_err());
        assert!(stratified_kfold(&labels, 1, 3).is_err());
    }

    #[test]
    fn profile_split() {
        let profiles = (0..10)
            .map(|i| Profile::new(format!("p{i}"), None, vec![]))
            .collect();
        let c = Corpus::from_profiles(profiles).unwrap();
        let (train, test) = split_profiles(&c, 0.2, 9).unwrap();
        assert_eq!((train.profiles.len(), test.profiles.len()), (8, 2));
        assert_eq!(split_profiles(&c, 0.2, 9).unwrap().1, test);
        assert!(split_profiles(&c, 1.0, 9).is_err());
        assert!(split_profiles(&c, 0.0, 9).is_err());
    }

    #[test]
    fn stats_counts() {
        let c = load(&sample()).unwrap();
        assert!(matches!(corpus_stats(&c), Err(Error::Unlabeled(_))));

        let labeled = sample().replace(r#""text":"lol wait""#, r#""label":"pre","text":"lol wait""#)
            .replace(r#""text":"yo""#, r#""label":"pre","text":"yo""#);
        let c = load(&labeled).unwrap();
        let s = corpus_stats(&c).unwrap();
        assert_eq!((s.total_profiles, s.total_comments, s.post_comments, s.pre_comments), (2, 5, 2, 3));
        assert!((s.post_fraction + s.pre_fraction - 1.0).abs() < 1e-12);
        assert_eq!(s.median_comments_per_profile, 2.5);
        assert_eq!(s.mean_words_per_post_comment, 3.0);
    }

    #[test]
    fn stats_mean_words() {
        let s = (0..4)
            .map(|i| {
                serde_json::json!({"comment_id": i.to_string(), "profile_id": "p", "timestamp": i + 1,
                    "text": "a b", "label": "pre"})
                .to_string()
            })
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(corpus_stats(&load(&s).unwrap()).unwrap().mean_words_per_comment, 2.0);
    }

    #[test]
    fn top_ngram_table() {
        let s = rec("1", "p", 5, "miss miss you", Some(1));
        let c = load(&s).unwrap();
        let sw = Stopwords::default();
        assert_eq!(top_ngrams(&c, 1, 5, Label::Post, &sw).unwrap(), vec![("miss".to_string(), 2)]);
        assert_eq!(
            top_ngrams(&c, 1, 5, Label::Post, &Stopwords::empty()).unwrap(),
            vec![("miss".to_string(), 2), ("you".to_string(), 1)]
        );
        assert!(top_ngrams(&c, 1, 5, Label::Pre, &sw).unwrap().is_empty());
        let s = [rec("1", "p", 5, "love miss love miss", Some(1))].join("\n");
        let c = load(&s).unwrap();
        assert_eq!(
            top_ngrams(&c, 2, 2, Label::Post, &sw).unwrap(),
            vec![("love miss".to_string(), 2), ("miss love".to_string(), 1)]
        );
    }

    #[test]
    fn jsonl_roundtrip() {
        let c = load(&sample()).unwrap();
        let mut buf = Vec::new();
        c.write_jsonl(&mut buf).unwrap();
        assert_eq!(load(std::str::from_utf8(&buf).unwrap()).unwrap(), c);
    }

    proptest! {
        #[test]
        fn kfold_partitions(n_pre in 3usize..40, n_post in 3usize..40, k in 2usize..4, seed: u64) {
            let mut labels = vec![Label::Pre; n_pre];
            labels.extend(vec![Label::Post; n_post]);
            let folds = stratified_kfold(&labels, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for class in [Label::Pre, Label::Post] {
                let total = labels.iter().filter(|&&l| l == class).count() as f64;
                for f in &folds {
                    let got = f.iter().filter(|&&i| labels[i] == class).count() as f64;
                    prop_assert!((got - total / k as f64).abs() <= 1.0);
                }
            }
        }

        #[test]
        fn split_partitions(n in 1usize..50, frac in 0.01f64..0.99, seed: u64) {
            let profiles = (0..n).map(|i| Profile::new(format!("p{i:03}"), None, vec![])).collect();
            let c = Corpus::from_profiles(profiles).unwrap();
            let (a, b) = split_profiles(&c, frac, seed).unwrap();
            prop_assert_eq!(b.profiles.len(), (frac * n as f64).round() as usize);
            let mut ids: Vec<_> = a.profiles.iter().chain(&b.profiles).map(|p| p.profile_id.clone()).collect();
            ids.sort();
            prop_assert_eq!(ids, c.profiles.iter().map(|p| p.profile_id.clone()).collect::<Vec<_>>());
        }
    }
}
