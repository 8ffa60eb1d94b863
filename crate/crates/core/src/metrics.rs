//! Classification accuracy, topical depth of conversations, rating
//! correlations and inter-annotator agreement.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::corpus::{Conversation, ResponseRatings, Topic};
use crate::error::{Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidArgument(format!(
            "sequences of length {a} and {b}"
        )));
    }
    if a == 0 {
        return Err(Error::InvalidArgument("empty sequences".into()));
    }
    Ok(())
}

pub fn accuracy<T: PartialEq>(preds: &[T], gold: &[T]) -> Result<f64> {
    check_lengths(preds.len(), gold.len())?;
    let hits = preds.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Per-class accuracy (recall of each gold class) over `n_classes` labels;
/// `None` for classes absent from `gold`.
pub fn per_class_accuracy(
    preds: &[usize],
    gold: &[usize],
    n_classes: usize,
) -> Result<Vec<Option<f64>>> {
    check_lengths(preds.len(), gold.len())?;
    let mut hits = vec![0usize; n_classes];
    let mut support = vec![0usize; n_classes];
    for (&p, &g) in preds.iter().zip(gold) {
        if g >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {g} outside {n_classes} classes"
            )));
        }
        support[g] += 1;
        if p == g {
            hits[g] += 1;
        }
    }
    Ok(hits
        .iter()
        .zip(&support)
        .map(|(&h, &s)| (s > 0).then(|| h as f64 / s as f64))
        .collect())
}

/// For each turn, the shared topic when user and chatbot utterances carry
/// the same topic. With `include_other == false`, `Other` never counts.
pub fn topic_specific_turns(
    conv: &Conversation,
    include_other: bool,
) -> Result<Vec<Option<Topic>>> {
    conv.turns
        .iter()
        .enumerate()
        .map(|(i, t)| match (t.user.topic, t.chatbot.topic) {
            (Some(u), Some(c)) => Ok((u == c && (include_other || u != Topic::Other)).then_some(u)),
            _ => Err(Error::InvalidArgument(format!(
                "conversation {} turn {i} lacks a topic label",
                conv.id
            ))),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SubConversation {
    pub topic: Topic,
    pub start: usize,
    pub length: usize,
}

/// Maximal runs of consecutive topic-specific turns on one topic.
pub fn sub_conversations(conv: &Conversation, include_other: bool) -> Result<Vec<SubConversation>> {
    let mut out: Vec<SubConversation> = Vec::new();
    let mut prev: Option<Topic> = None;
    for (i, flag) in topic_specific_turns(conv, include_other)?
        .into_iter()
        .enumerate()
    {
        match flag {
            Some(t) if prev == Some(t) => out.last_mut().expect("run in progress").length += 1,
            Some(t) => out.push(SubConversation {
                topic: t,
                start: i,
                length: 1,
            }),
            None => {}
        }
        prev = flag;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopicalDepth {
    /// Longest sub-conversation.
    pub max: usize,
    /// Number of topic-specific turns.
    pub total: usize,
    pub per_topic: BTreeMap<Topic, usize>,
}

pub fn topical_depth(conv: &Conversation, include_other: bool) -> Result<TopicalDepth> {
    let subs = sub_conversations(conv, include_other)?;
    let mut per_topic = BTreeMap::new();
    for s in &subs {
        *per_topic.entry(s.topic).or_insert(0) += s.length;
    }
    Ok(TopicalDepth {
        max: subs.iter().map(|s| s.length).max().unwrap_or(0),
        total: subs.iter().map(|s| s.length).sum(),
        per_topic,
    })
}

/// `(comprehensible + relevant, interesting + continue)`.
pub fn coherence_engagement(r: &ResponseRatings) -> (u8, u8) {
    (
        r.comprehensible + r.relevant,
        r.interesting + r.continue_conversation,
    )
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::Undefined(
            "correlation needs at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined(
            "correlation with a constant sequence".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn cohens_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    let n = a.len() as f64;
    let mut ma: HashMap<&T, f64> = HashMap::new();
    let mut mb: HashMap<&T, f64> = HashMap::new();
    let mut agree = 0.0;
    for (x, y) in a.iter().zip(b) {
        *ma.entry(x).or_default() += 1.0;
        *mb.entry(y).or_default() += 1.0;
        if x == y {
            agree += 1.0;
        }
    }
    let p_o = agree / n;
    let p_e: f64 = ma
        .iter()
        .map(|(k, ca)| ca * mb.get(k).copied().unwrap_or(0.0))
        .sum::<f64>()
        / (n * n);
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(Error::Undefined("expected agreement is 1".into()));
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Which per-conversation depth number is correlated with ratings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthStatistic {
    Max,
    Total,
}

impl std::str::FromStr for DepthStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(DepthStatistic::Max),
            "total" => Ok(DepthStatistic::Total),
            other => Err(Error::InvalidArgument(format!(
                "unknown depth statistic `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    pub name: String,
    pub n: usize,
    pub r: f64,
    /// Student t statistic of `r` with `n - 2` degrees of freedom.
    pub t: f64,
    /// Two-sided p-value from a normal approximation to `t`.
    pub p_proxy: f64,
}

impl Correlation {
    pub fn new(name: impl Into<String>, x: &[f64], y: &[f64]) -> Result<Self> {
        let r = pearson(x, y)?;
        let n = x.len();
        let t = if n <= 2 {
            f64::NAN
        } else if r.abs() >= 1.0 {
            f64::INFINITY.copysign(r)
        } else {
            r * ((n - 2) as f64 / (1.0 - r * r)).sqrt()
        };
        let p_proxy = if t.is_nan() {
            1.0
        } else {
            erfc(t.abs() / std::f64::consts::SQRT_2)
        };
        Ok(Correlation {
            name: name.into(),
            n,
            r,
            t,
            p_proxy,
        })
    }
}

/// Complementary error function (Numerical Recipes `erfcc`, relative error
/// below 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Mean coherence and engagement over the rated chatbot responses of a
/// conversation; `None` when no response is rated.
pub fn conversation_ratings(conv: &Conversation) -> Option<(f64, f64)> {
    let rated: Vec<(u8, u8)> = conv
        .turns
        .iter()
        .filter_map(|t| t.chatbot.ratings.as_ref().map(coherence_engagement))
        .collect();
    if rated.is_empty() {
        return None;
    }
    let n = rated.len() as f64;
    Some((
        rated.iter().map(|r| r.0 as f64).sum::<f64>() / n,
        rated.iter().map(|r| r.1 as f64).sum::<f64>() / n,
    ))
}

/// Pearson correlation of per-conversation topical depth with mean
/// coherence and mean engagement. Conversations without rated responses
/// are skipped.
pub fn correlate_depth(
    convs: &[Conversation],
    statistic: DepthStatistic,
    include_other: bool,
) -> Result<Vec<Correlation>> {
    let (mut depth, mut coherence, mut engagement) = (Vec::new(), Vec::new(), Vec::new());
    for conv in convs {
        let Some((c, e)) = conversation_ratings(conv) else {
            continue;
        };
        let d = topical_depth(conv, include_other)?;
        depth.push(match statistic {
            DepthStatistic::Max => d.max,
            DepthStatistic::Total => d.total,
        } as f64);
        coherence.push(c);
        engagement.push(e);
    }
    if depth.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{} rated conversations; at least 2 are needed",
            depth.len()
        )));
    }
    Ok(vec![
        Correlation::new("coherence", &depth, &coherence)?,
        Correlation::new("engagement", &depth, &engagement)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScore {
    pub label: String,
    pub support: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthSummary {
    pub conversations: usize,
    pub mean_max: f64,
    pub mean_total: f64,
    pub per_topic: BTreeMap<Topic, usize>,
}

impl DepthSummary {
    pub fn from_conversations(convs: &[Conversation], include_other: bool) -> Result<Self> {
        let mut per_topic = BTreeMap::new();
        let (mut max, mut total) = (0usize, 0usize);
        for c in convs {
            let d = topical_depth(c, include_other)?;
            max += d.max;
            total += d.total;
            for (t, n) in d.per_topic {
                *per_topic.entry(t).or_insert(0) += n;
            }
        }
        let n = convs.len().max(1) as f64;
        Ok(DepthSummary {
            conversations: convs.len(),
            mean_max: max as f64 / n,
            mean_total: total as f64 / n,
            per_topic,
        })
    }
}

/// Everything an evaluation run reports. Absent sections are omitted from
/// both renderings.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub examples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_class: Vec<ClassScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyword_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyword_recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub correlations: Vec<Correlation>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports always serialize")
    }

    /// Aligned two-column plain-text rendering.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = Vec::new();
        let f = |v: f64| format!("{v:.4}");
        if let Some(n) = self.examples {
            rows.push(("examples".into(), n.to_string()));
        }
        if let Some(a) = self.accuracy {
            rows.push(("accuracy".into(), f(a)));
        }
        for c in &self.per_class {
            let v = c.accuracy.map_or("-".to_string(), f);
            rows.push((format!("  {}", c.label), format!("{v} (n={})", c.support)));
        }
        if let Some(p) = self.keyword_precision {
            rows.push(("keyword precision".into(), f(p)));
        }
        if let Some(r) = self.keyword_recall {
            rows.push(("keyword recall".into(), f(r)));
        }
        if let Some(d) = &self.depth {
            rows.push(("conversations".into(), d.conversations.to_string()));
            rows.push(("mean max depth".into(), f(d.mean_max)));
            rows.push(("mean total depth".into(), f(d.mean_total)));
            for (t, n) in &d.per_topic {
                rows.push((format!("  {t}"), n.to_string()));
            }
        }
        for c in &self.correlations {
            rows.push((
                format!("r(depth, {})", c.name),
                format!("{} (n={}, t={:.3}, p~{:.3e})", f(c.r), c.n, c.t, c.p_proxy),
            ));
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}
