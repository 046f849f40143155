use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.8;

/// Case-folded form with runs of whitespace collapsed to one space.
pub fn normalize_form(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Length of the longest common subsequence of two character sequences,
/// computed with a bit-parallel row update over `a`.
pub fn lcs_len(a: &[char], b: &[char]) -> usize {
    let (a, b) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if a.is_empty() {
        return 0;
    }
    let words = a.len().div_ceil(64);
    let mut masks: HashMap<char, Vec<u64>> = HashMap::new();
    for (i, &c) in a.iter().enumerate() {
        masks.entry(c).or_insert_with(|| vec![0; words])[i / 64] |= 1 << (i % 64);
    }
    let mut v = vec![!0u64; words];
    for c in b {
        let Some(mask) = masks.get(c) else { continue };
        let mut carry = false;
        for (w, &m) in v.iter_mut().zip(mask) {
            let u = *w & m;
            let (s1, c1) = w.overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            carry = c1 || c2;
            *w = s2 | (*w & !m);
        }
    }
    let mut zeros = 0;
    for (i, &w) in v.iter().enumerate() {
        let bits = (a.len() - i * 64).min(64);
        let live = if bits == 64 { w } else { w | (!0u64 << bits) };
        zeros += live.count_zeros() as usize;
    }
    zeros
}

/// `2·M / T` with `M` the common-subsequence length and `T` the combined
/// length. Two empty strings are identical.
pub fn ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * lcs_len(&a, &b) as f64 / total as f64
}

/// Token-set similarity: the best [`ratio`] among the shared tokens and the
/// shared tokens extended by each side's remainder, all token lists sorted.
pub fn token_set_ratio(a: &str, b: &str) -> f64 {
    let ta: BTreeSet<&str> = a.split_whitespace().collect();
    let tb: BTreeSet<&str> = b.split_whitespace().collect();
    if ta.is_empty() || tb.is_empty() {
        return ratio(a.trim(), b.trim());
    }
    let join = |set: BTreeSet<&str>| set.into_iter().collect::<Vec<_>>().join(" ");
    let shared = join(ta.intersection(&tb).copied().collect());
    let only_a = join(ta.difference(&tb).copied().collect());
    let only_b = join(tb.difference(&ta).copied().collect());
    let extend = |rest: &str| match (shared.is_empty(), rest.is_empty()) {
        (true, _) => rest.to_string(),
        (false, true) => shared.clone(),
        (false, false) => format!("{shared} {rest}"),
    };
    let (ca, cb) = (extend(&only_a), extend(&only_b));
    let mut best = ratio(&ca, &cb);
    if !shared.is_empty() {
        best = best.max(ratio(&shared, &ca)).max(ratio(&shared, &cb));
    }
    best
}

/// Similarity of two surface forms after case folding and whitespace
/// collapsing.
pub fn similarity(a: &str, b: &str) -> f64 {
    token_set_ratio(&normalize_form(a), &normalize_form(b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalElement {
    pub canonical_id: String,
    pub representative: String,
    pub surface_forms: BTreeSet<String>,
}

/// Greedy clustering of surface forms. Forms are visited in lexicographic
/// order of their normalized text; each joins the first cluster whose
/// representative is similar enough, or founds a new one.
pub fn normalize<'a>(forms: impl IntoIterator<Item = &'a str>, threshold: f64) -> Vec<CanonicalElement> {
    let mut ordered: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for form in forms {
        let key = normalize_form(form);
        if !key.is_empty() {
            ordered.entry(key).or_default().insert(form.to_string());
        }
    }
    let mut clusters: Vec<CanonicalElement> = Vec::new();
    for (key, originals) in ordered {
        match clusters
            .iter_mut()
            .find(|c| token_set_ratio(&c.representative, &key) >= threshold)
        {
            Some(cluster) => cluster.surface_forms.extend(originals),
            None => clusters.push(CanonicalElement {
                canonical_id: key.clone(),
                representative: key,
                surface_forms: originals,
            }),
        }
    }
    clusters
}

/// Lookup from any surface form to its canonical id.
#[derive(Debug, Clone, Default)]
pub struct ElementIndex {
    by_form: BTreeMap<String, String>,
}

impl ElementIndex {
    pub fn new(elements: &[CanonicalElement]) -> Self {
        let mut by_form = BTreeMap::new();
        for element in elements {
            for form in &element.surface_forms {
                by_form.insert(normalize_form(form), element.canonical_id.clone());
            }
        }
        ElementIndex { by_form }
    }

    pub fn canonical_of(&self, form: &str) -> Option<&str> {
        self.by_form.get(&normalize_form(form)).map(String::as_str)
    }
}
