//! Phoneme inventory, pronunciation lexicon, word-to-phoneme conversion and
//! maximal-onset syllabification.
//!
//! Tokens are plain strings; vowels carry a trailing stress digit (0 none,
//! 1 primary, 2 secondary). The default inventory ships as a data file with
//! exactly [`EXPECTED_TOKEN_COUNT`] tokens; strict mode enforces that count.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

/// Token count the default inventory is pinned to.
pub const EXPECTED_TOKEN_COUNT: usize = 84;

/// Built-in inventory file contents.
pub const DEFAULT_INVENTORY: &str = include_str!("../data/inventory.txt");

/// Ordered phoneme token set with stable integer IDs and the three special
/// tokens: utterance start, word boundary and pause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
    start_id: usize,
    word_boundary_id: usize,
    pause_id: usize,
}

impl PhonemeInventory {
    /// Parse an inventory file: one token per line, order defines IDs, an
    /// optional tab-separated second column flags specials
    /// (`start` / `word-boundary` / `pause`).
    ///
    /// Returns the inventory plus warnings (non-strict count mismatches).
    pub fn parse(text: &str, strict: bool) -> Result<(Self, Vec<String>)> {
        let mut tokens = Vec::new();
        let mut ids = HashMap::new();
        let mut start_id = None;
        let mut word_boundary_id = None;
        let mut pause_id = None;

        for (number, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with(";;;") {
                continue;
            }
            let mut columns = line.split('\t');
            let token = columns.next().unwrap().trim().to_string();
            let special = columns.next().map(str::trim);
            let id = tokens.len();
            if ids.insert(token.clone(), id).is_some() {
                return Err(Error::Inventory(format!(
                    "duplicate token \"{token}\" at line {}",
                    number + 1
                )));
            }
            match special {
                Some("start") => start_id = Some(id),
                Some("word-boundary") => word_boundary_id = Some(id),
                Some("pause") => pause_id = Some(id),
                Some(other) if !other.is_empty() => {
                    return Err(Error::Inventory(format!(
                        "unknown special role \"{other}\" at line {}",
                        number + 1
                    )));
                }
                _ => {}
            }
            tokens.push(token);
        }

        let start_id =
            start_id.ok_or_else(|| Error::Inventory("missing start token <s>".into()))?;
        let word_boundary_id = word_boundary_id
            .ok_or_else(|| Error::Inventory("missing word boundary token <wb>".into()))?;
        let pause_id = pause_id.ok_or_else(|| Error::Inventory("missing pause token".into()))?;
        if start_id == word_boundary_id || start_id == pause_id || word_boundary_id == pause_id {
            return Err(Error::Inventory("special tokens must be distinct".into()));
        }

        let mut warnings = Vec::new();
        if tokens.len() != EXPECTED_TOKEN_COUNT {
            let message = format!(
                "inventory has {} tokens, expected {EXPECTED_TOKEN_COUNT}",
                tokens.len()
            );
            if strict {
                return Err(Error::Inventory(message));
            }
            warnings.push(message);
        }

        Ok((
            Self {
                tokens,
                ids,
                start_id,
                word_boundary_id,
                pause_id,
            },
            warnings,
        ))
    }

    /// The built-in 84-token inventory.
    pub fn default_inventory() -> Self {
        let (inventory, warnings) =
            Self::parse(DEFAULT_INVENTORY, true).expect("built-in inventory must parse");
        debug_assert!(warnings.is_empty());
        inventory
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn start_id(&self) -> usize {
        self.start_id
    }

    pub fn word_boundary_id(&self) -> usize {
        self.word_boundary_id
    }

    pub fn pause_id(&self) -> usize {
        self.pause_id
    }
}

/// Vowel tokens carry a stress digit as their final character.
pub fn is_vowel_token(token: &str) -> bool {
    token
        .chars()
        .last()
        .map(|c| matches!(c, '0' | '1' | '2'))
        .unwrap_or(false)
}

/// Word-to-pronunciation mapping; keys are uppercase, values hold one or
/// more pronunciations in listing order.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, Vec<Vec<String>>>,
}

impl Lexicon {
    /// Parse `WORD  PH1 PH2 …` lines. Variants use a `WORD(2)` suffix and
    /// `;;;` starts a comment line. Every token must be in the inventory.
    pub fn parse(text: &str, inventory: &PhonemeInventory) -> Result<Self> {
        let mut entries: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        for (number, raw) in text.lines().enumerate() {
            let line_number = number + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with(";;;") {
                continue;
            }
            let mut fields = line.split_whitespace();
            let head = fields.next().unwrap();
            let word = strip_variant_suffix(head).to_uppercase();
            if word.is_empty() {
                return Err(Error::LexiconEntry {
                    line: line_number,
                    message: "empty word".into(),
                });
            }
            let pronunciation: Vec<String> = fields.map(str::to_string).collect();
            if pronunciation.is_empty() {
                return Err(Error::LexiconEntry {
                    line: line_number,
                    message: format!("empty pronunciation for \"{word}\""),
                });
            }
            for token in &pronunciation {
                if inventory.id_of(token).is_none() {
                    return Err(Error::LexiconEntry {
                        line: line_number,
                        message: format!("unknown phoneme token \"{token}\""),
                    });
                }
                if is_vowel_token(token) {
                    continue;
                }
                if token.chars().last().map(|c| c.is_ascii_digit()) == Some(true) {
                    return Err(Error::LexiconEntry {
                        line: line_number,
                        message: format!("stress digit on non-vowel token \"{token}\""),
                    });
                }
            }
            entries.entry(word).or_default().push(pronunciation);
        }
        Ok(Self { entries })
    }

    /// Case-insensitive lookup of all pronunciations for a word.
    pub fn lookup(&self, word: &str) -> Option<&[Vec<String>]> {
        self.entries.get(&word.to_uppercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn strip_variant_suffix(head: &str) -> &str {
    if let Some(open) = head.find('(') {
        if head.ends_with(')') {
            return &head[..open];
        }
    }
    head
}

/// Normalize a lyric word for lookup: strip punctuation (keeping in-word
/// apostrophes) and uppercase.
pub fn normalize_word(raw: &str) -> String {
    raw.chars()
        .filter(|c| c.is_alphanumeric() || *c == '\'')
        .collect::<String>()
        .to_uppercase()
}

/// Convert words to their first-listed pronunciations. Punctuation is
/// ignored and lookup is case-insensitive. All out-of-vocabulary words are
/// collected into a single error; there is no letter-to-sound fallback.
pub fn phonemize(words: &[String], lexicon: &Lexicon) -> Result<Vec<Vec<String>>> {
    let mut pronunciations = Vec::with_capacity(words.len());
    let mut missing = Vec::new();
    for word in words {
        let normalized = normalize_word(word);
        match lexicon.lookup(&normalized) {
            Some(listed) if !normalized.is_empty() => {
                pronunciations.push(listed[0].clone());
            }
            _ => {
                let shown = if normalized.is_empty() {
                    word.to_uppercase()
                } else {
                    normalized
                };
                if !missing.contains(&shown) {
                    missing.push(shown);
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::OutOfVocabulary { words: missing });
    }
    Ok(pronunciations)
}

/// Legal syllable-onset clusters used by maximal-onset syllabification.
#[derive(Debug, Clone)]
pub struct OnsetTable {
    clusters: HashSet<Vec<String>>,
    max_len: usize,
}

impl OnsetTable {
    pub fn new<I, C, S>(clusters: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let clusters: HashSet<Vec<String>> = clusters
            .into_iter()
            .map(|cluster| cluster.into_iter().map(Into::into).collect())
            .collect();
        let max_len = clusters.iter().map(Vec::len).max().unwrap_or(0);
        Self { clusters, max_len }
    }

    /// English defaults: every single consonant except `ng` can open a
    /// syllable, plus the usual two- and three-consonant clusters.
    pub fn english_default() -> Self {
        let singles = [
            "b", "ch", "d", "dh", "dx", "el", "em", "en", "f", "g", "hh", "jh", "k", "l", "m", "n",
            "nx", "p", "q", "r", "s", "sh", "t", "th", "v", "w", "wh", "y", "z", "zh",
        ];
        let doubles = [
            ["p", "l"],
            ["p", "r"],
            ["p", "y"],
            ["b", "l"],
            ["b", "r"],
            ["b", "y"],
            ["t", "r"],
            ["t", "w"],
            ["d", "r"],
            ["d", "w"],
            ["k", "l"],
            ["k", "r"],
            ["k", "w"],
            ["k", "y"],
            ["g", "l"],
            ["g", "r"],
            ["g", "w"],
            ["f", "l"],
            ["f", "r"],
            ["f", "y"],
            ["v", "y"],
            ["th", "r"],
            ["th", "w"],
            ["sh", "r"],
            ["s", "l"],
            ["s", "w"],
            ["s", "m"],
            ["s", "n"],
            ["s", "p"],
            ["s", "t"],
            ["s", "k"],
            ["s", "f"],
            ["hh", "y"],
            ["m", "y"],
            ["n", "y"],
            ["l", "y"],
        ];
        let triples = [
            ["s", "t", "r"],
            ["s", "p", "r"],
            ["s", "k", "r"],
            ["s", "p", "l"],
            ["s", "k", "w"],
            ["s", "k", "y"],
            ["s", "p", "y"],
            ["s", "t", "y"],
        ];
        let mut clusters: Vec<Vec<String>> = Vec::new();
        clusters.extend(singles.iter().map(|s| vec![s.to_string()]));
        clusters.extend(
            doubles
                .iter()
                .map(|pair| pair.iter().map(|s| s.to_string()).collect()),
        );
        clusters.extend(
            triples
                .iter()
                .map(|triple| triple.iter().map(|s| s.to_string()).collect()),
        );
        Self::new(clusters)
    }

    pub fn is_legal(&self, cluster: &[String]) -> bool {
        cluster.is_empty() || self.clusters.contains(cluster)
    }
}

impl Default for OnsetTable {
    fn default() -> Self {
        Self::english_default()
    }
}

/// Partition a pronunciation into `n_syllables` contiguous groups, one vowel
/// nucleus per group; intervocalic consonants go to the following syllable's
/// onset when the resulting cluster is legal (maximal onset), otherwise to
/// the preceding coda. `n_syllables == 1` returns the whole pronunciation.
pub fn syllabify(
    word: &str,
    pronunciation: &[String],
    n_syllables: usize,
    onsets: &OnsetTable,
) -> Result<Vec<Vec<String>>> {
    if n_syllables == 0 {
        return Err(Error::Syllabification {
            word: word.to_string(),
            message: "zero syllables requested".into(),
        });
    }
    if pronunciation.is_empty() {
        return Err(Error::Syllabification {
            word: word.to_string(),
            message: "empty pronunciation".into(),
        });
    }
    if n_syllables == 1 {
        return Ok(vec![pronunciation.to_vec()]);
    }

    let nuclei: Vec<usize> = pronunciation
        .iter()
        .enumerate()
        .filter(|(_, token)| is_vowel_token(token))
        .map(|(index, _)| index)
        .collect();
    if nuclei.len() < n_syllables {
        return Err(Error::Syllabification {
            word: word.to_string(),
            message: format!(
                "{} vowels cannot fill {n_syllables} syllables",
                nuclei.len()
            ),
        });
    }
    if nuclei.len() > n_syllables {
        return Err(Error::Syllabification {
            word: word.to_string(),
            message: format!(
                "pronunciation has {} vowels but the score marks {n_syllables} syllables",
                nuclei.len()
            ),
        });
    }

    let mut groups = Vec::with_capacity(n_syllables);
    let mut group_start = 0;
    for window in nuclei.windows(2) {
        let (nucleus, next_nucleus) = (window[0], window[1]);
        let cluster = &pronunciation[nucleus + 1..next_nucleus];
        let onset_len = (0..=cluster.len().min(onsets.max_len))
            .rev()
            .find(|len| onsets.is_legal(&cluster[cluster.len() - len..]))
            .unwrap_or(0);
        let boundary = next_nucleus - onset_len;
        groups.push(pronunciation[group_start..boundary].to_vec());
        group_start = boundary;
    }
    groups.push(pronunciation[group_start..].to_vec());
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(spec: &str) -> Vec<String> {
        spec.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn default_inventory_has_expected_shape() {
        let inventory = PhonemeInventory::default_inventory();
        assert_eq!(inventory.len(), EXPECTED_TOKEN_COUNT);
        let ids: HashSet<usize> = (0..inventory.len())
            .map(|id| inventory.id_of(inventory.token(id).unwrap()).unwrap())
            .collect();
        assert_eq!(ids.len(), EXPECTED_TOKEN_COUNT);
        assert_ne!(inventory.start_id(), inventory.word_boundary_id());
        assert_ne!(inventory.start_id(), inventory.pause_id());
        assert!(inventory.id_of("g").is_some());
        assert!(inventory.id_of("ih1").is_some());
        assert!(inventory.id_of("uw1").is_some());
    }

    #[test]
    fn duplicate_token_rejected() {
        let text = "<s>\tstart\n<wb>\tword-boundary\n<pau>\tpause\naa1\naa1\n";
        let err = PhonemeInventory::parse(text, false).unwrap_err();
        assert!(matches!(err, Error::Inventory(m) if m.contains("duplicate")));
    }

    #[test]
    fn short_inventory_strict_vs_lenient() {
        let mut text = String::from("<s>\tstart\n<wb>\tword-boundary\n<pau>\tpause\n");
        for index in 0..67 {
            text.push_str(&format!("p{index}\n"));
        }
        assert!(PhonemeInventory::parse(&text, true).is_err());
        let (inventory, warnings) = PhonemeInventory::parse(&text, false).unwrap();
        assert_eq!(inventory.len(), 70);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("70"));
    }

    #[test]
    fn missing_special_rejected() {
        let text = "<s>\tstart\n<pau>\tpause\naa1\n";
        let err = PhonemeInventory::parse(text, false).unwrap_err();
        assert!(matches!(err, Error::Inventory(m) if m.contains("word boundary")));
    }

    #[test]
    fn lexicon_basic_entry_and_variants() {
        let inventory = PhonemeInventory::default_inventory();
        let text = "GIVE  g ih1 v\nA  ah0\nA(2)  ey1\n;;; comment\n";
        let lexicon = Lexicon::parse(text, &inventory).unwrap();
        assert_eq!(lexicon.lookup("GIVE").unwrap(), &[tokens("g ih1 v")]);
        assert_eq!(
            lexicon.lookup("a").unwrap(),
            &[tokens("ah0"), tokens("ey1")]
        );
    }

    #[test]
    fn lexicon_unknown_token_names_line() {
        let inventory = PhonemeInventory::default_inventory();
        let err = Lexicon::parse("GIVE  g ih1 v\nFOO  zz9\n", &inventory).unwrap_err();
        match err {
            Error::LexiconEntry { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("zz9"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn lexicon_empty_pronunciation_rejected() {
        let inventory = PhonemeInventory::default_inventory();
        let err = Lexicon::parse("GIVE\n", &inventory).unwrap_err();
        assert!(matches!(err, Error::LexiconEntry { .. }));
    }

    #[test]
    fn phonemize_strips_punctuation_and_case() {
        let inventory = PhonemeInventory::default_inventory();
        let lexicon = Lexicon::parse("GIVE  g ih1 v\n", &inventory).unwrap();
        let result = phonemize(&["give,".to_string(), "GIVE!".to_string()], &lexicon).unwrap();
        assert_eq!(result, vec![tokens("g ih1 v"), tokens("g ih1 v")]);
    }

    #[test]
    fn phonemize_lists_all_oov_words() {
        let inventory = PhonemeInventory::default_inventory();
        let lexicon = Lexicon::parse("GIVE  g ih1 v\n", &inventory).unwrap();
        let err = phonemize(
            &["qwzrt".to_string(), "give".to_string(), "xxyq".to_string()],
            &lexicon,
        )
        .unwrap_err();
        match err {
            Error::OutOfVocabulary { words } => {
                assert_eq!(words, vec!["QWZRT".to_string(), "XXYQ".to_string()]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn syllabify_single_is_identity() {
        let onsets = OnsetTable::english_default();
        let pron = tokens("g ih1 v");
        assert_eq!(
            syllabify("GIVE", &pron, 1, &onsets).unwrap(),
            vec![pron.clone()]
        );
    }

    #[test]
    fn syllabify_twinkle_splits_before_k() {
        // Intervocalic cluster [ng k]: "ng k" is not a legal onset, "k" is,
        // so maximal onset puts the boundary before the k.
        let onsets = OnsetTable::english_default();
        let pron = tokens("t w ih1 ng k ah0 l");
        let groups = syllabify("TWINKLE", &pron, 2, &onsets).unwrap();
        assert_eq!(groups, vec![tokens("t w ih1 ng"), tokens("k ah0 l")]);
    }

    #[test]
    fn syllabify_cluster_moves_maximal_onset() {
        // "astray": [s t r] is a legal onset so all three move right.
        let onsets = OnsetTable::english_default();
        let pron = tokens("ah0 s t r ey1");
        let groups = syllabify("ASTRAY", &pron, 2, &onsets).unwrap();
        assert_eq!(groups, vec![tokens("ah0"), tokens("s t r ey1")]);
    }

    #[test]
    fn syllabify_too_few_vowels_errors() {
        let onsets = OnsetTable::english_default();
        let err = syllabify("UH", &tokens("ah0"), 2, &onsets).unwrap_err();
        assert!(matches!(err, Error::Syllabification { word, .. } if word == "UH"));
    }

    #[test]
    fn syllabify_too_many_vowels_errors() {
        let onsets = OnsetTable::english_default();
        let err = syllabify("EVERY", &tokens("eh1 v er0 iy0"), 2, &onsets).unwrap_err();
        assert!(matches!(err, Error::Syllabification { .. }));
    }

    #[cfg(test)]
    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arbitrary_syllables() -> impl Strategy<Value = Vec<Vec<String>>> {
            let consonant = prop::sample::select(vec![
                "b", "d", "g", "k", "l", "m", "n", "ng", "r", "s", "t", "z",
            ]);
            let vowel = prop::sample::select(vec!["aa1", "eh0", "ih1", "ow2", "uw1"]);
            let syllable = (
                prop::collection::vec(consonant.clone(), 0..3),
                vowel,
                prop::collection::vec(consonant, 0..3),
            )
                .prop_map(|(onset, nucleus, coda)| {
                    let mut tokens: Vec<String> = onset.into_iter().map(str::to_string).collect();
                    tokens.push(nucleus.to_string());
                    tokens.extend(coda.into_iter().map(str::to_string));
                    tokens
                });
            prop::collection::vec(syllable, 1..5)
        }

        proptest! {
            /// Groups concatenate back to the input and each carries exactly
            /// one vowel, for every pronunciation with matching vowel count.
            #[test]
            fn syllabify_partitions_exactly(syllables in arbitrary_syllables()) {
                let onsets = OnsetTable::english_default();
                let n = syllables.len();
                let pronunciation: Vec<String> =
                    syllables.into_iter().flatten().collect();
                let groups = syllabify("W", &pronunciation, n, &onsets).unwrap();
                prop_assert_eq!(groups.len(), n);
                let flattened: Vec<String> =
                    groups.iter().flatten().cloned().collect();
                prop_assert_eq!(&flattened, &pronunciation);
                if n > 1 {
                    for group in &groups {
                        let vowels =
                            group.iter().filter(|t| is_vowel_token(t)).count();
                        prop_assert_eq!(vowels, 1);
                    }
                }
            }
        }
    }
}
