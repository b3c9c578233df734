use super::estimator::EstimateError;
use super::AffectScore;
use crate::mapping::{classify_char, CharClass};
use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, OnceLock};

pub const DEFAULT_LEXICON: &str = include_str!("../../assets/lexicon.tsv");

/// Word-weight table for the offline estimator.
///
/// File format: `#`-prefixed header lines, of which `# version: <v>` and
/// `# scale: <s>` are required, then one `token<TAB>valence<TAB>arousal`
/// entry per line.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    version: String,
    scale: f64,
    entries: HashMap<String, (f64, f64)>,
    // longest entry made of Japanese script, in chars
    max_cjk_len: usize,
}

fn is_cjk(c: char) -> bool {
    classify_char(c) != CharClass::Other
}

fn normalize_apostrophes(s: &str) -> String {
    s.replace(['\u{2019}', '\u{2018}'], "'")
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, EstimateError> {
        let bad = |line: usize, msg: &str| EstimateError::Config(format!("lexicon line {line}: {msg}"));
        let mut version = None;
        let mut scale = None;
        let mut entries = HashMap::new();

        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if let Some(header) = line.strip_prefix('#') {
                if let Some((key, value)) = header.split_once(':') {
                    match key.trim() {
                        "version" => version = Some(value.trim().to_string()),
                        "scale" => {
                            let s: f64 = value.trim().parse().map_err(|_| bad(lineno, "scale is not a number"))?;
                            if !(s.is_finite() && s > 0.0) {
                                return Err(bad(lineno, "scale must be positive"));
                            }
                            scale = Some(s);
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [token, valence, arousal] = fields[..] else {
                return Err(bad(lineno, "expected token<TAB>valence<TAB>arousal"));
            };
            let weight = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|w| w.is_finite())
                    .ok_or_else(|| bad(lineno, "weight is not a finite number"))
            };
            let token = normalize_apostrophes(token.trim()).to_lowercase();
            if token.is_empty() {
                return Err(bad(lineno, "empty token"));
            }
            if entries.insert(token, (weight(valence)?, weight(arousal)?)).is_some() {
                return Err(bad(lineno, "duplicate token"));
            }
        }

        let version = version.ok_or_else(|| EstimateError::Config("lexicon header lacks `# version:`".into()))?;
        let scale = scale.ok_or_else(|| EstimateError::Config("lexicon header lacks `# scale:`".into()))?;
        let max_cjk_len = entries
            .keys()
            .filter(|k| k.chars().all(is_cjk))
            .map(|k| k.chars().count())
            .max()
            .unwrap_or(0);
        Ok(Lexicon {
            version,
            scale,
            entries,
            max_cjk_len,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, EstimateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EstimateError::Config(format!("lexicon {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The lexicon compiled into the crate.
    pub fn shipped() -> Arc<Lexicon> {
        static SHIPPED: OnceLock<Arc<Lexicon>> = OnceLock::new();
        SHIPPED
            .get_or_init(|| Arc::new(Lexicon::parse(DEFAULT_LEXICON).expect("shipped lexicon parses")))
            .clone()
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self, token: &str) -> Option<(f64, f64)> {
        self.entries.get(token).copied()
    }

    /// Tokens of `text` that hit the table, in order.
    ///
    /// Latin-script words are split on anything that is not alphanumeric or
    /// an apostrophe and lowercased. Runs of kana/kanji are matched greedily
    /// against the longest Japanese entries.
    pub fn hits(&self, text: &str) -> Vec<(String, (f64, f64))> {
        let text = normalize_apostrophes(text).to_lowercase();
        let mut out = Vec::new();
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if is_cjk(c) {
                let run_end = chars[i..].iter().position(|c| !is_cjk(*c)).map_or(chars.len(), |p| i + p);
                let longest = self.max_cjk_len.min(run_end - i);
                let mut matched = 1;
                for len in (1..=longest).rev() {
                    let candidate: String = chars[i..i + len].iter().collect();
                    if let Some(w) = self.weight(&candidate) {
                        out.push((candidate, w));
                        matched = len;
                        break;
                    }
                }
                i += matched;
            } else if c.is_alphanumeric() || c == '\'' {
                let end = chars[i..]
                    .iter()
                    .position(|c| is_cjk(*c) || !(c.is_alphanumeric() || *c == '\''))
                    .map_or(chars.len(), |p| i + p);
                let word: String = chars[i..end].iter().collect();
                let word = word.trim_matches('\'');
                if let Some(w) = self.weight(word) {
                    out.push((word.to_string(), w));
                }
                i = end;
            } else {
                i += 1;
            }
        }
        out
    }

    /// Logistic squash with midpoint 0 onto 0..=100.
    pub fn squash(&self, sum: f64) -> f64 {
        100.0 / (1.0 + (-sum / self.scale).exp())
    }

    pub fn estimate(&self, text: &str) -> Result<AffectScore, EstimateError> {
        if text.trim().is_empty() {
            return Err(EstimateError::Input("utterance is empty".into()));
        }
        let (valence, arousal) = self
            .hits(text)
            .iter()
            .fold((0.0, 0.0), |(v, a), (_, (dv, da))| (v + dv, a + da));
        AffectScore::from_poles(self.squash(valence), self.squash(arousal))
            .map_err(|e| EstimateError::Config(format!("lexicon produced invalid score: {e}")))
    }
}

/// Offline estimate using the shipped lexicon.
pub fn lexicon_estimate(text: &str) -> Result<AffectScore, EstimateError> {
    Lexicon::shipped().estimate(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic(x: f64, scale: f64) -> f64 {
        100.0 / (1.0 + (-x / scale).exp())
    }

    #[test]
    fn shipped_header() {
        let lex = Lexicon::shipped();
        assert_eq!(lex.version(), "1");
        assert_eq!(lex.scale(), 2.0);
        assert!(lex.len() > 50);
    }

    #[test]
    fn no_hits_is_neutral() {
        assert_eq!(lexicon_estimate("The table is made of wood.").unwrap(), AffectScore::neutral());
        assert_eq!(lexicon_estimate("xyzzy").unwrap(), AffectScore::neutral());
    }

    #[test]
    fn fun_phrase_is_pleasant_and_aroused() {
        // only `fun` (2.0, 1.5) hits; scale 2.0
        let s = lexicon_estimate("Every day is just so much fun!").unwrap();
        assert!((s.pleasure() - logistic(2.0, 2.0)).abs() < 1e-9);
        assert!((s.arousal() - logistic(1.5, 2.0)).abs() < 1e-9);
        assert!(s.pleasure() > 50.0 && s.arousal() > 50.0);
    }

    #[test]
    fn stress_phrase_is_miserable() {
        // only `stress` (-2.0, 1.5) hits
        let s = lexicon_estimate("I feel like I'm under a lot of stress. ").unwrap();
        assert!((s.pleasure() - logistic(-2.0, 2.0)).abs() < 1e-9);
        assert!(s.misery() > 50.0);
    }

    #[test]
    fn apostrophes_and_case() {
        let lex = Lexicon::shipped();
        let hits: Vec<String> = lex
            .hits("I'm hungry, but I CAN\u{2019}T eat")
            .into_iter()
            .map(|(t, _)| t)
            .collect();
        assert_eq!(hits, ["hungry", "can't"]);
    }

    #[test]
    fn japanese_longest_match() {
        let lex = Lexicon::parse("# version: t\n# scale: 1\nストレス\t-2\t1\nス\t5\t5\n楽しい\t1\t1\n").unwrap();
        let hits: Vec<String> = lex.hits("毎日がとても楽しい、ストレスはない").into_iter().map(|(t, _)| t).collect();
        assert_eq!(hits, ["楽しい", "ストレス"]);
    }

    #[test]
    fn empty_utterance_is_input_error() {
        assert!(matches!(lexicon_estimate("   "), Err(EstimateError::Input(_))));
    }

    #[test]
    fn corrupt_files() {
        assert!(Lexicon::parse("fun\t1\t1\n").is_err(), "missing header");
        assert!(Lexicon::parse("# version: 1\n# scale: 0\n").is_err());
        assert!(Lexicon::parse("# version: 1\n# scale: 1\nfun\t1\n").is_err());
        assert!(Lexicon::parse("# version: 1\n# scale: 1\nfun\tx\t1\n").is_err());
        assert!(Lexicon::parse("# version: 1\n# scale: 1\nfun\t1\t1\nFUN\t1\t1\n").is_err());
        assert!(matches!(
            Lexicon::from_file(Path::new("/nonexistent/lexicon.tsv")),
            Err(EstimateError::Config(_))
        ));
    }

    #[test]
    fn pure_function_of_inputs() {
        let a = lexicon_estimate("Ouch, ouch! Don't hit me.").unwrap();
        let b = Lexicon::parse(DEFAULT_LEXICON).unwrap().estimate("Ouch, ouch! Don't hit me.").unwrap();
        assert_eq!(a, b);
        assert!(a.misery() > 50.0 && a.arousal() > 50.0);
    }
}
