/// A normalized token and whether its raw form started with an uppercase
/// letter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CasedToken {
    pub text: String,
    pub capitalized: bool,
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Tokenizes raw text, keeping a capitalization flag per token.
///
/// Letters are lowercased, every punctuation mark is its own token, an
/// apostrophe followed by letters starts a clitic token (`'s`), and every
/// maximal run of ASCII digits becomes the token `0`.
pub fn tokenize_cased(text: &str) -> Vec<CasedToken> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.push(CasedToken {
                text: "0".into(),
                capitalized: false,
            });
        } else if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_alphabetic() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            out.push(CasedToken {
                text: word.to_lowercase(),
                capitalized: c.is_uppercase(),
            });
        } else if is_apostrophe(c) && chars.get(i + 1).is_some_and(|n| n.is_alphabetic()) {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i].is_alphabetic() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            out.push(CasedToken {
                text: format!("'{}", word.to_lowercase()),
                capitalized: false,
            });
        } else {
            let text = if is_apostrophe(c) {
                "'".to_string()
            } else {
                c.to_lowercase().collect()
            };
            out.push(CasedToken {
                text,
                capitalized: false,
            });
            i += 1;
        }
    }
    out
}

/// Lowercased tokens with split punctuation and digit runs masked as `0`.
pub fn tokenize_and_normalize(text: &str) -> Vec<String> {
    tokenize_cased(text).into_iter().map(|t| t.text).collect()
}
