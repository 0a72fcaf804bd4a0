/// Characters split off the edges of whitespace-delimited words.
fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{00AB}' | '\u{00BB}'
                | '\u{2013}' | '\u{2014}' | '\u{2026}' | '\u{00BF}' | '\u{00A1}'
        )
}

/// Rule-based tokenizer: splits on whitespace, then detaches leading and
/// trailing punctuation characters as one-character tokens. Case is kept.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let lead = chars.iter().take_while(|&&c| is_punct(c)).count();
        if lead == chars.len() {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        }
        let trail = chars.iter().rev().take_while(|&&c| is_punct(c)).count();
        out.extend(chars[..lead].iter().map(|c| c.to_string()));
        out.push(chars[lead..chars.len() - trail].iter().collect());
        out.extend(chars[chars.len() - trail..].iter().map(|c| c.to_string()));
    }
    out
}

/// Tokenizes one corpus line; with `pretokenized` the line is only split on whitespace.
pub fn tokenize_line(line: &str, pretokenized: bool) -> Vec<String> {
    if pretokenized {
        line.split_whitespace().map(str::to_owned).collect()
    } else {
        tokenize(line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detaches_edge_punctuation() {
        assert_eq!(tokenize("The cat, sat."), ["The", "cat", ",", "sat", "."]);
    }

    #[test]
    fn single_word() {
        assert_eq!(tokenize("hello"), ["hello"]);
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \t ").is_empty());
    }

    #[test]
    fn pretokenized_passthrough() {
        assert_eq!(tokenize_line("a b c", true), ["a", "b", "c"]);
        assert_eq!(tokenize_line("a, b", true), ["a,", "b"]);
    }

    #[test]
    fn inner_punctuation_and_case_are_kept() {
        assert_eq!(
            tokenize("(Don't) stop--U.S. \u{201C}Yes\u{201D}"),
            ["(", "Don't", ")", "stop--U.S", ".", "\u{201C}", "Yes", "\u{201D}"]
        );
        assert_eq!(tokenize("..."), [".", ".", "."]);
    }
}
