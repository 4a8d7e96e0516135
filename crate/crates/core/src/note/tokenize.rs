use super::Token;

/// Characters that extend a word token. Underscore joins words so that
/// placeholder sentinels (`PHI_HOSPITAL_3`) stay single tokens.
pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits a line into maximal word runs and single punctuation characters.
/// Whitespace separates tokens and is never part of one.
pub fn tokenize(line: &str) -> Vec<Token> {
    tokenize_line(line, 0)
}

/// [`tokenize`] with tokens tagged as belonging to line `line_index`.
pub fn tokenize_line(line: &str, line_index: usize) -> Vec<Token> {
    let mut tokens = Vec::new();
    // (byte start, char start) of the word being accumulated
    let mut word: Option<(usize, usize)> = None;
    let mut char_pos = 0;

    for (byte_pos, c) in line.char_indices() {
        if is_word_char(c) {
            if word.is_none() {
                word = Some((byte_pos, char_pos));
            }
        } else {
            if let Some((b, ch)) = word.take() {
                tokens.push(Token {
                    text: line[b..byte_pos].to_string(),
                    line_index,
                    begin: ch,
                    end: char_pos,
                });
            }
            if !c.is_whitespace() {
                tokens.push(Token {
                    text: c.to_string(),
                    line_index,
                    begin: char_pos,
                    end: char_pos + 1,
                });
            }
        }
        char_pos += 1;
    }
    if let Some((b, ch)) = word {
        tokens.push(Token {
            text: line[b..].to_string(),
            line_index,
            begin: ch,
            end: char_pos,
        });
    }
    tokens
}
