use std::collections::HashMap;

use super::{make_surrogate, LabeledNote, Lexicons, SurrogateError, SurrogatePlan};
use crate::note::{tokenize_line, Label, Note, PhiCategory, PhiSpan};
use crate::parallel;

/// One label per token: the category of the span a token overlaps, else `O`.
pub fn token_labels(note: &Note) -> Vec<Label> {
    let mut labels = Vec::new();
    let mut spans = note.phi_spans.iter().peekable();
    for (line_index, line) in note.lines.iter().enumerate() {
        // spans are sorted; drop those belonging to earlier lines
        while spans.next_if(|s| s.line_index < line_index).is_some() {}
        let line_spans: Vec<&PhiSpan> = std::iter::from_fn(|| spans.next_if(|s| s.line_index == line_index)).collect();
        let mut cursor = 0;
        for token in tokenize_line(line, line_index) {
            while cursor < line_spans.len() && line_spans[cursor].end <= token.begin {
                cursor += 1;
            }
            let label = match line_spans.get(cursor) {
                Some(s) if s.begin < token.end => Label::from(s.category),
                _ => Label::O,
            };
            labels.push(label);
        }
    }
    labels
}

/// Replaces every span of `note` by a sampled surrogate, shifting the spans
/// to cover the surrogates, and labels the re-tokenized text.
pub fn synthesize_note(
    note: &Note,
    plan: &SurrogatePlan,
    lexicons: &Lexicons,
) -> Result<LabeledNote, SurrogateError> {
    note.validate().map_err(|message| SurrogateError::InvalidNote {
        note_id: note.note_id.clone(),
        message,
    })?;
    let mut rng = plan.note_rng(&note.note_id);
    let mut reused: HashMap<(PhiCategory, &str), String> = HashMap::new();

    let mut out = Note::new(note.note_id.clone(), note.category.clone(), Vec::with_capacity(note.lines.len()));
    let mut spans = note.phi_spans.iter().peekable();
    for (line_index, line) in note.lines.iter().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut text = String::with_capacity(line.len());
        let mut consumed = 0;
        let mut out_len = 0;
        while let Some(span) = spans.next_if(|s| s.line_index == line_index) {
            text.extend(&chars[consumed..span.begin]);
            out_len += span.begin - consumed;

            let surrogate = match (&span.placeholder, plan.consistency_mode) {
                (Some(inner), true) => match reused.get(&(span.category, inner.as_str())) {
                    Some(s) => s.clone(),
                    None => {
                        let s = make_surrogate(span.category, lexicons, &plan.config, &mut rng)?;
                        reused.insert((span.category, inner.as_str()), s.clone());
                        s
                    }
                },
                _ => make_surrogate(span.category, lexicons, &plan.config, &mut rng)?,
            };

            let begin = out_len;
            text.push_str(&surrogate);
            out_len += surrogate.chars().count();
            out.phi_spans.push(PhiSpan {
                line_index,
                begin,
                end: out_len,
                category: span.category,
                placeholder: span.placeholder.clone(),
            });
            consumed = span.end;
        }
        text.extend(&chars[consumed..]);
        out.lines.push(text);
    }

    let token_labels = token_labels(&out);
    Ok(LabeledNote { note: out, token_labels })
}

/// [`synthesize_note`] over a corpus, in input order. Each note draws from
/// its own stream, so the result for a note does not depend on its position.
pub fn synthesize_corpus(
    notes: &[Note],
    plan: &SurrogatePlan,
    lexicons: &Lexicons,
    threads: usize,
) -> Result<Vec<LabeledNote>, SurrogateError> {
    parallel::map(notes, threads, |n| synthesize_note(n, plan, lexicons))
}
