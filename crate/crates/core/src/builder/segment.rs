use serde::{Deserialize, Serialize};

/// A contiguous slice of the guideline sent to the model in one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    pub text: String,
    /// Byte offsets `[start, end)` into the source document.
    pub source_span: (usize, usize),
    pub token_estimate: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SegmentError {
    #[error("guideline text is empty")]
    EmptyText,
    #[error("paragraph at bytes {start}..{end} needs ~{estimate} tokens, over the budget of {budget}")]
    ParagraphExceedsBudget {
        start: usize,
        end: usize,
        estimate: usize,
        budget: usize,
    },
}

/// Rough token count: one token per four characters, rounded up.
pub fn token_estimate(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

fn is_heading(line: &str) -> bool {
    line.trim_start().starts_with('#')
}

/// Paragraph spans covering the whole text. Each span carries its trailing
/// blank lines; a heading opens a new paragraph and stays attached to the
/// body that follows it.
fn paragraphs(text: &str) -> Vec<(usize, usize)> {
    let mut starts = Vec::new();
    let mut offset = 0;
    let mut prev_blank = true;
    let mut glue = false;
    for line in text.split_inclusive('\n') {
        let len = line.len();
        if line.trim().is_empty() {
            prev_blank = true;
            offset += len;
            continue;
        }
        let heading = is_heading(line);
        if starts.is_empty() || ((prev_blank || heading) && !glue) {
            starts.push(offset);
            glue = heading;
        } else if !heading {
            glue = false;
        }
        prev_blank = false;
        offset += len;
    }
    if starts.is_empty() {
        return vec![(0, text.len())];
    }
    starts[0] = 0;
    let mut spans = Vec::with_capacity(starts.len());
    for (i, &s) in starts.iter().enumerate() {
        let e = starts.get(i + 1).copied().unwrap_or(text.len());
        spans.push((s, e));
    }
    spans
}

/// Greedily pack whole paragraphs into segments of at most `budget`
/// estimated tokens. Segment texts concatenate back to `text`.
pub fn segment_guideline(text: &str, budget: usize) -> Result<Vec<Segment>, SegmentError> {
    if text.trim().is_empty() {
        return Err(SegmentError::EmptyText);
    }
    let mut segments = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let flush = |span: (usize, usize), segments: &mut Vec<Segment>| {
        let body = &text[span.0..span.1];
        segments.push(Segment {
            index: segments.len(),
            text: body.to_string(),
            source_span: span,
            token_estimate: token_estimate(body),
        });
    };
    for (start, end) in paragraphs(text) {
        let estimate = token_estimate(&text[start..end]);
        if estimate > budget {
            return Err(SegmentError::ParagraphExceedsBudget {
                start,
                end,
                estimate,
                budget,
            });
        }
        current = match current {
            Some((s, _)) if token_estimate(&text[s..end]) <= budget => Some((s, end)),
            Some(span) => {
                flush(span, &mut segments);
                Some((start, end))
            }
            None => Some((start, end)),
        };
    }
    if let Some(span) = current {
        flush(span, &mut segments);
    }
    Ok(segments)
}
