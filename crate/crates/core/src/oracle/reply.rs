use super::YesNo;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("reply contains neither a standalone `yes` nor `no`")]
pub struct Unparseable;

/// Read a free-text model reply as yes or no. The first standalone word
/// token equal to `yes` or `no` (case-insensitive) decides.
pub fn parse_reply(raw: &str) -> Result<YesNo, Unparseable> {
    raw.split(|c: char| !c.is_alphanumeric())
        .find_map(|token| {
            if token.eq_ignore_ascii_case("yes") {
                Some(YesNo::Yes)
            } else if token.eq_ignore_ascii_case("no") {
                Some(YesNo::No)
            } else {
                None
            }
        })
        .ok_or(Unparseable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(parse_reply("Yes, the patient reports sudden onset."), Ok(YesNo::Yes));
        assert_eq!(parse_reply("Based on the note, the answer is no."), Ok(YesNo::No));
        assert_eq!(parse_reply("I cannot determine this from the note."), Err(Unparseable));
    }

    #[test]
    fn tokens_must_stand_alone() {
        assert_eq!(parse_reply("None noted; nobody knows"), Err(Unparseable));
        assert_eq!(parse_reply("Eyes: normal. NO."), Ok(YesNo::No));
        assert_eq!(parse_reply("yes/no: no"), Ok(YesNo::Yes));
    }

    proptest! {
        #[test]
        fn first_token_decides(prefix in "[a-z ,.]{0,30}", suffix in "[a-z ,.]{0,30}") {
            let prefix_has = parse_reply(&prefix).is_ok();
            let text = format!("{prefix} yes {suffix}");
            if !prefix_has {
                prop_assert_eq!(parse_reply(&text), Ok(YesNo::Yes));
            }
            // Total and deterministic.
            prop_assert_eq!(parse_reply(&text), parse_reply(&text));
        }
    }
}
