//! Meaning representations: bracketed parsing and boundary-token linearization.

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::DataError;

/// Attribute inventory of the restaurant domain.
pub const SCHEMA_KEYS: [&str; 8] = [
    "area",
    "customerRating",
    "eatType",
    "familyFriendly",
    "food",
    "name",
    "near",
    "priceRange",
];

/// Opening boundary token for attribute `key`.
pub fn start_token(key: &str) -> String {
    format!("__start_{key}__")
}

/// Closing boundary token for attribute `key`.
pub fn end_token(key: &str) -> String {
    format!("__end_{key}__")
}

/// True for tokens of the form `__start_k__` / `__end_k__`.
pub fn is_boundary_token(token: &str) -> bool {
    token.ends_with("__")
        && ((token.starts_with("__start_") && token.len() > "__start___".len())
            || (token.starts_with("__end_") && token.len() > "__end___".len()))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeValue {
    pub key: String,
    pub value: Vec<String>,
}

/// Ordered attribute/value pairs describing one input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeaningRepresentation {
    pairs: Vec<AttributeValue>,
}

impl MeaningRepresentation {
    /// Builds an MR, checking non-emptiness, key uniqueness and value tokens.
    pub fn new(pairs: Vec<AttributeValue>) -> Result<Self, DataError> {
        if pairs.is_empty() {
            return Err(DataError::MalformedMr("no attribute pairs".into()));
        }
        for (i, pair) in pairs.iter().enumerate() {
            check_key(&pair.key)?;
            if pair.value.is_empty() {
                return Err(DataError::MalformedMr(format!("empty value for `{}`", pair.key)));
            }
            if let Some(tok) = pair.value.iter().find(|t| t.is_empty() || is_boundary_token(t)) {
                return Err(DataError::MalformedMr(format!(
                    "invalid value token `{tok}` for `{}`",
                    pair.key
                )));
            }
            if pairs[..i].iter().any(|p| p.key == pair.key) {
                return Err(DataError::MalformedMr(format!("duplicate key `{}`", pair.key)));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[AttributeValue] {
        &self.pairs
    }

    pub fn get(&self, key: &str) -> Option<&[String]> {
        self.pairs
            .iter()
            .find(|p| p.key == key)
            .map(|p| p.value.as_slice())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.key.as_str())
    }

    /// Fails with `UnknownAttribute` if a key is outside [`SCHEMA_KEYS`].
    pub fn check_schema(&self) -> Result<(), DataError> {
        match self.keys().find(|k| !SCHEMA_KEYS.contains(k)) {
            Some(k) => Err(DataError::UnknownAttribute(k.to_string())),
            None => Ok(()),
        }
    }

    /// Display form `key[value], key[value]` (values are the tokenized text).
    pub fn to_bracketed(&self) -> String {
        self.pairs
            .iter()
            .map(|p| format!("{}[{}]", p.key, p.value.join(" ")))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn check_key(key: &str) -> Result<(), DataError> {
    if key.is_empty()
        || key
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '[' | ']' | ','))
    {
        return Err(DataError::MalformedMr(format!("invalid attribute key `{key}`")));
    }
    Ok(())
}

/// Maps corpus spellings such as `customer rating` onto the camel-case key.
pub fn normalize_key(raw: &str) -> String {
    let mut out = String::new();
    let mut upper_next = false;
    for ch in raw.trim().chars() {
        if ch.is_whitespace() {
            upper_next = !out.is_empty();
        } else if upper_next {
            out.extend(ch.to_uppercase());
            upper_next = false;
        } else {
            out.push(ch);
        }
    }
    out
}

/// Parses `key[value], key[value], ...`.
pub fn parse_mr(text: &str) -> Result<MeaningRepresentation, DataError> {
    let mut pairs = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let open = rest
            .find('[')
            .ok_or_else(|| DataError::MalformedMr(format!("missing `[` in `{rest}`")))?;
        let key = &rest[..open];
        if key.contains(']') {
            return Err(DataError::MalformedMr(format!("unbalanced `]` in `{text}`")));
        }
        let after = &rest[open + 1..];
        let close = after
            .find(']')
            .ok_or_else(|| DataError::MalformedMr(format!("unbalanced `[` in `{text}`")))?;
        let raw_value = &after[..close];
        if raw_value.contains('[') {
            return Err(DataError::MalformedMr(format!("nested `[` in `{text}`")));
        }
        let value = tokenize(raw_value);
        let key = normalize_key(key);
        if value.is_empty() {
            return Err(DataError::MalformedMr(format!("empty value for `{key}`")));
        }
        pairs.push(AttributeValue { key, value });
        rest = after[close + 1..].trim_start();
        if let Some(stripped) = rest.strip_prefix(',') {
            rest = stripped.trim_start();
            if rest.is_empty() {
                return Err(DataError::MalformedMr(format!("trailing `,` in `{text}`")));
            }
        } else if !rest.is_empty() {
            return Err(DataError::MalformedMr(format!("expected `,` before `{rest}`")));
        }
    }
    MeaningRepresentation::new(pairs)
}

/// One linearized source token together with the attribute it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceToken {
    pub text: String,
    /// False for boundary tokens.
    pub is_value: bool,
}

/// `__start_k__ v1 .. vn __end_k__` for every pair, in MR order.
pub fn linearize(mr: &MeaningRepresentation) -> Vec<String> {
    linearize_annotated(mr).into_iter().map(|t| t.text).collect()
}

pub fn linearize_annotated(mr: &MeaningRepresentation) -> Vec<SourceToken> {
    let mut out = Vec::new();
    for pair in mr.pairs() {
        out.push(SourceToken {
            text: start_token(&pair.key),
            is_value: false,
        });
        out.extend(pair.value.iter().map(|v| SourceToken {
            text: v.clone(),
            is_value: true,
        }));
        out.push(SourceToken {
            text: end_token(&pair.key),
            is_value: false,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn av(key: &str, value: &[&str]) -> AttributeValue {
        AttributeValue {
            key: key.into(),
            value: value.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn parse_single_pair() {
        let mr = parse_mr("area[riverside]").unwrap();
        assert_eq!(mr.pairs(), &[av("area", &["riverside"])]);
    }

    #[test]
    fn parse_preserves_order() {
        let mr = parse_mr("name[The Golden Palace], area[riverside]").unwrap();
        assert_eq!(
            mr.pairs(),
            &[av("name", &["the", "golden", "palace"]), av("area", &["riverside"])]
        );
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "area[]",
            "area[  ]",
            "area[riverside",
            "areariverside]",
            "area]x[",
            "area[a], area[b]",
            "area[a[b]]",
            "area[a] food[b]",
            "area[a],",
            "",
            "[riverside]",
        ] {
            assert!(
                matches!(parse_mr(bad), Err(DataError::MalformedMr(_))),
                "accepted `{bad}`"
            );
        }
    }

    #[test]
    fn corpus_key_spelling_is_normalized() {
        let mr = parse_mr("customer rating[5 out of 5], familyFriendly[yes]").unwrap();
        assert_eq!(mr.keys().collect::<Vec<_>>(), vec!["customerRating", "familyFriendly"]);
        mr.check_schema().unwrap();
        let odd = parse_mr("stars[5]").unwrap();
        assert!(matches!(odd.check_schema(), Err(DataError::UnknownAttribute(_))));
    }

    #[test]
    fn linearize_one_pair() {
        let mr = MeaningRepresentation::new(vec![av("area", &["city", "centre"])]).unwrap();
        assert_eq!(linearize(&mr), vec!["__start_area__", "city", "centre", "__end_area__"]);
        let short = MeaningRepresentation::new(vec![av("food", &["thai"])]).unwrap();
        assert_eq!(linearize(&short).len(), 3);
    }

    #[test]
    fn linearize_matches_string_assembly() {
        let mr = MeaningRepresentation::new(vec![
            av("name", &["wildwood"]),
            av("eatType", &["coffee", "shop"]),
        ])
        .unwrap();
        // Oracle: assemble the marked-up string by hand, then split on spaces.
        let mut assembled = String::new();
        for (k, v) in [("name", "wildwood"), ("eatType", "coffee shop")] {
            assembled.push_str(&format!("__start_{k}__ {v} __end_{k}__ "));
        }
        let expected: Vec<String> = assembled.split_whitespace().map(String::from).collect();
        assert_eq!(linearize(&mr), expected);
        assert_eq!(
            linearize(&mr),
            vec![
                "__start_name__",
                "wildwood",
                "__end_name__",
                "__start_eatType__",
                "coffee",
                "shop",
                "__end_eatType__"
            ]
        );
    }

    #[test]
    fn boundary_tokens_rejected_in_values() {
        assert!(MeaningRepresentation::new(vec![av("area", &["__start_food__"])]).is_err());
        assert!(is_boundary_token("__end_priceRange__"));
        assert!(!is_boundary_token("__start__"));
        assert!(!is_boundary_token("start"));
    }

    fn arb_mr() -> impl Strategy<Value = MeaningRepresentation> {
        proptest::sample::subsequence(SCHEMA_KEYS.to_vec(), 1..=4).prop_flat_map(|keys| {
            let n = keys.len();
            proptest::collection::vec(proptest::collection::vec("[a-c]{1,2}", 1..3), n).prop_map(
                move |values| {
                    let pairs = keys
                        .iter()
                        .zip(values)
                        .map(|(k, v)| AttributeValue {
                            key: k.to_string(),
                            value: v,
                        })
                        .collect();
                    MeaningRepresentation::new(pairs).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn linearize_is_injective(a in arb_mr(), b in arb_mr()) {
            if a != b {
                prop_assert_ne!(linearize(&a), linearize(&b));
            } else {
                prop_assert_eq!(linearize(&a), linearize(&b));
            }
        }

        #[test]
        fn bracketed_form_reparses(mr in arb_mr()) {
            prop_assert_eq!(parse_mr(&mr.to_bracketed()).unwrap(), mr);
        }
    }
}
