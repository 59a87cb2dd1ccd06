use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid type `{text}`: {reason}")]
pub struct TypeError {
    pub text: String,
    pub reason: String,
}

/// A canonical type string such as `i32`, `i32*`, `[4 x i32]*` or `void`.
///
/// The canonical form has no redundant whitespace: array types print as
/// `[N x T]` and pointer stars follow the pointee directly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DataType(String);

impl DataType {
    /// Parses and canonicalises type text.
    pub fn parse(text: &str) -> Result<DataType, TypeError> {
        let chars: Vec<char> = text.chars().collect();
        let mut pos = 0;
        let ty = parse_type(&chars, &mut pos).map_err(|reason| TypeError {
            text: text.to_string(),
            reason,
        })?;
        skip_ws(&chars, &mut pos);
        if pos != chars.len() {
            return Err(TypeError {
                text: text.to_string(),
                reason: format!("trailing input at offset {pos}"),
            });
        }
        Ok(ty)
    }

    pub(crate) fn from_canonical(s: String) -> DataType {
        DataType(s)
    }

    pub fn int(bits: u32) -> DataType {
        DataType(format!("i{bits}"))
    }

    pub fn void() -> DataType {
        DataType("void".into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_void(&self) -> bool {
        self.0 == "void"
    }

    pub fn is_pointer(&self) -> bool {
        self.0.ends_with('*') || self.0 == "ptr"
    }

    pub fn is_float(&self) -> bool {
        matches!(self.0.as_str(), "half" | "float" | "double")
    }

    pub fn is_integer(&self) -> bool {
        is_int_name(&self.0)
    }

    pub fn pointer_to(&self) -> DataType {
        DataType(format!("{}*", self.0))
    }

    /// The pointee of a typed pointer. Opaque `ptr` has no known pointee.
    pub fn pointee(&self) -> Option<DataType> {
        self.0.strip_suffix('*').map(|s| DataType(s.to_string()))
    }

    /// Element type of an array type `[N x T]`.
    pub fn array_element(&self) -> Option<DataType> {
        let inner = self.0.strip_prefix('[')?.strip_suffix(']')?;
        let (_, elem) = inner.split_once(" x ")?;
        Some(DataType(elem.to_string()))
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn is_int_name(s: &str) -> bool {
    s.len() > 1
        && s.starts_with('i')
        && s[1..].bytes().all(|b| b.is_ascii_digit())
        && s[1..].parse::<u32>().is_ok_and(|bits| (1..=128).contains(&bits))
}

pub(crate) fn is_base_name(s: &str) -> bool {
    is_int_name(s) || matches!(s, "half" | "float" | "double" | "void" | "ptr" | "label")
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while *pos < chars.len() && chars[*pos].is_whitespace() {
        *pos += 1;
    }
}

fn parse_type(chars: &[char], pos: &mut usize) -> Result<DataType, String> {
    skip_ws(chars, pos);
    let mut base = if chars.get(*pos) == Some(&'[') {
        *pos += 1;
        skip_ws(chars, pos);
        let start = *pos;
        while *pos < chars.len() && chars[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if start == *pos {
            return Err("expected array length".into());
        }
        let len: String = chars[start..*pos].iter().collect();
        let len: u64 = len.parse().map_err(|_| "array length out of range".to_string())?;
        skip_ws(chars, pos);
        if chars.get(*pos) != Some(&'x') {
            return Err("expected `x` in array type".into());
        }
        *pos += 1;
        let elem = parse_type(chars, pos)?;
        skip_ws(chars, pos);
        if chars.get(*pos) != Some(&']') {
            return Err("expected `]`".into());
        }
        *pos += 1;
        format!("[{len} x {elem}]")
    } else {
        let start = *pos;
        while *pos < chars.len() && chars[*pos].is_ascii_alphanumeric() {
            *pos += 1;
        }
        let name: String = chars[start..*pos].iter().collect();
        if !is_base_name(&name) {
            return Err(format!("unknown type name `{name}`"));
        }
        name
    };
    loop {
        skip_ws(chars, pos);
        if chars.get(*pos) == Some(&'*') {
            if base == "void" || base == "label" {
                return Err(format!("pointer to `{base}`"));
            }
            *pos += 1;
            base.push('*');
        } else {
            break;
        }
    }
    Ok(DataType(base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_forms() {
        assert_eq!(DataType::parse("i32").unwrap().as_str(), "i32");
        assert_eq!(DataType::parse(" i32 * * ").unwrap().as_str(), "i32**");
        assert_eq!(DataType::parse("[ 4 x  i8 ]*").unwrap().as_str(), "[4 x i8]*");
        assert_eq!(
            DataType::parse("[2 x [3 x float]]").unwrap().as_str(),
            "[2 x [3 x float]]"
        );
    }

    #[test]
    fn rejects_garbage() {
        assert!(DataType::parse("").is_err());
        assert!(DataType::parse("int").is_err());
        assert!(DataType::parse("void*").is_err());
        assert!(DataType::parse("i32 i32").is_err());
        assert!(DataType::parse("[x i32]").is_err());
    }

    #[test]
    fn pointer_helpers() {
        let t = DataType::parse("[4 x i32]*").unwrap();
        assert!(t.is_pointer());
        let arr = t.pointee().unwrap();
        assert_eq!(arr.array_element().unwrap().as_str(), "i32");
        assert!(DataType::parse("ptr").unwrap().pointee().is_none());
    }

    fn arb_type_text() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            Just("i1".to_string()),
            Just("i32".to_string()),
            Just("i64".to_string()),
            Just("float".to_string()),
            Just("double".to_string()),
        ];
        leaf.prop_recursive(3, 8, 1, |inner| {
            prop_oneof![
                (inner.clone(), 0usize..3).prop_map(|(t, n)| format!("{t}{}", " *".repeat(n))),
                (1u32..9, inner).prop_map(|(n, t)| format!("[ {n}  x {t} ]")),
            ]
        })
    }

    proptest! {
        #[test]
        fn canonicalisation_is_idempotent(text in arb_type_text()) {
            let once = DataType::parse(&text).unwrap();
            let twice = DataType::parse(once.as_str()).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
