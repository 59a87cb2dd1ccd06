use super::{Diagnostic, DiagnosticKind, Span};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// `%name`
    Local(String),
    /// `@name`
    Global(String),
    /// Keywords, opcodes, type names.
    Ident(String),
    /// `name:` at the start of a block.
    Label(String),
    Int(i64),
    Float(f64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Eq,
    Star,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$' | '-')
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || matches!(c, '_' | '.' | '$')
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! advance {
        ($n:expr) => {{
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == ';' {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        let punct = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Eq),
            '*' => Some(Tok::Star),
            _ => None,
        };
        if let Some(tok) = punct {
            out.push(Token { tok, span });
            advance!(1);
            continue;
        }
        if c == '%' || c == '@' {
            let start = i + 1;
            let mut end = start;
            while end < chars.len() && is_name_char(chars[end]) {
                end += 1;
            }
            if end == start {
                return Err(Diagnostic::at(
                    DiagnosticKind::SyntaxError,
                    span,
                    format!("expected a name after `{c}`"),
                ));
            }
            let name: String = chars[start..end].iter().collect();
            let tok = if c == '%' { Tok::Local(name) } else { Tok::Global(name) };
            out.push(Token { tok, span });
            advance!(end - i);
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let (tok, len) =
                lex_number(&chars[i..]).map_err(|msg| Diagnostic::at(DiagnosticKind::SyntaxError, span, msg))?;
            // A bare number followed by `:` is a numbered block label.
            if let Tok::Int(n) = tok {
                if n >= 0 && chars.get(i + len) == Some(&':') {
                    out.push(Token {
                        tok: Tok::Label(n.to_string()),
                        span,
                    });
                    advance!(len + 1);
                    continue;
                }
            }
            out.push(Token { tok, span });
            advance!(len);
            continue;
        }
        if is_ident_start(c) {
            let mut end = i;
            while end < chars.len() && is_name_char(chars[end]) {
                end += 1;
            }
            let word: String = chars[i..end].iter().collect();
            if chars.get(end) == Some(&':') {
                out.push(Token {
                    tok: Tok::Label(word),
                    span,
                });
                advance!(end - i + 1);
            } else {
                out.push(Token {
                    tok: Tok::Ident(word),
                    span,
                });
                advance!(end - i);
            }
            continue;
        }
        return Err(Diagnostic::at(
            DiagnosticKind::SyntaxError,
            span,
            format!("unexpected character `{c}`"),
        ));
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(out)
}

fn lex_number(chars: &[char]) -> Result<(Tok, usize), String> {
    let mut i = 0;
    let negative = chars[0] == '-';
    if negative {
        i += 1;
    }
    if chars.get(i) == Some(&'0') && chars.get(i + 1).is_some_and(|&c| c == 'x' || c == 'X') {
        // LLVM hexadecimal float: the raw IEEE-754 double bits.
        let start = i + 2;
        let mut end = start;
        while end < chars.len() && chars[end].is_ascii_hexdigit() {
            end += 1;
        }
        let digits: String = chars[start..end].iter().collect();
        let bits = u64::from_str_radix(&digits, 16).map_err(|_| format!("bad hex literal `0x{digits}`"))?;
        let mut v = f64::from_bits(bits);
        if negative {
            v = -v;
        }
        return Ok((Tok::Float(v), end));
    }
    let start = 0;
    while i < chars.len() && chars[i].is_ascii_digit() {
        i += 1;
    }
    let mut is_float = false;
    if chars.get(i) == Some(&'.') {
        is_float = true;
        i += 1;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
    }
    if chars.get(i).is_some_and(|&c| c == 'e' || c == 'E') {
        let mut j = i + 1;
        if chars.get(j).is_some_and(|&c| c == '+' || c == '-') {
            j += 1;
        }
        if chars.get(j).is_some_and(|c| c.is_ascii_digit()) {
            is_float = true;
            i = j;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    let text: String = chars[start..i].iter().collect();
    if is_float {
        let v: f64 = text.parse().map_err(|_| format!("bad float literal `{text}`"))?;
        Ok((Tok::Float(v), i))
    } else {
        let v: i64 = text
            .parse()
            .map_err(|_| format!("integer literal `{text}` out of range"))?;
        Ok((Tok::Int(v), i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_instruction() {
        assert_eq!(
            toks("%1 = add nsw i32 %0, -1 ; comment"),
            vec![
                Tok::Local("1".into()),
                Tok::Eq,
                Tok::Ident("add".into()),
                Tok::Ident("nsw".into()),
                Tok::Ident("i32".into()),
                Tok::Local("0".into()),
                Tok::Comma,
                Tok::Int(-1),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn lexes_labels_and_floats() {
        assert_eq!(
            toks("entry:\n 3: 1.5e2 0x3FF0000000000000"),
            vec![
                Tok::Label("entry".into()),
                Tok::Label("3".into()),
                Tok::Float(150.0),
                Tok::Float(1.0),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn tracks_lines() {
        let t = tokenize("a\n  %b").unwrap();
        assert_eq!(t[1].span, Span { line: 2, col: 3 });
    }

    #[test]
    fn rejects_stray_characters() {
        let err = tokenize("define #0").unwrap_err();
        assert_eq!(err.kind, DiagnosticKind::SyntaxError);
        assert_eq!(err.span, Some(Span { line: 1, col: 8 }));
    }
}
