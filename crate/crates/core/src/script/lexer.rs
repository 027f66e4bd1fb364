use super::{Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num(n) => format!("number {n}"),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Semi => "';'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }
}

/// Splits `text` into tokens. The last token is always `Eof`.
pub fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut c = Cursor {
        chars: text.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        while let Some(ch) = c.peek() {
            if ch == '#' {
                while c.peek().is_some_and(|ch| ch != '\n') {
                    c.bump();
                }
            } else if ch.is_whitespace() {
                c.bump();
            } else {
                break;
            }
        }
        let span = c.span();
        let Some(ch) = c.peek() else {
            out.push(Token { tok: Tok::Eof, span });
            return Ok(out);
        };
        let tok = match ch {
            '{' | '}' | '[' | ']' | ';' => {
                c.bump();
                match ch {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    _ => Tok::Semi,
                }
            }
            '"' => {
                c.bump();
                let mut s = String::new();
                loop {
                    match c.bump() {
                        None | Some('\n') => {
                            return Err(Diagnostic::new(span, "unterminated string"));
                        }
                        Some('"') => break,
                        Some('\\') => {
                            let at = c.span();
                            match c.bump() {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                _ => return Err(Diagnostic::new(at, "unknown escape")),
                            }
                        }
                        Some(ch) => s.push(ch),
                    }
                }
                Tok::Str(s)
            }
            ch if ch.is_ascii_alphabetic() || ch == '_' => {
                let mut s = String::new();
                while let Some(ch) = c.peek().filter(|ch| ch.is_ascii_alphanumeric() || *ch == '_') {
                    s.push(ch);
                    c.bump();
                }
                Tok::Ident(s)
            }
            ch if ch.is_ascii_digit() || matches!(ch, '-' | '+' | '.') => lex_number(&mut c, span)?,
            other => {
                return Err(Diagnostic::new(span, format!("unexpected character {other:?}")));
            }
        };
        out.push(Token { tok, span });
    }
}

fn lex_number(c: &mut Cursor, span: Span) -> Result<Tok, Diagnostic> {
    let mut s = String::new();
    let take_digits = |c: &mut Cursor, s: &mut String| {
        let mut n = 0;
        while let Some(d) = c.peek().filter(char::is_ascii_digit) {
            s.push(d);
            c.bump();
            n += 1;
        }
        n
    };
    if let Some(sign) = c.peek().filter(|ch| matches!(ch, '-' | '+')) {
        s.push(sign);
        c.bump();
    }
    let mut digits = take_digits(c, &mut s);
    if c.peek() == Some('.') {
        s.push('.');
        c.bump();
        digits += take_digits(c, &mut s);
    }
    if digits == 0 {
        return Err(Diagnostic::new(span, "malformed number"));
    }
    if let Some(e) = c.peek().filter(|ch| matches!(ch, 'e' | 'E')) {
        s.push(e);
        c.bump();
        if let Some(sign) = c.peek().filter(|ch| matches!(ch, '-' | '+')) {
            s.push(sign);
            c.bump();
        }
        if take_digits(c, &mut s) == 0 {
            return Err(Diagnostic::new(span, "malformed exponent"));
        }
    }
    if c.peek().is_some_and(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '.') {
        return Err(Diagnostic::new(span, "malformed number"));
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Tok::Num(v)),
        _ => Err(Diagnostic::new(span, format!("number {s} out of range"))),
    }
}
