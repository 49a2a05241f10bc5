use super::ExprError;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Token {
    Number(f64),
    Str(String),
    Ident(String),
    Bool(bool),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Gt,
    Ge,
    Lt,
    Le,
    EqEq,
    Ne,
    Amp,
    Pipe,
    Bang,
}

impl Token {
    pub(super) fn describe(&self) -> String {
        match self {
            Token::Number(x) => format!("number {x}"),
            Token::Str(s) => format!("string '{s}'"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Bool(b) => format!("`{}`", if *b { "TRUE" } else { "FALSE" }),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Token::Plus => "+",
            Token::Minus => "-",
            Token::Star => "*",
            Token::Slash => "/",
            Token::LParen => "(",
            Token::RParen => ")",
            Token::Gt => ">",
            Token::Ge => ">=",
            Token::Lt => "<",
            Token::Le => "<=",
            Token::EqEq => "==",
            Token::Ne => "!=",
            Token::Amp => "&",
            Token::Pipe => "|",
            Token::Bang => "!",
            _ => "",
        }
    }
}

/// Token with its character offset in the source.
pub(super) type Spanned = (usize, Token);

pub(super) fn tokenize(src: &str) -> Result<Vec<Spanned>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let peek = chars.get(i + 1).copied();
        let token = match c {
            '+' => Token::Plus,
            '-' => Token::Minus,
            '*' => Token::Star,
            '/' => Token::Slash,
            '(' => Token::LParen,
            ')' => Token::RParen,
            '&' => Token::Amp,
            '|' => Token::Pipe,
            '>' if peek == Some('=') => {
                i += 1;
                Token::Ge
            }
            '>' => Token::Gt,
            '<' if peek == Some('=') => {
                i += 1;
                Token::Le
            }
            '<' => Token::Lt,
            '=' if peek == Some('=') => {
                i += 1;
                Token::EqEq
            }
            '!' if peek == Some('=') => {
                i += 1;
                Token::Ne
            }
            '!' => Token::Bang,
            '\'' | '"' => {
                let close = chars[i + 1..].iter().position(|&d| d == c).ok_or(ExprError::Syntax {
                    position: start,
                    message: "unterminated string literal".into(),
                })?;
                let s: String = chars[i + 1..i + 1 + close].iter().collect();
                i += close + 1;
                Token::Str(s)
            }
            d if d.is_ascii_digit() || (d == '.' && peek.is_some_and(|p| p.is_ascii_digit())) => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j < chars.len() && chars[j] == '.' {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < chars.len() && matches!(chars[j], 'e' | 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && matches!(chars[k], '+' | '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text: String = chars[i..j].iter().collect();
                let value = text.parse::<f64>().map_err(|_| ExprError::Syntax {
                    position: start,
                    message: format!("malformed number `{text}`"),
                })?;
                i = j - 1;
                Token::Number(value)
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_' || chars[j] == '.') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                i = j - 1;
                match word.as_str() {
                    "TRUE" | "true" => Token::Bool(true),
                    "FALSE" | "false" => Token::Bool(false),
                    _ => Token::Ident(word),
                }
            }
            other => {
                // Group `%in%`-style operators into one token for the message.
                let token = if other == '%' {
                    let end = chars[i + 1..].iter().position(|&d| d == '%').map_or(i + 1, |p| i + p + 2);
                    chars[i..end].iter().collect()
                } else {
                    other.to_string()
                };
                return Err(ExprError::UnknownToken { position: start, token });
            }
        };
        out.push((start, token));
        i += 1;
    }
    Ok(out)
}
