//! Textual definitions of formally guarded generative models.
//!
//! ```text
//! boundedParam ; neural2 ; (l: real, u: real) -> real ;
//! requires l <= u ;
//! ensures l <= boundedParam(l, u) && boundedParam(l, u) <= u ;
//! function prompt(l: real, u: real): (real) { return u - l; } ;
//! function fallback(l: real, u: real, y: real): (real) { return min(max(l, y), u); } ;
//! "A real parameter constrained to [l, u]"
//! ```
//!
//! Fields are separated by `;`. The two embedded programs may themselves
//! contain semicolons, so they are delimited by brace matching rather than by
//! splitting. Several definitions may follow one another.

use super::ast::*;
use super::error::FggmParseError;
use super::parser::{parse_formula, parse_program, parse_type_signature};
use super::printer::{print_formula, print_program};
use super::sig::{rewrite_self_calls, FnKind, FnSig};

#[derive(Clone, Debug, PartialEq)]
pub struct FggmDef {
    pub id: String,
    pub gm_id: String,
    pub params: Vec<Param>,
    pub ret: BaseType,
    /// Input contract over the parameters.
    pub requires: Formula,
    /// Output contract over the parameters and [`RESULT`].
    pub ensures: Formula,
    /// Prompting program: parameters → model input.
    pub prompt: Program,
    /// Fallback program: parameters and the last proposal → output.
    pub fallback: Program,
    pub info: String,
}

impl FggmDef {
    pub fn signature(&self) -> FnSig {
        let mut s = FnSig::new(&self.id, self.params.clone(), self.ret, FnKind::Guarded).with_doc(&self.info);
        s.requires = self.requires.clone();
        s.ensures = self.ensures.clone();
        s
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    /// Name of the fallback's extra parameter holding the last proposal.
    pub fn fallback_sample_param(&self) -> Option<String> {
        let d = self.fallback.entry()?;
        d.params.get(self.params.len()).map(|p| p.name.clone())
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        loop {
            let rest = &self.src[self.pos..];
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if trimmed.starts_with("//") {
                let nl = trimmed.find('\n').map(|i| i + 1).unwrap_or(trimmed.len());
                self.pos += nl;
            } else {
                return;
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    /// Text up to the next top-level `;`, which is consumed.
    fn until_semicolon(&mut self, field: &str) -> Result<&'a str, FggmParseError> {
        if self.at_end() {
            return Err(FggmParseError::MissingField(field.to_string()));
        }
        let rest = &self.src[self.pos..];
        let mut in_str = false;
        for (i, c) in rest.char_indices() {
            match c {
                '"' => in_str = !in_str,
                ';' if !in_str => {
                    self.pos += i + 1;
                    return Ok(rest[..i].trim());
                }
                _ => {}
            }
        }
        Err(FggmParseError::MissingField(field.to_string()))
    }

    /// A program: everything up to and including the brace that closes the
    /// first top-level block, followed by `;`.
    fn program(&mut self, field: &str) -> Result<&'a str, FggmParseError> {
        if self.at_end() {
            return Err(FggmParseError::MissingField(field.to_string()));
        }
        let rest = &self.src[self.pos..];
        let mut depth = 0i32;
        let mut in_str = false;
        let mut seen_brace = false;
        let mut chars = rest.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => in_str = !in_str,
                '/' if !in_str && matches!(chars.peek(), Some((_, '/'))) => {
                    for (_, c2) in chars.by_ref() {
                        if c2 == '\n' {
                            break;
                        }
                    }
                }
                '{' if !in_str => {
                    depth += 1;
                    seen_brace = true;
                }
                '}' if !in_str => {
                    depth -= 1;
                    if depth == 0 && seen_brace {
                        let text = &rest[..=i];
                        self.pos += i + 1;
                        self.skip_ws();
                        if self.src[self.pos..].starts_with(';') {
                            self.pos += 1;
                        } else {
                            return Err(FggmParseError::Malformed(format!("expected `;` after the `{field}` program")));
                        }
                        return Ok(text.trim());
                    }
                }
                ';' if !in_str && !seen_brace => {
                    return Err(FggmParseError::MissingField(field.to_string()));
                }
                _ => {}
            }
        }
        Err(FggmParseError::MissingField(field.to_string()))
    }

    fn string_literal(&mut self, field: &str) -> Result<String, FggmParseError> {
        if self.at_end() {
            return Err(FggmParseError::MissingField(field.to_string()));
        }
        let rest = &self.src[self.pos..];
        if !rest.starts_with('"') {
            return Err(FggmParseError::Malformed(format!("`{field}` must be a string literal")));
        }
        let mut out = String::new();
        let mut escaped = false;
        for (i, c) in rest.char_indices().skip(1) {
            if escaped {
                out.push(match c {
                    'n' => '\n',
                    't' => '\t',
                    c => c,
                });
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                self.pos += i + 1;
                return Ok(out);
            } else {
                out.push(c);
            }
        }
        Err(FggmParseError::Malformed(format!("unterminated `{field}` string")))
    }
}

fn keyword_field<'a>(text: &'a str, kw: &str) -> &'a str {
    let t = text.trim_start();
    match t.strip_prefix(kw) {
        Some(rest) if rest.starts_with(|c: char| c.is_whitespace() || c == '(') => rest.trim(),
        _ => t,
    }
}

fn field_err(field: &str) -> impl Fn(super::error::ParseError) -> FggmParseError + '_ {
    move |source| FggmParseError::Field { field: field.to_string(), source }
}

fn one(cur: &mut Cursor<'_>) -> Result<FggmDef, FggmParseError> {
    let id = cur.until_semicolon("id")?.to_string();
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(FggmParseError::Malformed(format!("invalid identifier `{id}`")));
    }
    let gm_id = cur.until_semicolon("gm")?.to_string();
    let sig_text = cur.until_semicolon("signature")?;
    let (params, ret) = parse_type_signature(sig_text).map_err(field_err("signature"))?;
    let req_text = cur.until_semicolon("requires")?;
    let requires = parse_formula(keyword_field(req_text, "requires")).map_err(field_err("requires"))?;
    let ens_text = cur.until_semicolon("ensures")?;
    let ensures = parse_formula(keyword_field(ens_text, "ensures")).map_err(field_err("ensures"))?;
    let ensures = rewrite_self_calls(&ensures, &id, &params, RESULT);
    let prompt = parse_program(cur.program("fp")?).map_err(field_err("fp"))?;
    let fallback = parse_program(cur.program("fd")?).map_err(field_err("fd"))?;
    let info = cur.string_literal("info")?;
    Ok(FggmDef { id, gm_id, params, ret, requires, ensures, prompt, fallback, info })
}

/// Parse a single definition.
pub fn parse_fggm(src: &str) -> Result<FggmDef, FggmParseError> {
    let mut cur = Cursor { src, pos: 0 };
    let def = one(&mut cur)?;
    if !cur.at_end() {
        return Err(FggmParseError::Malformed("trailing text after definition".into()));
    }
    Ok(def)
}

/// Parse a sequence of definitions (typically separated by blank lines).
pub fn parse_fggms(src: &str) -> Result<Vec<FggmDef>, FggmParseError> {
    let mut cur = Cursor { src, pos: 0 };
    let mut out = Vec::new();
    while !cur.at_end() {
        out.push(one(&mut cur)?);
    }
    Ok(out)
}

pub fn print_fggm(d: &FggmDef) -> String {
    let ps: Vec<String> = d.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
    format!(
        "{} ; {} ; ({}) -> {} ;\nrequires {} ;\nensures {} ;\n{} ;\n{} ;\n{:?}\n",
        d.id,
        d.gm_id,
        ps.join(", "),
        d.ret,
        print_formula(&d.requires),
        print_formula(&d.ensures),
        print_program(&d.prompt).trim_end(),
        print_program(&d.fallback).trim_end(),
        d.info
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOUNDED: &str = r#"boundedParam ; neural2 ; (l: real, u: real) -> real ;
requires l <= u ;
ensures l <= boundedParam(l, u) && boundedParam(l, u) <= u ;
function prompt(l: real, u: real): (real) { return u - l; } ;
function fallback(l: real, u: real, y: real): (real) { return min(max(l, y), u); } ;
"A real parameter constrained to [l, u]"
"#;

    #[test]
    fn parses_bounded_param() {
        let d = parse_fggm(BOUNDED).unwrap();
        assert_eq!(d.id, "boundedParam");
        assert_eq!(d.gm_id, "neural2");
        assert_eq!(d.params.len(), 2);
        assert_eq!(d.ret, BaseType::Real);
        assert!(print_formula(&d.ensures).contains("result"));
        assert_eq!(d.fallback_sample_param().as_deref(), Some("y"));
        assert_eq!(d.info, "A real parameter constrained to [l, u]");
    }

    #[test]
    fn print_then_parse_is_identity() {
        let d = parse_fggm(BOUNDED).unwrap();
        let again = parse_fggm(&print_fggm(&d)).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn missing_fallback_is_reported_by_name() {
        let cut = BOUNDED.split("function fallback").next().unwrap();
        assert_eq!(parse_fggm(cut).unwrap_err(), FggmParseError::MissingField("fd".into()));
    }

    #[test]
    fn several_definitions() {
        let two = format!("{BOUNDED}\n\n{}", BOUNDED.replace("boundedParam", "other"));
        let ds = parse_fggms(&two).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds[1].id, "other");
    }
}
