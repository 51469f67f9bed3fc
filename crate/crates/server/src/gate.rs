//! Input gate: every parameter a route accepts is declared with a rule, and
//! anything undeclared, oversize or carrying control characters is refused.
//! Accepted values pass through unmodified; storage never interpolates them.

use serde_json::Value as J;
use uuis_core::storage::Schema;

use crate::error::{ApiError, ApiResult};

pub const MAX_LEN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charset {
    /// Any printable text on one line.
    Line,
    /// Printable text; newlines allowed.
    Multiline,
    /// Optional sign and decimal digits.
    Digits,
}

#[derive(Debug, Clone, Copy)]
pub struct Rule {
    pub max: usize,
    pub charset: Charset,
    pub required: bool,
}

impl Rule {
    pub const LINE: Rule = Rule {
        max: MAX_LEN,
        charset: Charset::Line,
        required: false,
    };
    pub const DIGITS: Rule = Rule {
        max: 20,
        charset: Charset::Digits,
        required: false,
    };

    pub const fn required(self) -> Rule {
        Rule {
            required: true,
            ..self
        }
    }

    /// Default for a named free-form column.
    pub fn for_name(name: &str) -> Rule {
        let charset = if name.contains("Description") || name.contains("Note") {
            Charset::Multiline
        } else {
            Charset::Line
        };
        Rule { charset, ..Rule::LINE }
    }
}

pub fn check(field: &str, rule: &Rule, v: &str) -> ApiResult<()> {
    if v.chars().count() > rule.max {
        return Err(ApiError::invalid(field, format!("longer than {} characters", rule.max)));
    }
    let ok = match rule.charset {
        Charset::Line => !v.chars().any(char::is_control),
        Charset::Multiline => !v.chars().any(|c| c.is_control() && c != '\n'),
        Charset::Digits => {
            let digits = v.strip_prefix('-').unwrap_or(v);
            !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
        }
    };
    if !ok {
        let reason = match rule.charset {
            Charset::Digits => "must be an integer",
            _ => "contains control characters",
        };
        return Err(ApiError::invalid(field, reason));
    }
    Ok(())
}

/// Declared shape of a JSON body.
#[derive(Debug, Clone, Copy)]
pub enum Shape {
    Scalar(Rule),
    /// Scalar with the default rule for its key.
    Named,
    Object(&'static [(&'static str, Shape)]),
    /// Columns of a stored kind plus extra keys.
    Entity(&'static str, &'static [(&'static str, Shape)]),
    /// Caller-chosen keys with scalar values.
    Map,
    List(&'static Shape),
}

fn scalar(path: &str, rule: &Rule, v: &J) -> ApiResult<()> {
    match v {
        J::String(s) => check(path, rule, s),
        J::Number(_) | J::Bool(_) | J::Null => Ok(()),
        _ => Err(ApiError::invalid(path, "expected a scalar")),
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn object<'a>(
    path: &str,
    v: &'a J,
) -> ApiResult<&'a serde_json::Map<String, J>> {
    match v {
        J::Object(m) => Ok(m),
        _ => Err(ApiError::invalid(if path.is_empty() { "body" } else { path }, "expected an object")),
    }
}

fn walk(path: &str, shape: &Shape, v: &J) -> ApiResult<()> {
    match shape {
        Shape::Scalar(rule) => scalar(path, rule, v),
        Shape::Named => scalar(path, &Rule::for_name(path.rsplit('.').next().unwrap_or(path)), v),
        Shape::Object(keys) => {
            let m = object(path, v)?;
            for (k, inner) in m {
                let p = join(path, k);
                let Some((_, s)) = keys.iter().find(|(name, _)| name == k) else {
                    return Err(ApiError::invalid(&p, "undeclared parameter"));
                };
                walk(&p, s, inner)?;
            }
            for (name, s) in keys.iter() {
                if let Shape::Scalar(r) = s {
                    if r.required && m.get(*name).is_none_or(J::is_null) {
                        return Err(ApiError::invalid(&join(path, name), "required"));
                    }
                }
            }
            Ok(())
        }
        Shape::Entity(kind, extra) => {
            let def = Schema::global().entity(kind).map_err(ApiError::from)?;
            let m = object(path, v)?;
            for (k, inner) in m {
                let p = join(path, k);
                if let Some((_, s)) = extra.iter().find(|(name, _)| name == k) {
                    walk(&p, s, inner)?;
                } else if def.field(k).is_some() || def.key == k {
                    walk(&p, &Shape::Named, inner)?;
                } else {
                    return Err(ApiError::invalid(&p, "undeclared parameter"));
                }
            }
            Ok(())
        }
        Shape::Map => {
            let m = object(path, v)?;
            for (k, inner) in m {
                let p = join(path, k);
                check(&p, &Rule::LINE, k)?;
                walk(&p, &Shape::Named, inner)?;
            }
            Ok(())
        }
        Shape::List(inner) => match v {
            J::Array(items) => {
                for (i, item) in items.iter().enumerate() {
                    walk(&format!("{path}[{}]", i + 1), inner, item)?;
                }
                Ok(())
            }
            J::Null => Ok(()),
            _ => Err(ApiError::invalid(path, "expected a list")),
        },
    }
}

/// Parses and checks a JSON body against its declared shape.
pub fn body(raw: &[u8], shape: &Shape) -> ApiResult<J> {
    let v: J = if raw.iter().all(u8::is_ascii_whitespace) {
        J::Object(Default::default())
    } else {
        serde_json::from_slice(raw).map_err(|e| ApiError::invalid("body", format!("malformed JSON: {e}")))?
    };
    walk("", shape, &v)?;
    Ok(v)
}

/// Query-string parameters: only declared names, each under its rule.
/// `open` admits extra names (search field inputs) under the line rule.
pub fn query(
    params: &[(String, String)],
    declared: &[(&str, Rule)],
    open: &[&str],
) -> ApiResult<()> {
    for (k, v) in params {
        if let Some((_, rule)) = declared.iter().find(|(n, _)| n == k) {
            check(k, rule, v)?;
        } else if open.iter().any(|n| n.eq_ignore_ascii_case(k)) {
            check(k, &Rule::LINE, v)?;
        } else {
            return Err(ApiError::invalid(k, "undeclared parameter"));
        }
    }
    for (name, rule) in declared {
        if rule.required && !params.iter().any(|(k, _)| k == name) {
            return Err(ApiError::invalid(name, "required"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    const NOTE: Shape = Shape::Object(&[("Note", Shape::Named), ("Flag", Shape::Scalar(Rule::LINE))]);

    fn run(shape: &Shape, v: J) -> ApiResult<J> {
        body(v.to_string().as_bytes(), shape)
    }

    #[test]
    fn injection_text_passes_unchanged() {
        let payload = "'; DROP TABLE users;--";
        let v = run(&NOTE, json!({"Note": payload})).unwrap();
        assert_eq!(v["Note"], payload);
    }

    #[test]
    fn oversize_and_undeclared_are_refused() {
        let e = run(&NOTE, json!({"Note": "x".repeat(5000)})).unwrap_err();
        assert_eq!((e.code, e.field.as_deref()), ("VALIDATION_FAILED", Some("Note")));
        let e = run(&NOTE, json!({"admin": 1})).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("admin"));
        assert!(run(&NOTE, json!({"Note": "x".repeat(MAX_LEN)})).is_ok());
    }

    #[test]
    fn newline_only_in_free_text() {
        assert!(run(&NOTE, json!({"Note": "a\nb"})).is_ok());
        assert!(run(&NOTE, json!({"Note": "a\tb"})).is_err());
        assert!(run(&NOTE, json!({"Flag": "a\nb"})).is_err());
        assert!(run(&NOTE, json!({"Note": "a\u{7}b"})).is_err());
    }

    #[test]
    fn entity_shape_admits_columns_only() {
        const ASSET: Shape = Shape::Entity("PhysicalAsset", &[("AdditionalParameters", Shape::Map)]);
        assert!(run(&ASSET, json!({"BarCode": "b", "Owner": "ENCS", "AdditionalParameters": {"Colour": "red"}})).is_ok());
        let e = run(&ASSET, json!({"Colour": "red"})).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("Colour"));
        let e = run(&ASSET, json!({"AdditionalParameters": {"Colour": {"deep": 1}}})).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("AdditionalParameters.Colour"));
    }

    #[test]
    fn query_rules() {
        let p = |k: &str, v: &str| vec![(k.to_string(), v.to_string())];
        let declared = [("offset", Rule::DIGITS), ("q", Rule::LINE)];
        assert!(query(&p("offset", "10"), &declared, &[]).is_ok());
        assert!(query(&p("offset", "ten"), &declared, &[]).is_err());
        assert!(query(&p("admin", "1"), &declared, &[]).is_err());
        assert!(query(&p("Owner", "ENCS"), &declared, &["owner"]).is_ok());
        assert!(query(&[], &[("days", Rule::DIGITS.required())], &[]).is_err());
    }

    #[test]
    fn malformed_json_is_a_validation_failure() {
        let e = body(b"{not json", &NOTE).unwrap_err();
        assert_eq!((e.code, e.field.as_deref()), ("VALIDATION_FAILED", Some("body")));
        assert!(body(b"", &NOTE).is_ok());
    }
}
