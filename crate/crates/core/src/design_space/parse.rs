//! Plain-text space documents.
//!
//! ```text
//! space compressor
//! version 1
//! # name | kind       | lower  | upper  | unit | distribution | categories
//! r4     | continuous | 5      | 250    | mm   | uniform      |
//! r2h    | continuous | 0.1*r4 | 0.5*r4 | mm   | uniform      |
//! fluid  | categorical| -      | -      | -    | uniform      | air, R134a
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. The trailing
//! categories field may be omitted for non-categorical features.

use super::expr::{parse_bound, ExprError, ExprErrorKind};
use super::{BoundExpr, Bounds, DesignSpace, Distribution, FeatureKind, FeatureSpec, SpaceError};

struct Field<'a> {
    text: &'a str,
    column: usize,
}

fn split_fields(line: &str) -> Vec<Field<'_>> {
    let mut fields = Vec::new();
    let mut start = 0;
    for piece in line.split('|') {
        let leading = piece.len() - piece.trim_start().len();
        fields.push(Field {
            text: piece.trim(),
            column: start + leading + 1,
        });
        start += piece.len() + 1;
    }
    fields
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_distribution(text: &str, line: usize, column: usize) -> Result<Distribution, SpaceError> {
    let syntax = |message: String| SpaceError::Syntax {
        line,
        column,
        message,
    };
    let (name, argument) = match text.find('(') {
        Some(open) => {
            let Some(inner) = text[open + 1..].strip_suffix(')') else {
                return Err(syntax(format!("unterminated argument in `{text}`")));
            };
            let value: f64 = inner
                .trim()
                .parse()
                .map_err(|_| syntax(format!("malformed distribution argument `{inner}`")))?;
            (text[..open].trim(), Some(value))
        }
        None => (text, None),
    };
    match (name, argument) {
        ("uniform", None) => Ok(Distribution::Uniform),
        ("power", Some(alpha)) => Ok(Distribution::Power { alpha }),
        ("fixed", Some(value)) => Ok(Distribution::Fixed(value)),
        ("uniform", Some(_)) => Err(syntax("`uniform` takes no argument".into())),
        ("power" | "fixed", None) => Err(syntax(format!("`{name}` needs an argument"))),
        _ => Err(SpaceError::UnknownDistribution {
            line,
            name: name.to_string(),
        }),
    }
}

pub fn parse_space(document: &str) -> Result<DesignSpace, SpaceError> {
    let mut name = String::from("unnamed");
    let mut version = 1;
    let mut features: Vec<FeatureSpec> = Vec::new();

    for (line_index, raw) in document.lines().enumerate() {
        let line = line_index + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !raw.contains('|') {
            let mut words = trimmed.split_whitespace();
            let directive = words.next().unwrap_or_default();
            let argument = words.next();
            let column = raw.len() - raw.trim_start().len() + 1;
            let syntax = |message: String| SpaceError::Syntax {
                line,
                column,
                message,
            };
            if words.next().is_some() {
                return Err(syntax(format!("too many arguments to `{directive}`")));
            }
            match (directive, argument) {
                ("space", Some(arg)) if is_identifier(arg) => name = arg.to_string(),
                ("version", Some(arg)) => {
                    version = arg
                        .parse()
                        .map_err(|_| syntax(format!("malformed version `{arg}`")))?
                }
                _ => return Err(syntax(format!("unrecognized line `{trimmed}`"))),
            }
            continue;
        }

        let fields = split_fields(raw);
        if fields.len() < 6 || fields.len() > 7 {
            return Err(SpaceError::Syntax {
                line,
                column: 1,
                message: format!(
                    "expected 6 or 7 `|`-separated fields (name, kind, lower, upper, unit, distribution[, categories]), found {}",
                    fields.len()
                ),
            });
        }
        let invalid = |message: String| SpaceError::Invalid { line, message };

        let feature_name = fields[0].text;
        if !is_identifier(feature_name) {
            return Err(SpaceError::Syntax {
                line,
                column: fields[0].column,
                message: format!("`{feature_name}` is not a valid feature name"),
            });
        }
        if features.iter().any(|f| f.name == feature_name) {
            return Err(invalid(format!("duplicate feature `{feature_name}`")));
        }

        let kind = match fields[1].text {
            "continuous" => FeatureKind::Continuous,
            "integer" => FeatureKind::Integer,
            "categorical" => FeatureKind::Categorical,
            other => {
                return Err(SpaceError::Syntax {
                    line,
                    column: fields[1].column,
                    message: format!("unknown kind `{other}`"),
                })
            }
        };
        let distribution = parse_distribution(fields[5].text, line, fields[5].column)?;
        let categories: Vec<String> = fields
            .get(6)
            .map(|f| {
                f.text
                    .split(',')
                    .map(str::trim)
                    .filter(|c| !c.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();
        let unit = match fields[4].text {
            "-" => String::new(),
            other => other.to_string(),
        };

        let bound = |field: &Field<'_>| -> Result<Option<BoundExpr>, SpaceError> {
            if field.text == "-" {
                return Ok(None);
            }
            let resolve = |reference: &str| features.iter().position(|f| f.name == reference);
            parse_bound(field.text, &resolve)
                .map(Some)
                .map_err(|ExprError { offset, kind }| {
                    match kind {
                        ExprErrorKind::Syntax(message) => SpaceError::Syntax {
                            line,
                            column: field.column + offset,
                            message,
                        },
                        ExprErrorKind::Unbounded => SpaceError::Unbounded {
                            line,
                            feature: feature_name.to_string(),
                        },
                        ExprErrorKind::UnknownReference(reference) => {
                            // Later declarations are forward references; anything
                            // else is simply unknown.
                            if document.lines().skip(line).any(|l| {
                                l.split('|').next().map(str::trim) == Some(reference.as_str())
                            }) {
                                SpaceError::ForwardReference {
                                    line,
                                    feature: feature_name.to_string(),
                                    reference,
                                }
                            } else {
                                SpaceError::Syntax {
                                    line,
                                    column: field.column + offset,
                                    message: format!("unknown feature `{reference}`"),
                                }
                            }
                        }
                    }
                })
        };
        let lower = bound(&fields[2])?;
        let upper = bound(&fields[3])?;

        let bounds = match kind {
            FeatureKind::Categorical => {
                if lower.is_some() || upper.is_some() {
                    return Err(invalid(format!(
                        "categorical feature `{feature_name}` cannot have numeric bounds"
                    )));
                }
                if categories.is_empty() {
                    return Err(invalid(format!(
                        "categorical feature `{feature_name}` needs at least one category"
                    )));
                }
                if !matches!(distribution, Distribution::Uniform) {
                    return Err(invalid(format!(
                        "categorical feature `{feature_name}` only supports `uniform`"
                    )));
                }
                for (i, c) in categories.iter().enumerate() {
                    if categories[..i].contains(c) {
                        return Err(invalid(format!("duplicate category `{c}`")));
                    }
                }
                None
            }
            FeatureKind::Continuous | FeatureKind::Integer => {
                if !categories.is_empty() {
                    return Err(invalid(format!(
                        "only categorical features take categories (`{feature_name}`)"
                    )));
                }
                let (lower, upper) = match (lower, upper, distribution) {
                    (None, None, Distribution::Fixed(v)) => {
                        (BoundExpr::constant(v), BoundExpr::constant(v))
                    }
                    (Some(lower), Some(upper), _) => (lower, upper),
                    _ => {
                        return Err(SpaceError::Unbounded {
                            line,
                            feature: feature_name.to_string(),
                        })
                    }
                };
                match distribution {
                    Distribution::Fixed(v) => {
                        if !v.is_finite()
                            || lower.as_constant() != Some(v)
                            || upper.as_constant() != Some(v)
                        {
                            return Err(invalid(format!(
                                "fixed feature `{feature_name}` must have lower = upper = {v}"
                            )));
                        }
                    }
                    Distribution::Power { alpha } => {
                        if kind != FeatureKind::Continuous {
                            return Err(invalid(format!(
                                "power distribution requires a continuous feature (`{feature_name}`)"
                            )));
                        }
                        if !(alpha > 0.0) || !alpha.is_finite() {
                            return Err(invalid(format!(
                                "power exponent must be strictly positive, got {alpha}"
                            )));
                        }
                    }
                    Distribution::Uniform => {}
                }
                if let (Some(lo), Some(hi)) = (lower.as_constant(), upper.as_constant()) {
                    if lo > hi {
                        return Err(invalid(format!(
                            "lower bound {lo} of `{feature_name}` exceeds upper bound {hi}"
                        )));
                    }
                }
                Some(Bounds { lower, upper })
            }
        };

        features.push(FeatureSpec {
            name: feature_name.to_string(),
            kind,
            bounds,
            unit,
            distribution,
            categories,
        });
    }

    if features.is_empty() {
        return Err(SpaceError::Invalid {
            line: 0,
            message: "a space needs at least one feature".into(),
        });
    }
    Ok(DesignSpace {
        name,
        version,
        features,
    })
}
