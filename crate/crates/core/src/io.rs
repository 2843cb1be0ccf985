//! JSON interchange formats.
//!
//! * `mmspace/1`: `{ "format", "labels", "dist", "weights" }` with rationals
//!   as `"p/q"` strings (plain numbers and decimal strings are read exactly).
//!   Extra fields are ignored, so coded trees, which add a `"coding"`
//!   object, read back as plain spaces.
//! * `measure/1`: `{ "format", "weights" }` or a bare array.
//! * `excursion/1`: `{ "format", "kind": "pl" | "pc", "breakpoints",
//!   "values", "breakpoint_values" }`.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{invalid, Error, Result};
use crate::excursion::{CodedTree, Excursion, ExcursionKind};
use crate::mm_core::FiniteMMSpace;
use crate::rational::{rational_from_json, Rational, DECIMAL_ROUNDING};

pub const MMSPACE_FORMAT: &str = "mmspace/1";
pub const MEASURE_FORMAT: &str = "measure/1";
pub const EXCURSION_FORMAT: &str = "excursion/1";

/// Reads and parses a JSON file; parse errors carry line and column.
pub fn read_json_file(path: impl AsRef<Path>) -> Result<Value> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { context: path.display().to_string(), source })
}

/// Writes pretty-printed JSON followed by a newline.
pub fn write_json_file(path: impl AsRef<Path>, value: &Value) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { context: path.display().to_string(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// `{ "exact": "p/q", "decimal": "...", "rounding": "..." }`.
pub fn rational_json(q: &Rational) -> Value {
    json!({ "exact": q.to_string(), "decimal": q.to_decimal(), "rounding": DECIMAL_ROUNDING })
}

fn field<'a>(obj: &'a Map<String, Value>, op: &'static str, name: &'static str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| invalid(op, name, "missing"))
}

fn object<'a>(value: &'a Value, op: &'static str) -> Result<&'a Map<String, Value>> {
    value.as_object().ok_or_else(|| invalid(op, "document", "expected a JSON object"))
}

fn check_format(obj: &Map<String, Value>, op: &'static str, expected: &str) -> Result<()> {
    match obj.get("format") {
        None => Ok(()),
        Some(Value::String(s)) if s == expected => Ok(()),
        Some(other) => Err(invalid(op, "format", format!("expected \"{expected}\", found {other}"))),
    }
}

fn rational_list(value: &Value, op: &'static str, name: &'static str) -> Result<Vec<Rational>> {
    let items = value.as_array().ok_or_else(|| invalid(op, name, "expected an array"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, v)| rational_from_json(v).map_err(|e| invalid(op, name, format!("entry {i}: {e}"))))
        .collect()
}

fn rational_strings(v: &[Rational]) -> Value {
    Value::Array(v.iter().map(|q| Value::String(q.to_string())).collect())
}

pub fn mm_space_from_json(value: &Value) -> Result<FiniteMMSpace> {
    const OP: &str = "read mmspace";
    let obj = object(value, OP)?;
    check_format(obj, OP, MMSPACE_FORMAT)?;
    let rows = field(obj, OP, "dist")?.as_array().ok_or_else(|| invalid(OP, "dist", "expected an array of rows"))?;
    let dist = rows.iter().map(|r| rational_list(r, OP, "dist")).collect::<Result<Vec<_>>>()?;
    let weights = rational_list(field(obj, OP, "weights")?, OP, "weights")?;
    let labels = match obj.get("labels") {
        Some(Value::Array(items)) => items
            .iter()
            .map(|l| l.as_str().map(str::to_owned).ok_or_else(|| invalid(OP, "labels", "expected strings")))
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(invalid(OP, "labels", "expected an array")),
        None => (0..weights.len()).map(|i| format!("p{i}")).collect(),
    };
    FiniteMMSpace::new(labels, dist, weights).map_err(|e| match e {
        Error::InvalidSpace { violations, .. } => Error::InvalidSpace { op: OP, violations },
        other => other,
    })
}

pub fn mm_space_to_json(space: &FiniteMMSpace) -> Value {
    json!({
        "format": MMSPACE_FORMAT,
        "labels": space.labels(),
        "dist": space.matrix().iter().map(|r| rational_strings(r)).collect::<Vec<_>>(),
        "weights": rational_strings(space.weights()),
    })
}

pub fn read_mm_space(path: impl AsRef<Path>) -> Result<FiniteMMSpace> {
    mm_space_from_json(&read_json_file(path)?)
}

pub fn measure_from_json(value: &Value) -> Result<Vec<Rational>> {
    const OP: &str = "read measure";
    match value {
        Value::Array(_) => rational_list(value, OP, "weights"),
        Value::Object(obj) => {
            check_format(obj, OP, MEASURE_FORMAT)?;
            rational_list(field(obj, OP, "weights")?, OP, "weights")
        }
        _ => Err(invalid(OP, "document", "expected an array or an object with \"weights\"")),
    }
}

pub fn measure_to_json(weights: &[Rational]) -> Value {
    json!({ "format": MEASURE_FORMAT, "weights": rational_strings(weights) })
}

pub fn excursion_from_json(value: &Value) -> Result<Excursion> {
    const OP: &str = "read excursion";
    let obj = object(value, OP)?;
    check_format(obj, OP, EXCURSION_FORMAT)?;
    let kind = match field(obj, OP, "kind")?.as_str() {
        Some("pl") => ExcursionKind::PiecewiseLinear,
        Some("pc") => ExcursionKind::PiecewiseConstant,
        _ => return Err(invalid(OP, "kind", "expected \"pl\" or \"pc\"")),
    };
    let breakpoints = rational_list(field(obj, OP, "breakpoints")?, OP, "breakpoints")?;
    let values = rational_list(field(obj, OP, "values")?, OP, "values")?;
    let bp = match obj.get("breakpoint_values") {
        Some(v) => Some(rational_list(v, OP, "breakpoint_values")?),
        None => None,
    };
    match kind {
        ExcursionKind::PiecewiseLinear => {
            if bp.as_ref().is_some_and(|b| !b.is_empty() && *b != values) {
                return Err(invalid(OP, "breakpoint_values", "piecewise-linear excursions take heights from \"values\""));
            }
            Excursion::pl(breakpoints, values)
        }
        ExcursionKind::PiecewiseConstant => Excursion::pc(breakpoints, values, bp),
    }
}

pub fn excursion_to_json(h: &Excursion) -> Value {
    let mut v = json!({
        "format": EXCURSION_FORMAT,
        "kind": h.kind().to_string(),
        "breakpoints": rational_strings(h.breakpoints()),
        "values": rational_strings(h.values()),
    });
    if h.kind() == ExcursionKind::PiecewiseConstant {
        v["breakpoint_values"] = rational_strings(h.breakpoint_values());
    }
    v
}

pub fn read_excursion(path: impl AsRef<Path>) -> Result<Excursion> {
    excursion_from_json(&read_json_file(path)?)
}

/// A coded tree as an `mmspace/1` document with an extra `"coding"` object.
pub fn coded_tree_to_json(tree: &CodedTree) -> Value {
    let mut v = mm_space_to_json(&tree.space);
    v["coding"] = json!({
        "segments": tree.segments.iter().map(|(a, b)| json!([a.to_string(), b.to_string()])).collect::<Vec<_>>(),
        "projection": tree.projection,
        "representatives": rational_strings(&tree.representatives),
        "bound": rational_json(&tree.bound),
    });
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::sample_excursion;
    use crate::mm_core::sample_mm_space;

    #[test]
    fn mm_space_round_trip() {
        for seed in 0..20 {
            let s = sample_mm_space(seed, 5, Rational::from(3));
            assert_eq!(mm_space_from_json(&mm_space_to_json(&s)).unwrap(), s);
        }
    }

    #[test]
    fn accepts_numbers_and_decimals_exactly() {
        let v = json!({ "dist": [[0, "0.5"], [0.5, "0"]], "weights": ["0.75", "1/4"] });
        let s = mm_space_from_json(&v).unwrap();
        assert_eq!(s.dist(0, 1), &Rational::new(1, 2));
        assert_eq!(s.weight(0), &Rational::new(3, 4));
        assert_eq!(s.labels(), &["p0".to_string(), "p1".to_string()]);
    }

    #[test]
    fn reports_the_offending_field() {
        let err = mm_space_from_json(&json!({ "dist": [[0]], "weights": ["x"] })).unwrap_err().to_string();
        assert!(err.contains("weights"), "{err}");
        let err = mm_space_from_json(&json!({ "dist": [[0, 1], [2, 0]], "weights": ["1/2", "1/2"] })).unwrap_err().to_string();
        assert!(err.contains("read mmspace"), "{err}");
        assert!(mm_space_from_json(&json!({ "format": "other", "dist": [[0]], "weights": [1] })).is_err());
    }

    #[test]
    fn excursion_round_trip() {
        for seed in 0..20 {
            for kind in [ExcursionKind::PiecewiseLinear, ExcursionKind::PiecewiseConstant] {
                let h = sample_excursion(seed, kind, 5);
                assert_eq!(excursion_from_json(&excursion_to_json(&h)).unwrap(), h);
            }
        }
    }

    #[test]
    fn measure_forms() {
        let w = vec![Rational::new(1, 3), Rational::new(2, 3)];
        assert_eq!(measure_from_json(&measure_to_json(&w)).unwrap(), w);
        assert_eq!(measure_from_json(&json!(["1/3", "2/3"])).unwrap(), w);
    }

    #[test]
    fn coded_tree_reads_back_as_space() {
        let tree = crate::excursion::code_excursion(&Excursion::grid_indicator(3).unwrap(), &Default::default());
        assert_eq!(mm_space_from_json(&coded_tree_to_json(&tree)).unwrap(), tree.space);
    }
}
