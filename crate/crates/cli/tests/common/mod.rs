//! Shared helpers for the CLI integration tests: locating the binary,
//! running it with a controlled environment, and validating emitted
//! JSON against the schemas shipped in `schemas/`.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

/// Path to the compiled binary under test.
pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fracgreen")
}

/// Repository root (two levels above this crate's manifest).
pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .expect("crate lives two levels below the repo root")
        .to_path_buf()
}

/// Runs the binary with the given arguments and no inherited
/// output-directory override.
pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("FRACGREEN_OUT")
        .output()
        .expect("binary should spawn")
}

pub fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process should exit normally")
}

pub fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn load_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("bad JSON in {}: {e}", path.display()))
}

/// Validates `data` against the named schema file in `schemas/`,
/// panicking with the first violation.
pub fn assert_matches_schema(data: &Value, schema_name: &str) {
    let schema_path = repo_root().join("schemas").join(schema_name);
    let schema = load_json(&schema_path);
    if let Err(msg) = validate(&schema, data, "$") {
        panic!("{schema_name} violation: {msg}");
    }
}

/// Minimal JSON-schema checker covering the subset the shipped schemas
/// use: `type` (string or list), `properties`, `required`,
/// `additionalProperties` (false or schema), `items` (schema or tuple
/// list), `enum`.
pub fn validate(schema: &Value, data: &Value, path: &str) -> Result<(), String> {
    if let Some(allowed) = schema.get("enum") {
        let list = allowed.as_array().expect("enum must be a list");
        if !list.iter().any(|v| v == data) {
            return Err(format!("{path}: {data} not in enum {allowed}"));
        }
    }
    if let Some(ty) = schema.get("type") {
        let names: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list
                .iter()
                .map(|v| v.as_str().expect("type list entries must be strings"))
                .collect(),
            other => panic!("unsupported type clause {other}"),
        };
        if !names.iter().any(|t| type_matches(t, data)) {
            return Err(format!("{path}: expected type {names:?}, got {data}"));
        }
        // Null is an allowed alternative; object/array keywords below
        // only apply when the data actually is an object/array.
    }
    if let Some(obj) = data.as_object() {
        if let Some(required) = schema.get("required") {
            for name in required.as_array().expect("required must be a list") {
                let name = name.as_str().expect("required entries must be strings");
                if !obj.contains_key(name) {
                    return Err(format!("{path}: missing required key {name}"));
                }
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (key, value) in obj {
            let sub = props.and_then(|p| p.get(key));
            match sub {
                Some(sub) => validate(sub, value, &format!("{path}.{key}"))?,
                None => match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => {
                        return Err(format!("{path}: unexpected key {key}"));
                    }
                    Some(Value::Bool(true)) | None => {}
                    Some(extra_schema) => {
                        validate(extra_schema, value, &format!("{path}.{key}"))?
                    }
                },
            }
        }
    }
    if let Some(arr) = data.as_array() {
        match schema.get("items") {
            Some(Value::Array(tuple)) => {
                if arr.len() != tuple.len() {
                    return Err(format!(
                        "{path}: expected a {}-tuple, got {} elements",
                        tuple.len(),
                        arr.len()
                    ));
                }
                for (i, (sub, value)) in tuple.iter().zip(arr).enumerate() {
                    validate(sub, value, &format!("{path}[{i}]"))?;
                }
            }
            Some(sub) => {
                for (i, value) in arr.iter().enumerate() {
                    validate(sub, value, &format!("{path}[{i}]"))?;
                }
            }
            None => {}
        }
    }
    Ok(())
}

fn type_matches(name: &str, data: &Value) -> bool {
    match name {
        "object" => data.is_object(),
        "array" => data.is_array(),
        "string" => data.is_string(),
        "number" => data.is_number(),
        "integer" => data.is_i64() || data.is_u64(),
        "boolean" => data.is_boolean(),
        "null" => data.is_null(),
        other => panic!("unsupported type name {other}"),
    }
}

/// Two JSON documents equal apart from the timestamp inside `meta`.
pub fn equal_modulo_timestamp(a: &Value, b: &Value) -> bool {
    let mut a = a.clone();
    let mut b = b.clone();
    for doc in [&mut a, &mut b] {
        if let Some(meta) = doc.get_mut("meta") {
            if let Some(slot) = meta.get_mut("created_at") {
                *slot = Value::Null;
            }
        }
    }
    a == b
}
