//! Machine-readable run reports.
//!
//! A [`MetricReport`] records everything needed to reproduce a run: the tool
//! version, the exact command line, a 64-bit FNV-1a digest of every input
//! file, every seed and protocol parameter, and the metric results. The JSON
//! encoding is canonical — keys sorted, floats printed with 17 significant
//! digits (enough to round-trip f64 exactly), no timestamps — so identical
//! inputs produce byte-identical reports. Wall-clock timings are kept in an
//! optional section that is omitted unless explicitly requested, preserving
//! that guarantee by default.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One named metric: a value, an optional spread, and the parameters that
/// produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricValue {
    pub value: f64,
    pub std: Option<f64>,
    pub params: BTreeMap<String, String>,
}

impl MetricValue {
    pub fn plain(value: f64) -> Self {
        MetricValue {
            value,
            std: None,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_std(mut self, std: f64) -> Self {
        self.std = Some(std);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub tool_version: String,
    pub command_line: Vec<String>,
    /// Input path → 16-hex-digit FNV-1a digest of the file bytes.
    pub inputs: BTreeMap<String, String>,
    /// Seeds and protocol parameters, stringified.
    pub parameters: BTreeMap<String, String>,
    pub results: BTreeMap<String, MetricValue>,
    /// Per-stage wall clock in seconds; omitted from the JSON unless set,
    /// because timings are never byte-reproducible.
    pub timings: Option<BTreeMap<String, f64>>,
}

/// 64-bit FNV-1a over a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Canonical float encoding: 17 significant digits, exact f64 round-trip.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn escape_json(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn string_map_json(map: &BTreeMap<String, String>) -> String {
    let body: Vec<String> = map
        .iter()
        .map(|(k, v)| format!("\"{}\":\"{}\"", escape_json(k), escape_json(v)))
        .collect();
    format!("{{{}}}", body.join(","))
}

impl MetricReport {
    pub fn new(command_line: Vec<String>) -> Self {
        MetricReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command_line,
            inputs: BTreeMap::new(),
            parameters: BTreeMap::new(),
            results: BTreeMap::new(),
            timings: None,
        }
    }

    /// Digests the file at `path` and records it under the given name.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.insert(
            path.display().to_string(),
            format!("{:016x}", fnv1a64(&bytes)),
        );
        Ok(())
    }

    pub fn set_parameter(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.to_string(), value.to_string());
    }

    pub fn add_result(&mut self, name: &str, value: MetricValue) {
        self.results.insert(name.to_string(), value);
    }

    pub fn record_timing(&mut self, stage: &str, seconds: f64) {
        self.timings
            .get_or_insert_with(BTreeMap::new)
            .insert(stage.to_string(), seconds);
    }

    /// Canonical JSON: top-level keys in fixed sorted order, map keys sorted
    /// (BTreeMap), floats via [`format_float`], non-finite values as null.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push('{');
        let args: Vec<String> = self
            .command_line
            .iter()
            .map(|a| format!("\"{}\"", escape_json(a)))
            .collect();
        let _ = write!(out, "\"command_line\":[{}]", args.join(","));
        let _ = write!(out, ",\"inputs\":{}", string_map_json(&self.inputs));
        let _ = write!(out, ",\"parameters\":{}", string_map_json(&self.parameters));
        out.push_str(",\"results\":{");
        let mut first = true;
        for (name, metric) in &self.results {
            if !first {
                out.push(',');
            }
            first = false;
            let std = match metric.std {
                Some(s) => format_float(s),
                None => "null".to_string(),
            };
            let _ = write!(
                out,
                "\"{}\":{{\"params\":{},\"std\":{},\"value\":{}}}",
                escape_json(name),
                string_map_json(&metric.params),
                std,
                format_float(metric.value)
            );
        }
        out.push('}');
        if let Some(timings) = &self.timings {
            out.push_str(",\"timings\":{");
            let body: Vec<String> = timings
                .iter()
                .map(|(k, v)| format!("\"{}\":{}", escape_json(k), format_float(*v)))
                .collect();
            out.push_str(&body.join(","));
            out.push('}');
        }
        let _ = write!(out, ",\"tool_version\":\"{}\"", escape_json(&self.tool_version));
        out.push('}');
        out.push('\n');
        out
    }

    /// CSV view of the results: `name,value,std,params` with params joined
    /// as `k=v;k=v`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,value,std,params\n");
        for (name, metric) in &self.results {
            let std = metric.std.map(format_float).unwrap_or_default();
            let params: Vec<String> = metric
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                escape_csv(name),
                format_float(metric.value),
                std,
                escape_csv(&params.join(";"))
            );
        }
        out
    }

    /// Parses a report previously produced by [`MetricReport::to_json`].
    pub fn from_json(path: &Path, text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::BadReport {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let root: serde_json::Value =
            serde_json::from_str(text).map_err(|e| bad(&format!("invalid JSON: {e}")))?;
        let obj = root.as_object().ok_or_else(|| bad("not a JSON object"))?;

        let command_line = obj
            .get("command_line")
            .and_then(|v| v.as_array())
            .ok_or_else(|| bad("missing command_line array"))?
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| bad("command_line entries must be strings"))
            })
            .collect::<Result<Vec<_>>>()?;

        let string_map = |key: &str| -> Result<BTreeMap<String, String>> {
            let mut map = BTreeMap::new();
            let section = obj
                .get(key)
                .and_then(|v| v.as_object())
                .ok_or_else(|| bad(&format!("missing {key} object")))?;
            for (k, v) in section {
                let value = v
                    .as_str()
                    .ok_or_else(|| bad(&format!("{key}.{k} must be a string")))?;
                map.insert(k.clone(), value.to_string());
            }
            Ok(map)
        };

        let number = |v: &serde_json::Value, what: &str| -> Result<f64> {
            if v.is_null() {
                Ok(f64::NAN)
            } else {
                v.as_f64().ok_or_else(|| bad(&format!("{what} must be a number or null")))
            }
        };

        let mut results = BTreeMap::new();
        let section = obj
            .get("results")
            .and_then(|v| v.as_object())
            .ok_or_else(|| bad("missing results object"))?;
        for (name, entry) in section {
            let entry = entry
                .as_object()
                .ok_or_else(|| bad(&format!("results.{name} must be an object")))?;
            let value = number(
                entry.get("value").ok_or_else(|| bad("result missing value"))?,
                "value",
            )?;
            let std = match entry.get("std") {
                None | Some(serde_json::Value::Null) => None,
                Some(v) => Some(number(v, "std")?),
            };
            let mut params = BTreeMap::new();
            if let Some(p) = entry.get("params") {
                let p = p
                    .as_object()
                    .ok_or_else(|| bad("result params must be an object"))?;
                for (k, v) in p {
                    params.insert(
                        k.clone(),
                        v.as_str()
                            .ok_or_else(|| bad("param values must be strings"))?
                            .to_string(),
                    );
                }
            }
            results.insert(name.clone(), MetricValue { value, std, params });
        }

        let timings = match obj.get("timings") {
            None => None,
            Some(v) => {
                let section = v
                    .as_object()
                    .ok_or_else(|| bad("timings must be an object"))?;
                let mut map = BTreeMap::new();
                for (k, v) in section {
                    map.insert(k.clone(), number(v, "timing")?);
                }
                Some(map)
            }
        };

        Ok(MetricReport {
            tool_version: obj
                .get("tool_version")
                .and_then(|v| v.as_str())
                .ok_or_else(|| bad("missing tool_version"))?
                .to_string(),
            command_line,
            inputs: string_map("inputs")?,
            parameters: string_map("parameters")?,
            results,
            timings,
        })
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(path, &text)
    }

    pub fn write(&self, path: &Path, format: ReportFormat) -> Result<()> {
        let body = match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
        };
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}

fn escape_csv(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Merges several named reports into one. Input digests must agree path by
/// path; parameter or result keys that collide with *different* content are
/// re-keyed as `<source name>.<key>` for every colliding source.
pub fn merge_reports(
    command_line: Vec<String>,
    sources: &[(String, MetricReport)],
) -> Result<MetricReport> {
    let mut merged = MetricReport::new(command_line);
    for (_, report) in sources {
        for (path, digest) in &report.inputs {
            match merged.inputs.get(path) {
                Some(existing) if existing != digest => {
                    return Err(Error::ReportMergeConflict { key: path.clone() });
                }
                _ => {
                    merged.inputs.insert(path.clone(), digest.clone());
                }
            }
        }
    }

    // A key collides when two sources give it different content; colliding
    // keys are namespaced for every source so nothing is silently dropped.
    let colliding_params = colliding_keys(sources.iter().map(|(_, r)| &r.parameters));
    let colliding_results = colliding_keys(sources.iter().map(|(_, r)| &r.results));
    for (name, report) in sources {
        for (key, value) in &report.parameters {
            let key = if colliding_params.contains(key) {
                format!("{name}.{key}")
            } else {
                key.clone()
            };
            merged.parameters.insert(key, value.clone());
        }
        for (key, value) in &report.results {
            let key = if colliding_results.contains(key) {
                format!("{name}.{key}")
            } else {
                key.clone()
            };
            merged.results.insert(key, value.clone());
        }
    }
    Ok(merged)
}

fn colliding_keys<'a, V: PartialEq + 'a>(
    maps: impl Iterator<Item = &'a BTreeMap<String, V>> + Clone,
) -> std::collections::BTreeSet<String> {
    let mut seen: BTreeMap<&str, &V> = BTreeMap::new();
    let mut colliding = std::collections::BTreeSet::new();
    for map in maps {
        for (key, value) in map {
            match seen.get(key.as_str()) {
                Some(existing) if *existing != value => {
                    colliding.insert(key.clone());
                }
                _ => {
                    seen.insert(key, value);
                }
            }
        }
    }
    colliding
}
