//! Versioned JSON reports.
//!
//! Keys are sorted and every float is printed as `{:.16e}` (17 significant
//! digits), so identical inputs give byte-identical files. Non-finite floats
//! become `null`.

use std::io;

use plab_core::first_order::MultiplierTuple;
use plab_core::Samples;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

pub const REPORT_SCHEMA: &str = "plab.report/v1";

/// The published JSON Schema for reports.
pub const REPORT_JSON_SCHEMA: &str = include_str!("../schema/report-v1.json");

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: &'static str,
    pub status: String,
    pub exit_code: i32,
    pub config: Value,
    pub results: Value,
    /// Wall-clock seconds; omitted unless requested since it breaks determinism.
    pub timing: Option<f64>,
}

impl Report {
    pub fn to_value(&self) -> Value {
        json!({
            "schema": REPORT_SCHEMA,
            "command": self.command,
            "status": self.status,
            "exit_code": self.exit_code,
            "config": self.config,
            "results": self.results,
            "timing": self.timing.map(|s| json!({ "wall_seconds": s })),
        })
    }

    pub fn to_json(&self) -> String {
        to_json_string(&self.to_value())
    }
}

struct SeventeenDigits<'a>(PrettyFormatter<'a>);

impl Formatter for SeventeenDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits(PrettyFormatter::with_indent(b"  ")));
    serde::Serialize::serialize(v, &mut ser).expect("writing to a Vec cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn samples(s: &Samples) -> Value {
    Value::Array(s.rows().map(|r| json!(r)).collect())
}

pub fn multiplier_tuple(t: &MultiplierTuple) -> Value {
    json!({
        "lambdas": t.lambdas,
        "measures": t.measures.iter().map(|m| json!({
            "constraint": m.constraint,
            "nodes": m.nodes,
            "weights": m.weights,
        })).collect::<Vec<_>>(),
        "costate": {
            "values": samples(&t.costate.values),
            "atoms": t.costate.atoms.iter().map(|(node, jump)| json!({ "node": node, "jump": jump })).collect::<Vec<_>>(),
        },
    })
}
