//! Plain-text network checkpoints.
//!
//! ```text
//! isac-checkpoint 1
//! shape input=2 hidden=64 mod=4 frames=100
//! tensor trunk.0.weight 64 2
//! 0.0123 -0.2 ...
//! ...
//! end
//! ```
//!
//! Each tensor header gives its name and dimensions; the next line holds the
//! values in row-major order, written in shortest round-trip form.

use std::fmt::Write as _;

use crate::agents::net::{NetShape, PolicyValueNet};
use crate::error::{Error, Result};
use crate::num::Real;

pub const MAGIC: &str = "isac-checkpoint";
pub const VERSION: u32 = 1;

pub fn to_text<T: Real>(net: &PolicyValueNet<T>) -> String {
    let s = net.shape();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(
        out,
        "shape input={} hidden={} mod={} frames={}",
        s.input, s.hidden, s.n_mod, s.n_frames
    );
    for spec in s.layout() {
        let dims: Vec<String> = spec.shape.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "tensor {} {}", spec.name, dims.join(" "));
        let values: Vec<String> = net.params()[spec.range()].iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "{}", values.join(" "));
    }
    out.push_str("end\n");
    out
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Checkpoint {
        line,
        message: message.into(),
    }
}

fn parse_shape(line_no: usize, line: &str) -> Result<NetShape> {
    let mut shape = NetShape::new(0, 0);
    let mut fields = line.split_whitespace();
    if fields.next() != Some("shape") {
        return Err(err(line_no, "expected `shape` line"));
    }
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("malformed field `{field}`")))?;
        let value: usize = value
            .parse()
            .map_err(|_| err(line_no, format!("bad integer in `{field}`")))?;
        match key {
            "input" => shape.input = value,
            "hidden" => shape.hidden = value,
            "mod" => shape.n_mod = value,
            "frames" => shape.n_frames = value,
            _ => return Err(err(line_no, format!("unknown shape field `{key}`"))),
        }
    }
    Ok(shape)
}

/// Parses a checkpoint and checks it against the expected architecture.
pub fn from_text<T: Real>(text: &str, expected: NetShape) -> Result<PolicyValueNet<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")));

    let (n, header) = next("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(err(n, "not a checkpoint file"));
    }
    match parts.next().and_then(|v| v.parse::<u32>().ok()) {
        Some(VERSION) => {}
        other => return Err(err(n, format!("unsupported version {other:?}"))),
    }

    let (n, shape_line) = next("shape")?;
    let shape = parse_shape(n, shape_line)?;
    if shape != expected {
        return Err(Error::Shape(format!(
            "checkpoint architecture {shape:?} does not match configuration {expected:?}"
        )));
    }

    let mut params = Vec::with_capacity(shape.n_params());
    for spec in shape.layout() {
        let (n, head) = next("tensor header")?;
        let mut fields = head.split_whitespace();
        if fields.next() != Some("tensor") || fields.next() != Some(spec.name) {
            return Err(err(n, format!("expected tensor `{}`", spec.name)));
        }
        let dims: Vec<usize> = fields
            .map(|d| d.parse().map_err(|_| err(n, format!("bad dimension `{d}`"))))
            .collect::<Result<_>>()?;
        if dims != spec.shape {
            return Err(Error::Shape(format!(
                "tensor `{}` has shape {dims:?}, expected {:?}",
                spec.name, spec.shape
            )));
        }
        let (n, values) = next("tensor values")?;
        let before = params.len();
        for v in values.split_whitespace() {
            let x = T::from_str_radix(v, 10).map_err(|_| err(n, format!("bad number `{v}`")))?;
            params.push(x);
        }
        if params.len() - before != spec.len() {
            return Err(err(
                n,
                format!("tensor `{}` has {} values, expected {}", spec.name, params.len() - before, spec.len()),
            ));
        }
    }
    let (n, end) = next("end")?;
    if end != "end" {
        return Err(err(n, "expected `end`"));
    }
    PolicyValueNet::from_params(shape, params)
}
