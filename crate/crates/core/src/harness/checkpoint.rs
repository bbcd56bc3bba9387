//! Plain-text checkpoints.
//!
//! ```text
//! quanvolute-ckpt v1
//! meta model=qcnn channels=8 stride=1 conv_relu=false
//! quanv.params 8x6 1.2345678901234567e-1 ...
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every
//! `f64` exactly, so save → load → save reproduces the file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, Tensor};

pub const HEADER: &str = "quanvolute-ckpt v1";

pub fn to_text(model: &Model) -> String {
    let c = model.config();
    let mut s = format!(
        "{HEADER}\nmeta model={} channels={} stride={} conv_relu={}\n",
        model.kind(),
        c.channels,
        c.stride,
        c.conv_relu
    );
    for t in model.tensors() {
        let shape: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
        s.push_str(&t.name);
        s.push(' ');
        s.push_str(&shape.join("x"));
        for v in &t.values {
            write!(s, " {v:.16e}").expect("writing to a String cannot fail");
        }
        s.push('\n');
    }
    s
}

fn format_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("checkpoint line {line}: {msg}"))
}

pub fn from_text(text: &str) -> Result<Model> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((n, other)) => return Err(format_err(n, format!("expected `{HEADER}`, found `{other}`"))),
        None => return Err(Error::Format("checkpoint is empty".into())),
    }
    let (n, meta) = lines
        .next()
        .ok_or_else(|| Error::Format("checkpoint has no meta line".into()))?;
    let fields = meta
        .strip_prefix("meta ")
        .ok_or_else(|| format_err(n, "expected `meta ...`"))?;
    let mut kind = None;
    let mut config = ModelConfig::default();
    for field in fields.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| format_err(n, format!("malformed meta field `{field}`")))?;
        let bad = || format_err(n, format!("bad value `{v}` for `{k}`"));
        match k {
            "model" => kind = Some(v.parse().map_err(|_| format_err(n, format!("unknown model `{v}`")))?),
            "channels" => config.channels = v.parse().map_err(|_| bad())?,
            "stride" => config.stride = v.parse().map_err(|_| bad())?,
            "conv_relu" => config.conv_relu = v.parse().map_err(|_| bad())?,
            _ => return Err(format_err(n, format!("unknown meta field `{k}`"))),
        }
    }
    let kind = kind.ok_or_else(|| format_err(n, "meta line lacks `model=`"))?;

    let mut tensors = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let name = parts.next().expect("split yields at least one item").to_string();
        let shape = parts
            .next()
            .ok_or_else(|| format_err(n, "missing shape"))?
            .split('x')
            .map(|d| {
                d.parse::<usize>()
                    .map_err(|_| format_err(n, format!("bad shape dimension `{d}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = parts
            .map(|v| v.parse::<f64>().map_err(|_| format_err(n, format!("bad number `{v}`"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != shape.iter().product::<usize>() {
            return Err(format_err(n, format!("{} values for shape {shape:?}", values.len())));
        }
        tensors.push(Tensor { name, shape, values });
    }
    Model::from_tensors(kind, config, &tensors)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}
