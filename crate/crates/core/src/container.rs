//! Self-describing container: a UTF-8 text manifest followed by a payload of
//! little-endian `f64` arrays.
//!
//! ```text
//! SKYTRACE-<KIND> <version>
//! key=value                 (any number, order preserved)
//! array <name> <d0>x<d1>... <byte offset> <element count>
//! end
//! <payload bytes>
//! ```
//!
//! Offsets are relative to the first payload byte. Arrays are laid out in
//! manifest order with no padding.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: String,
    pub version: u32,
    pub meta: Vec<(String, String)>,
    pub arrays: Vec<NamedArray>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

impl Container {
    pub fn new(kind: &str, version: u32) -> Self {
        Container {
            kind: kind.to_string(),
            version,
            meta: Vec::new(),
            arrays: Vec::new(),
        }
    }

    pub fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    pub fn put_array(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.arrays.push(NamedArray {
            name: name.into(),
            shape,
            data,
        });
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| format_err(format!("manifest key `{key}` missing")))
    }

    pub fn parse<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| format_err(format!("manifest key `{key}` has unparsable value `{raw}`")))
    }

    pub fn array(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| format_err(format!("array `{name}` missing")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let clean = |s: &str| !s.contains(['\n', '\r']);
        let mut text = format!("SKYTRACE-{} {}\n", self.kind, self.version);
        for (k, v) in &self.meta {
            if k.is_empty()
                || k.contains('=')
                || k.starts_with("array ")
                || k == "end"
                || !clean(k)
                || !clean(v)
            {
                return Err(format_err(format!(
                    "manifest entry `{k}` cannot be encoded"
                )));
            }
            text.push_str(&format!("{k}={v}\n"));
        }
        let mut offset = 0usize;
        for a in &self.arrays {
            if a.name.is_empty() || a.name.contains(char::is_whitespace) {
                return Err(format_err(format!(
                    "array name `{}` cannot be encoded",
                    a.name
                )));
            }
            let dims: Vec<String> = a.shape.iter().map(usize::to_string).collect();
            text.push_str(&format!(
                "array {} {} {} {}\n",
                a.name,
                dims.join("x"),
                offset,
                a.data.len()
            ));
            offset += a.data.len() * 8;
        }
        text.push_str("end\n");
        let mut bytes = text.into_bytes();
        bytes.reserve(offset);
        for a in &self.arrays {
            for v in &a.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let len = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| format_err("manifest ends without `end`"))?;
            let line = std::str::from_utf8(&rest[..len])
                .map_err(|_| format_err("manifest is not UTF-8"))?;
            pos += len + 1;
            Ok(line)
        };

        let header = next_line()?;
        let (magic, version) = header
            .split_once(' ')
            .ok_or_else(|| format_err(format!("bad header `{header}`")))?;
        let kind = magic
            .strip_prefix("SKYTRACE-")
            .ok_or_else(|| format_err(format!("bad magic `{magic}`")))?
            .to_string();
        let version: u32 = version
            .parse()
            .map_err(|_| format_err(format!("bad version `{version}`")))?;

        let mut meta = Vec::new();
        let mut layout = Vec::new();
        loop {
            let line = next_line()?;
            if line == "end" {
                break;
            }
            if let Some(spec) = line.strip_prefix("array ") {
                let parts: Vec<&str> = spec.split(' ').collect();
                if parts.len() != 4 {
                    return Err(format_err(format!("bad array line `{line}`")));
                }
                let shape = parts[1]
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| format_err(format!("bad shape in `{line}`")))?;
                let offset: usize = parts[2]
                    .parse()
                    .map_err(|_| format_err(format!("bad offset in `{line}`")))?;
                let count: usize = parts[3]
                    .parse()
                    .map_err(|_| format_err(format!("bad count in `{line}`")))?;
                if shape.iter().product::<usize>() != count {
                    return Err(format_err(format!("shape and count disagree in `{line}`")));
                }
                layout.push((parts[0].to_string(), shape, offset, count));
            } else {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| format_err(format!("bad manifest line `{line}`")))?;
                meta.push((k.to_string(), v.to_string()));
            }
        }

        let payload = &bytes[pos..];
        let mut arrays = Vec::with_capacity(layout.len());
        let mut expected = 0usize;
        for (name, shape, offset, count) in layout {
            if offset != expected {
                return Err(format_err(format!(
                    "array `{name}` at offset {offset}, expected {expected}"
                )));
            }
            let end = offset + count * 8;
            let raw = payload
                .get(offset..end)
                .ok_or_else(|| format_err(format!("array `{name}` runs past the payload")))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            arrays.push(NamedArray { name, shape, data });
            expected = end;
        }
        if expected != payload.len() {
            return Err(format_err(format!(
                "{} trailing payload bytes",
                payload.len() - expected
            )));
        }
        Ok(Container {
            kind,
            version,
            meta,
            arrays,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Loads and checks kind and version.
    pub fn load_expect(path: impl AsRef<Path>, kind: &str, version: u32) -> Result<Self> {
        let c = Self::load(path)?;
        if c.kind != kind || c.version != version {
            return Err(format_err(format!(
                "expected {kind} v{version}, found {} v{}",
                c.kind, c.version
            )));
        }
        Ok(c)
    }
}
