//! Versioned binary container for instance data.
//!
//! Layout: a UTF-8 header of `key value` lines, an empty line, then every array
//! in header order as little-endian `f64`s.
//!
//! ```text
//! proxkit-instance 1
//! kind phase_retrieval
//! param d 10
//! array a 800
//!
//! <binary payload>
//! ```

use crate::error::{Error, Result};

pub const CONTAINER_MAGIC: &str = "proxkit-instance";
const VERSION: u32 = 1;

/// Raw generator output: scalar parameters and named arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceData {
    pub kind: String,
    pub params: Vec<(String, String)>,
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl InstanceData {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            params: Vec::new(),
            arrays: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    /// Stores a real parameter in shortest round-trip form.
    pub fn param_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.param(key, format!("{value:?}"))
    }

    pub fn array(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        self.arrays.push((name.to_string(), values));
        self
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::invalid(format!("{}: missing parameter `{key}`", self.kind)))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::invalid(format!("{}: parameter `{key}` = `{v}` is not a number", self.kind)))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::invalid(format!("{}: parameter `{key}` = `{v}` is not a count", self.kind)))
    }

    pub fn get_array(&self, name: &str) -> Result<&[f64]> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::invalid(format!("{}: missing array `{name}`", self.kind)))
    }

    /// The array with an expected length.
    pub fn get_array_len(&self, name: &str, len: usize) -> Result<&[f64]> {
        let a = self.get_array(name)?;
        if a.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: a.len(),
            });
        }
        Ok(a)
    }

    /// The human-readable header alone.
    pub fn header(&self) -> String {
        let mut h = format!("{CONTAINER_MAGIC} {VERSION}\nkind {}\n", self.kind);
        for (k, v) in &self.params {
            h.push_str(&format!("param {k} {v}\n"));
        }
        for (n, a) in &self.arrays {
            h.push_str(&format!("array {n} {}\n", a.len()));
        }
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header().into_bytes();
        out.push(b'\n');
        for (_, a) in &self.arrays {
            for v in a {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let split = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| Error::invalid("instance container: header terminator not found"))?;
        let header = std::str::from_utf8(&bytes[..split])
            .map_err(|_| Error::invalid("instance container: header is not UTF-8"))?;
        let mut payload = &bytes[split + 2..];
        let mut lines = header.lines();

        let first = lines.next().unwrap_or("");
        let version = first
            .strip_prefix(CONTAINER_MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::invalid("instance container: bad magic"))?;
        if version != VERSION.to_string() {
            return Err(Error::invalid(format!(
                "instance container: unsupported version {version}"
            )));
        }

        let mut data = InstanceData::new("");
        let mut lengths = Vec::new();
        for (n, line) in lines.enumerate() {
            let bad = || Error::invalid(format!("instance container: header line {}: `{line}`", n + 2));
            let mut parts = line.splitn(3, ' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some("kind"), Some(kind), None) => data.kind = kind.to_string(),
                (Some("param"), Some(k), Some(v)) => {
                    data.param(k, v);
                }
                (Some("array"), Some(name), Some(len)) => {
                    lengths.push((name.to_string(), len.parse::<usize>().map_err(|_| bad())?));
                }
                _ => return Err(bad()),
            }
        }
        for (name, len) in lengths {
            let nbytes = len * 8;
            if payload.len() < nbytes {
                return Err(Error::invalid(format!(
                    "instance container: array `{name}` is truncated"
                )));
            }
            let values = payload[..nbytes]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            payload = &payload[nbytes..];
            data.array(&name, values);
        }
        if !payload.is_empty() {
            return Err(Error::invalid("instance container: trailing bytes"));
        }
        Ok(data)
    }
}
