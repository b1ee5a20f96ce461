//! Plain-text sectioned key-value configuration.
//!
//! ```text
//! # comment
//! [kernel]
//! family = riesz
//! sigma = 1.0
//! dimension = 1
//! omega = 0.5
//! ```
//!
//! Keys before the first section header belong to the unnamed root section `""`.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Section {
    name: String,
    entries: BTreeMap<String, String>,
}

impl Section {
    pub fn name(&self) -> &str {
        &self.name
    }

    fn path(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.name, key)
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key).ok_or_else(|| Error::config(self.path(key), "missing"))?;
        raw.parse()
            .map_err(|_| Error::config(self.path(key), format!("cannot parse `{raw}`")))
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(_) => self.required(key).map(Some),
        }
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.optional(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.raw(key).ok_or_else(|| Error::config(self.path(key), "missing"))?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::config(self.path(key), format!("cannot parse list item `{s}`")))
            })
            .collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// A parsed configuration document.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document { sections: vec![Section::default()] };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "unterminated section header"))?
                    .trim();
                if doc.section(name).is_some() {
                    return Err(Error::config(name, "section defined twice"));
                }
                doc.sections.push(Section { name: name.to_string(), entries: BTreeMap::new() });
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "expected `key = value`"))?;
            let current = doc.sections.last_mut().expect("root section");
            let key = key.trim();
            if current.entries.contains_key(key) {
                return Err(Error::config(current.path(key), "key defined twice"));
            }
            current.entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(doc)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn require_section(&self, name: &str) -> Result<&Section> {
        self.section(name).ok_or_else(|| Error::config(name, "section missing"))
    }

    pub fn root(&self) -> &Section {
        &self.sections[0]
    }

    /// Sections and keys in sorted order, one `key = value` per line; equal for documents that
    /// differ only in layout, comments or ordering.
    pub fn canonical(&self) -> String {
        let mut sections: Vec<&Section> = self.sections.iter().filter(|s| !s.entries.is_empty()).collect();
        sections.sort_by(|a, b| a.name.cmp(&b.name));
        let mut out = String::new();
        for s in sections {
            if !s.name.is_empty() {
                out.push_str(&format!("[{}]\n", s.name));
            }
            for (k, v) in &s.entries {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    /// Sets `key` in section `name`, creating the section if needed.
    pub fn set(&mut self, name: &str, key: &str, value: impl Into<String>) {
        match self.sections.iter_mut().find(|s| s.name == name) {
            Some(s) => s.insert(key, value),
            None => {
                let mut s = Section { name: name.to_string(), entries: BTreeMap::new() };
                s.insert(key, value);
                self.sections.push(s);
            }
        }
    }
}

/// Renders the kernel as `key = value` lines (no section header).
pub fn kernel_block(spec: &KernelSpec) -> String {
    let mut out = String::new();
    match &spec.family {
        KernelFamily::White => out.push_str("family = white\n"),
        KernelFamily::Riesz { omega } => {
            out.push_str("family = riesz\n");
            out.push_str(&format!("omega = {omega}\n"));
        }
        KernelFamily::Fractional { omegas } => {
            out.push_str("family = fractional\n");
            let list: Vec<String> = omegas.iter().map(|w| w.to_string()).collect();
            out.push_str(&format!("omegas = {}\n", list.join(", ")));
        }
    }
    out.push_str(&format!("sigma = {}\n", spec.sigma));
    out.push_str(&format!("dimension = {}\n", spec.dimension));
    out
}

/// Parses the output of [`kernel_block`], optionally wrapped in a `[kernel]` header.
pub fn parse_kernel_block(text: &str) -> Result<KernelSpec> {
    let doc = Document::parse(text)?;
    let section = doc.section("kernel").unwrap_or_else(|| doc.root());
    kernel_from_section(section)
}

pub fn kernel_from_section(s: &Section) -> Result<KernelSpec> {
    let family: String = s.required("family")?;
    let sigma: f64 = s.required("sigma")?;
    let wrap = |e: Error| match e {
        Error::InvalidParameter(m) => Error::config(s.path("family"), m),
        other => other,
    };
    match family.to_ascii_lowercase().as_str() {
        "white" => KernelSpec::white(s.required("dimension")?, sigma).map_err(wrap),
        "riesz" => KernelSpec::riesz(s.required("dimension")?, sigma, s.required("omega")?).map_err(wrap),
        "fractional" => {
            let omegas: Vec<f64> = s.list("omegas")?;
            if let Some(d) = s.optional::<usize>("dimension")? {
                if d != omegas.len() {
                    return Err(Error::config(
                        s.path("omegas"),
                        format!("{} exponents given for dimension {d}", omegas.len()),
                    ));
                }
            }
            KernelSpec::fractional(sigma, omegas).map_err(wrap)
        }
        other => Err(Error::config(s.path("family"), format!("unknown kernel family `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_round_trip() {
        for k in [
            KernelSpec::white(2, 1.5).unwrap(),
            KernelSpec::riesz(3, 0.7, 2.0).unwrap(),
            KernelSpec::fractional(1.0, vec![0.25, 0.5, 0.75]).unwrap(),
        ] {
            let text = kernel_block(&k);
            assert_eq!(parse_kernel_block(&text).unwrap(), k);
            let wrapped = format!("[kernel]\n{text}");
            assert_eq!(wrapped.replace("[kernel]\n", "").parse::<KernelSpec>().unwrap(), k);
        }
    }

    #[test]
    fn errors_name_the_field() {
        let err = parse_kernel_block("[kernel]\nfamily = riesz\nsigma = x\ndimension = 1\nomega = 0.5").unwrap_err();
        assert!(err.to_string().contains("kernel.sigma"), "{err}");
        let err = parse_kernel_block("family = riesz\nsigma = 1\ndimension = 1").unwrap_err();
        assert!(err.to_string().contains("omega"), "{err}");
        let err = parse_kernel_block("family = cauchy\nsigma = 1\ndimension = 1").unwrap_err();
        assert!(err.to_string().contains("family"), "{err}");
    }

    #[test]
    fn sections_and_comments() {
        let doc = Document::parse("seed = 3 # inline\n[grid]\nn = 64\nradius = 2.5\n").unwrap();
        assert_eq!(doc.root().required::<u64>("seed").unwrap(), 3);
        let g = doc.require_section("grid").unwrap();
        assert_eq!(g.required::<usize>("n").unwrap(), 64);
        assert!(doc.require_section("solver").is_err());
        assert!(Document::parse("[a]\nx = 1\nx = 2").is_err());
    }

    #[test]
    fn canonical_ignores_layout() {
        let a = Document::parse("[b]\ny = 2\nx = 1\n[a]\nz = 0 # note\n").unwrap();
        let b = Document::parse("[a]\n  z=0\n\n[b]\nx = 1\ny = 2").unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(a.canonical(), "[a]\nz = 0\n[b]\nx = 1\ny = 2\n");
    }
}
