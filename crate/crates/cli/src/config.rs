//! Optional `key = value` config file. Lines may use `=` or `:`, values may
//! be quoted, and `#` or `;` start a comment. Unknown keys are reported on
//! stderr and otherwise ignored.

use std::path::Path;

use anyhow::{Context, Result};

#[derive(Debug, Default, Clone, PartialEq)]
pub struct FileConfig {
    pub eps: Option<f64>,
    pub max_iter: Option<usize>,
    pub format: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with('[') {
                continue;
            }
            let Some((k, v)) = line.split_once(['=', ':']) else {
                eprintln!("warning: config line {} ignored: {raw:?}", no + 1);
                continue;
            };
            let key = k.trim().to_ascii_lowercase().replace('-', "_");
            let val = v.trim().trim_matches(['"', '\'']);
            match key.as_str() {
                "eps" | "tol" | "tolerance" => {
                    cfg.eps = Some(val.parse().with_context(|| format!("config line {}: bad eps {val:?}", no + 1))?)
                }
                "max_iter" => {
                    cfg.max_iter = Some(val.parse().with_context(|| format!("config line {}: bad max_iter {val:?}", no + 1))?)
                }
                "format" => cfg.format = Some(val.to_string()),
                _ => eprintln!("warning: unknown config key {key:?}"),
            }
        }
        Ok(cfg)
    }
}
