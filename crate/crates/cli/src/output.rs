//! Artifact files under `--out`. Without a directory every write is a no-op.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::{json, Value};

use kirchhoff_core::{Field, GridSpec};

use crate::SCHEMA_VERSION;

pub(crate) struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    pub(crate) fn new(dir: Option<&Path>) -> anyhow::Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).with_context(|| format!("creating output directory {}", d.display()))?;
        }
        Ok(Output {
            dir: dir.map(Path::to_path_buf),
        })
    }

    pub(crate) fn json(&self, name: &str, doc: &impl Serialize) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(doc)?;
        text.push('\n');
        self.text(name, &text)
    }

    pub(crate) fn text(&self, name: &str, text: &str) -> anyhow::Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }

    /// `<stem>.bin` with the nodal values as little-endian f64 and a
    /// `<stem>.json` sidecar.
    pub(crate) fn field(
        &self,
        config: &Value,
        grid: &GridSpec,
        stem: &str,
        u: &Field,
        meta: Value,
    ) -> anyhow::Result<()> {
        let Some(d) = &self.dir else {
            return Ok(());
        };
        let bytes: Vec<u8> = u.values().iter().flat_map(|v| v.to_le_bytes()).collect();
        let path = d.join(format!("{stem}.bin"));
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.json(
            &format!("{stem}.json"),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "data": format!("{stem}.bin"),
                "dtype": "f64le",
                "len": u.len(),
                "grid": grid,
                "meta": meta,
                "config": config,
            }),
        )
    }
}

pub(crate) fn read_f64le(path: &Path) -> anyhow::Result<Vec<f64>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() % 8 != 0 {
        bail!("{}: length {} is not a multiple of 8", path.display(), bytes.len());
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}
