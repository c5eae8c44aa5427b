//! Output directory bookkeeping: every file goes through [`RunDir`], which
//! records its checksum for the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use glpattern_core::config::ExperimentConfig;
use glpattern_core::io::{encode_binary, Field};
use glpattern_core::RealField;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub subcommand: &'a str,
    pub code_version: &'static str,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// true when the run stopped early; the listed files are what was written.
    pub partial: bool,
    pub status: &'a str,
    pub config: &'a ExperimentConfig,
    pub artifacts: &'a [ArtifactEntry],
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub struct RunDir {
    root: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.entries.retain(|e| e.path != name);
        self.entries.push(ArtifactEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for r in rows {
            let cells: Vec<String> = r
                .iter()
                .map(|v| {
                    if v.fract() == 0.0 && v.abs() < 1e9 {
                        format!("{}", *v as i64)
                    } else {
                        format!("{v:e}")
                    }
                })
                .collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_field(&mut self, name: &str, field: &Field) -> Result<()> {
        self.write_bytes(name, &encode_binary(field))
    }

    /// Heatmap, blue (min) through white to red (max).
    pub fn write_png(&mut self, name: &str, f: &RealField) -> Result<()> {
        let n = f.grid.n() as u32;
        let finite = f.values.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        let span = if hi > lo { hi - lo } else { 1.0 };
        let img = image::RgbImage::from_fn(n, n, |i, j| {
            // image rows run top to bottom, y runs bottom to top
            let v = f.at(i as usize, (n - 1 - j) as usize);
            if !v.is_finite() {
                return image::Rgb([0, 0, 0]);
            }
            let t = (v - lo) / span;
            let ramp = |u: f64| (255.0 * u.clamp(0.0, 1.0)).round() as u8;
            if t < 0.5 {
                let u = 2.0 * t;
                image::Rgb([ramp(u), ramp(u), 255])
            } else {
                let u = 2.0 * (1.0 - t);
                image::Rgb([255, ramp(u), ramp(u)])
            }
        });
        let mut bytes = Vec::new();
        img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
        self.write_bytes(name, &bytes)
    }

    pub fn finish(
        mut self,
        subcommand: &str,
        config: &ExperimentConfig,
        started_unix: f64,
        status: &str,
    ) -> Result<PathBuf> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            subcommand,
            code_version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            started_unix,
            finished_unix: unix_now(),
            partial: status != "ok",
            status,
            config,
            artifacts: &self.entries,
        };
        let path = self.root.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
