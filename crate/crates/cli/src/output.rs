//! Artifact writers: CSV for sequences, pretty JSON for reports.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use torlab_core::{DeviationSeries, RotationSetEstimate};

/// 17 significant digits; round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Single writer for one output directory.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn target(&mut self, name: &str) -> anyhow::Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let path = self.target(name)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
        let path = self.target(name)?;
        let mut w =
            csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns `n, lift_x, lift_y, dev_x, dev_y`.
    pub fn deviation_csv(&mut self, name: &str, s: &DeviationSeries) -> anyhow::Result<()> {
        let rows: Vec<Vec<String>> = s
            .times
            .iter()
            .zip(&s.lift)
            .zip(&s.values)
            .map(|((n, l), d)| {
                vec![
                    n.to_string(),
                    fmt_f64(l[0]),
                    fmt_f64(l[1]),
                    fmt_f64(d[0]),
                    fmt_f64(d[1]),
                ]
            })
            .collect();
        self.csv(name, &["n", "lift_x", "lift_y", "dev_x", "dev_y"], &rows)
    }

    /// `<prefix>_vertices.csv` (`vertex, rho_x, rho_y`) and
    /// `<prefix>_points.csv` (`sample, n, rho_x, rho_y`).
    pub fn rotation_csv(&mut self, prefix: &str, e: &RotationSetEstimate) -> anyhow::Result<()> {
        let vertices: Vec<Vec<String>> = e
            .hull
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i.to_string(), fmt_f64(v[0]), fmt_f64(v[1])])
            .collect();
        self.csv(
            &format!("{prefix}_vertices.csv"),
            &["vertex", "rho_x", "rho_y"],
            &vertices,
        )?;
        let points: Vec<Vec<String>> = e
            .points
            .iter()
            .map(|p| {
                vec![
                    p.sample.to_string(),
                    p.n.to_string(),
                    fmt_f64(p.rho[0]),
                    fmt_f64(p.rho[1]),
                ]
            })
            .collect();
        self.csv(
            &format!("{prefix}_points.csv"),
            &["sample", "n", "rho_x", "rho_y"],
            &points,
        )
    }
}
