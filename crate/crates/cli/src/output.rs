use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use eitmem_core::{SampledPulse, SpinWave};
use serde::Serialize;

use crate::error::{CliError, Result};

/// A run directory; every artifact written through it carries the config hash.
pub struct RunDir {
    pub dir: PathBuf,
    pub hash: String,
    pub run_id: String,
    written: Vec<String>,
}

fn output_err(file: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Output {
        file: file.to_path_buf(),
        source,
    }
}

impl RunDir {
    pub fn create(root: &Path, run_id: &str, hash: &str) -> Result<Self> {
        if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id == "." || run_id == ".." {
            return Err(CliError::config(
                "run_id",
                format!("`{run_id}` is not a valid directory name"),
            ));
        }
        let dir = root.join(run_id);
        fs::create_dir_all(&dir).map_err(output_err(&dir))?;
        Ok(Self {
            dir,
            hash: hash.to_string(),
            run_id: run_id.to_string(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    /// Files written so far, in order.
    pub fn artifacts(&self) -> &[String] {
        &self.written
    }

    pub fn preamble(&self, extra: &str) -> String {
        let mut s = format!("config_sha256={}\nrun_id={}", self.hash, self.run_id);
        if !extra.is_empty() {
            s.push('\n');
            s.push_str(extra);
        }
        s
    }

    pub fn pulse(&mut self, name: &str, pulse: &SampledPulse, extra: &str) -> Result<()> {
        let preamble = self.preamble(extra);
        let path = self.path(name);
        pulse
            .save_csv(&path, Some(&preamble))
            .map_err(|e| write_failure(&path, e))
    }

    pub fn spin_wave(&mut self, name: &str, spin: &SpinWave, extra: &str) -> Result<()> {
        let preamble = self.preamble(extra);
        let path = self.path(name);
        spin.save_csv(&path, Some(&preamble))
            .map_err(|e| write_failure(&path, e))
    }

    /// Table with a header; each row is already formatted.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut text = String::new();
        for line in self.preamble("").lines() {
            text.push_str("# ");
            text.push_str(line);
            text.push('\n');
        }
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.text(name, &text)
    }

    /// JSON object with `config_sha256` and `run_id` prepended.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::Map::new();
        body.insert("config_sha256".into(), self.hash.clone().into());
        body.insert("run_id".into(), self.run_id.clone().into());
        match serde_json::to_value(value).expect("serializable") {
            serde_json::Value::Object(map) => body.extend(map),
            other => {
                body.insert("value".into(), other);
            }
        }
        let mut text =
            serde_json::to_string_pretty(&serde_json::Value::Object(body)).expect("serializable");
        text.push('\n');
        self.text(name, &text)
    }

    pub fn svg(&mut self, name: &str, svg: &str) -> Result<()> {
        let tagged = svg.replacen(
            '\n',
            &format!(
                "\n<!-- config_sha256={} run_id={} -->\n",
                self.hash, self.run_id
            ),
            1,
        );
        self.text(name, &tagged)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        let mut f = fs::File::create(&path).map_err(output_err(&path))?;
        f.write_all(text.as_bytes()).map_err(output_err(&path))
    }
}

fn write_failure(path: &Path, e: eitmem_core::Error) -> CliError {
    match e {
        eitmem_core::Error::Io(source) => CliError::Output {
            file: path.to_path_buf(),
            source,
        },
        other => CliError::Output {
            file: path.to_path_buf(),
            source: std::io::Error::other(other.to_string()),
        },
    }
}

/// Shortest round-trip float formatting; NaN stays `NaN`.
pub fn num(x: f64) -> String {
    format!("{x}")
}
