//! CSV tables, atomic file writes and run metadata.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use moreau_w2::io::fmt_f64;
use serde_json::{Map, Value};

/// Rows under a fixed header, rendered byte-for-byte deterministically.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn num(x: f64) -> String {
    fmt_f64(x)
}

pub fn flag(b: bool) -> String {
    b.to_string()
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp_name = OsString::from(".");
    tmp_name.push(path.file_name().unwrap_or_default());
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// `<out>` with `.csv` replaced by `suffix`, e.g. `run.csv` → `run.plan.csv`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = match out.extension() {
        Some(ext) if ext == "csv" => out.with_extension(""),
        _ => out.to_path_buf(),
    };
    let mut name = stem.into_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

/// Collects the artifacts of one run and writes them with its metadata.
pub struct Run {
    subcommand: &'static str,
    out: PathBuf,
    started: Instant,
    meta: Map<String, Value>,
    files: Vec<String>,
}

impl Run {
    pub fn new(subcommand: &'static str, out: Option<&Path>) -> Self {
        let out = out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(format!("{subcommand}.csv")));
        Self {
            subcommand,
            out,
            started: Instant::now(),
            meta: Map::new(),
            files: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.meta.insert(key.to_string(), value);
    }

    pub fn write(&mut self, path: &Path, contents: &[u8]) -> std::io::Result<()> {
        write_atomic(path, contents)?;
        self.files.push(path.display().to_string());
        Ok(())
    }

    pub fn write_main(&mut self, table: &Table) -> std::io::Result<()> {
        let out = self.out.clone();
        self.write(&out, table.to_csv().as_bytes())
    }

    pub fn write_side(&mut self, suffix: &str, table: &Table) -> std::io::Result<()> {
        let path = sibling(&self.out, suffix);
        self.write(&path, table.to_csv().as_bytes())
    }

    pub fn write_svg(&mut self, svg: &str) -> std::io::Result<()> {
        let path = sibling(&self.out, ".svg");
        self.write(&path, svg.as_bytes())
    }

    /// Writes `<out>.meta.json`; called last so it lists every artifact.
    pub fn finish(mut self) -> std::io::Result<()> {
        self.meta.insert("subcommand".into(), Value::from(self.subcommand));
        self.meta.insert(
            "version".into(),
            serde_json::json!({
                "moreau-w2-cli": env!("CARGO_PKG_VERSION"),
            }),
        );
        self.meta.insert(
            "threads".into(),
            Value::from(rayon::current_num_threads()),
        );
        self.meta.insert(
            "wall_time_seconds".into(),
            Value::from(self.started.elapsed().as_secs_f64()),
        );
        self.meta.insert("outputs".into(), Value::from(self.files.clone()));
        let mut name = self.out.clone().into_os_string();
        name.push(".meta.json");
        let text = serde_json::to_string_pretty(&Value::Object(self.meta))
            .expect("metadata is plain JSON");
        write_atomic(Path::new(&name), text.as_bytes())
    }
}
