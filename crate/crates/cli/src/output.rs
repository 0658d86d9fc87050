//! CSV assembly: floats at full precision, header comments carrying the
//! resolved configuration, deterministic byte-for-byte output.

use std::io::Write;
use std::path::{Path, PathBuf};

use btl_core::analytic::Orientation;

use crate::config::Resolved;

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_alpha(a: Orientation) -> String {
    match a {
        Orientation::Finite(v) => fmt_f(v),
        Orientation::Aligned => "inf".to_string(),
    }
}

#[derive(Debug, Default)]
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, line: &str) {
        self.buf.push_str("# ");
        self.buf.push_str(line);
        self.buf.push('\n');
    }

    pub fn row<S: AsRef<str>>(&mut self, cols: &[S]) {
        let mut first = true;
        for c in cols {
            if !first {
                self.buf.push(',');
            }
            self.buf.push_str(c.as_ref());
            first = false;
        }
        self.buf.push('\n');
    }

    pub fn write_to(&self, path: &Path) -> Result<(), String> {
        let mut f = std::fs::File::create(path)
            .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
        f.write_all(self.buf.as_bytes())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
    }
}

/// Standard header block: tool version, mode, and the full resolved
/// configuration as one JSON line. Deliberately free of timestamps and
/// absolute paths so identical runs produce identical bytes.
pub fn header(csv: &mut Csv, resolved: &Resolved) {
    csv.comment(&format!("btl {} mode={}", env!("CARGO_PKG_VERSION"), resolved.mode));
    let echo = serde_json::to_string(&resolved.spec).unwrap_or_else(|e| format!("<{e}>"));
    csv.comment(&format!("config: {echo}"));
}

/// Output path for grain index `gi` when the sweep holds several grains:
/// the stem gains a `_g<gi>` suffix so each grain gets its own table.
pub fn out_path_for_grain(base: &Path, gi: usize, n_grains: usize) -> PathBuf {
    if n_grains <= 1 {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let ext = base
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    base.with_file_name(format!("{stem}_g{gi}.{ext}"))
}
