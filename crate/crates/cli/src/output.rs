//! Provenance headers, CSV writers and the on-disk system layout.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rkma::io::{load_matrix, load_vector, save_matrix, save_vector};
use rkma::{Error, Result, SystemPair, Trace};

pub const FORMAT_VERSION: u32 = 1;

pub const A_FILE: &str = "A.mtx";
pub const V_FILE: &str = "V.mtx";
pub const B_FILE: &str = "b.csv";
pub const R_FILE: &str = "r.csv";
pub const TRUTH_FILE: &str = "xhat.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub const TRACE_HEADER: &str = "k,error_norm,residual_norm";

/// Comment lines that open every output file.
#[derive(Clone, Debug)]
pub struct Provenance {
    lines: Vec<String>,
}

impl Provenance {
    pub fn new(seed: Option<u64>) -> Self {
        let args: Vec<String> = std::env::args().skip(1).map(|a| quote(&a)).collect();
        let mut command = String::from("rkma");
        for a in &args {
            command.push(' ');
            command.push_str(a);
        }
        let seed = seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        Provenance {
            lines: vec![
                format!("rkma {}", env!("CARGO_PKG_VERSION")),
                format!("command: {command}"),
                format!("seed: {seed}"),
            ],
        }
    }

    /// Header lines followed by `extra`.
    pub fn with<I, S>(&self, extra: I) -> Vec<String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = self.lines.clone();
        out.extend(extra.into_iter().map(Into::into));
        out
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }
}

fn quote(arg: &str) -> String {
    if arg.is_empty() || arg.chars().any(char::is_whitespace) {
        format!("'{arg}'")
    } else {
        arg.to_string()
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// `# ` comments, one header line, then the rows.
pub fn write_csv<I>(path: &Path, comments: &[String], header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    let mut w = BufWriter::new(File::create(path)?);
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip form, with an exponent for very large or small values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn trace_rows(t: &Trace) -> Vec<String> {
    t.logged_k
        .iter()
        .enumerate()
        .map(|(j, k)| {
            format!(
                "{k},{},{}",
                opt(t.error_norms.get(j).copied()),
                num(t.residual_norms[j])
            )
        })
        .collect()
}

/// Root mean squares over replicates that share the same logging grid.
pub fn rms_trace_rows(traces: &[Trace]) -> Vec<String> {
    let n = traces.len() as f64;
    let first = &traces[0];
    let rms = |f: &dyn Fn(&Trace) -> Option<f64>| -> Option<f64> {
        let mut acc = 0.0;
        for t in traces {
            acc += f(t)?.powi(2);
        }
        Some((acc / n).sqrt())
    };
    first
        .logged_k
        .iter()
        .enumerate()
        .map(|(j, k)| {
            let e = rms(&|t: &Trace| t.error_norms.get(j).copied());
            let r = rms(&|t: &Trace| t.residual_norms.get(j).copied());
            format!("{k},{},{}", opt(e), opt(r))
        })
        .collect()
}

pub fn save_system(dir: &Path, sys: &SystemPair, comments: &[String]) -> Result<Vec<&'static str>> {
    ensure_dir(dir)?;
    let mut files = vec![A_FILE, V_FILE, B_FILE];
    save_matrix(dir.join(A_FILE), sys.a(), comments)?;
    save_matrix(dir.join(V_FILE), sys.v(), comments)?;
    save_vector(dir.join(B_FILE), sys.b(), comments)?;
    if let Some(r) = sys.noise() {
        save_vector(dir.join(R_FILE), r, comments)?;
        files.push(R_FILE);
    }
    if let Some(x) = sys.truth() {
        save_vector(dir.join(TRUTH_FILE), x, comments)?;
        files.push(TRUTH_FILE);
    }
    Ok(files)
}

fn optional_vector(path: PathBuf) -> Result<Option<Vec<f64>>> {
    if path.exists() {
        load_vector(path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn load_system(dir: &Path) -> Result<SystemPair> {
    let need = |name: &str| -> Result<PathBuf> {
        let p = dir.join(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::InvalidInput(format!("missing {}", p.display())))
        }
    };
    let a = load_matrix(need(A_FILE)?)?;
    let v = load_matrix(need(V_FILE)?)?;
    let b = load_vector(need(B_FILE)?)?;
    let r = optional_vector(dir.join(R_FILE))?;
    let x = optional_vector(dir.join(TRUTH_FILE))?;
    SystemPair::new(a, v, b, r, x)
}

/// `key = value` manifest with the provenance header.
pub fn write_manifest(dir: &Path, prov: &Provenance, entries: &[(&str, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
    for c in prov.lines() {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "format_version = {FORMAT_VERSION}")?;
    for (k, v) in entries {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}
