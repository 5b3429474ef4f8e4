//! Report, numeric dumps and manifest of one run. Everything is buffered and
//! written once at the end of the run.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

/// Shortest decimal that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug, Default)]
pub struct Output {
    report: Vec<String>,
    /// `(file name, contents)` under `matrices/`.
    dumps: Vec<(String, String)>,
    manifest: Vec<String>,
    echo: bool,
}

impl Output {
    pub fn new(echo: bool) -> Self {
        Self {
            echo,
            ..Self::default()
        }
    }

    pub fn line(&mut self, s: impl Into<String>) {
        let s = s.into();
        if self.echo {
            println!("{s}");
        }
        self.report.push(s);
    }

    /// `condition <name>: PASS|FAIL (<detail>)`.
    pub fn condition(&mut self, name: &str, pass: bool, detail: impl AsRef<str>) -> bool {
        let verdict = if pass { "PASS" } else { "FAIL" };
        self.line(format!("condition {name}: {verdict} ({})", detail.as_ref()));
        pass
    }

    pub fn manifest(&mut self, key: &str, value: impl std::fmt::Display) {
        self.manifest.push(format!("{key} = {value}"));
    }

    /// Header line `# <title>`, a column line `# <c1>\t<c2>..` when `columns`
    /// is non-empty, then one tab-separated row per line.
    pub fn table(&mut self, name: &str, title: &str, columns: &[&str], rows: &[Vec<f64>]) {
        let mut s = format!("# {title}\n");
        if !columns.is_empty() {
            let _ = writeln!(s, "# {}", columns.join("\t"));
        }
        for r in rows {
            let cells: Vec<String> = r.iter().map(|&v| num(v)).collect();
            let _ = writeln!(s, "{}", cells.join("\t"));
        }
        self.dumps.push((format!("{name}.tsv"), s));
    }

    /// A matrix as rows; the title records its shape.
    pub fn matrix(&mut self, name: &str, title: &str, m: &DMatrix<f64>) {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        self.table(name, &format!("{title}; {} x {}", m.nrows(), m.ncols()), &[], &rows);
    }

    /// Writes `report.txt`, `matrices/*.tsv` and `manifest.txt` under `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let report = dir.join("report.txt");
        fs::write(&report, self.report.join("\n") + "\n")?;
        written.push(report);
        let mdir = dir.join("matrices");
        if mdir.exists() {
            // Stale dumps from an earlier run would look like part of this one.
            for entry in fs::read_dir(&mdir)? {
                let p = entry?.path();
                if p.extension().is_some_and(|e| e == "tsv") {
                    fs::remove_file(p)?;
                }
            }
        }
        if !self.dumps.is_empty() {
            fs::create_dir_all(&mdir)?;
        }
        for (name, contents) in &self.dumps {
            let p = mdir.join(name);
            fs::write(&p, contents)?;
            written.push(p);
        }
        let mut manifest = self.manifest.join("\n");
        for (name, contents) in &self.dumps {
            let _ = write!(manifest, "\nfile matrices/{name} = {} bytes", contents.len());
        }
        let p = dir.join("manifest.txt");
        fs::write(&p, manifest + "\n")?;
        written.push(p);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, -0.0, f64::MIN_POSITIVE] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn matrices_dump_row_major() {
        let mut out = Output::new(false);
        out.matrix("m", "test", &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 0.5]));
        assert_eq!(out.dumps[0].1, "# test; 2 x 2\n1e0\t2e0\n3e0\t5e-1\n");
    }
}
