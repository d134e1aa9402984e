//! Time-series CSV files.
//!
//! Header lines start with `#`. The first non-comment line names the columns:
//! `t`, then `re_rho_i_j` and `im_rho_i_j` for i ≤ j in row-major order, then
//! `obs_<name>` and `stderr_<name>` for every observable. Numbers carry 17
//! significant digits so files round-trip exactly.

use std::path::Path;

use num_complex::Complex64;
use roqj_core::analysis::Observable;
use roqj_core::{CMatrix, DensityMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Comment lines including the leading `#`.
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvError(pub String);

impl std::fmt::Display for CsvError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CsvError {}

pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn state_columns(n: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(n * (n + 1));
    for i in 0..n {
        for j in i..n {
            cols.push(format!("re_rho_{i}_{j}"));
            cols.push(format!("im_rho_{i}_{j}"));
        }
    }
    cols
}

pub fn state_values(rho: &DensityMatrix) -> Vec<f64> {
    let n = rho.dim();
    let mut out = Vec::with_capacity(n * (n + 1));
    for i in 0..n {
        for j in i..n {
            let z = rho.get(i, j);
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

pub fn observable_columns(observables: &[Observable]) -> Vec<String> {
    observables
        .iter()
        .map(|o| format!("obs_{o}"))
        .chain(observables.iter().map(|o| format!("stderr_{o}")))
        .collect()
}

impl Table {
    /// Builds the standard layout from per-time states, means and errors.
    pub fn time_series(
        comments: Vec<String>,
        times: &[f64],
        states: &[DensityMatrix],
        observables: &[Observable],
        means: &[Vec<f64>],
        stderr: &[Vec<f64>],
    ) -> Self {
        let n = states.first().map_or(0, |s| s.dim());
        let mut columns = vec!["t".to_string()];
        columns.extend(state_columns(n));
        columns.extend(observable_columns(observables));
        let rows = times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let mut row = vec![t];
                row.extend(state_values(&states[k]));
                row.extend(&means[k]);
                row.extend(&stderr[k]);
                row
            })
            .collect();
        Table { comments, columns, rows }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str(c);
            out.push('\n');
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        let rows = std::iter::once(self.columns.clone())
            .chain(self.rows.iter().map(|row| row.iter().map(|&x| format_number(x)).collect()));
        for record in rows {
            writer.write_record(&record).expect("writing to memory");
        }
        let bytes = writer.into_inner().expect("writing to memory");
        out.push_str(std::str::from_utf8(&bytes).expect("ascii output"));
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_text())
    }

    pub fn parse(text: &str) -> Result<Self, CsvError> {
        let comments = text.lines().filter(|l| l.starts_with('#')).map(str::to_string).collect();
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| CsvError(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if columns.first().map(String::as_str) != Some("t") {
            return Err(CsvError(if columns.is_empty() { "no column header".into() } else { "first column must be t".into() }));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| CsvError(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let row = record
                .iter()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CsvError(format!("line {line}: {e}")))?;
            rows.push(row);
        }
        Ok(Table { comments, columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self, CsvError> {
        let text = std::fs::read_to_string(path).map_err(|e| CsvError(format!("{}: {e}", path.display())))?;
        Table::parse(&text).map_err(|e| CsvError(format!("{}: {e}", path.display())))
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    /// Matrix dimension from the diagonal columns present.
    pub fn dim(&self) -> usize {
        (0..).take_while(|i| self.column(&format!("re_rho_{i}_{i}")).is_some()).count()
    }

    /// ρ at row `k`, completed from the upper triangle.
    pub fn density(&self, k: usize) -> Result<DensityMatrix, CsvError> {
        let n = self.dim();
        let row = &self.rows[k];
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let get = |prefix: &str| {
                    self.column(&format!("{prefix}_rho_{i}_{j}"))
                        .map(|c| row[c])
                        .ok_or_else(|| CsvError(format!("missing column {prefix}_rho_{i}_{j}")))
                };
                let z = Complex64::new(get("re")?, get("im")?);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        Ok(DensityMatrix::from_hermitian_unchecked(m))
    }

    /// Observable names, in column order.
    pub fn observables(&self) -> Vec<String> {
        self.columns.iter().filter_map(|c| c.strip_prefix("obs_").map(str::to_string)).collect()
    }

    /// Comment value of a `# key: value` header line.
    pub fn header_value(&self, key: &str) -> Option<&str> {
        let prefix = format!("# {key}: ");
        self.comments.iter().find_map(|c| c.strip_prefix(prefix.as_str()))
    }
}
