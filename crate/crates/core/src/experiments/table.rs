use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::Preset;
use crate::entanglement::Bipartition;
use crate::error::{Error, Result};

/// Column order of every result file.
pub const CSV_HEADER: &str = "preset,param_tag,N,M,beta,gamma2,phi,mean_FI,std_err,runs,analytic_eq9,analytic_eq14,hl_fisher,mean_LN,LN_split";

/// One line of a result table. Columns that do not apply are `None` and are
/// written empty.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub preset: Preset,
    pub param_tag: String,
    pub n: u64,
    pub m: usize,
    pub beta: f64,
    pub gamma2: f64,
    pub phi: f64,
    pub mean_fi: Option<f64>,
    /// Standard error of `mean_fi`, or of `mean_ln` on entanglement rows.
    pub std_err: Option<f64>,
    pub runs: usize,
    pub analytic_eq9: Option<f64>,
    pub analytic_eq14: Option<f64>,
    pub hl_fisher: Option<f64>,
    pub mean_ln: Option<f64>,
    pub ln_split: Option<Bipartition>,
}

/// Rows plus the comment lines echoed above them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    /// Header comments, written with a leading `# `.
    pub comments: Vec<String>,
    pub rows: Vec<ResultRow>,
    /// Trajectories dropped after a probability underflow.
    pub aborted: usize,
}

fn num(out: &mut String, v: Option<f64>) {
    if let Some(v) = v.filter(|v| v.is_finite()) {
        let _ = write!(out, "{v:e}");
    }
}

impl ResultTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends the rows of `other` and adds up the aborted counts.
    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
        self.aborted += other.aborted;
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{},", r.preset, r.param_tag, r.n, r.m);
            num(&mut out, Some(r.beta));
            out.push(',');
            num(&mut out, Some(r.gamma2));
            out.push(',');
            num(&mut out, Some(r.phi));
            out.push(',');
            num(&mut out, r.mean_fi);
            out.push(',');
            num(&mut out, r.std_err);
            let _ = write!(out, ",{},", r.runs);
            num(&mut out, r.analytic_eq9);
            out.push(',');
            num(&mut out, r.analytic_eq14);
            out.push(',');
            num(&mut out, r.hl_fisher);
            out.push(',');
            num(&mut out, r.mean_ln);
            out.push(',');
            if let Some(s) = r.ln_split {
                let _ = write!(out, "{s}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "# aborted_runs={}", self.aborted);
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        w.flush()
    }

    /// Writes the CSV to `path`, replacing any existing file.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io)?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(io)
    }
}
