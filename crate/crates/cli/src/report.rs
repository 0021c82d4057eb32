//! Run reports with a fixed CSV schema and an identical JSON mirror.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// One solver run. Phase times satisfy
/// `t_dense + t_lowrank + t_rhs ≤ t_total` (spectra time is accounted
/// separately because the estimates are computed once per coefficient).
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub gen: String,
    pub dim: usize,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub nmin: usize,
    pub eps: f64,
    pub backend: String,
    pub seed: u64,
    pub kappa: f64,
    pub hss_rank: usize,
    pub depth: usize,
    pub shifts_max: usize,
    pub update_rank_max: usize,
    pub residual: f64,
    pub rel_error: f64,
    pub t_total_s: f64,
    pub t_dense_s: f64,
    pub t_lowrank_s: f64,
    pub t_rhs_s: f64,
    pub t_spectra_s: f64,
}

pub const CSV_HEADER: &str = "command,gen,dim,n1,n2,n3,nmin,eps,backend,seed,kappa,hss_rank,depth,shifts_max,update_rank_max,residual,rel_error,t_total_s,t_dense_s,t_lowrank_s,t_rhs_s,t_spectra_s";

impl RunReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:e},{},{},{:e},{},{},{},{},{:e},{:e},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.command,
            self.gen,
            self.dim,
            self.n1,
            self.n2,
            self.n3,
            self.nmin,
            self.eps,
            self.backend,
            self.seed,
            self.kappa,
            self.hss_rank,
            self.depth,
            self.shifts_max,
            self.update_rank_max,
            self.residual,
            self.rel_error,
            self.t_total_s,
            self.t_dense_s,
            self.t_lowrank_s,
            self.t_rhs_s,
            self.t_spectra_s,
        )
    }
}

pub enum Format {
    Csv,
    Json,
}

pub fn write_reports(path: Option<&Path>, format: &Format, reports: &[RunReport]) -> std::io::Result<()> {
    let mut out: Box<dyn Write> = match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout()),
    };
    match format {
        Format::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in reports {
                writeln!(out, "{}", r.csv_row())?;
            }
        }
        Format::Json => {
            let json = serde_json::to_string_pretty(reports).expect("serialize reports");
            writeln!(out, "{json}")?;
        }
    }
    out.flush()
}
