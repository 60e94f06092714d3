use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::data::{cell_stream, exact_data};
use super::examples::make_example;
use super::run::{build_model, noisy_data, reconstruct};
use crate::error::Result;
use crate::inversion::ReconstructionReport;

/// The `(α, ε)` grid of a result table.
#[derive(Clone, Debug, Serialize)]
pub struct TableSpec {
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl Default for TableSpec {
    fn default() -> Self {
        Self {
            alphas: vec![0.25, 0.5, 0.75],
            epsilons: vec![0.0, 1e-3, 5e-3, 1e-2, 5e-2],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TableCell {
    pub alpha: f64,
    pub epsilon: f64,
    pub alpha_idx: usize,
    pub eps_idx: usize,
    /// The failure message when the cell could not be computed.
    pub outcome: std::result::Result<ReconstructionReport, String>,
}

impl TableCell {
    /// `"e (k*)"`, or `"failed"`.
    pub fn summary(&self) -> String {
        match &self.outcome {
            Ok(r) => r.summary(),
            Err(_) => "failed".into(),
        }
    }

    pub fn report(&self) -> Option<&ReconstructionReport> {
        self.outcome.as_ref().ok()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TableReport {
    pub spec: TableSpec,
    pub config: serde_json::Value,
    /// Row-major over `(α, ε)`.
    pub cells: Vec<TableCell>,
}

impl TableReport {
    pub fn cell(&self, alpha_idx: usize, eps_idx: usize) -> &TableCell {
        &self.cells[alpha_idx * self.spec.epsilons.len() + eps_idx]
    }

    /// The table as printed: one row per α, one `"e (k*)"` column per ε.
    pub fn to_table_csv(&self) -> String {
        let mut s = String::from("alpha");
        for e in &self.spec.epsilons {
            s.push_str(&format!(",{e:e}"));
        }
        s.push('\n');
        for (ai, a) in self.spec.alphas.iter().enumerate() {
            s.push_str(&format!("{a:.2}"));
            for ei in 0..self.spec.epsilons.len() {
                s.push_str(&format!(",{}", self.cell(ai, ei).summary()));
            }
            s.push('\n');
        }
        s
    }

    /// Writes `table.csv` (formatted) and `cells.csv` (full precision, one
    /// row per cell) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut t = std::fs::File::create(dir.join("table.csv"))?;
        writeln!(t, "# config: {}", self.config)?;
        t.write_all(self.to_table_csv().as_bytes())?;

        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("cells.csv"))?);
        writeln!(w, "# config: {}", self.config)?;
        writeln!(
            w,
            "alpha,epsilon,error,stop_index,delta,min_error,min_error_index,status"
        )?;
        for c in &self.cells {
            match &c.outcome {
                Ok(r) => {
                    let (kmin, emin) = r.min_error().unwrap_or((0, f64::NAN));
                    writeln!(
                        w,
                        "{},{:e},{:.16e},{},{:.16e},{:.16e},{},ok",
                        c.alpha,
                        c.epsilon,
                        r.error.unwrap_or(f64::NAN),
                        r.stop_index,
                        r.delta.unwrap_or(0.0),
                        emin,
                        kmin
                    )?;
                }
                Err(msg) => writeln!(
                    w,
                    "{},{:e},,,,,,\"{}\"",
                    c.alpha,
                    c.epsilon,
                    msg.replace('"', "'")
                )?,
            }
        }
        Ok(())
    }
}

/// Runs every `(α, ε)` cell for the example of `base`. Exact data are
/// computed once per α; cells run in parallel, each with its own noise
/// substream. A failing cell is recorded and the sweep continues.
pub fn run_table(base: &ExperimentConfig, spec: &TableSpec) -> Result<TableReport> {
    base.validate()?;
    let example = make_example(base.example, base.t_final)?;
    let rows: Vec<Vec<TableCell>> = spec
        .alphas
        .par_iter()
        .enumerate()
        .map(|(ai, &alpha)| {
            let row_cfg = ExperimentConfig {
                alpha,
                ..base.clone()
            };
            let prepared = row_cfg.validate().and_then(|_| {
                let model = build_model(&row_cfg, &example)?;
                let clean = exact_data(&row_cfg, &example)?;
                Ok((model, clean))
            });
            spec.epsilons
                .par_iter()
                .enumerate()
                .map(|(ei, &epsilon)| {
                    let cfg = ExperimentConfig {
                        epsilon,
                        stream: cell_stream(ai, ei),
                        ..row_cfg.clone()
                    };
                    let outcome = match &prepared {
                        Ok((model, clean)) => {
                            let f_dagger = example.f_dagger(model);
                            let noisy = noisy_data(&cfg, model, clean);
                            reconstruct(&cfg, model, &noisy, &f_dagger).map_err(|e| e.to_string())
                        }
                        Err(e) => Err(e.to_string()),
                    };
                    TableCell {
                        alpha,
                        epsilon,
                        alpha_idx: ai,
                        eps_idx: ei,
                        outcome,
                    }
                })
                .collect()
        })
        .collect();
    Ok(TableReport {
        spec: spec.clone(),
        config: base.echo(),
        cells: rows.into_iter().flatten().collect(),
    })
}
