use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::field::{SourceGrid, TraceField};
use crate::fractional::TimeGrid;
use crate::inversion::ReconstructionReport;

/// Paths written by [`export_plot_data`].
#[derive(Clone, Debug)]
pub struct PlotFiles {
    pub reconstruction: PathBuf,
    pub error: PathBuf,
    pub history: PathBuf,
}

fn write_grid(
    path: &Path,
    config: Option<&serde_json::Value>,
    x1: &[f64],
    grid: &TimeGrid,
    field: &TraceField,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(c) = config {
        writeln!(w, "# config: {c}")?;
    }
    writeln!(w, "x1,t,value")?;
    for n in 1..=field.nt() {
        let t = grid.t(n);
        for (x, v) in x1.iter().zip(field.level(n)) {
            writeln!(w, "{x:.16e},{t:.16e},{v:.16e}")?;
        }
    }
    Ok(())
}

/// Writes `<prefix>_fhat.csv`, `<prefix>_error.csv` (pointwise `f̂ - f†`)
/// and `<prefix>_history.csv` into `dir`. Grids are in long format
/// `x1,t,value`, one row per trace node and level.
pub fn export_plot_data(
    report: &ReconstructionReport,
    f_dagger: &SourceGrid,
    x1: &[f64],
    grid: &TimeGrid,
    dir: &Path,
    prefix: &str,
) -> Result<PlotFiles> {
    report.f_hat.same_shape(f_dagger)?;
    crate::error::check_len("trace coordinates", report.f_hat.nx(), x1.len())?;
    crate::error::check_len("time levels", report.f_hat.nt(), grid.n)?;
    std::fs::create_dir_all(dir)?;
    let files = PlotFiles {
        reconstruction: dir.join(format!("{prefix}_fhat.csv")),
        error: dir.join(format!("{prefix}_error.csv")),
        history: dir.join(format!("{prefix}_history.csv")),
    };
    let config = report.config.as_ref();
    write_grid(&files.reconstruction, config, x1, grid, &report.f_hat)?;
    write_grid(&files.error, config, x1, grid, &report.f_hat.sub(f_dagger))?;
    report.write_history_csv(&files.history)?;
    Ok(files)
}
