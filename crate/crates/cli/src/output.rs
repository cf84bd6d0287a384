//! Output helpers: CSV trajectory files with embedded metadata, JSON reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use pvi_core::stepper::Trajectory;

/// Format a float with 17 significant digits, enough to round-trip f64.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write the commented metadata block: tool version plus the fully resolved
/// configuration, so a run can be reproduced from its artifact alone.
fn write_metadata<W: Write>(w: &mut W, echo: &serde_json::Value) -> std::io::Result<()> {
    writeln!(w, "# pvi {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# config: {echo}")?;
    Ok(())
}

/// Write a trajectory CSV: metadata block, header, one row per point.
/// The two initialization points carry zero Newton iterations and residual.
pub fn write_trajectory_csv(
    path: &Path,
    echo: &serde_json::Value,
    traj: &Trajectory,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_metadata(&mut w, echo)?;
    let dim = traj.points.first().map_or(0, |p| p.z.len());
    let z_cols: Vec<String> = (0..dim).map(|i| format!("z{i}")).collect();
    writeln!(w, "step,t,{},newton_iters,residual", z_cols.join(","))?;
    for (k, p) in traj.points.iter().enumerate() {
        let zs: Vec<String> = p.z.iter().map(|&v| fmt(v)).collect();
        // points[0] and points[1] are initial data; stats[k-2] covers the rest.
        let (iters, res) = if k < 2 {
            (0, 0.0)
        } else {
            let st = &traj.stats[k - 2];
            (st.newton_iterations, st.final_residual_norm)
        };
        writeln!(
            w,
            "{k},{},{},{iters},{}",
            fmt(p.t),
            zs.join(","),
            fmt(res)
        )?;
    }
    w.flush()
}

/// Write a pretty-printed JSON report.
pub fn write_json(path: &Path, value: &serde_json::Value) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}
