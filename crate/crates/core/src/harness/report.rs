use std::io::Write;
use std::path::Path;

use super::experiment::ExperimentReport;
use super::metrics::Metrics;
use crate::Result;

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_default()
}

fn metric_cells(m: &Metrics) -> String {
    format!(
        "{},{},{:.4},{},{},{}",
        m.n_ground_truth,
        m.n_matched,
        m.mp,
        opt(m.mae_mm, 4),
        opt(m.mape, 4),
        opt(m.r2, 4)
    )
}

pub fn write_trials_csv<W: Write>(report: &ExperimentReport, mut w: W) -> Result<()> {
    writeln!(
        w,
        "variant,seed,status,stop,views,candidates,tracks,ground_truth,matched,mp,mae_mm,mape,r2"
    )?;
    for t in &report.trials {
        let status = if t.error.is_some() { "failed" } else { "ok" };
        let stop = t
            .stop
            .map(|s| serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            t.variant,
            t.seed,
            status,
            stop,
            t.n_views,
            t.n_candidates,
            t.n_tracks,
            metric_cells(&t.metrics())
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(report: &ExperimentReport, mut w: W) -> Result<()> {
    writeln!(w, "variant,trials,failed,mean_views,ground_truth,matched,mp,mae_mm,mape,r2")?;
    for s in &report.summaries {
        writeln!(
            w,
            "{},{},{},{:.4},{}",
            s.variant,
            s.n_trials,
            s.n_failed,
            s.mean_views,
            metric_cells(&s.metrics)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fruitlets_csv<W: Write>(report: &ExperimentReport, mut w: W) -> Result<()> {
    writeln!(w, "variant,seed,fruitlet_id,track_id,gt_size_mm,measured_size_mm,distance_mm")?;
    for t in &report.trials {
        for m in &t.matches {
            writeln!(
                w,
                "{},{},{},{},{:.4},{:.4},{:.4}",
                t.variant,
                t.seed,
                m.fruitlet_id,
                m.track_id,
                m.gt_size * 1e3,
                m.measured_size * 1e3,
                m.distance * 1e3
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Metrics as rows and variants as columns.
pub fn summary_markdown(report: &ExperimentReport) -> String {
    let mut s = String::from("| Metric |");
    for v in &report.summaries {
        s += &format!(" {} |", v.variant);
    }
    s += "\n|---|";
    s += &"---|".repeat(report.summaries.len());
    s += "\n";
    let rows: [(&str, fn(&Metrics) -> String); 4] = [
        ("MP (%)", |m| format!("{:.1}", m.mp)),
        ("MAE (mm)", |m| opt(m.mae_mm, 3)),
        ("MAPE (%)", |m| opt(m.mape, 2)),
        ("R²", |m| opt(m.r2, 3)),
    ];
    for (name, f) in rows {
        s += &format!("| {name} |");
        for v in &report.summaries {
            s += &format!(" {} |", f(&v.metrics));
        }
        s += "\n";
    }
    s
}

/// Writes `trials.csv`, `summary.csv`, `fruitlets.csv`, `summary.md` and
/// `report.json` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let file = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
    write_trials_csv(report, file("trials.csv")?)?;
    write_summary_csv(report, file("summary.csv")?)?;
    write_fruitlets_csv(report, file("fruitlets.csv")?)?;
    std::fs::write(dir.join("summary.md"), summary_markdown(report))?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

pub fn read_report(dir: &Path) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(dir.join("report.json"))?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only() {
        let r = ExperimentReport::default();
        let mut buf = Vec::new();
        write_summary_csv(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
        let mut buf = Vec::new();
        write_trials_csv(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }
}
