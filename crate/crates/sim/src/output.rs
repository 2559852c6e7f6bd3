//! Result files: `results.csv`, `summary.csv`, gnuplot scripts and the run
//! manifest.

use std::fs;
use std::io;
use std::path::Path;

use sbh_core::baselines::SchemeId;

use crate::config::{ScenarioConfig, SweepAxis};
use crate::harness::{summarize, ResultRow, SummaryRow};

pub const RESULTS_HEADER: [&str; 11] = [
    "scheme",
    "sweep_param",
    "sweep_value",
    "dropping",
    "total_se",
    "mu_se",
    "su_se",
    "backhaul_power_w",
    "iterations",
    "termination",
    "wall_time_ms",
];

pub const SUMMARY_HEADER: [&str; 15] = [
    "scheme",
    "sweep_param",
    "sweep_value",
    "rows",
    "succeeded",
    "common",
    "mean_total_se",
    "ci95_total_se",
    "mean_mu_se",
    "ci95_mu_se",
    "mean_su_se",
    "ci95_su_se",
    "mean_backhaul_power_w",
    "ci95_backhaul_power_w",
    "mean_iterations",
];

fn bad_data(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

pub fn write_results<W: io::Write>(out: W, rows: &[ResultRow]) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.scheme.name().to_string(),
            r.sweep_param.clone(),
            r.sweep_value.to_string(),
            r.dropping.to_string(),
            r.total_se.to_string(),
            r.mu_se.to_string(),
            r.su_se.to_string(),
            r.backhaul_power_w.to_string(),
            r.iterations.to_string(),
            r.termination.clone(),
            r.wall_time_ms.to_string(),
        ])?;
    }
    w.flush()
}

pub fn read_results<R: io::Read>(input: R) -> io::Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    if rd.headers()?.iter().ne(RESULTS_HEADER) {
        return Err(bad_data("unexpected results header".into()));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| bad_data(format!("missing column {}", RESULTS_HEADER[i])));
        let num = |i: usize| -> io::Result<f64> { field(i)?.parse().map_err(|e| bad_data(format!("{}: {e}", RESULTS_HEADER[i]))) };
        let int = |i: usize| -> io::Result<usize> { field(i)?.parse().map_err(|e| bad_data(format!("{}: {e}", RESULTS_HEADER[i]))) };
        rows.push(ResultRow {
            scheme: SchemeId::from_name(field(0)?).ok_or_else(|| bad_data(format!("unknown scheme {}", &rec[0])))?,
            sweep_param: field(1)?.to_string(),
            sweep_value: num(2)?,
            dropping: int(3)?,
            total_se: num(4)?,
            mu_se: num(5)?,
            su_se: num(6)?,
            backhaul_power_w: num(7)?,
            iterations: int(8)?,
            termination: field(9)?.to_string(),
            wall_time_ms: num(10)?,
        });
    }
    Ok(rows)
}

pub fn write_summary<W: io::Write>(out: W, summary: &[SummaryRow]) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in summary {
        w.write_record([
            s.scheme.name().to_string(),
            s.sweep_param.clone(),
            s.sweep_value.to_string(),
            s.rows.to_string(),
            s.succeeded.to_string(),
            s.common.to_string(),
            s.total_se.0.to_string(),
            s.total_se.1.to_string(),
            s.mu_se.0.to_string(),
            s.mu_se.1.to_string(),
            s.su_se.0.to_string(),
            s.su_se.1.to_string(),
            s.backhaul_power_w.0.to_string(),
            s.backhaul_power_w.1.to_string(),
            s.mean_iterations.to_string(),
        ])?;
    }
    w.flush()
}

/// Figure families: file stem, y label, mean column, CI column (1-based in
/// `summary.csv`).
const FIGURES: [(&str, &str, usize, usize); 4] = [
    ("total_se", "total spectral efficiency (bit/s/Hz)", 7, 8),
    ("mu_se", "MU spectral efficiency (bit/s/Hz)", 9, 10),
    ("su_se", "SU spectral efficiency (bit/s/Hz)", 11, 12),
    ("backhaul_power", "backhaul power (W)", 13, 14),
];

/// One gnuplot script per figure family, plotting every scheme of
/// `summary.csv` with its 95% interval.
pub fn plot_scripts(cfg: &ScenarioConfig) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (stem, ylabel, mean, ci) in FIGURES {
        let mut s = String::new();
        s.push_str("set datafile separator \",\"\n");
        s.push_str("set terminal pngcairo size 800,600\n");
        s.push_str(&format!("set output \"{stem}.png\"\n"));
        s.push_str(&format!("set ylabel \"{ylabel}\"\n"));
        s.push_str("set key outside right\nset grid\n");
        if cfg.sweep == SweepAxis::None {
            s.push_str("set style fill solid 0.5\nset boxwidth 0.6\nset xtics rotate by -30\n");
            s.push_str(&format!(
                "plot \"summary.csv\" skip 1 using 0:{mean}:xtic(1) with boxes notitle, \\\n     \"\" skip 1 using 0:{mean}:{ci} with yerrorbars notitle\n"
            ));
        } else {
            s.push_str(&format!("set xlabel \"{}\"\n", cfg.sweep.name()));
            if cfg.sweep == SweepAxis::GammaSi {
                s.push_str("set logscale x\nset format x \"10^{%L}\"\n");
            }
            let lines: Vec<String> = cfg
                .schemes
                .iter()
                .map(|sch| {
                    let n = sch.name();
                    format!("\"summary.csv\" skip 1 using 3:(strcol(1) eq \"{n}\" ? ${mean} : 1/0):{ci} with yerrorlines title \"{n}\"")
                })
                .collect();
            s.push_str(&format!("plot {}\n", lines.join(", \\\n     ")));
        }
        out.push((format!("{stem}.gp"), s));
    }
    out
}

pub fn manifest(cfg: &ScenarioConfig, rows: &[ResultRow]) -> String {
    let failed = rows.iter().filter(|r| !r.succeeded()).count();
    let mut s = String::new();
    s.push_str(&format!("# sbh-sim {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("# rows: {}, failed: {failed}\n", rows.len()));
    s.push_str("# 95% intervals in summary.csv use the normal approximation over droppings\n");
    s.push_str(&cfg.to_key_values());
    s
}

/// Writes every artifact into `cfg.output_dir`.
pub fn emit_outputs(rows: &[ResultRow], cfg: &ScenarioConfig) -> io::Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    write_results(io::BufWriter::new(fs::File::create(dir.join("results.csv"))?), rows)?;
    write_summary(io::BufWriter::new(fs::File::create(dir.join("summary.csv"))?), &summarize(rows))?;
    for (name, body) in plot_scripts(cfg) {
        fs::write(dir.join(name), body)?;
    }
    fs::write(dir.join("run_manifest.txt"), manifest(cfg, rows))
}

pub fn read_results_file(path: &Path) -> io::Result<Vec<ResultRow>> {
    read_results(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sbh_core::baselines::SchemeId;

    fn row(d: usize, total: f64) -> ResultRow {
        ResultRow {
            scheme: SchemeId::HdMassiveMimo,
            sweep_param: "gamma_si".into(),
            sweep_value: 1e-7,
            dropping: d,
            total_se: total,
            mu_se: total / 3.0,
            su_se: total - total / 3.0,
            backhaul_power_w: 0.1 + 0.2,
            iterations: 7,
            termination: "converged".into(),
            wall_time_ms: 0.0,
        }
    }

    #[test]
    fn empty_results_are_header_only() {
        let mut buf = Vec::new();
        write_results(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", RESULTS_HEADER.join(",")));
    }

    #[test]
    fn results_round_trip_exactly() {
        let mut rows = vec![row(0, 1.0 / 7.0), row(1, 123.456789012345)];
        rows.push(ResultRow { total_se: f64::NAN, termination: "infeasible".into(), ..row(2, 0.0) });
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).unwrap();
        let back = read_results(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[..2], rows[..2]);
        assert!(back[2].total_se.is_nan());
        assert!(!buf.contains(&b'\r'));
    }

    #[test]
    fn manifest_echoes_the_seed() {
        let cfg = ScenarioConfig { seed: 4242, ..ScenarioConfig::default() };
        let text = manifest(&cfg, &[]);
        assert!(text.lines().any(|l| l == "seed = 4242"));
        let mut back = ScenarioConfig::default();
        back.apply_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn one_script_per_family() {
        let cfg = ScenarioConfig { sweep: SweepAxis::GammaSi, ..ScenarioConfig::default() };
        let scripts = plot_scripts(&cfg);
        assert_eq!(scripts.len(), FIGURES.len());
        assert!(scripts[0].1.contains("logscale x"));
        assert!(scripts[0].1.contains("proposed_fd_mmimo"));
    }
}
