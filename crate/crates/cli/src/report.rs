use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use pcnflow::golden::NetworkConfig;
use pcnflow::reference::{published_for, F_MEM_HZ};
use pcnflow::Error;

use crate::bench::{bench_point, published_points, BenchRow};
use crate::output::{out_dir, out_file, write_atomic};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Bench CSV to report on; default is the five published configurations.
    #[arg(long)]
    pub bench: Option<PathBuf>,
    /// Constant host transfer overhead added to modelled latency.
    #[arg(long, default_value_t = 0.0)]
    pub axi_overhead_us: f64,
    /// Output file; default `report.md` in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_rows(path: &std::path::Path) -> pcnflow::Result<Vec<BenchRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::data(format!("{}: {:?}", path.display(), other)),
    })?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::data(format!("{}: {}", path.display(), e))))
        .collect()
}

fn opt(v: Option<f64>, scale: f64, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.*}", digits, x * scale))
}

pub fn render(rows: &[BenchRow], axi_overhead_us: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Performance report\n");
    let _ = writeln!(
        s,
        "Modelled from the dataflow graph: throughput is `f_kernel / ii`, latency is the longest \
         path plus `ii - 1` cycles. Requirements: at least 8 MEPS and at most 10 us."
    );
    if axi_overhead_us > 0.0 {
        let _ = writeln!(
            s,
            "\nEnd-to-end latency adds a constant {axi_overhead_us} us host transfer overhead \
             (memory clock {} MHz).",
            F_MEM_HZ / 1e6
        );
    }
    let _ = writeln!(s, "\n## Configurations\n");
    let _ = writeln!(
        s,
        "| version | precision | n_bar | par | f_kernel (MHz) | ii | latency (cycles) | latency (us) | e2e latency (us) | throughput (MEPS) | 8 MEPS | 10 us | note |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|---|---|");
    for r in rows {
        let e2e = r.latency_us + axi_overhead_us;
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.1} | {} | {} | {:.3} | {:.3} | {:.3} | {} | {} | {} |",
            if r.version.is_empty() {
                "-"
            } else {
                &r.version
            },
            r.precision,
            r.n_bar,
            r.par,
            r.f_kernel_hz / 1e6,
            r.ii_cycles,
            r.latency_cycles,
            r.latency_us,
            e2e,
            r.throughput_eps / 1e6,
            if r.meets_8meps { "yes" } else { "no" },
            if e2e <= 10.0 { "yes" } else { "no" },
            r.note
        );
    }

    let published: Vec<&BenchRow> = rows
        .iter()
        .filter(|r| r.published_e2e_throughput_eps.is_some())
        .collect();
    if !published.is_empty() {
        let _ = writeln!(s, "\n## Published measurements (context only)\n");
        let _ = writeln!(
            s,
            "Measured values reported for the hardware implementation and a GPU baseline. They \
             include host transfers and are not targets for the model above.\n"
        );
        let _ = writeln!(
            s,
            "| version | compute latency (us) | FPGA e2e (MEPS) | FPGA e2e latency (us) | GPU e2e (MEPS) | GPU e2e latency (us) | e2e speedup |"
        );
        let _ = writeln!(s, "|---|---|---|---|---|---|---|");
        let mut footnotes = Vec::new();
        for r in published {
            if let Some((c, f)) =
                published_for(r.precision, r.n_bar, r.par).and_then(|q| q.compute_latency)
            {
                if f != r.f_kernel_hz {
                    footnotes.push(format!(
                        "{}: compute latency was published as {c} cycles at {:.0} MHz, while the \
                         configuration is listed at {:.0} MHz.",
                        r.version,
                        f / 1e6,
                        r.f_kernel_hz / 1e6
                    ));
                }
            }
            let speedup = match (r.published_e2e_throughput_eps, r.gpu_e2e_throughput_eps) {
                (Some(f), Some(g)) => format!("{:.2}", f / g),
                _ => "-".to_string(),
            };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} |",
                r.version,
                opt(r.published_compute_latency_us, 1.0, 3),
                opt(r.published_e2e_throughput_eps, 1e-6, 3),
                opt(r.published_e2e_latency_us, 1.0, 3),
                opt(r.gpu_e2e_throughput_eps, 1e-6, 3),
                opt(r.gpu_e2e_latency_us, 1.0, 2),
                speedup
            );
        }
        if !footnotes.is_empty() {
            let _ = writeln!(s);
            for f in footnotes {
                let _ = writeln!(s, "- {f}");
            }
        }
    }
    s
}

pub fn run(args: &ReportArgs) -> Result<()> {
    let rows = match &args.bench {
        Some(p) => read_rows(p)?,
        None => {
            let net = NetworkConfig::reference();
            published_points()
                .iter()
                .map(|p| bench_point(&net, p, 0, 1))
                .collect::<pcnflow::Result<_>>()?
        }
    };
    if args.axi_overhead_us.is_nan() || args.axi_overhead_us < 0.0 {
        return Err(Error::config("axi overhead must be non-negative").into());
    }
    let text = render(&rows, args.axi_overhead_us);
    let path = match &args.out {
        Some(p) => out_file(p),
        None => out_dir(None).join("report.md"),
    };
    write_atomic(&path, text.as_bytes())?;
    println!(
        "report for {} configurations written to {}",
        rows.len(),
        path.display()
    );
    Ok(())
}
