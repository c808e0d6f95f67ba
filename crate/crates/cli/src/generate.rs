use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use pcnflow::events::{
    compact, generate_events, write_binary, write_text, EventFile, GeneratorConfig,
};
use pcnflow::Error;

use crate::output::{out_file, write_atomic};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator settings (TOML); missing keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of events.
    #[arg(long)]
    pub count: usize,
    /// Event capacity of the compacted events.
    #[arg(long, default_value_t = 32)]
    pub n_bar: usize,
    /// Overrides the generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the JSON text format instead of binary.
    #[arg(long)]
    pub text: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &GenerateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str::<GeneratorConfig>(&text)
                .map_err(|e| Error::config(format!("{}: {}", p.display(), e.message())))?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.n_bar == 0 {
        return Err(Error::config("n_bar must be positive").into());
    }
    let frames = generate_events(&cfg, args.count)?;
    let mut file = EventFile::new(cfg.n_total, cfg.f_dim, args.n_bar);
    let mut dropped = 0usize;
    for f in &frames {
        let ev = compact(f, args.n_bar)?;
        dropped += f.hit_indices().len() - ev.n;
        file.events.push(ev);
    }
    let mut bytes = Vec::new();
    if args.text {
        write_text(&mut bytes, &file)?;
    } else {
        write_binary(&mut bytes, &file)?;
    }
    let out = out_file(&args.out);
    write_atomic(&out, &bytes)?;
    let points: usize = file.events.iter().map(|e| e.n).sum();
    println!(
        "wrote {} events ({} points, {} hits over capacity dropped) to {}",
        file.events.len(),
        points,
        dropped,
        out.display()
    );
    Ok(())
}
