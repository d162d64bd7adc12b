//! Writes a generated three-market corpus as JSON Lines, for trying the
//! `fairgate` workflow without real data.
//!
//! cargo run -p fairgate --example synthetic_corpus -- --out corpus.jsonl

use std::path::PathBuf;

use clap::Parser;
use fairgate_core::corpus::write_corpus;
use fairgate_core::synthetic;

#[derive(Parser)]
struct Args {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 600)]
    per_market: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let reviews: Vec<_> =
        synthetic::all_markets(args.per_market, args.seed).into_iter().flat_map(|(_, reviews)| reviews).collect();
    write_corpus(&args.out, &reviews)?;
    eprintln!("wrote {} reviews to {}", reviews.len(), args.out.display());
    Ok(())
}
