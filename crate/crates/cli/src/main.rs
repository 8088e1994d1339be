//! `bloomtree` command-line front end.
//!
//! Exit codes: 0 success or valid proof, 1 invalid proof, 2 usage error,
//! 3 I/O or format error.

use bloomtree::bloom::{fpr, raw_bits};
use bloomtree::experiment::{self, ExperimentConfig};
use bloomtree::tree::verify;
use bloomtree::{
    decode_filter, decode_proof, derive_params, encode_filter, encode_proof, BloomFilter, Digest,
    Verdict,
};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeSet;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_INVALID: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bloomtree",
    version,
    about = "Bloom filters with Merkle presence and absence proofs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive filter geometry for n elements at a target false positive rate.
    Params {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        fpr: f64,
        #[arg(long)]
        chunk_size: u32,
    },
    /// Build a filter file from newline-delimited elements.
    Build {
        #[arg(long)]
        elements: PathBuf,
        /// Expected element count; defaults to the number of distinct lines.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        fpr: f64,
        #[arg(long)]
        chunk_size: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a presence or absence proof for one element.
    Prove {
        #[arg(long)]
        filter: PathBuf,
        #[command(flatten)]
        element: ElementArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a proof against a root.
    Verify {
        #[command(flatten)]
        anchor: Anchor,
        #[command(flatten)]
        element: ElementArg,
        #[arg(long)]
        proof: PathBuf,
    },
    /// Print the root of a filter file as lowercase hex.
    Root {
        #[arg(long)]
        filter: PathBuf,
    },
    /// Run the proof-size sweep and write CSV.
    Experiment {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        chunk_sizes: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        fprs: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<u64>>,
        #[arg(long)]
        sample_size: Option<usize>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ElementArg {
    /// Element given as a UTF-8 string.
    #[arg(long)]
    element: Option<String>,
    /// Element given as the raw bytes of a file.
    #[arg(long)]
    element_file: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Anchor {
    /// Trusted root as 64 hex characters; params are taken from the proof.
    #[arg(long)]
    root: Option<String>,
    /// Filter file supplying the root and params.
    #[arg(long)]
    filter: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(msg: impl Display) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: msg.to_string(),
    }
}

fn io(msg: impl Display) -> Failure {
    Failure {
        code: EXIT_IO,
        message: msg.to_string(),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io(format!("{}: {e}", path.display())))
}

fn element_bytes(arg: &ElementArg) -> Result<Vec<u8>, Failure> {
    match (&arg.element, &arg.element_file) {
        (Some(s), None) => Ok(s.as_bytes().to_vec()),
        (None, Some(p)) => read(p),
        _ => Err(usage(
            "exactly one of --element or --element-file is required",
        )),
    }
}

fn parse_root(s: &str) -> Result<Digest, Failure> {
    let bytes = hex::decode(s).map_err(|e| usage(format!("--root: {e}")))?;
    let arr: [u8; 32] = bytes
        .try_into()
        .map_err(|_| usage("--root must be 32 bytes (64 hex characters)"))?;
    Ok(Digest(arr))
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Params {
            n,
            fpr: p,
            chunk_size,
        } => {
            let params = derive_params(n, p, chunk_size).map_err(usage)?;
            let raw = raw_bits(n, p).map_err(usage)?;
            let predicted = fpr(params.m(), params.k(), n).map_err(usage)?;
            println!("m_raw={raw}");
            println!("m={}", params.m());
            println!("k={}", params.k());
            println!("chunks={}", params.chunk_count());
            println!("chunk_size={}", params.chunk_size());
            println!("predicted_fpr={predicted:.6e}");
        }
        Command::Build {
            elements,
            n,
            fpr: p,
            chunk_size,
            out,
        } => {
            let text = fs::read_to_string(&elements)
                .map_err(|e| io(format!("{}: {e}", elements.display())))?;
            let lines: BTreeSet<&str> = text.lines().collect();
            let n = n.unwrap_or(lines.len().max(1) as u64);
            let params = derive_params(n, p, chunk_size).map_err(usage)?;
            let mut filter = BloomFilter::new(params);
            for line in &lines {
                filter.insert(line.as_bytes());
            }
            let tree = bloomtree::BloomTree::build(filter);
            write(&out, &encode_filter(&tree))?;
            println!("{}", tree.root());
        }
        Command::Prove {
            filter,
            element,
            out,
        } => {
            let tree = decode_filter(&read(&filter)?).map_err(io)?;
            let element = element_bytes(&element)?;
            let proof = tree.prove(&element);
            let bytes = encode_proof(tree.params(), &proof).map_err(io)?;
            write(&out, &bytes)?;
            println!("{}", proof.kind());
        }
        Command::Verify {
            anchor,
            element,
            proof,
        } => {
            let element = element_bytes(&element)?;
            let proof_bytes = read(&proof)?;
            let (echoed, proof) = match decode_proof(&proof_bytes) {
                Ok(decoded) => decoded,
                Err(e) => {
                    println!("{}", Verdict::Invalid(format!("undecodable proof: {e}")));
                    return Ok(EXIT_INVALID);
                }
            };
            let verdict = match (anchor.root, anchor.filter) {
                (Some(root), None) => verify(&parse_root(&root)?, &echoed, &element, &proof),
                (None, Some(path)) => {
                    let tree = decode_filter(&read(&path)?).map_err(io)?;
                    if *tree.params() != echoed {
                        Verdict::Invalid("proof params do not match the filter".into())
                    } else {
                        verify(&tree.root(), tree.params(), &element, &proof)
                    }
                }
                _ => return Err(usage("exactly one of --root or --filter is required")),
            };
            println!("{verdict}");
            return Ok(if verdict.is_valid() { 0 } else { EXIT_INVALID });
        }
        Command::Root { filter } => {
            let tree = decode_filter(&read(&filter)?).map_err(io)?;
            println!("{}", tree.root());
        }
        Command::Experiment {
            out,
            seed,
            chunk_sizes,
            fprs,
            ns,
            sample_size,
        } => {
            let defaults = ExperimentConfig::default();
            let config = ExperimentConfig {
                chunk_sizes: chunk_sizes.unwrap_or(defaults.chunk_sizes),
                fprs: fprs.unwrap_or(defaults.fprs),
                ns: ns.unwrap_or(defaults.ns),
                sample_size: sample_size.unwrap_or(defaults.sample_size),
                seed,
            };
            let rows = experiment::run_grid(&config).map_err(usage)?;
            let file = fs::File::create(&out).map_err(|e| io(format!("{}: {e}", out.display())))?;
            experiment::write_csv(&rows, file).map_err(io)?;
            print!("{}", experiment::summary_table(&rows));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
