//! `blockech` command-line driver.
//!
//! Exit codes: 0 success, 1 verification mismatch, 2 usage or parse error,
//! 3 task failure.

mod selects;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use blockech::analysis::{analyze, CostModelRegistry, ModelRow};
use blockech::chief::{below_diagonal_entry, echelonize, verify, ChiefOptions, EchelonOutput};
use blockech::ech::{KernelRegistry, DEFAULT_THRESHOLD};
use blockech::io::{read_matrix, read_trafo, write_matrix, write_trafo, TrafoBlocks};
use blockech::scheduler::write_trace_csv;
use blockech::{gen, Field, FieldSpec, Matrix};
use clap::{Parser, ValueEnum};

use selects::Selects;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Echelonize a matrix file and write the results.
    Ech,
    /// Check result files against the input matrix.
    Verify,
    /// Print the rank of a matrix file.
    Rank,
    /// Time echelonization of a random matrix at several thread counts.
    Bench,
    /// Print the critical-path cost model report.
    Analyze,
}

#[derive(Debug, Parser)]
#[command(name = "blockech", version, about = "Blocked parallel echelonization over finite fields")]
struct Args {
    command: Command,
    /// Input matrix (GFMAT v1).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Remnant R of the echelon form (GFMAT v1).
    #[arg(long)]
    out_r: Option<PathBuf>,
    /// Transformation blocks (GFTRAFO v1).
    #[arg(long)]
    out_t: Option<PathBuf>,
    /// Row and column selections (JSON).
    #[arg(long)]
    out_selects: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    block: usize,
    /// Worker count; a comma-separated list for bench.
    #[arg(long, value_delimiter = ',')]
    threads: Vec<usize>,
    #[arg(long)]
    no_transform: bool,
    /// Make the first and last block rows and columns half a block.
    #[arg(long)]
    taper: bool,
    /// Write the task trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    ech_threshold: usize,
    /// Single-block echelonization kernel.
    #[arg(long, default_value = "recursive")]
    ech_kernel: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1024)]
    size: usize,
    /// Field as `q`, `p` or `p^k`.
    #[arg(long, default_value = "2")]
    field: String,
    /// Modulus coefficients `c0,...,ck` for an extension field.
    #[arg(long, value_delimiter = ',')]
    modulus: Vec<u32>,
    /// Block rows for analyze.
    #[arg(long, default_value_t = 1)]
    a: usize,
    /// Block columns for analyze; defaults to `a`.
    #[arg(long)]
    b: Option<usize>,
    /// Block dimension for analyze.
    #[arg(long, default_value_t = 1)]
    alpha: usize,
    /// Cost model for analyze.
    #[arg(long, default_value = "well_conditioned")]
    mode: String,
}

struct Fail {
    code: u8,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Fail {
    Fail { code: 2, msg: msg.into() }
}

fn mismatch(msg: impl Into<String>) -> Fail {
    Fail { code: 1, msg: msg.into() }
}

fn task(err: blockech::Error) -> Fail {
    Fail { code: 3, msg: err.to_string() }
}

type CliResult<T> = Result<T, Fail>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_matrix(path: &Path) -> CliResult<Matrix> {
    read_matrix(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    p.as_deref().ok_or_else(|| usage(format!("{flag} is required")))
}

fn parse_field(text: &str, modulus: &[u32]) -> CliResult<Field> {
    let num = |s: &str| s.trim().parse::<u32>().map_err(|_| usage(format!("bad --field {text:?}")));
    let spec = match text.split_once('^') {
        Some((p, k)) => {
            let (p, k) = (num(p)?, num(k)?);
            if modulus.is_empty() {
                FieldSpec::new(p, k)
            } else if modulus.len() != k as usize + 1 {
                return Err(usage(format!("--modulus needs {} coefficients for degree {k}", k + 1)));
            } else {
                FieldSpec::with_modulus(p, modulus.to_vec())
            }
        }
        None => {
            let q = num(text)?;
            match FieldSpec::from_order(q) {
                Ok(s) if !modulus.is_empty() => FieldSpec::with_modulus(s.p(), modulus.to_vec()),
                other => other,
            }
        }
    };
    spec.map(Field::new).map_err(|e| usage(e.to_string()))
}

fn single_threads(args: &Args) -> CliResult<usize> {
    match args.threads.as_slice() {
        [] => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        [0] => Err(usage("--threads must be at least 1")),
        [t] => Ok(*t),
        _ => Err(usage("--threads takes a single value here")),
    }
}

fn options(args: &Args, threads: usize) -> CliResult<ChiefOptions> {
    if args.block == 0 {
        return Err(usage("--block must be at least 1"));
    }
    let kernel = KernelRegistry::default().create(&args.ech_kernel, args.ech_threshold).map_err(|e| usage(e.to_string()))?;
    Ok(ChiefOptions { block: args.block, threads, with_transform: !args.no_transform, kernel, retain_all: false, taper: args.taper })
}

fn write_trace(path: &Path, trace: &[blockech::scheduler::TraceRecord]) -> CliResult<()> {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, trace).map_err(|e| usage(e.to_string()))?;
    fs::write(path, buf).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn trafo_of(out: &EchelonOutput) -> Option<TrafoBlocks> {
    Some(TrafoBlocks {
        field: out.field.clone(),
        a: out.chop.a(),
        b: out.chop.b(),
        m: out.m_blocks.clone()?,
        k: out.k_blocks.clone()?,
    })
}

fn cmd_ech(args: &Args) -> CliResult<()> {
    let c = load_matrix(need(&args.input, "--in")?)?;
    if args.no_transform && args.out_t.is_some() {
        return Err(usage("--out-t needs the transformation; drop --no-transform"));
    }
    let run = echelonize(&c, &options(args, single_threads(args)?)?).map_err(task)?;
    let out = &run.output;
    if let Some(p) = &args.out_r {
        write_text(p, &write_matrix(&out.assembled_r()))?;
    }
    if let (Some(p), Some(t)) = (&args.out_t, trafo_of(out)) {
        write_text(p, &write_trafo(&t))?;
    }
    if let Some(p) = &args.out_selects {
        let json = serde_json::to_string_pretty(&Selects::from_output(out)).map_err(|e| usage(e.to_string()))?;
        write_text(p, &(json + "\n"))?;
    }
    if let Some(p) = &args.trace {
        write_trace(p, &run.trace)?;
    }
    println!("rank {}", out.rank());
    Ok(())
}

fn cmd_verify(args: &Args) -> CliResult<()> {
    let c = load_matrix(need(&args.input, "--in")?)?;
    let r = load_matrix(need(&args.out_r, "--out-r")?)?;
    if r.field() != c.field() {
        return Err(usage(format!("R file is over {}, input is over {}", r.field(), c.field())));
    }
    let sel_path = need(&args.out_selects, "--out-selects")?;
    let sel: Selects = serde_json::from_str(&read_text(sel_path)?).map_err(|e| usage(format!("{}: {e}", sel_path.display())))?;
    let (chop, varrho, upsilon) = sel.parts().map_err(|e| usage(format!("{}: {e}", sel_path.display())))?;

    let transform = match &args.out_t {
        Some(p) => {
            let t = read_trafo(&read_text(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            if t.field != *c.field() {
                return Err(usage(format!("T file is over {}, input is over {}", t.field, c.field())));
            }
            if (t.a, t.b) != (chop.a(), chop.b()) {
                return Err(mismatch(format!("T file has a {}x{} grid, selects have {}x{}", t.a, t.b, chop.a(), chop.b())));
            }
            Some((t.m, t.k))
        }
        None => None,
    };
    if (sel.rows, sel.cols) != c.shape() {
        return Err(mismatch(format!("selects describe {}x{}, input is {}x{}", sel.rows, sel.cols, c.rows(), c.cols())));
    }
    if let Some((row, col)) = below_diagonal_entry(&upsilon, &r) {
        return Err(mismatch(format!("R entry ({row},{col}) lies below the block diagonal and is nonzero")));
    }
    let out = EchelonOutput::from_parts(chop, varrho, upsilon, &r, transform).map_err(|e| mismatch(e.to_string()))?;
    if out.global_varrho().members() != sel.varrho.as_slice() || out.global_upsilon().members() != sel.upsilon.as_slice() || out.rank() != sel.rank {
        return Err(mismatch("global selections disagree with the per-block lists"));
    }
    let rep = verify(&c, &out);
    if rep.ok {
        println!("ok rank {}", out.rank());
        Ok(())
    } else {
        Err(mismatch(rep.detail.unwrap_or_default()))
    }
}

fn cmd_rank(args: &Args) -> CliResult<()> {
    let c = load_matrix(need(&args.input, "--in")?)?;
    let opts = ChiefOptions { with_transform: false, ..options(args, single_threads(args)?)? };
    let run = echelonize(&c, &opts).map_err(task)?;
    if let Some(p) = &args.trace {
        write_trace(p, &run.trace)?;
    }
    println!("rank {}", run.output.rank());
    Ok(())
}

fn cmd_bench(args: &Args) -> CliResult<()> {
    let field = parse_field(&args.field, &args.modulus)?;
    let threads = if args.threads.is_empty() { vec![1] } else { args.threads.clone() };
    if threads.contains(&0) {
        return Err(usage("--threads must be at least 1"));
    }
    let c = gen::random(&field, args.size, args.size, args.seed);
    println!(
        "size {} field {} block {} transform {} seed {}",
        args.size,
        field,
        args.block,
        if args.no_transform { "no" } else { "yes" },
        args.seed
    );
    println!("threads\twall_ms\tspeedup\trank\tpeak_live_bytes");
    let mut base = None;
    for (idx, &t) in threads.iter().enumerate() {
        let opts = options(args, t)?;
        let start = Instant::now();
        let run = echelonize(&c, &opts).map_err(task)?;
        let wall = start.elapsed().as_secs_f64();
        let base_wall = *base.get_or_insert(wall);
        let speedup = if wall > 0.0 { base_wall / wall } else { 1.0 };
        println!("{t}\t{:.3}\t{speedup:.2}\t{}\t{}", wall * 1e3, run.output.rank(), run.peak_live_bytes);
        if idx + 1 == threads.len() {
            if let Some(p) = &args.trace {
                write_trace(p, &run.trace)?;
            }
        }
    }
    Ok(())
}

fn cmd_analyze(args: &Args) -> CliResult<()> {
    let (a, b, alpha) = (args.a, args.b.unwrap_or(args.a), args.alpha);
    if a == 0 || b == 0 || alpha == 0 {
        return Err(usage("--a, --b and --alpha must be at least 1"));
    }
    let reg = CostModelRegistry::default();
    let model = if reg.needs_trace(&args.mode) {
        let field = parse_field(&args.field, &args.modulus)?;
        let c = gen::random(&field, a * alpha, b * alpha, args.seed);
        let opts = ChiefOptions { block: alpha, ..options(args, single_threads(args)?)? };
        let run = echelonize(&c, &opts).map_err(task)?;
        if let Some(p) = &args.trace {
            write_trace(p, &run.trace)?;
        }
        println!("# run makespan_ns {} on {} workers", run.makespan_ns, opts.threads);
        reg.create(&args.mode, Some(&run.trace))
    } else {
        reg.create(&args.mode, None)
    }
    .map_err(|e| usage(e.to_string()))?;
    let row = analyze(a, b, alpha, model.as_ref()).map_err(|e| usage(e.to_string()))?;
    println!("{}", ModelRow::HEADER);
    println!("{row}");
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = match args.command {
        Command::Ech => cmd_ech(&args),
        Command::Verify => cmd_verify(&args),
        Command::Rank => cmd_rank(&args),
        Command::Bench => cmd_bench(&args),
        Command::Analyze => cmd_analyze(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("blockech: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
