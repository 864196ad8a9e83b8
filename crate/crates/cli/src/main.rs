//! `pcmt`: command-line front end for coded Merkle trees over polar factor graphs.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pcmt_core::attack_sim::{eligible_positions, optimal_hiding_set, run_trials, AttackConfig, Strategy};
use pcmt_core::freezing::{freeze, undecodable_threshold, FreezeAlgorithm};
use pcmt_core::hash::{hash_symbol, Digest, HASH_BYTES};
use pcmt_core::metrics::{lcmt_metrics, pcmt_metrics, read_alpha_table, rs2d_metrics, sweep, write_sweep_csv, SweepGrid};
use pcmt_core::pcmt::{
    decode_tree, verify_ic_proof, verify_inclusion, Corruption, Coords, IcProof, MerkleProof, PcmtLayout, PcmtParams,
    PcmtTree, Sample, TreeOutcome,
};
use pcmt_core::{FactorGraph, Ratio};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "pcmt", version, about = "Coded Merkle trees over polar factor graphs")]
struct Cli {
    /// JSON file with tree parameters (k, r_num, r_den, q, l, chunk_bytes).
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted and the output is text.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Sef,
    Nrm,
}

impl From<Algo> for FreezeAlgorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Sef => FreezeAlgorithm::Sef,
            Algo::Nrm => FreezeAlgorithm::Nrm,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Commit to a block and write the tree container to --out.
    Build {
        block: PathBuf,
        /// Flip one parity symbol before hashing: `parity:IDX` (base layer)
        /// or `parity:LAYER:IDX`, with IDX counted from 0.
        #[arg(long)]
        corrupt: Option<String>,
        /// Also write the raw root hash list here.
        #[arg(long)]
        root_out: Option<PathBuf>,
    },
    /// Write the Merkle proof of symbol C_j[k][i] to --out.
    Prove {
        container: PathBuf,
        #[arg(long)]
        layer: u32,
        #[arg(long)]
        column: u32,
        #[arg(long)]
        row: u32,
        /// Also write the symbol itself here.
        #[arg(long)]
        symbol_out: Option<PathBuf>,
        /// Also write the raw root hash list here.
        #[arg(long)]
        root_out: Option<PathBuf>,
    },
    /// Check a symbol against a root. Exit 0 valid, 1 invalid, 2 malformed.
    Verify { root: PathBuf, symbol: PathBuf, proof: PathBuf },
    /// Sample every eligible base symbol of a container and decode the tree.
    Decode {
        container: PathBuf,
        /// Withhold the optimal hiding set from the samples.
        #[arg(long, conflicts_with = "hide_file")]
        hide_optimal: bool,
        /// Withhold these base-layer CMT rows (one per line).
        #[arg(long)]
        hide_file: Option<PathBuf>,
    },
    /// Monte Carlo data-availability attack against light-node sampling.
    Attack {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "sef")]
        algo: Algo,
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// `optimal`, `given:FILE` (one CMT row per line) or `random:SIZE`.
        #[arg(long, default_value = "optimal")]
        strategy: String,
    },
    /// Find an incorrect-coding proof in a container and verify it.
    Icdemo { container: PathBuf },
    /// Frozen set, trailing run and threshold of an (N, K) code.
    Freeze {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "sef")]
        algo: Algo,
        /// Write the factor graph in Graphviz format here.
        #[arg(long)]
        emit_dot: Option<PathBuf>,
    },
    /// Root, sample and IC-proof sizes for PCMT, LCMT and 2D-RS.
    Metrics {
        #[arg(long, default_value_t = 0.01)]
        target_pf: f64,
        /// LCMT check-node degree.
        #[arg(long)]
        d_c: Option<u64>,
        /// LCMT undecodable threshold as NUM/DEN.
        #[arg(long)]
        alpha_lcmt: Option<String>,
        /// 2D-RS undecodable threshold as NUM/DEN.
        #[arg(long)]
        alpha_rs: Option<String>,
    },
    /// Evaluate a parameter grid and write CSV.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        alpha_table: Option<PathBuf>,
    },
}

/// Exit statuses.
const VALID: u8 = 0;
const NEGATIVE: u8 = 1;
const USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { VALID });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Build { block, corrupt, root_out } => cmd_build(cli, block, corrupt.as_deref(), root_out.as_deref()),
        Command::Prove { container, layer, column, row, symbol_out, root_out } => {
            cmd_prove(cli, container, Coords::new(*layer, *column, *row), symbol_out.as_deref(), root_out.as_deref())
        }
        Command::Verify { root, symbol, proof } => cmd_verify(cli, root, symbol, proof),
        Command::Decode { container, hide_optimal, hide_file } => {
            cmd_decode(cli, container, *hide_optimal, hide_file.as_deref())
        }
        Command::Attack { n, k, algo, samples, trials, strategy } => {
            cmd_attack(cli, *n, *k, *algo, *samples, *trials, strategy)
        }
        Command::Icdemo { container } => cmd_icdemo(cli, container),
        Command::Freeze { n, k, algo, emit_dot } => cmd_freeze(cli, *n, *k, *algo, emit_dot.as_deref()),
        Command::Metrics { target_pf, d_c, alpha_lcmt, alpha_rs } => {
            cmd_metrics(cli, *target_pf, *d_c, alpha_lcmt.as_deref(), alpha_rs.as_deref())
        }
        Command::Sweep { grid, alpha_table } => cmd_sweep(cli, grid, alpha_table.as_deref()),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_params(cli: &Cli) -> Result<PcmtParams> {
    let path = cli.params.as_deref().ok_or_else(|| anyhow!("--params FILE is required"))?;
    let params: PcmtParams =
        serde_json::from_slice(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    params.validate()?;
    Ok(params)
}

fn require_out(cli: &Cli) -> Result<&Path> {
    cli.out.as_deref().ok_or_else(|| anyhow!("--out PATH is required"))
}

/// Writes text to --out or stdout.
fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => write(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn emit_json(cli: &Cli, value: &impl Serialize) -> Result<()> {
    emit(cli, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_tree(path: &Path) -> Result<PcmtTree> {
    PcmtTree::from_container(&read(path)?).with_context(|| format!("loading container {}", path.display()))
}

fn parse_corruption(layout: &PcmtLayout, spec: &str) -> Result<Corruption> {
    let parts: Vec<&str> = spec.split(':').collect();
    let (layer, index) = match parts.as_slice() {
        ["parity", idx] => (layout.n_layers(), idx.parse()?),
        ["parity", layer, idx] => (layer.parse()?, idx.parse()?),
        _ => bail!("--corrupt expects parity:IDX or parity:LAYER:IDX, got {spec:?}"),
    };
    Ok(Corruption::parity(layout, layer, index)?)
}

fn cmd_build(cli: &Cli, block: &Path, corrupt: Option<&str>, root_out: Option<&Path>) -> Result<u8> {
    let layout = PcmtLayout::new(load_params(cli)?)?;
    let out = require_out(cli)?;
    let data = read(block)?;
    let corruption = corrupt.map(|c| parse_corruption(&layout, c)).transpose()?;
    let tree = PcmtTree::build_with(layout, &data, corruption)?;
    write(out, &tree.to_container())?;
    if let Some(path) = root_out {
        write(path, &tree.root_bytes())?;
    }
    println!("{}", hex::encode(hash_symbol(&tree.root_bytes())));
    Ok(VALID)
}

fn cmd_prove(cli: &Cli, container: &Path, c: Coords, symbol_out: Option<&Path>, root_out: Option<&Path>) -> Result<u8> {
    let tree = load_tree(container)?;
    let out = require_out(cli)?;
    let proof = tree.merkle_proof(c)?;
    write(out, &proof.to_bytes())?;
    if let Some(path) = symbol_out {
        write(path, tree.symbol(c)?)?;
    }
    if let Some(path) = root_out {
        write(path, &tree.root_bytes())?;
    }
    Ok(VALID)
}

fn parse_root(layout: &PcmtLayout, bytes: &[u8]) -> Result<Vec<Digest>> {
    if bytes.len() != layout.root_len() * HASH_BYTES {
        bail!("root file has {} bytes, expected {}", bytes.len(), layout.root_len() * HASH_BYTES);
    }
    Ok(bytes.chunks(HASH_BYTES).map(|h| h.try_into().expect("exact chunks")).collect())
}

fn cmd_verify(cli: &Cli, root: &Path, symbol: &Path, proof: &Path) -> Result<u8> {
    let layout = PcmtLayout::new(load_params(cli)?)?;
    let root = parse_root(&layout, &read(root)?)?;
    let symbol = read(symbol)?;
    let proof = MerkleProof::from_bytes(&layout, &read(proof)?).context("parsing proof")?;
    if verify_inclusion(&layout, &root, &symbol, proof.coords, &proof) {
        println!("VALID {}", proof.coords);
        Ok(VALID)
    } else {
        println!("INVALID {}", proof.coords);
        Ok(NEGATIVE)
    }
}

fn read_rows(path: &Path) -> Result<Vec<usize>> {
    let text = String::from_utf8(read(path)?).context("row file is not UTF-8")?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse().with_context(|| format!("bad row {l:?}")))
        .collect()
}

/// Eligible base symbols of `tree` with their proofs, skipping `hidden`.
fn samples(tree: &PcmtTree, hidden: &BTreeSet<usize>) -> Result<Vec<Sample>> {
    let layout = tree.layout();
    let l = layout.n_layers();
    let top = layout.base().top_column();
    eligible_positions(&layout.base().spec)
        .into_iter()
        .filter(|row| !hidden.contains(row))
        .map(|row| {
            let c = Coords::new(l, top, row as u32);
            Ok(Sample { coords: c, symbol: tree.symbol(c)?.clone(), proof: tree.merkle_proof(c)? })
        })
        .collect()
}

#[derive(Serialize)]
struct DecodeReport {
    outcome: &'static str,
    samples: usize,
    rejected: Vec<Coords>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stuck_layer: Option<u32>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    unresolved: Vec<Coords>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ic_proof_layer: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    block_sha256: Option<String>,
}

fn cmd_decode(cli: &Cli, container: &Path, hide_optimal: bool, hide_file: Option<&Path>) -> Result<u8> {
    let tree = load_tree(container)?;
    let layout = tree.layout();
    let hidden: BTreeSet<usize> = if hide_optimal {
        optimal_hiding_set(&layout.base().spec)?.into_iter().collect()
    } else if let Some(path) = hide_file {
        read_rows(path)?.into_iter().collect()
    } else {
        BTreeSet::new()
    };
    let samples = samples(&tree, &hidden)?;
    let result = decode_tree(layout, tree.root(), &samples)?;
    let mut report = DecodeReport {
        outcome: "decoded",
        samples: samples.len(),
        rejected: result.rejected,
        stuck_layer: None,
        unresolved: Vec::new(),
        ic_proof_layer: None,
        block_sha256: None,
    };
    let code = match result.outcome {
        TreeOutcome::Decoded(layers) => {
            let base = layout.base();
            let mut block: Vec<u8> = layers[layers.len() - 1][..]
                .iter()
                .skip((base.columns() - 1) * base.n)
                .take(base.k)
                .flat_map(|s| s.to_vec())
                .collect();
            block.truncate(tree.original_len() as usize);
            report.block_sha256 = Some(hex::encode(hash_symbol(&block)));
            VALID
        }
        TreeOutcome::Stuck(s) => {
            report.outcome = "stuck";
            report.stuck_layer = Some(s.layer);
            report.unresolved = s.unresolved;
            NEGATIVE
        }
        TreeOutcome::IncorrectCoding(p) => {
            report.outcome = "incorrect_coding";
            report.ic_proof_layer = Some(p.layer);
            NEGATIVE
        }
    };
    emit_json(cli, &report)?;
    Ok(code)
}

fn cmd_attack(cli: &Cli, n: usize, k: usize, algo: Algo, samples: u64, trials: u64, strategy: &str) -> Result<u8> {
    let spec = freeze(n, k, algo.into())?;
    let strategy = match strategy.split_once(':') {
        None if strategy == "optimal" => Strategy::Optimal,
        Some(("given", file)) => Strategy::Given(read_rows(Path::new(file))?),
        Some(("random", size)) => Strategy::Random(size.parse().context("random:SIZE")?),
        _ => bail!("--strategy expects optimal, given:FILE or random:SIZE, got {strategy:?}"),
    };
    let report = run_trials(&AttackConfig { spec, strategy, samples_per_node: samples, trials, seed: cli.seed })?;
    emit_json(cli, &report)?;
    Ok(if report.non_attack { NEGATIVE } else { VALID })
}

fn cmd_icdemo(cli: &Cli, container: &Path) -> Result<u8> {
    let tree = load_tree(container)?;
    let layout = tree.layout();
    let samples = samples(&tree, &BTreeSet::new())?;
    println!("sampled {} eligible base symbols", samples.len());
    let result = decode_tree(layout, tree.root(), &samples)?;
    let proof = match result.outcome {
        TreeOutcome::IncorrectCoding(p) => p,
        TreeOutcome::Decoded(_) => {
            println!("tree decoded; every check node holds");
            println!("NO IC PROOF");
            return Ok(NEGATIVE);
        }
        TreeOutcome::Stuck(s) => {
            println!("decoding stalled in layer {} with {} erasures", s.layer, s.unresolved.len());
            println!("NO IC PROOF");
            return Ok(NEGATIVE);
        }
    };
    let bytes = proof.to_bytes();
    if let Some(path) = &cli.out {
        write(path, &bytes)?;
    }
    println!("violated check node {} in layer {}", proof.cn, proof.layer);
    for (c, s) in &proof.present {
        println!("  present {c}: {}", hex::encode(&hash_symbol(s)[..8]));
    }
    let absent = proof.paths.iter().map(|p| p.coords).find(|c| proof.present.iter().all(|(p, _)| p != c));
    if let Some(c) = absent {
        println!("  disputed {c}");
    }
    println!("proof size {} bytes", bytes.len());
    let parsed = IcProof::from_bytes(layout, &bytes)?;
    let ok = verify_ic_proof(layout, tree.root(), &parsed);
    println!("{}", if ok { "VALID" } else { "INVALID" });
    Ok(if ok { VALID } else { NEGATIVE })
}

#[derive(Serialize)]
struct FreezeReport {
    n: usize,
    k: usize,
    algorithm: FreezeAlgorithm,
    frozen: Vec<usize>,
    mu2: usize,
    min_leaf: u64,
    alpha_num: u64,
    alpha_den: u64,
}

fn cmd_freeze(cli: &Cli, n: usize, k: usize, algo: Algo, emit_dot: Option<&Path>) -> Result<u8> {
    let spec = freeze(n, k, algo.into())?;
    let alpha = undecodable_threshold(&spec);
    if let Some(path) = emit_dot {
        write(path, FactorGraph::build(n)?.to_dot().as_bytes())?;
    }
    emit_json(
        cli,
        &FreezeReport {
            n,
            k,
            algorithm: spec.algorithm(),
            frozen: spec.frozen().to_vec(),
            mu2: spec.mu2(),
            min_leaf: spec.min_info_leaf(),
            alpha_num: *alpha.numer(),
            alpha_den: *alpha.denom(),
        },
    )?;
    Ok(VALID)
}

fn parse_ratio(s: &str) -> Result<Ratio<u64>> {
    let (num, den) = s.split_once('/').unwrap_or((s, "1"));
    let den: u64 = den.trim().parse().with_context(|| format!("bad ratio {s:?}"))?;
    if den == 0 {
        bail!("ratio {s:?} has zero denominator");
    }
    Ok(Ratio::new(num.trim().parse().with_context(|| format!("bad ratio {s:?}"))?, den))
}

fn cmd_metrics(cli: &Cli, target_pf: f64, d_c: Option<u64>, alpha_lcmt: Option<&str>, alpha_rs: Option<&str>) -> Result<u8> {
    let params = load_params(cli)?;
    let mut all = vec![pcmt_metrics(&params, target_pf)?];
    if let Some(d_c) = d_c {
        all.push(lcmt_metrics(&params, d_c, alpha_lcmt.map(parse_ratio).transpose()?, target_pf)?);
    }
    all.push(rs2d_metrics(&params, alpha_rs.map(parse_ratio).transpose()?, target_pf)?);
    emit_json(cli, &all)?;
    Ok(VALID)
}

fn cmd_sweep(cli: &Cli, grid: &Path, alpha_table: Option<&Path>) -> Result<u8> {
    let grid: SweepGrid =
        serde_json::from_slice(&read(grid)?).with_context(|| format!("parsing {}", grid.display()))?;
    let alphas = match alpha_table {
        Some(path) => read_alpha_table(read(path)?.as_slice())?,
        None => Default::default(),
    };
    let rows = sweep(&grid, &alphas)?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf)?;
    emit(cli, std::str::from_utf8(&buf)?)?;
    Ok(VALID)
}
