//! Closed-form size and sampling metrics for PCMT, LCMT and 2D-RS, plus
//! parameter sweeps written as CSV.
//!
//! All sizes are exact byte counts; `KB = 1000 B`, `MB = 10^6 B`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freezing::{prob_failure, prob_failure_ratio, samples_for_ratio, samples_needed, sef_freeze, undecodable_threshold};
use crate::pcmt::PcmtParams;
use crate::polar_graph::ceil_log2;

/// Symbols in a PCMT IC proof: every CN has at most three neighbors.
pub const PCMT_IC_DEGREE: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Pcmt,
    Lcmt,
    Rs2d,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Pcmt => "pcmt",
            Scheme::Lcmt => "lcmt",
            Scheme::Rs2d => "rs2d",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeMetrics {
    pub scheme: Scheme,
    pub root_bytes: u64,
    pub single_sample_bytes: u64,
    pub ic_proof_bytes: u64,
    /// Undecodable threshold `alpha` in symbols, when known.
    pub alpha_num: Option<u64>,
    pub alpha_den: Option<u64>,
    pub samples_for_target: Option<u64>,
    pub pf: Option<f64>,
    pub total_download_bytes: Option<u64>,
    pub decoding_complexity_label: String,
}

/// Smallest `m` with `2^m >= ceil(sqrt(n))`, i.e. `⌈log √n⌉`.
fn ceil_log2_sqrt(n: u64) -> u64 {
    let mut m = 0;
    while 4u64.pow(m as u32) < n {
        m += 1;
    }
    m
}

fn ceil_sqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

fn base_size(params: &PcmtParams) -> Result<u64> {
    Ok(*params.layer_sizes()?.last().expect("l >= 1") as u64)
}

struct Download {
    s: u64,
    pf: f64,
}

fn download(alpha: Ratio<u64>, n: u64, target_pf: f64) -> Result<Download> {
    let ratio = alpha / n;
    let s = samples_for_ratio(ratio, target_pf)?;
    Ok(Download { s, pf: prob_failure_ratio(ratio, s) })
}

fn fill(mut m: SchemeMetrics, alpha: Option<Ratio<u64>>, d: Option<Download>) -> SchemeMetrics {
    if let Some(a) = alpha {
        m.alpha_num = Some(*a.numer());
        m.alpha_den = Some(*a.denom());
    }
    if let Some(d) = d {
        m.samples_for_target = Some(d.s);
        m.pf = Some(d.pf);
        m.total_download_bytes = Some(d.s * m.single_sample_bytes);
    }
    m
}

pub fn pcmt_metrics(params: &PcmtParams, target_pf: f64) -> Result<SchemeMetrics> {
    params.validate()?;
    let sizes = params.layer_sizes()?;
    let (y, c, q, l) = (params.hash_bytes as u64, params.chunk_bytes as u64, params.q as u64, params.l as u64);
    let n1 = sizes[0] as u64;
    let log_sum: u64 = sizes[..sizes.len() - 1].iter().map(|&n| ceil_log2(n) as u64).sum();
    let root = y * n1 * (ceil_log2(sizes[0]) as u64 + 1);
    let sample = c + y * (2 * q - 1) * (l - 1) + 2 * q * y * log_sum;
    let d = PCMT_IC_DEGREE;
    let ic = (d - 1) * c + d * y * (q - 1) * (l - 1) + d * q * y * log_sum;

    let n_base = *sizes.last().expect("l >= 1");
    let spec = sef_freeze(n_base, params.k as usize)?;
    let alpha = undecodable_threshold(&spec);
    let s = samples_needed(&spec, target_pf)?;
    let m = SchemeMetrics {
        scheme: Scheme::Pcmt,
        root_bytes: root,
        single_sample_bytes: sample,
        ic_proof_bytes: ic,
        alpha_num: None,
        alpha_den: None,
        samples_for_target: None,
        pf: None,
        total_download_bytes: None,
        decoding_complexity_label: "O(N log N)".into(),
    };
    Ok(fill(m, Some(alpha), Some(Download { s, pf: prob_failure(&spec, s) })))
}

pub fn lcmt_metrics(params: &PcmtParams, d_c: u64, alpha: Option<Ratio<u64>>, target_pf: f64) -> Result<SchemeMetrics> {
    if d_c < 2 {
        return Err(Error::InvalidParameter(format!("d_c = {d_c} must be at least 2")));
    }
    let sizes = params.layer_sizes()?;
    let (y, c, q, l) = (params.hash_bytes as u64, params.chunk_bytes as u64, params.q as u64, params.l as u64);
    let sample = c + y * (2 * q - 1) * (l - 1);
    let m = SchemeMetrics {
        scheme: Scheme::Lcmt,
        root_bytes: y * sizes[0] as u64,
        single_sample_bytes: sample,
        ic_proof_bytes: (d_c - 1) * c + d_c * y * (q - 1) * (l - 1),
        alpha_num: None,
        alpha_den: None,
        samples_for_target: None,
        pf: None,
        total_download_bytes: None,
        decoding_complexity_label: "O(N)".into(),
    };
    let d = alpha.map(|a| download(a, base_size(params)?, target_pf)).transpose()?;
    Ok(fill(m, alpha, d))
}

pub fn rs2d_metrics(params: &PcmtParams, alpha: Option<Ratio<u64>>, target_pf: f64) -> Result<SchemeMetrics> {
    let n = base_size(params)?;
    let (y, c) = (params.hash_bytes as u64, params.chunk_bytes as u64);
    let sample = c + y * ceil_log2_sqrt(n);
    let m = SchemeMetrics {
        scheme: Scheme::Rs2d,
        root_bytes: 2 * y * ceil_sqrt(n),
        single_sample_bytes: sample,
        ic_proof_bytes: sample * ceil_sqrt(params.k as u64),
        alpha_num: None,
        alpha_den: None,
        samples_for_target: None,
        pf: None,
        total_download_bytes: None,
        decoding_complexity_label: "O(N^1.5)".into(),
    };
    let d = alpha.map(|a| download(a, n, target_pf)).transpose()?;
    Ok(fill(m, alpha, d))
}

/// One rate value in a sweep grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateSpec {
    pub num: u32,
    pub den: u32,
}

/// Cartesian grid of sweep points. Each block size `b` must be a multiple of
/// each chunk size `c`; `k = b / c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub rates: Vec<RateSpec>,
    pub q: Vec<u32>,
    pub l: Vec<u32>,
    pub c_bytes: Vec<u32>,
    pub b_bytes: Vec<u64>,
    /// Download budgets as fractions `b / divisor`.
    #[serde(default = "default_budgets")]
    pub budget_divisors: Vec<u64>,
    /// LCMT check-node degree; LCMT rows are emitted only when present.
    #[serde(default)]
    pub d_c: Option<u64>,
}

fn default_budgets() -> Vec<u64> {
    vec![3, 5]
}

pub const SWEEP_HEADER: [&str; 16] = [
    "scheme",
    "k",
    "r_num",
    "r_den",
    "q",
    "l",
    "c_bytes",
    "b_bytes",
    "root_bytes",
    "sample_bytes",
    "ic_proof_bytes",
    "alpha_num",
    "alpha_den",
    "s",
    "pf",
    "total_download_bytes",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub k: u32,
    pub r_num: u32,
    pub r_den: u32,
    pub q: u32,
    pub l: u32,
    pub c_bytes: u32,
    pub b_bytes: u64,
    pub root_bytes: u64,
    pub sample_bytes: u64,
    pub ic_proof_bytes: u64,
    pub alpha_num: Option<u64>,
    pub alpha_den: Option<u64>,
    pub s: Option<u64>,
    pub pf: Option<f64>,
    pub total_download_bytes: Option<u64>,
}

/// Reads `n,alpha_num,alpha_den` rows keyed by base-layer length.
pub fn read_alpha_table<R: Read>(reader: R) -> Result<BTreeMap<u64, Ratio<u64>>> {
    #[derive(Deserialize)]
    struct Row {
        n: u64,
        alpha_num: u64,
        alpha_den: u64,
    }
    let mut out = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize::<Row>() {
        let row = row?;
        if row.alpha_den == 0 {
            return Err(Error::Csv(format!("alpha for n = {} has zero denominator", row.n)));
        }
        out.insert(row.n, Ratio::new(row.alpha_num, row.alpha_den));
    }
    Ok(out)
}

/// Evaluates every grid point under every budget. Missing alpha entries leave
/// the LCMT download cells blank.
pub fn sweep(grid: &SweepGrid, alphas: &BTreeMap<u64, Ratio<u64>>) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for rate in &grid.rates {
        for &q in &grid.q {
            for &l in &grid.l {
                for &c in &grid.c_bytes {
                    for &b in &grid.b_bytes {
                        if c == 0 || b % c as u64 != 0 {
                            return Err(Error::InvalidParameter(format!("b = {b} is not a multiple of c = {c}")));
                        }
                        let k = u32::try_from(b / c as u64)
                            .map_err(|_| Error::InvalidParameter(format!("k = {} too large", b / c as u64)))?;
                        let params = PcmtParams::new(k, rate.num, rate.den, q, l, c);
                        rows.extend(sweep_point(grid, &params, b, alphas)?);
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn sweep_point(grid: &SweepGrid, params: &PcmtParams, b: u64, alphas: &BTreeMap<u64, Ratio<u64>>) -> Result<Vec<SweepRow>> {
    params.validate()?;
    let n = base_size(params)?;
    let spec = sef_freeze(n as usize, params.k as usize)?;
    let pcmt = pcmt_metrics(params, 0.5)?;
    let lcmt = grid.d_c.map(|d_c| lcmt_metrics(params, d_c, None, 0.5)).transpose()?;
    let alpha_lcmt = alphas.get(&n).copied();
    let row = |m: &SchemeMetrics, alpha: Option<Ratio<u64>>| SweepRow {
        scheme: m.scheme,
        k: params.k,
        r_num: params.r_num,
        r_den: params.r_den,
        q: params.q,
        l: params.l,
        c_bytes: params.chunk_bytes,
        b_bytes: b,
        root_bytes: m.root_bytes,
        sample_bytes: m.single_sample_bytes,
        ic_proof_bytes: m.ic_proof_bytes,
        alpha_num: alpha.map(|a| *a.numer()),
        alpha_den: alpha.map(|a| *a.denom()),
        s: None,
        pf: None,
        total_download_bytes: None,
    };
    let mut out = Vec::new();
    for &div in &grid.budget_divisors {
        if div == 0 {
            return Err(Error::InvalidParameter("budget divisor must be positive".into()));
        }
        let budget = b / div;
        let s = budget / pcmt.single_sample_bytes;
        out.push(SweepRow {
            s: Some(s),
            pf: Some(prob_failure(&spec, s)),
            total_download_bytes: Some(s * pcmt.single_sample_bytes),
            ..row(&pcmt, Some(undecodable_threshold(&spec)))
        });
        if let Some(lcmt) = &lcmt {
            let mut r = row(lcmt, alpha_lcmt);
            if let Some(a) = alpha_lcmt {
                let s = budget / lcmt.single_sample_bytes;
                r.s = Some(s);
                r.pf = Some(prob_failure_ratio(a / n, s));
                r.total_download_bytes = Some(s * lcmt.single_sample_bytes);
            }
            out.push(r);
        }
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1() -> PcmtParams {
        PcmtParams::new(512, 1, 2, 4, 8, 256_000)
    }

    fn t2() -> PcmtParams {
        PcmtParams::new(4096, 1, 2, 4, 10, 256_000)
    }

    #[test]
    fn pcmt_table_values() {
        let m = pcmt_metrics(&t1(), 0.01).unwrap();
        assert_eq!((m.root_bytes, m.single_sample_bytes, m.ic_proof_bytes), (1024, 268_320, 530_144));
        assert_eq!(m.samples_for_target, Some(126));
        assert_eq!(m.total_download_bytes, Some(33_808_320));
        let m = pcmt_metrics(&t2(), 0.01).unwrap();
        assert_eq!((m.root_bytes, m.ic_proof_bytes), (2560, 542_240));
    }

    #[test]
    fn single_layer_sample_is_a_chunk() {
        let p = PcmtParams::new(8, 1, 2, 4, 1, 100);
        assert_eq!(pcmt_metrics(&p, 0.01).unwrap().single_sample_bytes, 100);
        assert_eq!(lcmt_metrics(&p, 7, None, 0.01).unwrap().single_sample_bytes, 100);
    }

    #[test]
    fn lcmt_table_values() {
        let m = lcmt_metrics(&t1(), 7, None, 0.01).unwrap();
        assert_eq!((m.root_bytes, m.ic_proof_bytes), (256, 1_540_704));
        assert_eq!(m.total_download_bytes, None);
        let m = lcmt_metrics(&t1(), 7, Some(Ratio::from_integer(100)), 0.01).unwrap();
        assert!(m.total_download_bytes.is_some());
        assert!(lcmt_metrics(&t1(), 1, None, 0.01).is_err());
    }

    #[test]
    fn rs2d_table_values() {
        assert_eq!(rs2d_metrics(&t1(), None, 0.01).unwrap().root_bytes, 2048);
        assert_eq!(rs2d_metrics(&t2(), None, 0.01).unwrap().root_bytes, 5824);
        let m = rs2d_metrics(&t1(), None, 0.01).unwrap();
        assert_eq!(m.single_sample_bytes, 256_000 + 32 * 5);
        assert_eq!(m.ic_proof_bytes, (256_000 + 32 * 5) * 23);
    }

    #[test]
    fn sample_gap_is_hash_penalty() {
        let p = t1();
        let gap = pcmt_metrics(&p, 0.01).unwrap().single_sample_bytes - lcmt_metrics(&p, 7, None, 0.01).unwrap().single_sample_bytes;
        let sizes = p.layer_sizes().unwrap();
        let sum: u64 = sizes[..sizes.len() - 1].iter().map(|&n| ceil_log2(n) as u64).sum();
        assert_eq!(gap, 2 * 4 * 32 * sum);
    }

    #[test]
    fn integer_roots() {
        assert_eq!(ceil_sqrt(1024), 32);
        assert_eq!(ceil_sqrt(8192), 91);
        assert_eq!(ceil_sqrt(512), 23);
        assert_eq!(ceil_log2_sqrt(1024), 5);
        assert_eq!(ceil_log2_sqrt(8192), 7);
        assert_eq!(ceil_log2_sqrt(1), 0);
    }

    fn grid_with(c: u32) -> SweepGrid {
        SweepGrid {
            rates: vec![RateSpec { num: 1, den: 2 }],
            q: vec![4],
            l: vec![4],
            c_bytes: vec![c],
            b_bytes: (4..=12).map(|e| c as u64 * (1u64 << e)).collect(),
            budget_divisors: vec![3, 5],
            d_c: Some(7),
        }
    }

    fn grid() -> SweepGrid {
        grid_with(1000)
    }

    #[test]
    fn sweep_pf_decreases_with_block_size() {
        let rows = sweep(&grid_with(256_000), &BTreeMap::new()).unwrap();
        let pcmt3: Vec<f64> =
            rows.iter().filter(|r| r.scheme == Scheme::Pcmt).step_by(2).map(|r| r.pf.unwrap()).collect();
        assert!(pcmt3.windows(2).all(|w| w[1] < w[0]), "{pcmt3:?}");
        assert!(rows.iter().filter(|r| r.scheme == Scheme::Lcmt).all(|r| r.pf.is_none() && r.alpha_num.is_none()));
    }

    #[test]
    fn budgets_differ_only_in_downloads() {
        let rows = sweep(&grid(), &BTreeMap::new()).unwrap();
        let pcmt: Vec<&SweepRow> = rows.iter().filter(|r| r.scheme == Scheme::Pcmt).collect();
        for pair in pcmt.chunks(2) {
            let (a, b) = (pair[0], pair[1]);
            assert_ne!(a.s, b.s);
            let strip = |r: &SweepRow| SweepRow { s: None, pf: None, total_download_bytes: None, ..r.clone() };
            assert_eq!(strip(a), strip(b));
        }
    }

    #[test]
    fn csv_header_and_blank_cells() {
        let mut alphas = BTreeMap::new();
        alphas.insert(32, Ratio::new(5, 1));
        let rows = sweep(&grid(), &alphas).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_HEADER.join(","));
        let lcmt: Vec<&str> = lines.filter(|l| l.starts_with("lcmt")).collect();
        assert!(lcmt.iter().any(|l| l.ends_with(",,,,,")));
        assert!(lcmt.iter().any(|l| l.contains(",16,1,2,4,4,1000,16000,") && !l.ends_with(",")));
    }

    #[test]
    fn alpha_table_parses() {
        let table = read_alpha_table("n,alpha_num,alpha_den\n1024,41,2\n".as_bytes()).unwrap();
        assert_eq!(table[&1024], Ratio::new(41, 2));
        assert!(read_alpha_table("n,alpha_num,alpha_den\n4,1,0\n".as_bytes()).is_err());
    }
}
