//! Deterministic synthetic captures with a matching attack CSV.
//!
//! Benign hosts live in 192.168.0.0/16 and attackers in 10.66.0.0/16, so an
//! attack record naming an attacker address over a time window selects
//! exactly that attacker's packets.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::groundtruth::{save_attack_records, AttackRecord, PortMatch};
use crate::packet_io::frame::{Ipv4Frame, Transport};
use crate::packet_io::{write_capture, RawFrame};

/// First capture starts at this Unix time; files are `FILE_SPACING_S` apart.
const BASE_TIME_S: u64 = 1_600_000_000;
const FILE_SPACING_S: u64 = 100_000;
/// Mean gap between packets; each gap is drawn from `1..=2 * PACKET_GAP_US`.
const PACKET_GAP_US: u64 = 500;

const BENIGN_HOSTS: u16 = 200;
const ATTACKERS: u16 = 8;

const TEXT_WORDS: &[&[u8]] = &[
    b"GET ",
    b"POST ",
    b"HTTP/1.1",
    b"Host: ",
    b"example.com",
    b"index.html",
    b"Accept: */*",
    b"Content-Length: ",
    b"User-Agent: ",
    b"Mozilla/5.0",
    b"\r\n",
    b"text/html",
    b"200 OK",
    b"keep-alive",
    b"cookie=",
    b"session",
    b"login",
    b"images/",
    b"style.css",
    b"<html>",
];

/// Bytes typical of shellcode: NOP sleds, short jumps, int3, xor and syscall
/// fragments.
pub const EXPLOIT_ALPHABET: &[u8] = &[
    0x90, 0x90, 0x90, 0xcc, 0xeb, 0xfe, 0x31, 0xc0, 0x50, 0x68, 0x2f, 0x73, 0x89, 0xe3, 0xcd, 0x80,
    0x0f, 0x05, 0x48, 0xff,
];

/// How a packet's application payload is drawn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BytePattern {
    /// HTTP-like words interleaved with printable ASCII.
    Text,
    /// Bytes drawn uniformly from the given multiset.
    Alphabet(Vec<u8>),
    /// Uniform random bytes.
    Uniform,
}

impl BytePattern {
    fn fill<R: Rng>(&self, rng: &mut R, len: usize, out: &mut Vec<u8>) {
        out.clear();
        match self {
            BytePattern::Text => {
                while out.len() < len {
                    if rng.random_bool(0.6) {
                        out.extend_from_slice(TEXT_WORDS.choose(rng).unwrap());
                    } else {
                        for _ in 0..rng.random_range(1..8) {
                            out.push(rng.random_range(b'a'..=b'z'));
                        }
                    }
                }
                out.truncate(len);
            }
            BytePattern::Alphabet(bytes) => {
                out.extend((0..len).map(|_| *bytes.choose(rng).unwrap_or(&0)));
            }
            BytePattern::Uniform => out.extend((0..len).map(|_| rng.random::<u8>())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub files: usize,
    pub packets_per_file: usize,
    /// Probability that a packet is malicious, drawn per packet.
    pub malicious_fraction: f64,
    pub benign: BytePattern,
    pub malicious: BytePattern,
    /// Inclusive payload length range in bytes.
    pub payload_len: (usize, usize),
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            files: 4,
            packets_per_file: 1000,
            malicious_fraction: 0.005,
            benign: BytePattern::Text,
            malicious: BytePattern::Alphabet(EXPLOIT_ALPHABET.to_vec()),
            payload_len: (40, 240),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub captures: Vec<PathBuf>,
    pub attack_csv: PathBuf,
    pub records: Vec<AttackRecord>,
    /// Malicious packets per capture, in capture order.
    pub malicious_counts: Vec<usize>,
}

struct SynthFile {
    frames: Vec<RawFrame>,
    records: Vec<AttackRecord>,
    malicious: usize,
}

fn benign_host(i: u16) -> Ipv4Addr {
    Ipv4Addr::new(192, 168, (i >> 8) as u8, (i & 0xff) as u8 + 1)
}

fn attacker_host(i: u16) -> Ipv4Addr {
    Ipv4Addr::new(10, 66, (i >> 8) as u8, (i & 0xff) as u8 + 1)
}

fn split_micros(us: u64) -> (u32, u32) {
    ((us / 1_000_000) as u32, (us % 1_000_000) as u32)
}

fn generate_file(spec: &SynthSpec, index: usize) -> SynthFile {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let mut ts = (BASE_TIME_S + index as u64 * FILE_SPACING_S) * 1_000_000;
    let mut frames = Vec::with_capacity(spec.packets_per_file);
    let mut windows: BTreeMap<u16, (u64, u64)> = BTreeMap::new();
    let mut payload = Vec::new();
    let mut malicious = 0;
    let (lo, hi) = spec.payload_len;
    for _ in 0..spec.packets_per_file {
        ts += rng.random_range(1..=2 * PACKET_GAP_US);
        let is_attack = rng.random_bool(spec.malicious_fraction);
        let len = rng.random_range(lo..=hi);
        let server = benign_host(rng.random_range(0..BENIGN_HOSTS / 10));
        let (src, dst, transport) = if is_attack {
            malicious += 1;
            let a = rng.random_range(0..ATTACKERS);
            let w = windows.entry(a).or_insert((ts, ts));
            w.1 = ts;
            spec.malicious.fill(&mut rng, len, &mut payload);
            let t = Transport::Tcp {
                src_port: rng.random_range(1024..65535),
                dst_port: *[80u16, 445, 139, 21].choose(&mut rng).unwrap(),
                seq: rng.random(),
                flags: 0x18,
            };
            (attacker_host(a), server, t)
        } else {
            let client = benign_host(rng.random_range(BENIGN_HOSTS / 10..BENIGN_HOSTS));
            spec.benign.fill(&mut rng, len, &mut payload);
            let t = match rng.random_range(0..20) {
                0 => Transport::Icmp { kind: 8, code: 0 },
                1..=5 => Transport::Udp {
                    src_port: rng.random_range(1024..65535),
                    dst_port: 53,
                },
                _ => Transport::Tcp {
                    src_port: rng.random_range(1024..65535),
                    dst_port: *[80u16, 443, 8080].choose(&mut rng).unwrap(),
                    seq: rng.random(),
                    flags: 0x18,
                },
            };
            if rng.random_bool(0.5) {
                (client, server, t)
            } else {
                (server, client, t)
            }
        };
        let mut f = Ipv4Frame::new(src, dst, transport, &payload);
        f.ident = rng.random();
        let (sec, usec) = split_micros(ts);
        frames.push(RawFrame::new(sec, usec, f.build()));
    }
    let records = windows
        .into_iter()
        .map(|(a, (start, end))| AttackRecord {
            start_us: start,
            end_us: end,
            ip_a: attacker_host(a),
            ip_b: None,
            port: PortMatch::Any,
            category: "synthetic-exploit".into(),
        })
        .collect();
    SynthFile {
        frames,
        records,
        malicious,
    }
}

pub fn capture_name(index: usize) -> String {
    format!("capture-{index:03}.pcap")
}

/// Writes `capture-NNN.pcap` files and `attacks.csv` into `dir`.
pub fn generate_synthetic_corpus(spec: &SynthSpec, dir: impl AsRef<Path>) -> Result<SynthCorpus> {
    if !(0.0..=1.0).contains(&spec.malicious_fraction) {
        return Err(Error::InvalidParameter(format!(
            "malicious fraction {} outside [0, 1]",
            spec.malicious_fraction
        )));
    }
    let (lo, hi) = spec.payload_len;
    if lo > hi || hi > 1400 {
        return Err(Error::InvalidParameter(format!(
            "bad payload length range {lo}..={hi}"
        )));
    }
    if matches!(&spec.malicious, BytePattern::Alphabet(a) if a.is_empty())
        || matches!(&spec.benign, BytePattern::Alphabet(a) if a.is_empty())
    {
        return Err(Error::InvalidParameter("empty byte alphabet".into()));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let results: Vec<Result<(PathBuf, Vec<AttackRecord>, usize)>> = (0..spec.files)
        .into_par_iter()
        .map(|i| {
            let file = generate_file(spec, i);
            let path = dir.join(capture_name(i));
            write_capture(&file.frames, &path)?;
            Ok((path, file.records, file.malicious))
        })
        .collect();
    let mut corpus = SynthCorpus {
        captures: Vec::with_capacity(spec.files),
        attack_csv: dir.join("attacks.csv"),
        records: Vec::new(),
        malicious_counts: Vec::with_capacity(spec.files),
    };
    for r in results {
        let (path, records, malicious) = r?;
        corpus.captures.push(path);
        corpus.records.extend(records);
        corpus.malicious_counts.push(malicious);
    }
    save_attack_records(&corpus.records, &corpus.attack_csv)?;
    Ok(corpus)
}
