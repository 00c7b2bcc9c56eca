//! Per-packet labels from attack windows (time range, addresses, port).

use std::fmt::Write as _;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::codec::{read_file, write_file};
use crate::error::{Error, Result};
use crate::packet_io::{CaptureFile, PacketRecord};

pub const ATTACK_CSV_HEADER: [&str; 6] = ["start_ts", "end_ts", "ip_a", "ip_b", "port", "category"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortMatch {
    Any,
    Port(u16),
}

impl PortMatch {
    fn matches(&self, p: &PacketRecord) -> bool {
        match self {
            PortMatch::Any => true,
            PortMatch::Port(port) => p.src_port == Some(*port) || p.dst_port == Some(*port),
        }
    }
}

/// One malicious window. Times are microseconds since the epoch; the CSV
/// form writes them as decimal seconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackRecord {
    pub start_us: u64,
    pub end_us: u64,
    pub ip_a: Ipv4Addr,
    pub ip_b: Option<Ipv4Addr>,
    pub port: PortMatch,
    pub category: String,
}

impl AttackRecord {
    /// Time window inclusive at both ends, any listed address on either side
    /// of the packet, and the port (unless wildcard) on either endpoint.
    pub fn matches(&self, p: &PacketRecord) -> bool {
        let ts = p.timestamp_micros();
        if ts < self.start_us || ts > self.end_us {
            return false;
        }
        let names = |ip: Ipv4Addr| p.src_ip == Some(ip) || p.dst_ip == Some(ip);
        let ip_hit = names(self.ip_a) || self.ip_b.is_some_and(names);
        ip_hit && self.port.matches(p)
    }
}

/// Parses decimal seconds ("100", "100.25") into exact microseconds.
pub fn parse_seconds(s: &str) -> Option<u64> {
    let (whole, frac) = match s.split_once('.') {
        Some((w, f)) => (w, f),
        None => (s, ""),
    };
    if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if frac.len() > 6 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let secs: u64 = whole.parse().ok()?;
    let mut micros = 0u64;
    for (i, b) in frac.bytes().enumerate() {
        micros += u64::from(b - b'0') * 10u64.pow(5 - i as u32);
    }
    secs.checked_mul(1_000_000)?.checked_add(micros)
}

pub fn format_seconds(us: u64) -> String {
    let (s, frac) = (us / 1_000_000, us % 1_000_000);
    if frac == 0 {
        s.to_string()
    } else {
        let digits = format!("{frac:06}");
        format!("{s}.{}", digits.trim_end_matches('0'))
    }
}

pub fn parse_attack_csv(text: &str) -> Result<Vec<AttackRecord>> {
    const FMT: &str = "attack CSV";
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        Error::format(FMT, line, e.to_string())
    };
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(ATTACK_CSV_HEADER.iter().copied()) {
        return Err(Error::format(
            FMT,
            1,
            format!(
                "missing or wrong header, expected `{}`",
                ATTACK_CSV_HEADER.join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |what: String| Error::format(FMT, line, what);
        let start_us =
            parse_seconds(&row[0]).ok_or_else(|| bad(format!("bad start_ts `{}`", &row[0])))?;
        let end_us =
            parse_seconds(&row[1]).ok_or_else(|| bad(format!("bad end_ts `{}`", &row[1])))?;
        if start_us > end_us {
            return Err(bad(format!(
                "start_ts {} is after end_ts {}",
                &row[0], &row[1]
            )));
        }
        let ip_a =
            Ipv4Addr::from_str(&row[2]).map_err(|_| bad(format!("bad ip_a `{}`", &row[2])))?;
        let ip_b = match &row[3] {
            "" => None,
            s => Some(Ipv4Addr::from_str(s).map_err(|_| bad(format!("bad ip_b `{s}`")))?),
        };
        let port = match &row[4] {
            "*" => PortMatch::Any,
            s => PortMatch::Port(s.parse().map_err(|_| bad(format!("bad port `{s}`")))?),
        };
        out.push(AttackRecord {
            start_us,
            end_us,
            ip_a,
            ip_b,
            port,
            category: row[5].to_string(),
        });
    }
    Ok(out)
}

pub fn load_attack_records(path: impl AsRef<Path>) -> Result<Vec<AttackRecord>> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|e| {
        Error::format(
            "attack CSV",
            e.utf8_error().valid_up_to() as u64,
            "not UTF-8",
        )
    })?;
    parse_attack_csv(&text)
}

pub fn attack_csv_string(records: &[AttackRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ATTACK_CSV_HEADER).unwrap();
    for r in records {
        let port = match r.port {
            PortMatch::Any => "*".to_string(),
            PortMatch::Port(p) => p.to_string(),
        };
        w.write_record([
            format_seconds(r.start_us),
            format_seconds(r.end_us),
            r.ip_a.to_string(),
            r.ip_b.map(|ip| ip.to_string()).unwrap_or_default(),
            port,
            r.category.clone(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn save_attack_records(records: &[AttackRecord], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), attack_csv_string(records).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelVector {
    pub source: PathBuf,
    labels: Vec<u8>,
    positive_count: usize,
}

impl LabelVector {
    pub fn new(source: impl Into<PathBuf>, labels: Vec<u8>) -> Result<Self> {
        if let Some(i) = labels.iter().position(|l| *l > 1) {
            return Err(Error::InvalidParameter(format!(
                "label {} at index {i} is not 0 or 1",
                labels[i]
            )));
        }
        let positive_count = labels.iter().filter(|l| **l == 1).count();
        Ok(Self {
            source: source.into(),
            labels,
            positive_count,
        })
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.positive_count
    }

    pub fn has_positive(&self) -> bool {
        self.positive_count > 0
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.labels.len() * 2);
        for l in &self.labels {
            let _ = writeln!(s, "{l}");
        }
        s
    }

    pub fn from_text(text: &str, source: impl Into<PathBuf>) -> Result<Self> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let mut labels = Vec::new();
        if !text.is_empty() {
            for (i, line) in body.split('\n').enumerate() {
                labels.push(match line {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(Error::format(
                            "label file",
                            i as u64 + 1,
                            format!("line {} is `{other}`, expected 0 or 1", i + 1),
                        ))
                    }
                });
            }
        }
        Self::new(source, labels)
    }
}

/// Records sorted by window start, so a packet only inspects windows that
/// have already opened.
#[derive(Debug, Clone)]
pub struct AttackIndex {
    records: Vec<AttackRecord>,
}

impl AttackIndex {
    pub fn new(records: &[AttackRecord]) -> Self {
        let mut records = records.to_vec();
        records.sort_by_key(|r| r.start_us);
        Self { records }
    }

    pub fn is_malicious(&self, p: &PacketRecord) -> bool {
        let ts = p.timestamp_micros();
        let opened = self.records.partition_point(|r| r.start_us <= ts);
        self.records[..opened].iter().any(|r| r.matches(p))
    }
}

pub fn label_capture(capture: &CaptureFile, records: &[AttackRecord]) -> LabelVector {
    let index = AttackIndex::new(records);
    let labels: Vec<u8> = capture
        .packets
        .par_iter()
        .map(|p| u8::from(index.is_malicious(p)))
        .collect();
    LabelVector::new(capture.path.clone(), labels).expect("labels are binary")
}

pub fn save_labels(labels: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), labels.to_text().as_bytes())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::format("label file", e.valid_up_to() as u64, "not UTF-8"))?;
    LabelVector::from_text(text, path)
}
