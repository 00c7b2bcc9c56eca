//! Classic pcap reading/writing and per-packet content extraction.
//!
//! Only the classic libpcap container with Ethernet link type is handled.
//! Both byte orders are accepted on read; files are always written
//! little-endian with microsecond timestamps.

use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use crate::codec::{read_file, write_file};
use crate::error::{Error, Result};

pub const PCAP_MAGIC: u32 = 0xa1b2_c3d4;
pub const PCAP_MAGIC_SWAPPED: u32 = 0xd4c3_b2a1;
pub const GLOBAL_HEADER_LEN: usize = 24;
pub const RECORD_HEADER_LEN: usize = 16;
pub const MAX_FRAME_LEN: usize = 65535;
pub const LINKTYPE_ETHERNET: u32 = 1;

pub const ETHERNET_HEADER_LEN: usize = 14;
const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86dd;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88a8;

const IPPROTO_ICMP: u8 = 1;
const IPPROTO_TCP: u8 = 6;
const IPPROTO_UDP: u8 = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
    Other,
}

/// What sits above the link header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetworkLayer {
    Ipv4,
    /// IPv6 frames carry no identity stripping beyond the link header.
    Ipv6,
    /// ARP, deeper VLAN stacks and anything else that is not IP.
    NonIp,
    /// The frame is shorter than an Ethernet header.
    Missing,
}

/// Identity fields removed from a frame by [`extract_content`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketMeta {
    pub network: NetworkLayer,
    pub protocol: Protocol,
    pub src_ip: Option<Ipv4Addr>,
    pub dst_ip: Option<Ipv4Addr>,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
}

impl PacketMeta {
    fn absent(network: NetworkLayer) -> Self {
        Self {
            network,
            protocol: Protocol::Other,
            src_ip: None,
            dst_ip: None,
            src_port: None,
            dst_port: None,
        }
    }
}

/// One frame as stored in a capture file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    pub ts_sec: u32,
    pub ts_usec: u32,
    pub data: Vec<u8>,
    /// Length on the wire; equals `data.len()` unless the capture was snapped.
    pub orig_len: u32,
}

impl RawFrame {
    pub fn new(ts_sec: u32, ts_usec: u32, data: Vec<u8>) -> Self {
        let orig_len = data.len() as u32;
        Self {
            ts_sec,
            ts_usec,
            data,
            orig_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    pub ts_sec: u32,
    pub ts_usec: u32,
    pub src_ip: Option<Ipv4Addr>,
    pub dst_ip: Option<Ipv4Addr>,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    pub protocol: Protocol,
    pub network: NetworkLayer,
    /// The n-gram-eligible bytes: the frame minus link header, IPv4
    /// addresses and TCP/UDP ports.
    pub content: Vec<u8>,
    /// Captured length in bytes.
    pub raw_len: u32,
    pub orig_len: u32,
    pub frame: Vec<u8>,
}

impl PacketRecord {
    pub fn from_frame(frame: RawFrame) -> Self {
        let (meta, content) = extract_content(&frame.data);
        Self {
            ts_sec: frame.ts_sec,
            ts_usec: frame.ts_usec,
            src_ip: meta.src_ip,
            dst_ip: meta.dst_ip,
            src_port: meta.src_port,
            dst_port: meta.dst_port,
            protocol: meta.protocol,
            network: meta.network,
            content,
            raw_len: frame.data.len() as u32,
            orig_len: frame.orig_len,
            frame: frame.data,
        }
    }

    pub fn timestamp_micros(&self) -> u64 {
        u64::from(self.ts_sec) * 1_000_000 + u64::from(self.ts_usec)
    }

    pub fn to_raw_frame(&self) -> RawFrame {
        RawFrame {
            ts_sec: self.ts_sec,
            ts_usec: self.ts_usec,
            data: self.frame.clone(),
            orig_len: self.orig_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureFile {
    pub path: PathBuf,
    pub packets: Vec<PacketRecord>,
    pub byte_size: u64,
}

impl CaptureFile {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endianness {
    Little,
    Big,
}

pub fn read_capture(path: impl AsRef<Path>) -> Result<CaptureFile> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    parse_capture(&bytes, path)
}

/// Parses an in-memory pcap image. `path` is only recorded on the result.
pub fn parse_capture(bytes: &[u8], path: impl Into<PathBuf>) -> Result<CaptureFile> {
    let frames = parse_frames(bytes)?;
    Ok(CaptureFile {
        path: path.into(),
        packets: frames.into_iter().map(PacketRecord::from_frame).collect(),
        byte_size: bytes.len() as u64,
    })
}

pub fn parse_frames(bytes: &[u8]) -> Result<Vec<RawFrame>> {
    const FMT: &str = "pcap global header";
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(Error::format(
            FMT,
            bytes.len() as u64,
            format!("file is {} bytes, header needs 24", bytes.len()),
        ));
    }
    let endian = match u32::from_le_bytes(bytes[0..4].try_into().unwrap()) {
        PCAP_MAGIC => Endianness::Little,
        PCAP_MAGIC_SWAPPED => Endianness::Big,
        other => {
            return Err(Error::format(
                FMT,
                0,
                format!("unknown magic {other:#010x}"),
            ))
        }
    };
    let rd32 = |at: usize| -> u32 {
        let raw: [u8; 4] = bytes[at..at + 4].try_into().unwrap();
        match endian {
            Endianness::Little => u32::from_le_bytes(raw),
            Endianness::Big => u32::from_be_bytes(raw),
        }
    };
    let rd16 = |at: usize| -> u16 {
        let raw: [u8; 2] = bytes[at..at + 2].try_into().unwrap();
        match endian {
            Endianness::Little => u16::from_le_bytes(raw),
            Endianness::Big => u16::from_be_bytes(raw),
        }
    };
    let major = rd16(4);
    if major != 2 {
        return Err(Error::format(
            FMT,
            4,
            format!("unsupported version {major}"),
        ));
    }
    let linktype = rd32(20);
    if linktype != LINKTYPE_ETHERNET {
        return Err(Error::format(
            FMT,
            20,
            format!("unsupported link type {linktype}, only Ethernet (1) is handled"),
        ));
    }

    let mut frames = Vec::new();
    let mut pos = GLOBAL_HEADER_LEN;
    while pos < bytes.len() {
        let index = frames.len();
        if bytes.len() - pos < RECORD_HEADER_LEN {
            return Err(Error::Truncated {
                index,
                reason: format!("record header needs 16 bytes, {} left", bytes.len() - pos),
            });
        }
        let ts_sec = rd32(pos);
        let ts_usec = rd32(pos + 4);
        let incl_len = rd32(pos + 8) as usize;
        let orig_len = rd32(pos + 12);
        if ts_usec >= 1_000_000 {
            return Err(Error::format(
                "pcap record header",
                (pos + 4) as u64,
                format!("record {index}: microseconds field {ts_usec} out of range"),
            ));
        }
        pos += RECORD_HEADER_LEN;
        if bytes.len() - pos < incl_len {
            return Err(Error::Truncated {
                index,
                reason: format!(
                    "declares {incl_len} captured bytes, {} left",
                    bytes.len() - pos
                ),
            });
        }
        frames.push(RawFrame {
            ts_sec,
            ts_usec,
            data: bytes[pos..pos + incl_len].to_vec(),
            orig_len,
        });
        pos += incl_len;
    }
    Ok(frames)
}

pub fn encode_capture(frames: &[RawFrame], endian: Endianness) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(
        GLOBAL_HEADER_LEN
            + frames
                .iter()
                .map(|f| RECORD_HEADER_LEN + f.data.len())
                .sum::<usize>(),
    );
    let put32 = |out: &mut Vec<u8>, v: u32| match endian {
        Endianness::Little => out.extend_from_slice(&v.to_le_bytes()),
        Endianness::Big => out.extend_from_slice(&v.to_be_bytes()),
    };
    let put16 = |out: &mut Vec<u8>, v: u16| match endian {
        Endianness::Little => out.extend_from_slice(&v.to_le_bytes()),
        Endianness::Big => out.extend_from_slice(&v.to_be_bytes()),
    };
    put32(&mut out, PCAP_MAGIC);
    put16(&mut out, 2);
    put16(&mut out, 4);
    put32(&mut out, 0); // thiszone
    put32(&mut out, 0); // sigfigs
    put32(&mut out, MAX_FRAME_LEN as u32);
    put32(&mut out, LINKTYPE_ETHERNET);
    for (index, frame) in frames.iter().enumerate() {
        if frame.data.len() > MAX_FRAME_LEN {
            return Err(Error::OversizedFrame {
                index,
                len: frame.data.len(),
            });
        }
        if frame.ts_usec >= 1_000_000 {
            return Err(Error::InvalidParameter(format!(
                "frame {index}: microseconds {} out of range",
                frame.ts_usec
            )));
        }
        put32(&mut out, frame.ts_sec);
        put32(&mut out, frame.ts_usec);
        put32(&mut out, frame.data.len() as u32);
        put32(&mut out, frame.orig_len.max(frame.data.len() as u32));
        out.extend_from_slice(&frame.data);
    }
    Ok(out)
}

pub fn write_capture(frames: &[RawFrame], path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_capture(frames, Endianness::Little)?;
    write_file(path.as_ref(), &bytes)
}

/// Splits a link-layer frame into identity metadata and content bytes.
///
/// Content is the frame with the Ethernet header (plus one 802.1Q tag), the
/// IPv4 source/destination addresses and the TCP/UDP ports removed. Every
/// other byte is kept in its original order.
pub fn extract_content(frame: &[u8]) -> (PacketMeta, Vec<u8>) {
    if frame.len() < ETHERNET_HEADER_LEN {
        return (PacketMeta::absent(NetworkLayer::Missing), Vec::new());
    }
    let mut ethertype = u16::from_be_bytes([frame[12], frame[13]]);
    let mut l3 = ETHERNET_HEADER_LEN;
    if ethertype == ETHERTYPE_VLAN {
        if frame.len() < l3 + 4 {
            return (
                PacketMeta::absent(NetworkLayer::NonIp),
                frame[ETHERNET_HEADER_LEN..].to_vec(),
            );
        }
        ethertype = u16::from_be_bytes([frame[16], frame[17]]);
        l3 += 4;
        if ethertype == ETHERTYPE_VLAN || ethertype == ETHERTYPE_QINQ {
            // Stacked tags are not unwrapped.
            return (
                PacketMeta::absent(NetworkLayer::NonIp),
                frame[ETHERNET_HEADER_LEN..].to_vec(),
            );
        }
    }
    match ethertype {
        ETHERTYPE_IPV4 => strip_ipv4(&frame[l3..]),
        ETHERTYPE_IPV6 => (PacketMeta::absent(NetworkLayer::Ipv6), frame[l3..].to_vec()),
        _ => (
            PacketMeta::absent(NetworkLayer::NonIp),
            frame[ETHERNET_HEADER_LEN..].to_vec(),
        ),
    }
}

fn strip_ipv4(ip: &[u8]) -> (PacketMeta, Vec<u8>) {
    let mut meta = PacketMeta::absent(NetworkLayer::Ipv4);
    let mut content = Vec::with_capacity(ip.len());
    let ihl = ip.first().map_or(0, |b| usize::from(b & 0x0f) * 4);
    let version_ok = ip.first().is_some_and(|b| b >> 4 == 4);
    if ip.len() < 20 || ihl < 20 || !version_ok {
        // Malformed or truncated header: drop whatever part of the address
        // fields is present and keep the rest untouched.
        content.extend_from_slice(&ip[..ip.len().min(12)]);
        if ip.len() > 20 {
            content.extend_from_slice(&ip[20..]);
        }
        return (meta, content);
    }
    meta.src_ip = Some(Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]));
    meta.dst_ip = Some(Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]));
    content.extend_from_slice(&ip[..12]);
    let header_end = ihl.min(ip.len());
    content.extend_from_slice(&ip[20..header_end]);
    let transport = &ip[header_end..];

    let fragment_offset = u16::from_be_bytes([ip[6], ip[7]]) & 0x1fff;
    let proto = ip[9];
    let has_ports = matches!(proto, IPPROTO_TCP | IPPROTO_UDP) && fragment_offset == 0;
    if has_ports && transport.len() >= 4 {
        meta.protocol = if proto == IPPROTO_TCP {
            Protocol::Tcp
        } else {
            Protocol::Udp
        };
        meta.src_port = Some(u16::from_be_bytes([transport[0], transport[1]]));
        meta.dst_port = Some(u16::from_be_bytes([transport[2], transport[3]]));
        content.extend_from_slice(&transport[4..]);
    } else if has_ports {
        // Cut short inside the port fields; nothing after them survives.
    } else {
        // Non-first fragments carry no transport header, so no ports either.
        meta.protocol = if proto == IPPROTO_ICMP {
            Protocol::Icmp
        } else {
            Protocol::Other
        };
        content.extend_from_slice(transport);
    }
    (meta, content)
}

/// Assembly of well-formed Ethernet/IPv4 frames for fixtures and generators.
pub mod frame {
    use std::net::Ipv4Addr;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Transport {
        Tcp {
            src_port: u16,
            dst_port: u16,
            seq: u32,
            flags: u8,
        },
        Udp {
            src_port: u16,
            dst_port: u16,
        },
        Icmp {
            kind: u8,
            code: u8,
        },
    }

    #[derive(Debug, Clone)]
    pub struct Ipv4Frame<'a> {
        pub src_mac: [u8; 6],
        pub dst_mac: [u8; 6],
        pub src_ip: Ipv4Addr,
        pub dst_ip: Ipv4Addr,
        pub ttl: u8,
        pub ident: u16,
        pub transport: Transport,
        pub payload: &'a [u8],
    }

    impl<'a> Ipv4Frame<'a> {
        pub fn new(
            src_ip: Ipv4Addr,
            dst_ip: Ipv4Addr,
            transport: Transport,
            payload: &'a [u8],
        ) -> Self {
            Self {
                src_mac: [0x02, 0, 0, 0, 0, 0x01],
                dst_mac: [0x02, 0, 0, 0, 0, 0x02],
                src_ip,
                dst_ip,
                ttl: 64,
                ident: 0,
                transport,
                payload,
            }
        }

        pub fn build(&self) -> Vec<u8> {
            let (proto, l4) = match self.transport {
                Transport::Tcp {
                    src_port,
                    dst_port,
                    seq,
                    flags,
                } => {
                    let mut h = Vec::with_capacity(20 + self.payload.len());
                    h.extend_from_slice(&src_port.to_be_bytes());
                    h.extend_from_slice(&dst_port.to_be_bytes());
                    h.extend_from_slice(&seq.to_be_bytes());
                    h.extend_from_slice(&0u32.to_be_bytes()); // ack
                    h.push(5 << 4); // data offset
                    h.push(flags);
                    h.extend_from_slice(&64240u16.to_be_bytes()); // window
                    h.extend_from_slice(&[0, 0, 0, 0]); // checksum, urgent
                    h.extend_from_slice(self.payload);
                    let sum = transport_checksum(self.src_ip, self.dst_ip, 6, &h);
                    h[16..18].copy_from_slice(&sum.to_be_bytes());
                    (6u8, h)
                }
                Transport::Udp { src_port, dst_port } => {
                    let len = (8 + self.payload.len()) as u16;
                    let mut h = Vec::with_capacity(len as usize);
                    h.extend_from_slice(&src_port.to_be_bytes());
                    h.extend_from_slice(&dst_port.to_be_bytes());
                    h.extend_from_slice(&len.to_be_bytes());
                    h.extend_from_slice(&[0, 0]);
                    h.extend_from_slice(self.payload);
                    let sum = match transport_checksum(self.src_ip, self.dst_ip, 17, &h) {
                        0 => 0xffff,
                        s => s,
                    };
                    h[6..8].copy_from_slice(&sum.to_be_bytes());
                    (17u8, h)
                }
                Transport::Icmp { kind, code } => {
                    let mut h = vec![kind, code, 0, 0, 0, 0, 0, 0];
                    h.extend_from_slice(self.payload);
                    let sum = internet_checksum(&h, 0);
                    h[2..4].copy_from_slice(&sum.to_be_bytes());
                    (1u8, h)
                }
            };
            let total_len = (20 + l4.len()) as u16;
            let mut out = Vec::with_capacity(14 + total_len as usize);
            out.extend_from_slice(&self.dst_mac);
            out.extend_from_slice(&self.src_mac);
            out.extend_from_slice(&0x0800u16.to_be_bytes());
            let mut ip = [0u8; 20];
            ip[0] = 0x45;
            ip[2..4].copy_from_slice(&total_len.to_be_bytes());
            ip[4..6].copy_from_slice(&self.ident.to_be_bytes());
            ip[6] = 0x40; // don't fragment
            ip[8] = self.ttl;
            ip[9] = proto;
            ip[12..16].copy_from_slice(&self.src_ip.octets());
            ip[16..20].copy_from_slice(&self.dst_ip.octets());
            let sum = internet_checksum(&ip, 0);
            ip[10..12].copy_from_slice(&sum.to_be_bytes());
            out.extend_from_slice(&ip);
            out.extend_from_slice(&l4);
            out
        }
    }

    fn transport_checksum(src: Ipv4Addr, dst: Ipv4Addr, proto: u8, segment: &[u8]) -> u16 {
        let mut pseudo = 0u32;
        for pair in src.octets().chunks(2).chain(dst.octets().chunks(2)) {
            pseudo += u32::from(u16::from_be_bytes([pair[0], pair[1]]));
        }
        pseudo += u32::from(proto);
        pseudo += segment.len() as u32;
        internet_checksum(segment, pseudo)
    }

    fn internet_checksum(data: &[u8], initial: u32) -> u16 {
        let mut sum = initial;
        let mut chunks = data.chunks_exact(2);
        for c in &mut chunks {
            sum += u32::from(u16::from_be_bytes([c[0], c[1]]));
        }
        if let [last] = chunks.remainder() {
            sum += u32::from(*last) << 8;
        }
        while sum > 0xffff {
            sum = (sum & 0xffff) + (sum >> 16);
        }
        !(sum as u16)
    }
}
