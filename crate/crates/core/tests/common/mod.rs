//! Fixtures and brute-force oracles shared by the integration tests and the
//! acceptance harness.
#![allow(dead_code)]

pub mod fuzz;
pub mod oracles;
pub mod scenario;

use std::net::Ipv4Addr;
use std::path::PathBuf;

use packet2vec::packet_io::frame::{Ipv4Frame, Transport};
use packet2vec::{CaptureFile, PacketRecord, RawFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fails with `msg` unless `cond` holds.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Runs `case` on `instances` seeded instances, reporting the first failure.
pub fn run_cases(
    instances: usize,
    seed: u64,
    mut case: impl FnMut(&mut ChaCha8Rng) -> Check,
) -> Check {
    for i in 0..instances {
        let mut r = rng(seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
        case(&mut r).map_err(|e| format!("instance {i}: {e}"))?;
    }
    Ok(())
}

pub fn capture_from_frames(frames: Vec<RawFrame>) -> CaptureFile {
    let byte_size = frames.iter().map(|f| 16 + f.data.len() as u64).sum::<u64>() + 24;
    CaptureFile {
        path: PathBuf::from("mem.pcap"),
        packets: frames.into_iter().map(PacketRecord::from_frame).collect(),
        byte_size,
    }
}

/// Random bytes drawn from a small alphabet so n-grams repeat and tie.
pub fn random_bytes(r: &mut ChaCha8Rng, len: usize, alphabet: u8) -> Vec<u8> {
    (0..len).map(|_| r.random_range(0..alphabet)).collect()
}

pub fn random_transport(r: &mut ChaCha8Rng, ports: &[u16]) -> Transport {
    let port = |r: &mut ChaCha8Rng| ports[r.random_range(0..ports.len())];
    match r.random_range(0..3) {
        0 => Transport::Tcp {
            src_port: port(r),
            dst_port: port(r),
            seq: r.random(),
            flags: 0x10,
        },
        1 => Transport::Udp {
            src_port: port(r),
            dst_port: port(r),
        },
        _ => Transport::Icmp { kind: 8, code: 0 },
    }
}

/// A capture of well-formed IPv4 frames with small-alphabet payloads.
pub fn random_ipv4_capture(r: &mut ChaCha8Rng, packets: usize, max_payload: usize) -> CaptureFile {
    let hosts = [
        Ipv4Addr::new(10, 0, 0, 1),
        Ipv4Addr::new(10, 0, 0, 2),
        Ipv4Addr::new(192, 168, 1, 7),
        Ipv4Addr::new(172, 16, 0, 9),
    ];
    let frames = (0..packets)
        .map(|_| {
            let payload = {
                let k = r.random_range(0..=max_payload);
                random_bytes(r, k, 6)
            };
            let t = random_transport(r, &[22, 80, 443, 5353]);
            let src = hosts[r.random_range(0..hosts.len())];
            let dst = hosts[r.random_range(0..hosts.len())];
            let data = Ipv4Frame::new(src, dst, t, &payload).build();
            RawFrame::new(r.random_range(100..110), r.random_range(0..1_000_000), data)
        })
        .collect();
    capture_from_frames(frames)
}

/// A capture whose frames are arbitrary bytes, most too short or malformed
/// to parse as IPv4.
pub fn random_raw_capture(r: &mut ChaCha8Rng, packets: usize, max_len: usize) -> CaptureFile {
    let frames = (0..packets)
        .map(|_| {
            RawFrame::new(0, 0, {
                let k = r.random_range(0..=max_len);
                random_bytes(r, k, 5)
            })
        })
        .collect();
    capture_from_frames(frames)
}
