use crate::packet_io::{CaptureFile, PacketRecord, RawFrame};

/// A capture whose packets carry exactly the given content bytes.
pub(crate) fn capture_with_contents(contents: &[&[u8]]) -> CaptureFile {
    let packets = contents
        .iter()
        .map(|c| {
            let mut p = PacketRecord::from_frame(RawFrame::new(0, 0, Vec::new()));
            p.content = c.to_vec();
            p
        })
        .collect();
    CaptureFile {
        path: "mem".into(),
        packets,
        byte_size: 0,
    }
}
