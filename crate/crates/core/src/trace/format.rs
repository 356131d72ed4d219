//! `MXT1` binary traces and the hexadecimal CSV debug format.
//!
//! Layout, little-endian:
//!
//! ```text
//! 0   magic "MXT1"
//! 4   u8  version (1)
//! 5   u8  kind (0 = full access, 1 = miss log)
//! 6   u8  page_size_bits
//! 7   u8  reserved (0)
//! 8   f32 capacity_fraction (0.0 for full-access traces)
//! 12  u32 reserved (0)
//! 16  records: (u64 vpn, u64 pc)*
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{AccessEvent, Trace, TraceError, TraceKind, DEFAULT_PAGE_SIZE_BITS};

pub const MAGIC: [u8; 4] = *b"MXT1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 16;

pub fn encode_trace(trace: &Trace) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * trace.events.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(trace.kind.code());
    out.push(trace.page_size_bits);
    out.push(0);
    out.extend_from_slice(&trace.kind.capacity_fraction().unwrap_or(0.0).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for e in &trace.events {
        out.extend_from_slice(&e.vpn.to_le_bytes());
        out.extend_from_slice(&e.pc.to_le_bytes());
    }
    out
}

pub fn decode_trace(bytes: &[u8]) -> Result<Trace, TraceError> {
    if bytes.len() < 4 {
        return Err(TraceError::Truncated("header shorter than magic"));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(TraceError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(TraceError::Truncated("incomplete header"));
    }
    if bytes[4] != VERSION {
        return Err(TraceError::UnsupportedVersion(bytes[4]));
    }
    let capacity_fraction = f32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let kind = match bytes[5] {
        0 => TraceKind::FullAccess,
        1 => TraceKind::MissLog { capacity_fraction },
        k => return Err(TraceError::UnknownKind(k)),
    };
    let page_size_bits = bytes[6];

    let body = &bytes[HEADER_LEN..];
    if !body.len().is_multiple_of(RECORD_LEN) {
        return Err(TraceError::Truncated("partial record at end of file"));
    }
    let events = body
        .chunks_exact(RECORD_LEN)
        .map(|r| AccessEvent {
            vpn: u64::from_le_bytes(r[..8].try_into().unwrap()),
            pc: u64::from_le_bytes(r[8..].try_into().unwrap()),
        })
        .collect();

    let trace = Trace { events, kind, page_size_bits };
    trace.validate()?;
    Ok(trace)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_trace(&bytes)
}

pub fn save_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<(), TraceError> {
    crate::fsutil::write_atomic(path.as_ref(), &encode_trace(trace))?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(trace: &Trace, w: W) -> Result<(), TraceError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["vpn", "pc"]).map_err(csv_err)?;
    for e in &trace.events {
        wtr.write_record([format!("{:#x}", e.vpn), format!("{:#x}", e.pc)]).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a `vpn,pc` CSV. Metadata is not carried by the text format, so the
/// result is always a full-access trace with 4 KB pages.
pub fn read_trace_csv<R: Read>(r: R) -> Result<Trace, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?;
    if headers.len() != 2 || &headers[0] != "vpn" || &headers[1] != "pc" {
        return Err(TraceError::Csv(format!("expected header \"vpn,pc\", got {headers:?}")));
    }
    let mut events = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| {
            parse_hex(rec.get(i).unwrap_or(""))
                .ok_or_else(|| TraceError::Csv(format!("row {}: bad hex field {:?}", line + 1, rec.get(i))))
        };
        events.push(AccessEvent::new(field(0)?, field(1)?));
    }
    let trace = Trace { events, kind: TraceKind::FullAccess, page_size_bits: DEFAULT_PAGE_SIZE_BITS };
    trace.validate()?;
    Ok(trace)
}

pub fn save_trace_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<(), TraceError> {
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf)?;
    crate::fsutil::write_atomic(path.as_ref(), &buf)?;
    Ok(())
}

pub fn load_trace_csv(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    read_trace_csv(fs::File::open(path)?)
}

fn parse_hex(s: &str) -> Option<u64> {
    let s = s.trim();
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    u64::from_str_radix(digits, 16).ok()
}

fn csv_err(e: csv::Error) -> TraceError {
    TraceError::Csv(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Builds the three-record example by hand, byte by byte.
    fn hand_written_three_records() -> Vec<u8> {
        let mut b = vec![b'M', b'X', b'T', b'1', 1, 0, 12, 0];
        b.extend_from_slice(&[0, 0, 0, 0]); // f32 0.0
        b.extend_from_slice(&[0, 0, 0, 0]);
        for vpn in 1u8..=3 {
            b.extend_from_slice(&[vpn, 0, 0, 0, 0, 0, 0, 0]);
            b.extend_from_slice(&[10, 0, 0, 0, 0, 0, 0, 0]);
        }
        b
    }

    #[test]
    fn header_only_file_is_sixteen_bytes() {
        let t = Trace::full_access(vec![]);
        let bytes = encode_trace(&t);
        assert_eq!(bytes.len(), 16);
        assert_eq!(decode_trace(&bytes).unwrap().events, vec![]);
    }

    #[test]
    fn one_event_adds_one_record() {
        let t = Trace::full_access(vec![AccessEvent::new(7, 9)]);
        assert_eq!(encode_trace(&t).len(), HEADER_LEN + 16);
    }

    #[test]
    fn decodes_hand_written_bytes_in_order() {
        let t = decode_trace(&hand_written_three_records()).unwrap();
        let got: Vec<_> = t.events.iter().map(|e| (e.vpn, e.pc)).collect();
        assert_eq!(got, vec![(1, 10), (2, 10), (3, 10)]);
        assert_eq!(t.kind, TraceKind::FullAccess);
        assert_eq!(encode_trace(&t), hand_written_three_records());
    }

    #[test]
    fn miss_log_header_carries_capacity() {
        let t = Trace::miss_log(vec![AccessEvent::new(1, 2)], 0.3);
        let bytes = encode_trace(&t);
        assert_eq!(bytes[5], 1);
        assert_eq!(&bytes[8..12], &0.3f32.to_le_bytes());
        assert_eq!(decode_trace(&bytes).unwrap(), t);
    }

    #[test]
    fn load_errors_are_distinct() {
        let good = hand_written_three_records();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_trace(&bad_magic), Err(TraceError::BadMagic(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(decode_trace(&bad_version), Err(TraceError::UnsupportedVersion(2))));

        assert!(matches!(decode_trace(&good[..good.len() - 3]), Err(TraceError::Truncated(_))));
        assert!(matches!(decode_trace(&good[..10]), Err(TraceError::Truncated(_))));

        let mut bad_kind = good.clone();
        bad_kind[5] = 9;
        assert!(matches!(decode_trace(&bad_kind), Err(TraceError::UnknownKind(9))));
    }

    #[test]
    fn rejects_oversized_vpn() {
        let t = Trace::full_access(vec![AccessEvent::new(super::super::VPN_LIMIT, 0)]);
        assert!(matches!(decode_trace(&encode_trace(&t)), Err(TraceError::VpnOutOfRange { index: 0, .. })));
    }

    #[test]
    fn csv_uses_hex_and_round_trips_events() {
        let t = Trace::full_access(vec![AccessEvent::new(0xabc, 0x401000), AccessEvent::new(1, 0)]);
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("vpn,pc\n0xabc,0x401000\n"), "{text}");
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), t);
        // Prefix is optional on input.
        assert_eq!(read_trace_csv(&b"vpn,pc\nff,10\n"[..]).unwrap().events[0], AccessEvent::new(255, 16));
        assert!(read_trace_csv(&b"a,b\n1,2\n"[..]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.mxt");
        let t = Trace::miss_log((0..100).map(|i| AccessEvent::new(i * 7, i)).collect(), 0.5);
        save_trace(&t, &path).unwrap();
        assert_eq!(load_trace(&path).unwrap(), t);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1, "temp file left behind");
    }

    fn arb_trace() -> impl Strategy<Value = Trace> {
        let events = proptest::collection::vec(
            (0..super::super::VPN_LIMIT, any::<u64>()).prop_map(|(v, p)| AccessEvent::new(v, p)),
            0..200,
        );
        let kind = prop_oneof![
            Just(TraceKind::FullAccess),
            (0.01f32..=1.0).prop_map(|c| TraceKind::MissLog { capacity_fraction: c }),
        ];
        (events, kind, 9u8..=21).prop_map(|(events, kind, page_size_bits)| Trace { events, kind, page_size_bits })
    }

    proptest! {
        #[test]
        fn binary_round_trip(t in arb_trace()) {
            let bytes = encode_trace(&t);
            prop_assert_eq!(bytes.len(), HEADER_LEN + RECORD_LEN * t.len());
            prop_assert_eq!(decode_trace(&bytes).unwrap(), t);
        }
    }
}
