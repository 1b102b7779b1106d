use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, ErrorKind, Read};
use std::net::Ipv4Addr;
use std::path::Path;

use super::packet::{Direction, Endpoint, FlowKey, PacketSummary, Protocol, TcpFlags};
use crate::error::{Error, Result};

pub const LINKTYPE_ETHERNET: u32 = 1;

const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
const MAGIC_NANOS: u32 = 0xa1b2_3c4d;
const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88a8;
/// Records claiming more than this are treated as file corruption.
const MAX_RECORD_LEN: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadStats {
    /// Complete packet records read from the file.
    pub records: u64,
    /// Records that produced a [`PacketSummary`].
    pub packets: u64,
    /// Records that were not IPv4 TCP/UDP (ARP, IPv6, fragments, ...).
    pub skipped: u64,
    /// The file ended in the middle of a record.
    pub truncated: bool,
}

/// Streaming reader for classic (non-ng) pcap files.
///
/// Iterating yields one [`PacketSummary`] per IPv4 TCP/UDP packet; everything
/// else is counted in [`ReadStats::skipped`]. A truncated trailing record ends
/// the stream and sets [`ReadStats::truncated`].
pub struct PcapReader<R> {
    inner: R,
    swapped: bool,
    nanos: bool,
    link_type: u32,
    stats: ReadStats,
    first_sender: HashMap<FlowKey, Endpoint>,
    done: bool,
    buf: Vec<u8>,
}

impl PcapReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::new(BufReader::new(file))
    }
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut header = [0u8; 24];
        read_full(&mut inner, &mut header)
            .map_err(Error::from)
            .and_then(|n| {
                if n < header.len() {
                    Err(Error::PcapHeader(format!(
                        "expected 24 bytes, found {n}"
                    )))
                } else {
                    Ok(())
                }
            })?;

        let magic_le = u32::from_le_bytes(header[0..4].try_into().unwrap());
        let (swapped, nanos) = match magic_le {
            MAGIC_MICROS => (false, false),
            MAGIC_NANOS => (false, true),
            m if m.swap_bytes() == MAGIC_MICROS => (true, false),
            m if m.swap_bytes() == MAGIC_NANOS => (true, true),
            m => {
                return Err(Error::PcapHeader(format!("unknown magic number {m:#010x}")));
            }
        };
        let word = |b: &[u8]| read_u32(b, swapped);
        let version_major = read_u16(&header[4..6], swapped);
        if version_major != 2 {
            return Err(Error::PcapHeader(format!(
                "unsupported version {version_major}"
            )));
        }
        let link_type = word(&header[20..24]) & 0x0fff_ffff;
        if link_type != LINKTYPE_ETHERNET {
            return Err(Error::UnsupportedLinkType(link_type));
        }

        Ok(Self {
            inner,
            swapped,
            nanos,
            link_type,
            stats: ReadStats::default(),
            first_sender: HashMap::new(),
            done: false,
            buf: Vec::new(),
        })
    }

    pub fn stats(&self) -> ReadStats {
        self.stats
    }

    pub fn link_type(&self) -> u32 {
        self.link_type
    }

    pub fn is_nanosecond(&self) -> bool {
        self.nanos
    }

    /// Reads the next record. `Ok(None)` is end of stream (clean or truncated).
    fn next_record(&mut self) -> Result<Option<u64>> {
        let mut rec = [0u8; 16];
        let n = read_full(&mut self.inner, &mut rec)?;
        if n == 0 {
            return Ok(None);
        }
        if n < rec.len() {
            self.stats.truncated = true;
            return Ok(None);
        }
        let ts_sec = read_u32(&rec[0..4], self.swapped) as u64;
        let ts_frac = read_u32(&rec[4..8], self.swapped) as u64;
        let incl_len = read_u32(&rec[8..12], self.swapped) as usize;
        if incl_len > MAX_RECORD_LEN {
            self.stats.truncated = true;
            return Ok(None);
        }
        self.buf.resize(incl_len, 0);
        let n = read_full(&mut self.inner, &mut self.buf)?;
        if n < incl_len {
            self.stats.truncated = true;
            return Ok(None);
        }
        self.stats.records += 1;
        let micros = if self.nanos { ts_frac / 1000 } else { ts_frac };
        Ok(Some(ts_sec * 1_000_000 + micros))
    }

    fn try_next(&mut self) -> Result<Option<PacketSummary>> {
        while !self.done {
            let Some(ts) = self.next_record()? else {
                self.done = true;
                break;
            };
            match parse_ethernet(&self.buf, ts) {
                Some(mut pkt) => {
                    let first = *self.first_sender.entry(pkt.key).or_insert(pkt.src);
                    pkt.direction = if first == pkt.src {
                        Direction::Forward
                    } else {
                        Direction::Backward
                    };
                    self.stats.packets += 1;
                    return Ok(Some(pkt));
                }
                None => self.stats.skipped += 1,
            }
        }
        Ok(None)
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<PacketSummary>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.try_next() {
            Ok(Some(p)) => Some(Ok(p)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Reads a whole capture into memory.
pub fn read_pcap(path: impl AsRef<Path>) -> Result<(Vec<PacketSummary>, ReadStats)> {
    let mut reader = PcapReader::open(path)?;
    let packets = reader.by_ref().collect::<Result<Vec<_>>>()?;
    let stats = reader.stats();
    if stats.truncated {
        log::warn!(
            "capture truncated after {} complete records",
            stats.records
        );
    }
    Ok((packets, stats))
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn read_u32(b: &[u8], swapped: bool) -> u32 {
    let v = u32::from_le_bytes(b[..4].try_into().unwrap());
    if swapped {
        v.swap_bytes()
    } else {
        v
    }
}

fn read_u16(b: &[u8], swapped: bool) -> u16 {
    let v = u16::from_le_bytes(b[..2].try_into().unwrap());
    if swapped {
        v.swap_bytes()
    } else {
        v
    }
}

fn be16(b: &[u8], at: usize) -> Option<u16> {
    Some(u16::from_be_bytes(b.get(at..at + 2)?.try_into().ok()?))
}

/// Ethernet → (VLAN)* → IPv4 → TCP/UDP. Returns `None` for anything else.
fn parse_ethernet(frame: &[u8], timestamp_us: u64) -> Option<PacketSummary> {
    let mut off = 12;
    let mut ethertype = be16(frame, off)?;
    off += 2;
    while ethertype == ETHERTYPE_VLAN || ethertype == ETHERTYPE_QINQ {
        ethertype = be16(frame, off + 2)?;
        off += 4;
    }
    if ethertype != ETHERTYPE_IPV4 {
        return None;
    }
    parse_ipv4(frame.get(off..)?, timestamp_us)
}

fn parse_ipv4(ip: &[u8], timestamp_us: u64) -> Option<PacketSummary> {
    let vihl = *ip.first()?;
    if vihl >> 4 != 4 {
        return None;
    }
    let ihl = ((vihl & 0x0f) as usize) * 4;
    if ihl < 20 || ip.len() < ihl {
        return None;
    }
    let total_len = be16(ip, 2)? as u32;
    let frag_offset = be16(ip, 6)? & 0x1fff;
    if frag_offset != 0 {
        return None;
    }
    let proto = ip[9];
    let src_addr = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_addr = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
    let l4 = &ip[ihl..];

    let (protocol, src_port, dst_port, l4_header_len, flags, window) = match proto {
        6 => {
            if l4.len() < 20 {
                return None;
            }
            let data_offset = ((l4[12] >> 4) as u32) * 4;
            if data_offset < 20 {
                return None;
            }
            (
                Protocol::Tcp,
                be16(l4, 0)?,
                be16(l4, 2)?,
                data_offset,
                TcpFlags(l4[13]),
                Some(be16(l4, 14)?),
            )
        }
        17 => {
            if l4.len() < 8 {
                return None;
            }
            (
                Protocol::Udp,
                be16(l4, 0)?,
                be16(l4, 2)?,
                8,
                TcpFlags::empty(),
                None,
            )
        }
        _ => return None,
    };
    let payload_len = total_len.checked_sub(ihl as u32 + l4_header_len)?;
    let src = Endpoint::new(src_addr, src_port);
    let dst = Endpoint::new(dst_addr, dst_port);
    Some(PacketSummary {
        timestamp_us,
        key: FlowKey::new(src, dst, protocol),
        src,
        direction: Direction::Forward,
        ip_total_len: total_len,
        l4_header_len,
        payload_len,
        tcp_flags: flags,
        tcp_window: window,
    })
}
