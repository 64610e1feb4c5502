//! IONTAG binary stream.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "IONTAG1\0"
//! 8       2     version (u16 LE)
//! 10      1     regime (0 continuous, 1 pulsed)
//! 11      1     reserved, zero
//! 12      4     resolution_ps (u32 LE)
//! 16      8     duration_ps (u64 LE)
//! 24      8     record_count (u64 LE)
//! 32      9*k   records: channel (u8), time_ps (u64 LE)
//! ```

use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::{Regime, TagRecord};
use crate::error::{Result, StreamError};

pub const MAGIC: [u8; 8] = *b"IONTAG1\0";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;
pub const RECORD_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub version: u16,
    pub regime: Regime,
    pub resolution_ps: u32,
    pub duration_ps: u64,
    pub record_count: u64,
}

impl StreamHeader {
    pub fn new(regime: Regime, resolution_ps: u32, duration_ps: u64) -> Self {
        Self {
            version: VERSION,
            regime,
            resolution_ps,
            duration_ps,
            record_count: 0,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..8].copy_from_slice(&MAGIC);
        out[8..10].copy_from_slice(&self.version.to_le_bytes());
        out[10] = self.regime.code();
        out[12..16].copy_from_slice(&self.resolution_ps.to_le_bytes());
        out[16..24].copy_from_slice(&self.duration_ps.to_le_bytes());
        out[24..32].copy_from_slice(&self.record_count.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StreamError> {
        if bytes.len() < HEADER_LEN {
            return Err(if bytes.len() >= 8 && bytes[..8] != MAGIC {
                StreamError::BadMagic
            } else {
                StreamError::TruncatedHeader
            });
        }
        if bytes[..8] != MAGIC {
            return Err(StreamError::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[8], bytes[9]]);
        if version != VERSION {
            return Err(StreamError::UnsupportedVersion(version));
        }
        let regime = Regime::from_code(bytes[10]).ok_or(StreamError::UnknownRegime(bytes[10]))?;
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        Ok(Self {
            version,
            regime,
            resolution_ps: u32::from_le_bytes(bytes[12..16].try_into().unwrap()),
            duration_ps: u64_at(16),
            record_count: u64_at(24),
        })
    }
}

fn check_record(index: u64, rec: &TagRecord, previous: Option<u64>) -> Result<(), StreamError> {
    if !(rec.channel == 1 || rec.channel == 2) {
        return Err(StreamError::BadChannel {
            index,
            channel: rec.channel,
        });
    }
    if let Some(prev) = previous {
        if rec.time_ps < prev {
            return Err(StreamError::TimeOrder {
                index,
                time_ps: rec.time_ps,
                previous_ps: prev,
            });
        }
    }
    Ok(())
}

/// Writes `header` (with `record_count` replaced by `records.len()`) and the
/// records. Validates channels and time order before writing anything.
pub fn write_stream<W: Write>(mut out: W, header: &StreamHeader, records: &[TagRecord]) -> Result<()> {
    let mut previous = None;
    for (i, rec) in records.iter().enumerate() {
        check_record(i as u64, rec, previous)?;
        previous = Some(rec.time_ps);
    }
    let header = StreamHeader {
        record_count: records.len() as u64,
        ..*header
    };
    out.write_all(&header.to_bytes())?;
    let mut buf = Vec::with_capacity(RECORD_LEN * records.len().min(1 << 16));
    for chunk in records.chunks(1 << 16) {
        buf.clear();
        for rec in chunk {
            buf.push(rec.channel);
            buf.extend_from_slice(&rec.time_ps.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a complete in-memory stream.
pub fn read_stream(bytes: &[u8]) -> Result<(StreamHeader, Vec<TagRecord>)> {
    let header = StreamHeader::from_bytes(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let expected = header.record_count;
    let available = (payload.len() / RECORD_LEN) as u64;
    if available < expected {
        return Err(StreamError::Truncated {
            expected,
            found: available,
        }
        .into());
    }
    if payload.len() as u64 != expected * RECORD_LEN as u64 {
        return Err(StreamError::TrailingBytes.into());
    }
    let mut records = Vec::with_capacity(expected as usize);
    let mut previous = None;
    for (i, raw) in payload.chunks_exact(RECORD_LEN).enumerate() {
        let rec = TagRecord {
            channel: raw[0],
            time_ps: u64::from_le_bytes(raw[1..].try_into().unwrap()),
        };
        check_record(i as u64, &rec, previous)?;
        previous = Some(rec.time_ps);
        records.push(rec);
    }
    Ok((header, records))
}

/// Incremental reader yielding records one at a time.
pub struct StreamReader<R> {
    inner: R,
    header: StreamHeader,
    index: u64,
    previous: Option<u64>,
    done: bool,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut head = [0u8; HEADER_LEN];
        let got = read_full(&mut inner, &mut head)?;
        let header = StreamHeader::from_bytes(&head[..got])?;
        Ok(Self {
            inner,
            header,
            index: 0,
            previous: None,
            done: false,
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    fn next_record(&mut self) -> Result<Option<TagRecord>> {
        if self.index == self.header.record_count {
            self.done = true;
            return if self.inner.fill_buf()?.is_empty() {
                Ok(None)
            } else {
                Err(StreamError::TrailingBytes.into())
            };
        }
        let mut raw = [0u8; RECORD_LEN];
        if read_full(&mut self.inner, &mut raw)? < RECORD_LEN {
            self.done = true;
            return Err(StreamError::Truncated {
                expected: self.header.record_count,
                found: self.index,
            }
            .into());
        }
        let rec = TagRecord {
            channel: raw[0],
            time_ps: u64::from_le_bytes(raw[1..].try_into().unwrap()),
        };
        check_record(self.index, &rec, self.previous)?;
        self.previous = Some(rec.time_ps);
        self.index += 1;
        Ok(Some(rec))
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<TagRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(rec)) => Some(Ok(rec)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Plain-text interchange: `channel,time_ps` rows under a header line.
pub fn write_csv<W: Write>(out: W, records: &[TagRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for rec in records {
        writer.serialize(rec)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TagRecord>> {
    let mut records = Vec::new();
    let mut previous = None;
    for (i, row) in csv::Reader::from_reader(input).deserialize::<TagRecord>().enumerate() {
        let rec = row?;
        check_record(i as u64, &rec, previous)?;
        previous = Some(rec.time_ps);
        records.push(rec);
    }
    Ok(records)
}
