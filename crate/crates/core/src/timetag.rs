//! Detector click records and their on-disk forms.
//!
//! CSV: header `channel,timestamp_ns`, one click per line, sorted by time.
//! Binary: the magic bytes `TTAG1` followed by 9-byte records, each a `u8`
//! channel and a little-endian `u64` timestamp in nanoseconds.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 5] = b"TTAG1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeTag {
    pub channel: u8,
    /// Nanoseconds since the start of the run.
    #[serde(rename = "timestamp_ns")]
    pub timestamp: u64,
}

impl TimeTag {
    pub fn new(channel: u8, timestamp: u64) -> Self {
        Self { channel, timestamp }
    }
}

/// A run's clicks across all channels, ordered by timestamp (ties by channel).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TimeTagStream {
    tags: Vec<TimeTag>,
}

impl TimeTagStream {
    /// Sorts the tags into stream order.
    pub fn from_unsorted(mut tags: Vec<TimeTag>) -> Self {
        tags.sort_unstable_by_key(|t| (t.timestamp, t.channel));
        Self { tags }
    }

    /// Accepts tags already in stream order.
    pub fn from_sorted(tags: Vec<TimeTag>) -> Result<Self> {
        if let Some(i) = tags
            .windows(2)
            .position(|w| (w[0].timestamp, w[0].channel) > (w[1].timestamp, w[1].channel))
        {
            return Err(Error::TagFormat(format!(
                "record {} at {} ns precedes record {} at {} ns",
                i + 1,
                tags[i].timestamp,
                i + 2,
                tags[i + 1].timestamp
            )));
        }
        Ok(Self { tags })
    }

    pub fn tags(&self) -> &[TimeTag] {
        &self.tags
    }

    pub fn into_tags(self) -> Vec<TimeTag> {
        self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Timestamps of a single channel, in order.
    pub fn channel(&self, channel: u8) -> Vec<u64> {
        self.tags
            .iter()
            .filter(|t| t.channel == channel)
            .map(|t| t.timestamp)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for t in &self.tags {
            wtr.serialize(t)?;
        }
        if self.tags.is_empty() {
            wtr.write_record(["channel", "timestamp_ns"])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["channel", "timestamp_ns"] {
            return Err(Error::TagFormat(format!(
                "expected header `channel,timestamp_ns`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let tags = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<TimeTag>, _>>()?;
        Self::from_sorted(tags)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        for t in &self.tags {
            w.write_all(&[t.channel])?;
            w.write_all(&t.timestamp.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)
            .map_err(|_| Error::TagFormat("missing TTAG1 header".into()))?;
        if &magic != BINARY_MAGIC {
            return Err(Error::TagFormat("bad magic bytes, expected TTAG1".into()));
        }
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() % 9 != 0 {
            return Err(Error::TagFormat(format!(
                "truncated record: {} trailing bytes",
                body.len() % 9
            )));
        }
        let tags = body
            .chunks_exact(9)
            .map(|rec| {
                let mut ts = [0u8; 8];
                ts.copy_from_slice(&rec[1..]);
                TimeTag::new(rec[0], u64::from_le_bytes(ts))
            })
            .collect();
        Self::from_sorted(tags)
    }

    /// Picks the format from the first bytes of the file.
    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = BufReader::new(std::fs::File::open(path)?);
        let mut head = [0u8; 5];
        let n = f.read(&mut head)?;
        let chained = std::io::Cursor::new(head[..n].to_vec()).chain(f);
        if n == 5 && &head == BINARY_MAGIC {
            Self::read_binary(chained)
        } else {
            Self::read_csv(chained)
        }
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn write_binary_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_binary(BufWriter::new(std::fs::File::create(path)?))
    }
}
