use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use agg_core::Frame;

use crate::dataset::GroundTruth;
use crate::error::SpecError;

const MAGIC: &[u8; 4] = b"AGGD";
/// Magic, frame size (u32), frame count (u64).
const HEADER: usize = 16;

pub(crate) fn write_frames(path: &Path, frame_size: usize, frames: impl Iterator<Item = Frame>) -> Result<u64, SpecError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&[0u8; HEADER])?;
    let mut count = 0u64;
    for f in frames {
        w.write_all(f.bytes())?;
        count += 1;
    }
    let mut file = w.into_inner().map_err(|e| e.into_error())?;
    file.seek(SeekFrom::Start(0))?;
    file.write_all(MAGIC)?;
    file.write_all(&(frame_size as u32).to_le_bytes())?;
    file.write_all(&count.to_le_bytes())?;
    Ok(count)
}

/// Streams the frames of a dataset file.
pub struct DatasetReader {
    file: BufReader<File>,
    frame_size: usize,
    frames: u64,
    left: u64,
}

impl DatasetReader {
    pub fn open(path: &Path) -> Result<Self, SpecError> {
        let mut file = BufReader::new(File::open(path)?);
        let mut h = [0u8; HEADER];
        file.read_exact(&mut h)?;
        if &h[..4] != MAGIC {
            return Err(SpecError::Malformed(format!("{} is not a dataset file", path.display())));
        }
        let frame_size = u32::from_le_bytes(h[4..8].try_into().unwrap()) as usize;
        let frames = u64::from_le_bytes(h[8..16].try_into().unwrap());
        Ok(DatasetReader { file, frame_size, frames, left: frames })
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    /// Reads the next frame into `frame`; false at end of file.
    pub fn next_into(&mut self, frame: &mut Frame) -> Result<bool, SpecError> {
        if self.left == 0 {
            return Ok(false);
        }
        if frame.size() != self.frame_size {
            return Err(SpecError::Malformed("frame size differs from the file's".into()));
        }
        self.file.read_exact(frame.bytes_mut())?;
        frame.resync()?;
        self.left -= 1;
        Ok(true)
    }
}

/// Parses a ground-truth file written by [`crate::Dataset::write_truth`].
pub fn read_truth(path: &Path) -> Result<GroundTruth, SpecError> {
    let mut t = GroundTruth::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        let mut it = line.rsplitn(3, '\t');
        let bad = || SpecError::Malformed(format!("bad ground-truth line {line:?}"));
        let sum: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let count: u64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let key = it.next().and_then(decode_key).ok_or_else(bad)?;
        t.insert(key, (count, sum));
    }
    Ok(t)
}

/// Printable keys are written as is, others as `0x` and hex digits.
pub(crate) fn encode_key(key: &[u8]) -> String {
    if !key.starts_with(b"0x") && key.iter().all(|b| b.is_ascii_graphic()) {
        return String::from_utf8(key.to_vec()).unwrap();
    }
    let mut s = String::from("0x");
    for b in key {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn decode_key(s: &str) -> Option<Vec<u8>> {
    let Some(hex) = s.strip_prefix("0x") else { return Some(s.as_bytes().to_vec()) };
    if hex.len() % 2 != 0 {
        return None;
    }
    (0..hex.len()).step_by(2).map(|i| u8::from_str_radix(&hex[i..i + 2], 16).ok()).collect()
}
