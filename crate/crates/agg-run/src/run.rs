use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use agg_core::{Frame, FrameKind, Metrics};

use crate::error::RunError;
use crate::spill::SpillDir;

/// Run-file header: order kind (u8), 3 pad bytes, level (u32), frame count (u64).
pub const RUN_HEADER: usize = 16;

/// Record order inside a run file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum OrderKind {
    Unsorted = 0,
    ByKey = 1,
    BySlotThenKey = 2,
}

impl OrderKind {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Self::Unsorted),
            1 => Some(Self::ByKey),
            2 => Some(Self::BySlotThenKey),
            _ => None,
        }
    }
}

/// A spilled intermediate file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunFile {
    pub path: PathBuf,
    pub frames: u64,
    pub records: u64,
    pub order: OrderKind,
    pub level: u32,
}

impl RunFile {
    /// Reads the header of an existing run file.
    pub fn open(path: &Path) -> Result<Self, RunError> {
        let mut f = File::open(path)?;
        let mut h = [0u8; RUN_HEADER];
        f.read_exact(&mut h)?;
        let order = OrderKind::from_u8(h[0]).ok_or_else(|| corrupt(path, "unknown order kind"))?;
        Ok(RunFile {
            path: path.to_path_buf(),
            frames: u64::from_le_bytes(h[8..16].try_into().unwrap()),
            records: 0,
            order,
            level: u32::from_le_bytes(h[4..8].try_into().unwrap()),
        })
    }
}

fn corrupt(path: &Path, reason: &str) -> RunError {
    RunError::Corrupt { path: path.display().to_string(), reason: reason.to_string() }
}

fn header(order: OrderKind, level: u32, frames: u64) -> [u8; RUN_HEADER] {
    let mut h = [0u8; RUN_HEADER];
    h[0] = order as u8;
    h[4..8].copy_from_slice(&level.to_le_bytes());
    h[8..16].copy_from_slice(&frames.to_le_bytes());
    h
}

/// Appends records to a run file through a single frame buffer.
#[derive(Debug)]
pub struct RunWriter {
    file: File,
    path: PathBuf,
    frame: Frame,
    frames: u64,
    records: u64,
    order: OrderKind,
    level: u32,
}

impl RunWriter {
    /// Opens a new run file using `frame` as the output buffer.
    pub fn create(dir: &SpillDir, mut frame: Frame, order: OrderKind, level: u32) -> Result<Self, RunError> {
        let path = dir.next_path();
        let mut file = OpenOptions::new().create_new(true).write(true).read(true).open(&path)?;
        file.write_all(&header(order, level, 0))?;
        frame.reset(FrameKind::Raw, 1);
        Ok(Self { file, path, frame, frames: 0, records: 0, order, level })
    }

    /// Opens a run whose first frames are already formatted; the last one is
    /// reused as the output buffer once written.
    pub fn from_filled(
        dir: &SpillDir,
        mut frames: Vec<Frame>,
        order: OrderKind,
        level: u32,
        m: &mut Metrics,
    ) -> Result<Self, RunError> {
        let last = frames.pop().expect("at least one frame");
        let path = dir.next_path();
        let mut file = OpenOptions::new().create_new(true).write(true).read(true).open(&path)?;
        file.write_all(&header(order, level, 0))?;
        let mut w = Self { file, path, frame: last, frames: 0, records: 0, order, level };
        for f in frames {
            w.write_frame(&f, m)?;
        }
        if !w.frame.is_empty() {
            let n = w.frame.count() as u64;
            w.write_buffer(m)?;
            w.records += n;
        }
        w.frame.reset(FrameKind::Raw, 1);
        Ok(w)
    }

    /// Appends one encoded record, flushing the buffer when needed.
    pub fn push(&mut self, kind: FrameKind, fields: usize, rec: &[u8], m: &mut Metrics) -> Result<(), RunError> {
        if !self.frame.accepts(kind, fields) {
            self.flush(m)?;
        }
        if self.frame.is_empty() {
            self.frame.reset(kind, fields);
        }
        if self.frame.push_encoded(rec).is_err() {
            self.flush(m)?;
            self.frame.reset(kind, fields);
            self.frame.push_encoded(rec)?;
        }
        self.records += 1;
        Ok(())
    }

    /// Appends a group record given as key and state bytes.
    pub fn push_group(&mut self, key: &[u8], state: &[u8], m: &mut Metrics) -> Result<(), RunError> {
        let fields = state.len() / agg_core::FIELD_BYTES;
        if !self.frame.accepts(FrameKind::Group, fields) {
            self.flush(m)?;
        }
        if self.frame.is_empty() {
            self.frame.reset(FrameKind::Group, fields);
        }
        if self.frame.push(key, state).is_err() {
            self.flush(m)?;
            self.frame.reset(FrameKind::Group, fields);
            self.frame.push(key, state)?;
        }
        self.records += 1;
        Ok(())
    }

    /// Writes a complete, already formatted frame straight to the file.
    pub fn write_frame(&mut self, frame: &Frame, m: &mut Metrics) -> Result<(), RunError> {
        if frame.is_empty() {
            return Ok(());
        }
        self.file.write_all(frame.bytes())?;
        self.frames += 1;
        self.records += frame.count() as u64;
        m.spill_write();
        Ok(())
    }

    fn write_buffer(&mut self, m: &mut Metrics) -> Result<(), RunError> {
        let used = self.frame.used();
        self.frame.bytes_mut()[used..].fill(0);
        self.file.write_all(self.frame.bytes())?;
        self.frames += 1;
        m.spill_write();
        Ok(())
    }

    fn flush(&mut self, m: &mut Metrics) -> Result<(), RunError> {
        if !self.frame.is_empty() {
            self.write_buffer(m)?;
            let (k, f) = (self.frame.kind(), self.frame.fields());
            self.frame.reset(k, f);
        }
        Ok(())
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Flushes and seals the file. An empty run leaves no file behind.
    pub fn finish(mut self, m: &mut Metrics) -> Result<Option<RunFile>, RunError> {
        self.flush(m)?;
        if self.records == 0 {
            drop(self.file);
            std::fs::remove_file(&self.path)?;
            return Ok(None);
        }
        self.file.seek(SeekFrom::Start(0))?;
        self.file.write_all(&header(self.order, self.level, self.frames))?;
        self.file.flush()?;
        m.runs_created += 1;
        Ok(Some(RunFile {
            path: self.path.clone(),
            frames: self.frames,
            records: self.records,
            order: self.order,
            level: self.level,
        }))
    }

    /// Like [`RunWriter::finish`] but also hands back the buffer frame.
    pub fn finish_keep(mut self, m: &mut Metrics) -> Result<(Option<RunFile>, Frame), RunError> {
        self.flush(m)?;
        let size = self.frame.size();
        let frame = std::mem::replace(&mut self.frame, Frame::new(size));
        Ok((self.finish(m)?, frame))
    }
}

/// Streams the records of a run file through one frame buffer and deletes the
/// file once dropped.
#[derive(Debug)]
pub struct RunReader {
    file: File,
    run: RunFile,
    frame: Frame,
    left: u64,
    pos: usize,
    len: usize,
    in_frame: u32,
}

impl RunReader {
    pub fn open(run: RunFile, frame: Frame) -> Result<Self, RunError> {
        let mut file = File::open(&run.path)?;
        let mut h = [0u8; RUN_HEADER];
        file.read_exact(&mut h)?;
        let frames = u64::from_le_bytes(h[8..16].try_into().unwrap());
        if frames != run.frames && run.frames != 0 {
            return Err(corrupt(&run.path, "frame count disagrees with header"));
        }
        let mut run = run;
        run.frames = frames;
        if cfg!(debug_assertions) {
            let len = file.metadata()?.len();
            if len != RUN_HEADER as u64 + frames * frame.size() as u64 {
                return Err(corrupt(&run.path, "file length is not header plus whole frames"));
            }
        }
        Ok(Self { file, run, frame, left: frames, pos: 0, len: 0, in_frame: 0 })
    }

    pub fn run(&self) -> &RunFile {
        &self.run
    }

    /// Moves to the next record. Returns false at end of run.
    pub fn advance(&mut self, m: &mut Metrics) -> Result<bool, RunError> {
        if self.in_frame > 0 {
            self.pos += self.len;
            self.in_frame -= 1;
        }
        while self.in_frame == 0 {
            if self.left == 0 {
                return Ok(false);
            }
            self.file.read_exact(self.frame.bytes_mut())?;
            self.frame.resync()?;
            self.left -= 1;
            m.spill_read();
            self.in_frame = self.frame.count();
            self.pos = agg_core::FRAME_HEADER;
            self.len = 0;
        }
        self.len = agg_core::record::record_len(&self.frame.bytes()[self.pos..], self.frame.fields());
        Ok(true)
    }

    pub fn record(&self) -> &[u8] {
        &self.frame.bytes()[self.pos..self.pos + self.len]
    }

    pub fn kind(&self) -> FrameKind {
        self.frame.kind()
    }

    pub fn fields(&self) -> usize {
        self.frame.fields()
    }
}

impl Drop for RunReader {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.run.path);
    }
}

/// Visits every record of a run without consuming or deleting it.
pub fn scan_run(
    run: &RunFile,
    frame_size: usize,
    mut visit: impl FnMut(FrameKind, &[u8]),
) -> Result<(), RunError> {
    let mut file = File::open(&run.path)?;
    let mut h = [0u8; RUN_HEADER];
    file.read_exact(&mut h)?;
    let frames = u64::from_le_bytes(h[8..16].try_into().unwrap());
    let mut frame = Frame::new(frame_size);
    for _ in 0..frames {
        file.read_exact(frame.bytes_mut())?;
        frame.resync()?;
        let kind = frame.kind();
        for rec in frame.records() {
            visit(kind, rec);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use agg_core::{record, FrameAllocator};

    fn raw(key: &str, v: f64) -> Vec<u8> {
        let mut out = Vec::new();
        record::encode(key.as_bytes(), &v.to_le_bytes(), &mut out);
        out
    }

    #[test]
    fn write_read_round_trip_and_delete() {
        let dir = SpillDir::new().unwrap();
        let alloc = FrameAllocator::new(2, 64);
        let mut m = Metrics::default();
        let mut w = RunWriter::create(&dir, alloc.allocate().unwrap(), OrderKind::ByKey, 3).unwrap();
        for i in 0..20 {
            w.push(FrameKind::Raw, 1, &raw(&format!("k{i:02}"), i as f64), &mut m).unwrap();
        }
        let run = w.finish(&mut m).unwrap().unwrap();
        assert_eq!(run.records, 20);
        assert_eq!(m.frames_written, run.frames);
        let hdr = RunFile::open(&run.path).unwrap();
        assert_eq!((hdr.order, hdr.level, hdr.frames), (OrderKind::ByKey, 3, run.frames));
        let path = run.path.clone();
        let mut r = RunReader::open(run, alloc.allocate().unwrap()).unwrap();
        let mut seen = 0;
        while r.advance(&mut m).unwrap() {
            assert_eq!(record::payload(r.record()), seen as f64);
            seen += 1;
        }
        assert_eq!(seen, 20);
        assert_eq!(m.frames_read, m.frames_written);
        drop(r);
        assert!(!path.exists());
    }

    #[test]
    fn empty_run_leaves_no_file() {
        let dir = SpillDir::new().unwrap();
        let mut m = Metrics::default();
        let w = RunWriter::create(&dir, Frame::new(64), OrderKind::Unsorted, 0).unwrap();
        assert!(w.finish(&mut m).unwrap().is_none());
        assert_eq!(dir.live_files(), 0);
    }

    #[test]
    fn mixed_kinds_split_frames() {
        let dir = SpillDir::new().unwrap();
        let mut m = Metrics::default();
        let mut w = RunWriter::create(&dir, Frame::new(128), OrderKind::Unsorted, 0).unwrap();
        w.push(FrameKind::Raw, 1, &raw("a", 1.0), &mut m).unwrap();
        w.push_group(b"b", &2.0f64.to_le_bytes(), &mut m).unwrap();
        w.push(FrameKind::Raw, 1, &raw("c", 3.0), &mut m).unwrap();
        let run = w.finish(&mut m).unwrap().unwrap();
        assert_eq!(run.frames, 3);
        let mut kinds = vec![];
        scan_run(&run, 128, |k, rec| kinds.push((k, record::key(rec).to_vec()))).unwrap();
        assert_eq!(
            kinds,
            vec![(FrameKind::Raw, b"a".to_vec()), (FrameKind::Group, b"b".to_vec()), (FrameKind::Raw, b"c".to_vec())]
        );
    }
}
