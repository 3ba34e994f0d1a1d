//! Static separate-chaining hash table over frame-backed storage.
//!
//! The slot table is an array of 8-byte list pointers (plus one bloom byte per
//! slot when enabled) laid out across whole frames. Groups live in list
//! frames as `[next: u64][key len: u16][key][state]`, appended in arrival
//! order and linked at the head of their slot's chain. List frames are owned
//! by regions so that parts of the table can be spilled independently.

use std::collections::VecDeque;

use agg_core::sort::quicksort_by;
use agg_core::{record, AggSpec, CoreError, Frame, FrameAllocator, FrameKind, Metrics, FRAME_HEADER};
use agg_run::{OrderKind, RunFile, RunWriter, SpillDir};

use crate::error::HashError;
use crate::hash::{bloom_bits, hash_key, slot_of};
use crate::layout::{TableLayout, LINK_BYTES};

const NULL: u64 = u64::MAX;

pub type RegionId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insert {
    Aggregated,
    Inserted,
    TableFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    /// Rejected by the bloom byte without touching the chain.
    DefinitelyAbsent,
    /// Chain walked, key not there.
    Absent,
    Found,
}

#[derive(Debug)]
struct ListFrame {
    frame: Frame,
    used: usize,
    count: u32,
    region: RegionId,
}

impl ListFrame {
    fn fresh(frame: Frame, region: RegionId) -> Self {
        ListFrame { frame, used: FRAME_HEADER, count: 0, region }
    }
}

#[derive(Debug, Default)]
struct Region {
    frames: Vec<u32>,
    cap: usize,
    groups: usize,
}

#[inline]
fn ptr(fid: u32, off: usize) -> u64 {
    ((fid as u64) << 32) | off as u64
}

#[inline]
fn split(p: u64) -> (usize, usize) {
    ((p >> 32) as usize, (p & 0xffff_ffff) as usize)
}

#[inline]
fn read_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

#[derive(Debug)]
pub struct ChainedHashTable {
    alloc: FrameAllocator,
    layout: TableLayout,
    aggs: AggSpec,
    words: usize,
    seed: u64,
    slot_dir: Vec<Frame>,
    slots_per_frame: usize,
    slot_parts: usize,
    list: Vec<Option<ListFrame>>,
    vacant: Vec<u32>,
    spare: Vec<Frame>,
    regions: Vec<Region>,
    cap: usize,
    assigned: usize,
    groups: usize,
    occupied: usize,
    flushes: u64,
}

impl ChainedHashTable {
    /// Allocates the slot table eagerly; list frames are drawn on demand up to
    /// `layout.list_frames`. The slot space is split evenly into `slot_parts`
    /// independent ranges.
    pub fn new(
        alloc: &FrameAllocator,
        layout: TableLayout,
        aggs: AggSpec,
        seed: u64,
        slot_parts: usize,
    ) -> Result<Self, HashError> {
        assert!(slot_parts >= 1 && slot_parts <= layout.slots, "every slot range needs a slot");
        let slot_dir = (0..layout.slot_frames).map(|_| alloc.allocate()).collect::<Result<Vec<_>, _>>()?;
        let mut t = ChainedHashTable {
            alloc: alloc.clone(),
            words: aggs.words(),
            aggs,
            seed,
            slot_dir,
            slots_per_frame: layout.frame_size / layout.slot_bytes,
            slot_parts,
            list: Vec::new(),
            vacant: Vec::new(),
            spare: Vec::new(),
            regions: vec![Region { cap: layout.list_frames, ..Default::default() }],
            cap: layout.list_frames,
            assigned: 0,
            groups: 0,
            occupied: 0,
            flushes: 0,
            layout,
        };
        t.reset_slots();
        Ok(t)
    }

    /// Adds a region allowed to hold at most `cap` list frames.
    pub fn add_region(&mut self, cap: usize) -> RegionId {
        self.regions.push(Region { cap, ..Default::default() });
        self.regions.len() - 1
    }

    pub fn set_region_cap(&mut self, r: RegionId, cap: usize) {
        self.regions[r].cap = cap;
    }

    pub fn layout(&self) -> &TableLayout {
        &self.layout
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hash(&self, key: &[u8]) -> u64 {
        hash_key(key, self.seed)
    }

    pub fn len(&self) -> usize {
        self.groups
    }

    pub fn is_empty(&self) -> bool {
        self.groups == 0
    }

    pub fn occupied_slots(&self) -> usize {
        self.occupied
    }

    /// Frames currently held: slot table, list frames and idle spares.
    pub fn held_frames(&self) -> usize {
        self.slot_dir.len() + self.assigned + self.spare.len()
    }

    /// Upper bound on list frames.
    pub fn list_cap(&self) -> usize {
        self.cap
    }

    pub fn region_frames(&self, r: RegionId) -> usize {
        self.regions[r].frames.len()
    }

    pub fn region_groups(&self, r: RegionId) -> usize {
        self.regions[r].groups
    }

    pub fn regions(&self) -> usize {
        self.regions.len()
    }

    /// Global slot index of a hash within slot range `part`.
    #[inline]
    pub fn slot(&self, h: u64, part: usize) -> usize {
        let n = self.layout.slots;
        if self.slot_parts == 1 {
            return slot_of(h, n);
        }
        let lo = part * n / self.slot_parts;
        let hi = (part + 1) * n / self.slot_parts;
        lo + slot_of(h, hi - lo)
    }

    fn slot_range(&self, part: usize) -> (usize, usize) {
        let n = self.layout.slots;
        (part * n / self.slot_parts, (part + 1) * n / self.slot_parts)
    }

    #[inline]
    fn slot_at(&self, s: usize) -> (usize, usize) {
        (s / self.slots_per_frame, (s % self.slots_per_frame) * self.layout.slot_bytes)
    }

    #[inline]
    fn head(&self, s: usize) -> u64 {
        let (f, o) = self.slot_at(s);
        read_u64(self.slot_dir[f].bytes(), o)
    }

    #[inline]
    fn set_head(&mut self, s: usize, p: u64) {
        let (f, o) = self.slot_at(s);
        self.slot_dir[f].bytes_mut()[o..o + 8].copy_from_slice(&p.to_le_bytes());
    }

    #[inline]
    fn bloom(&self, s: usize) -> u8 {
        let (f, o) = self.slot_at(s);
        self.slot_dir[f].bytes()[o + 8]
    }

    #[inline]
    fn or_bloom(&mut self, s: usize, bits: u8) {
        let (f, o) = self.slot_at(s);
        self.slot_dir[f].bytes_mut()[o + 8] |= bits;
    }

    fn reset_slots(&mut self) {
        for f in &mut self.slot_dir {
            f.bytes_mut().fill(0xff);
        }
        if self.layout.bloom {
            for s in 0..self.layout.slots {
                let (f, o) = self.slot_at(s);
                self.slot_dir[f].bytes_mut()[o + 8] = 0;
            }
        }
        self.occupied = 0;
    }

    #[inline]
    fn buf(&self, fid: usize) -> &[u8] {
        self.list[fid].as_ref().expect("live list frame").frame.bytes()
    }

    #[inline]
    fn entry_key(&self, p: u64) -> &[u8] {
        let (f, o) = split(p);
        record::key(&self.buf(f)[o + LINK_BYTES..])
    }

    fn entry_len(&self, key_len: usize) -> usize {
        LINK_BYTES + record::encoded_len(key_len, self.words)
    }

    fn find(&self, s: usize, key: &[u8], m: &mut Metrics) -> Option<u64> {
        let mut p = self.head(s);
        while p != NULL {
            let (f, o) = split(p);
            let buf = self.buf(f);
            m.comparisons += 1;
            if record::key(&buf[o + LINK_BYTES..]) == key {
                return Some(p);
            }
            p = read_u64(buf, o);
        }
        None
    }

    fn absorb_at(&mut self, p: u64, kind: FrameKind, fields: &[u8]) {
        let (f, o) = split(p);
        let state_bytes = self.words * agg_core::FIELD_BYTES;
        let lf = self.list[f].as_mut().expect("live list frame");
        let buf = lf.frame.bytes_mut();
        let at = o + LINK_BYTES + record::LEN_PREFIX + record::key_len(&buf[o + LINK_BYTES..]);
        self.aggs.absorb(kind, &mut buf[at..at + state_bytes], fields);
    }

    fn take_frame(&mut self) -> Result<Option<Frame>, HashError> {
        if let Some(f) = self.spare.pop() {
            return Ok(Some(f));
        }
        if self.assigned >= self.cap {
            return Ok(None);
        }
        Ok(Some(self.alloc.allocate()?))
    }

    fn attach(&mut self, lf: ListFrame) -> u32 {
        let r = lf.region;
        let fid = match self.vacant.pop() {
            Some(id) => {
                self.list[id as usize] = Some(lf);
                id
            }
            None => {
                self.list.push(Some(lf));
                (self.list.len() - 1) as u32
            }
        };
        self.regions[r].frames.push(fid);
        self.assigned += 1;
        fid
    }

    fn detach(&mut self, fid: u32) -> ListFrame {
        let lf = self.list[fid as usize].take().expect("live list frame");
        self.vacant.push(fid);
        self.assigned -= 1;
        lf
    }

    /// Finds room for an entry of `need` bytes, trying each region's open
    /// frame before growing it.
    fn room(&mut self, need: usize, regions: &[RegionId]) -> Result<Option<(u32, RegionId)>, HashError> {
        let size = self.layout.frame_size;
        if need > size - FRAME_HEADER {
            return Err(CoreError::FrameFull { needed: need, free: size - FRAME_HEADER }.into());
        }
        for &r in regions {
            if let Some(&fid) = self.regions[r].frames.last() {
                if size - self.list[fid as usize].as_ref().unwrap().used >= need {
                    return Ok(Some((fid, r)));
                }
            }
            if self.regions[r].frames.len() < self.regions[r].cap {
                if let Some(frame) = self.take_frame()? {
                    return Ok(Some((self.attach(ListFrame::fresh(frame, r)), r)));
                }
            }
        }
        Ok(None)
    }

    fn write_entry(&mut self, fid: u32, s: usize, key: &[u8], kind: FrameKind, fields: &[u8], h: u64) {
        let need = self.entry_len(key.len());
        let head = self.head(s);
        let state_bytes = self.words * agg_core::FIELD_BYTES;
        let lf = self.list[fid as usize].as_mut().unwrap();
        let off = lf.used;
        let buf = &mut lf.frame.bytes_mut()[off..off + need];
        buf[..8].copy_from_slice(&head.to_le_bytes());
        buf[8..10].copy_from_slice(&(key.len() as u16).to_le_bytes());
        buf[10..10 + key.len()].copy_from_slice(key);
        let at = 10 + key.len();
        self.aggs.seed_from(kind, fields, &mut buf[at..at + state_bytes]);
        lf.used += need;
        lf.count += 1;
        let r = lf.region;
        self.regions[r].groups += 1;
        self.groups += 1;
        if head == NULL {
            self.occupied += 1;
        }
        self.set_head(s, ptr(fid, off));
        if self.layout.bloom {
            self.or_bloom(s, bloom_bits(h));
        }
    }

    /// Aggregates into the existing group for `key` or inserts a new one into
    /// the first of `regions` with room.
    #[allow(clippy::too_many_arguments)]
    pub fn insert_or_aggregate(
        &mut self,
        h: u64,
        part: usize,
        key: &[u8],
        kind: FrameKind,
        fields: &[u8],
        regions: &[RegionId],
        m: &mut Metrics,
    ) -> Result<Insert, HashError> {
        let s = self.slot(h, part);
        if let Some(p) = self.find(s, key, m) {
            self.absorb_at(p, kind, fields);
            return Ok(Insert::Aggregated);
        }
        record::validate_key(key)?;
        match self.room(self.entry_len(key.len()), regions)? {
            Some((fid, _)) => {
                self.write_entry(fid, s, key, kind, fields, h);
                Ok(Insert::Inserted)
            }
            None => Ok(Insert::TableFull),
        }
    }

    fn probe_slot(&self, h: u64, part: usize, key: &[u8], m: &mut Metrics) -> (Probe, Option<u64>) {
        let s = self.slot(h, part);
        if self.layout.bloom {
            let bits = bloom_bits(h);
            if self.bloom(s) & bits != bits {
                m.bloom_skips += 1;
                return (Probe::DefinitelyAbsent, None);
            }
        }
        match self.find(s, key, m) {
            Some(p) => (Probe::Found, Some(p)),
            None => (Probe::Absent, None),
        }
    }

    /// Looks `key` up, consulting the bloom byte first when enabled.
    pub fn membership_probe(&self, h: u64, part: usize, key: &[u8], m: &mut Metrics) -> Probe {
        self.probe_slot(h, part, key, m).0
    }

    /// Like [`ChainedHashTable::membership_probe`], folding the record into the
    /// group when found. Never allocates.
    pub fn aggregate_if_present(
        &mut self,
        h: u64,
        part: usize,
        key: &[u8],
        kind: FrameKind,
        fields: &[u8],
        m: &mut Metrics,
    ) -> Probe {
        let (probe, at) = self.probe_slot(h, part, key, m);
        if let Some(p) = at {
            self.absorb_at(p, kind, fields);
        }
        probe
    }

    /// Number of groups chained at each slot.
    pub fn slot_loads(&self) -> Vec<usize> {
        (0..self.layout.slots)
            .map(|s| {
                let mut n = 0;
                let mut p = self.head(s);
                while p != NULL {
                    n += 1;
                    let (f, o) = split(p);
                    p = read_u64(self.buf(f), o);
                }
                n
            })
            .collect()
    }

    /// Visits every stored group as `(key, state)` in storage order.
    pub fn for_each_group<E>(&self, mut f: impl FnMut(&[u8], &[u8]) -> Result<(), E>) -> Result<(), E> {
        for r in &self.regions {
            for &fid in &r.frames {
                let lf = self.list[fid as usize].as_ref().unwrap();
                for_each_entry(lf, self.words, |_, e| {
                    let rec = &e[LINK_BYTES..];
                    f(record::key(rec), record::fields(rec))
                })?;
            }
        }
        Ok(())
    }

    /// Empties the table, keeping its list frames as idle spares.
    pub fn clear(&mut self) {
        let fids: Vec<u32> = self.regions.iter_mut().flat_map(|r| std::mem::take(&mut r.frames)).collect();
        for fid in fids {
            let lf = self.detach(fid);
            self.spare.push(lf.frame);
        }
        for r in &mut self.regions {
            r.groups = 0;
        }
        self.groups = 0;
        self.reset_slots();
    }

    /// Returns idle spare frames to the allocator.
    pub fn release_spares(&mut self) {
        self.spare.clear();
    }

    /// Writes every group ordered by (slot, key) into a new run, then empties
    /// the table. `frame` is the writer buffer and is handed back.
    pub fn sort_slots_and_flush(
        &mut self,
        dir: &SpillDir,
        frame: Frame,
        level: u32,
        m: &mut Metrics,
    ) -> Result<(Option<RunFile>, Frame), HashError> {
        if self.groups == 0 {
            return Ok((None, frame));
        }
        let mut w = RunWriter::create(dir, frame, OrderKind::BySlotThenKey, level)?;
        let mut chain = Vec::new();
        self.flushes += 1;
        let sort_seed = self.seed ^ self.flushes.wrapping_mul(0xA24B_AED4_963E_E407);
        for s in 0..self.layout.slots {
            chain.clear();
            let mut p = self.head(s);
            while p != NULL {
                chain.push(p);
                let (f, o) = split(p);
                p = read_u64(self.buf(f), o);
            }
            if chain.len() > 1 {
                m.comparisons +=
                    quicksort_by(&mut chain, sort_seed ^ s as u64, |a, b| self.entry_key(*a) < self.entry_key(*b));
            }
            for &p in &chain {
                let (f, o) = split(p);
                let rec = &self.list[f].as_ref().unwrap().frame.bytes()[o + LINK_BYTES..];
                let len = record::encoded_len(record::key_len(rec), self.words);
                let rec = &rec[..len];
                w.push_group(record::key(rec), record::fields(rec), m)?;
            }
        }
        self.clear();
        let (run, frame) = w.finish_keep(m)?;
        Ok((run, frame))
    }

    /// Unlinks every entry stored in region `r` from the chains of slot range
    /// `part`, or of all slots when `part` is `None`.
    fn unlink_region(&mut self, r: RegionId, part: Option<usize>) {
        let (lo, hi) = match part {
            Some(p) => self.slot_range(p),
            None => (0, self.layout.slots),
        };
        for s in lo..hi {
            let mut p = self.head(s);
            if p == NULL {
                continue;
            }
            let mut kept: Option<u64> = None;
            let mut first = NULL;
            let mut bloom = 0u8;
            while p != NULL {
                let (f, o) = split(p);
                let next = read_u64(self.buf(f), o);
                if self.list[f].as_ref().unwrap().region != r {
                    match kept {
                        None => first = p,
                        Some(prev) => {
                            let (pf, po) = split(prev);
                            self.list[pf].as_mut().unwrap().frame.bytes_mut()[po..po + 8]
                                .copy_from_slice(&p.to_le_bytes());
                        }
                    }
                    kept = Some(p);
                    if self.layout.bloom {
                        bloom |= bloom_bits(hash_key(self.entry_key(p), self.seed));
                    }
                }
                p = next;
            }
            if let Some(last) = kept {
                let (lf, lo_) = split(last);
                self.list[lf].as_mut().unwrap().frame.bytes_mut()[lo_..lo_ + 8].copy_from_slice(&NULL.to_le_bytes());
            } else {
                self.occupied -= 1;
            }
            self.set_head(s, first);
            if self.layout.bloom {
                let (f, o) = self.slot_at(s);
                self.slot_dir[f].bytes_mut()[o + 8] = bloom;
            }
        }
    }

    /// Gives one list frame away for use outside the table and lowers the
    /// list frame bound accordingly.
    pub fn surrender_frame(&mut self) -> Result<Frame, HashError> {
        let frame = match self.spare.pop() {
            Some(f) => f,
            None if self.assigned < self.cap => self.alloc.allocate()?,
            None => return Err(HashError::NoFrame),
        };
        self.cap -= 1;
        Ok(frame)
    }

    /// Writes region `r` to a new unsorted run and removes its groups. The
    /// region's frames are rewritten in place as group frames; the last one
    /// becomes the returned writer's buffer and leaves the table, whose list
    /// frame bound shrinks by one. An empty region gets a surrendered frame
    /// instead. `part` limits the chain walk to the slot range holding the
    /// region's groups.
    pub fn spill_region(
        &mut self,
        r: RegionId,
        part: Option<usize>,
        dir: &SpillDir,
        level: u32,
        m: &mut Metrics,
    ) -> Result<RunWriter, HashError> {
        if self.regions[r].frames.is_empty() {
            let frame = self.surrender_frame()?;
            return Ok(RunWriter::create(dir, frame, OrderKind::Unsorted, level)?);
        }
        self.unlink_region(r, part);
        let fids = std::mem::take(&mut self.regions[r].frames);
        let mut frames = Vec::with_capacity(fids.len());
        for fid in fids {
            let lf = self.detach(fid);
            frames.push(compact(lf, self.words));
        }
        self.groups -= self.regions[r].groups;
        self.regions[r].groups = 0;
        self.cap -= 1;
        Ok(RunWriter::from_filled(dir, frames, OrderKind::Unsorted, level, m)?)
    }

    /// Rebuilds the table around a subset of its groups. `keep` maps a group's
    /// hash to the slot range it should stay in, or `None` to hand it to
    /// `sink`. Survivors are packed into region 0, starting in `reserve` and
    /// continuing in source frames as they drain; the reserve joins the table.
    pub fn relocate(
        &mut self,
        reserve: Frame,
        mut keep: impl FnMut(u64) -> Option<usize>,
        mut sink: impl FnMut(u64, &[u8], &[u8]) -> Result<(), HashError>,
    ) -> Result<(), HashError> {
        let fids: Vec<u32> = self.regions.iter_mut().flat_map(|r| std::mem::take(&mut r.frames)).collect();
        let sources: Vec<ListFrame> = fids.into_iter().map(|fid| self.detach(fid)).collect();
        for r in &mut self.regions {
            r.groups = 0;
        }
        self.groups = 0;
        self.cap += 1;
        let size = self.layout.frame_size;
        let mut done: Vec<ListFrame> = Vec::new();
        let mut cur = ListFrame::fresh(reserve, 0);
        let mut drained: VecDeque<Frame> = self.spare.drain(..).collect();
        let mut parts = Vec::new();
        for src in sources {
            for_each_entry(&src, self.words, |_, e| {
                let rec = &e[LINK_BYTES..];
                let h = hash_key(record::key(rec), self.seed);
                let Some(part) = keep(h) else {
                    return sink(h, record::key(rec), record::fields(rec));
                };
                if size - cur.used < e.len() {
                    let next = drained.pop_front().ok_or(HashError::CapacityExceeded)?;
                    done.push(std::mem::replace(&mut cur, ListFrame::fresh(next, 0)));
                }
                cur.frame.bytes_mut()[cur.used..cur.used + e.len()].copy_from_slice(e);
                cur.used += e.len();
                cur.count += 1;
                parts.push(part);
                Ok(())
            })?;
            drained.push_back(src.frame);
        }
        done.push(cur);
        self.spare.extend(drained);
        self.reset_slots();
        let mut parts = parts.into_iter();
        for lf in done {
            let fid = self.attach(lf);
            let lf = self.list[fid as usize].as_ref().unwrap();
            let mut links = Vec::with_capacity(lf.count as usize);
            for_each_entry(lf, self.words, |off, e| {
                links.push((off, hash_key(record::key(&e[LINK_BYTES..]), self.seed)));
                Ok::<_, ()>(())
            })
            .unwrap();
            for (off, h) in links {
                let s = self.slot(h, parts.next().unwrap());
                let head = self.head(s);
                if head == NULL {
                    self.occupied += 1;
                }
                self.list[fid as usize].as_mut().unwrap().frame.bytes_mut()[off..off + 8]
                    .copy_from_slice(&head.to_le_bytes());
                self.set_head(s, ptr(fid, off));
                if self.layout.bloom {
                    self.or_bloom(s, bloom_bits(h));
                }
                self.groups += 1;
                self.regions[0].groups += 1;
            }
        }
        Ok(())
    }

    /// Moves the groups selected by `pred` into `dest` and hands the rest to
    /// `sink`. Source frames are released as they drain, leaving this table
    /// empty.
    pub fn rehash_into(
        &mut self,
        dest: &mut ChainedHashTable,
        mut pred: impl FnMut(u64) -> Option<usize>,
        mut sink: impl FnMut(u64, &[u8], &[u8]) -> Result<(), HashError>,
        m: &mut Metrics,
    ) -> Result<(), HashError> {
        let fids: Vec<u32> = self.regions.iter_mut().flat_map(|r| std::mem::take(&mut r.frames)).collect();
        self.reset_slots();
        self.groups = 0;
        for r in &mut self.regions {
            r.groups = 0;
        }
        for fid in fids {
            let src = self.detach(fid);
            for_each_entry(&src, self.words, |_, e| {
                let rec = &e[LINK_BYTES..];
                let (key, state) = (record::key(rec), record::fields(rec));
                let h = hash_key(key, self.seed);
                match pred(h) {
                    Some(part) => {
                        let dh = dest.hash(key);
                        match dest.insert_or_aggregate(dh, part, key, FrameKind::Group, state, &[0], m)? {
                            Insert::TableFull => Err(HashError::CapacityExceeded),
                            _ => Ok(()),
                        }
                    }
                    None => sink(h, key, state),
                }
            })?;
        }
        Ok(())
    }
}

/// Calls `f(offset, entry)` for each entry of a list frame.
fn for_each_entry<E>(lf: &ListFrame, words: usize, mut f: impl FnMut(usize, &[u8]) -> Result<(), E>) -> Result<(), E> {
    let buf = lf.frame.bytes();
    let mut at = FRAME_HEADER;
    while at < lf.used {
        let len = LINK_BYTES + record::encoded_len(record::key_len(&buf[at + LINK_BYTES..]), words);
        f(at, &buf[at..at + len])?;
        at += len;
    }
    Ok(())
}

/// Rewrites a list frame in place as a group frame by dropping the links.
fn compact(lf: ListFrame, words: usize) -> Frame {
    let ListFrame { mut frame, used, count, .. } = lf;
    frame.reset(FrameKind::Group, words);
    let buf = frame.bytes_mut();
    let (mut src, mut dst) = (FRAME_HEADER, FRAME_HEADER);
    while src < used {
        let len = record::encoded_len(record::key_len(&buf[src + LINK_BYTES..]), words);
        buf.copy_within(src + LINK_BYTES..src + LINK_BYTES + len, dst);
        dst += len;
        src += LINK_BYTES + len;
    }
    buf[0..4].copy_from_slice(&count.to_le_bytes());
    frame.resync().expect("compacted frame is well formed");
    frame
}
