//! Memory-bounded sort of commit records.
//!
//! Records accumulate in memory until their estimated size passes the budget,
//! then the buffer is sorted and written out as a run in commit log format.
//! Runs are merged with a binary heap. Records compare on every field, so the
//! merged order is the same whatever the budget.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::PathBuf;

use log::debug;
use rayon::slice::ParallelSliceMut;

use super::{parse_commit_line, CommitRecord};
use crate::error::{Error, Result};

pub struct ExternalSorter {
    budget: usize,
    tmpdir: Option<PathBuf>,
    buffer: Vec<CommitRecord>,
    buffered_bytes: usize,
    runs: Vec<File>,
}

impl ExternalSorter {
    pub fn new(budget: usize, tmpdir: Option<PathBuf>) -> Self {
        ExternalSorter {
            budget: budget.max(1),
            tmpdir,
            buffer: Vec::new(),
            buffered_bytes: 0,
            runs: Vec::new(),
        }
    }

    pub fn push(&mut self, record: CommitRecord) -> Result<()> {
        self.buffered_bytes += record.approx_bytes();
        self.buffer.push(record);
        if self.buffered_bytes >= self.budget {
            self.spill()?;
        }
        Ok(())
    }

    fn spill(&mut self) -> Result<()> {
        self.buffer.par_sort_unstable();
        let file = match &self.tmpdir {
            Some(dir) => tempfile::tempfile_in(dir).map_err(|e| Error::file(dir, e))?,
            None => tempfile::tempfile()?,
        };
        let mut out = BufWriter::new(file);
        for record in self.buffer.drain(..) {
            out.write_all(record.to_line().as_bytes())?;
            out.write_all(b"\n")?;
        }
        let mut file = out.into_inner().map_err(|e| e.into_error())?;
        file.seek(SeekFrom::Start(0))?;
        debug!("spilled sort run {} ({} bytes buffered)", self.runs.len(), self.buffered_bytes);
        self.runs.push(file);
        self.buffered_bytes = 0;
        Ok(())
    }

    pub fn finish(mut self) -> Result<SortedCommits> {
        if self.runs.is_empty() {
            self.buffer.par_sort_unstable();
            return Ok(SortedCommits::Memory(self.buffer.into_iter()));
        }
        if !self.buffer.is_empty() {
            self.spill()?;
        }
        let mut readers: Vec<RunReader> = self
            .runs
            .into_iter()
            .map(|f| RunReader {
                lines: BufReader::new(f),
                line_no: 0,
            })
            .collect();
        let mut heap = BinaryHeap::with_capacity(readers.len());
        for (i, reader) in readers.iter_mut().enumerate() {
            if let Some(record) = reader.next_record()? {
                heap.push(Reverse((record, i)));
            }
        }
        Ok(SortedCommits::Merge(Merger { readers, heap }))
    }
}

struct RunReader {
    lines: BufReader<File>,
    line_no: usize,
}

impl RunReader {
    fn next_record(&mut self) -> Result<Option<CommitRecord>> {
        let mut line = String::new();
        if self.lines.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        let record = parse_commit_line(line.trim_end_matches('\n'), self.line_no)?;
        Ok(Some(record))
    }
}

pub struct Merger {
    readers: Vec<RunReader>,
    heap: BinaryHeap<Reverse<(CommitRecord, usize)>>,
}

impl Merger {
    fn next_record(&mut self) -> Result<Option<CommitRecord>> {
        let Some(Reverse((record, run))) = self.heap.pop() else {
            return Ok(None);
        };
        if let Some(next) = self.readers[run].next_record()? {
            self.heap.push(Reverse((next, run)));
        }
        Ok(Some(record))
    }
}

/// The sorted output of ingestion, either still in memory or merged from runs on disk.
pub enum SortedCommits {
    Memory(std::vec::IntoIter<CommitRecord>),
    Merge(Merger),
}

impl SortedCommits {
    pub fn spilled_runs(&self) -> usize {
        match self {
            SortedCommits::Memory(_) => 0,
            SortedCommits::Merge(m) => m.readers.len(),
        }
    }
}

impl Iterator for SortedCommits {
    type Item = Result<CommitRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            SortedCommits::Memory(it) => it.next().map(Ok),
            SortedCommits::Merge(m) => m.next_record().transpose(),
        }
    }
}
