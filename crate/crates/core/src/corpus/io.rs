//! Streaming readers for plain or gzip-compressed ngram files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use super::ngram::{parse_ngram_line, NgramRecord};

/// Opens a file for buffered line reading, decompressing when the name ends
/// in `.gz`.
pub fn open_lines(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let file = File::open(path)?;
    let reader: Box<dyn Read + Send> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::with_capacity(1 << 16, reader)))
}

/// Line tallies for one pass over a file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadStats {
    pub lines: u64,
    pub parsed: u64,
    pub malformed: u64,
}

impl ReadStats {
    pub fn merge(&mut self, other: ReadStats) {
        self.lines += other.lines;
        self.parsed += other.parsed;
        self.malformed += other.malformed;
    }
}

/// Calls `f` for every well-formed order-`n` record in `path`, skipping and
/// counting malformed lines.
pub fn for_each_record(
    path: &Path,
    n: usize,
    mut f: impl FnMut(NgramRecord),
) -> io::Result<ReadStats> {
    let mut stats = ReadStats::default();
    let mut reader = open_lines(path)?;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        match parse_ngram_line(&line, n) {
            Ok(rec) => {
                stats.parsed += 1;
                f(rec);
            }
            Err(e) => {
                stats.malformed += 1;
                log::debug!("{}: skipping line {}: {e}", path.display(), stats.lines);
            }
        }
    }
    Ok(stats)
}

/// Reads every record of a file into memory.
pub fn read_records(path: &Path, n: usize) -> io::Result<(Vec<NgramRecord>, ReadStats)> {
    let mut out = Vec::new();
    let stats = for_each_record(path, n, |r| out.push(r))?;
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write;

    #[test]
    fn reads_plain_and_gzip_with_tallies() {
        let dir = tempfile::tempdir().unwrap();
        let body = "mill_NOUN\t1820\t3\t3\nbroken line\nwater_NOUN\t1905\t17\t12\n\n";
        let plain = dir.path().join("uni.tsv");
        std::fs::write(&plain, body).unwrap();
        let gz = dir.path().join("uni.tsv.gz");
        let mut enc = GzEncoder::new(File::create(&gz).unwrap(), Compression::default());
        enc.write_all(body.as_bytes()).unwrap();
        enc.finish().unwrap();

        for path in [plain, gz] {
            let (recs, stats) = read_records(&path, 1).unwrap();
            assert_eq!(recs.len(), 2);
            assert_eq!(
                stats,
                ReadStats {
                    lines: 3,
                    parsed: 2,
                    malformed: 1
                }
            );
        }
    }
}
