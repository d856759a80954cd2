//! Corpus and index files on disk.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use nyaya_core::corpus::{CorpusError, IngestReport};
use nyaya_core::{Corpus, VectorIndex};

/// Write `bytes` to a sibling temp file, fsync it, then rename over `path`,
/// so readers see the old file or the new one and never a prefix.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

pub fn save_index(path: &Path, index: &VectorIndex) -> Result<()> {
    write_atomic(path, &index.to_bytes()).with_context(|| format!("writing index {}", path.display()))
}

pub fn load_index(path: &Path) -> Result<VectorIndex> {
    let bytes = fs::read(path).with_context(|| format!("reading index {}", path.display()))?;
    VectorIndex::from_bytes(&bytes).with_context(|| format!("loading index {}", path.display()))
}

pub fn now_millis() -> i64 {
    chrono::Utc::now().timestamp_millis()
}

/// Ingest a corpus file leniently: bad lines are reported and skipped.
pub fn read_corpus(path: &Path, ingested_at: i64) -> Result<(Corpus, IngestReport)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading corpus {}", path.display()))?;
    let mut corpus = Corpus::new();
    let report = corpus.ingest_lines(text.lines(), ingested_at);
    Ok((corpus, report))
}

/// Ingest a corpus file, failing on the first bad line.
pub fn read_corpus_strict(path: &Path, ingested_at: i64) -> Result<Corpus> {
    let text = fs::read_to_string(path).with_context(|| format!("reading corpus {}", path.display()))?;
    let mut corpus = Corpus::new();
    corpus
        .ingest_lines_strict(text.lines(), ingested_at)
        .map_err(|e: CorpusError| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(corpus)
}

/// Append already-serialized records to a corpus file and fsync.
pub fn append_lines(path: &Path, lines: &str) -> std::io::Result<()> {
    if lines.is_empty() {
        return Ok(());
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(lines.as_bytes())?;
    if !lines.ends_with('\n') {
        f.write_all(b"\n")?;
    }
    f.sync_data()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nyaya_core::LocalEmbedder;

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_atomic(&p, b"first version").unwrap();
        write_atomic(&p, b"2").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"2");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn index_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.nyix");
        let e = LocalEmbedder::new(16).unwrap();
        let mut idx = VectorIndex::new(16).unwrap();
        idx.add("a#0", &e.embed("theft").unwrap()).unwrap();
        save_index(&p, &idx).unwrap();
        assert_eq!(load_index(&p).unwrap(), idx);
        fs::write(&p, b"NYIX").unwrap();
        assert!(load_index(&p).is_err());
    }
}
