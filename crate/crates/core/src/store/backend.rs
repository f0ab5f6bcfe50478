use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;

/// The append-only line streams kept per patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    Records,
    Alerts,
    Acks,
}

impl Stream {
    pub fn file_name(self) -> &'static str {
        match self {
            Stream::Records => "records.jsonl",
            Stream::Alerts => "alerts.jsonl",
            Stream::Acks => "acks.jsonl",
        }
    }
}

/// Storage underneath [`super::Store`]. Lines never contain `\n`.
///
/// Implementations must make an append durable before returning `Ok`, and
/// must refuse to overwrite an existing profile version.
pub trait Backend: Send + Sync {
    fn append(&self, patient: &str, stream: Stream, lines: &[String]) -> io::Result<()>;
    fn read_lines(&self, patient: &str, stream: Stream) -> io::Result<Vec<String>>;
    fn write_profile(&self, patient: &str, version: u64, xml: &str) -> io::Result<()>;
    fn read_profile(&self, patient: &str, version: u64) -> io::Result<Option<String>>;
    fn profile_versions(&self, patient: &str) -> io::Result<Vec<u64>>;
    fn patients(&self) -> io::Result<Vec<String>>;
}

/// `<root>/<patient>/{records,alerts,acks}.jsonl` and `profile.v<N>.xml`.
#[derive(Debug)]
pub struct FileBackend {
    root: PathBuf,
}

impl FileBackend {
    pub fn new(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(FileBackend { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn patient_dir(&self, patient: &str) -> io::Result<PathBuf> {
        let dir = self.root.join(patient);
        if !dir.exists() {
            fs::create_dir_all(&dir)?;
            sync_dir(&self.root);
        }
        Ok(dir)
    }

    fn profile_path(&self, patient: &str, version: u64) -> PathBuf {
        self.root.join(patient).join(format!("profile.v{version}.xml"))
    }
}

fn sync_dir(dir: &Path) {
    // Not every platform can open a directory for syncing; the file data
    // itself is already synced at this point.
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}

impl Backend for FileBackend {
    fn append(&self, patient: &str, stream: Stream, lines: &[String]) -> io::Result<()> {
        if lines.is_empty() {
            return Ok(());
        }
        let path = self.patient_dir(patient)?.join(stream.file_name());
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(&path)?;
        let mut buf = String::new();
        for line in lines {
            debug_assert!(!line.contains('\n'));
            buf.push_str(line);
            buf.push('\n');
        }
        file.write_all(buf.as_bytes())?;
        file.sync_data()
    }

    fn read_lines(&self, patient: &str, stream: Stream) -> io::Result<Vec<String>> {
        let path = self.root.join(patient).join(stream.file_name());
        let mut file = match OpenOptions::new().read(true).write(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        // A crash mid-append can leave a partial last line; that write was
        // never acknowledged, so drop it before anything is appended after it.
        if !text.is_empty() && !text.ends_with('\n') {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            file.set_len(keep as u64)?;
            file.seek(SeekFrom::End(0))?;
            file.sync_data()?;
            text.truncate(keep);
        }
        Ok(text.lines().map(str::to_string).collect())
    }

    fn write_profile(&self, patient: &str, version: u64, xml: &str) -> io::Result<()> {
        let dir = self.patient_dir(patient)?;
        let tmp = dir.join(format!(".profile.v{version}.xml.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(xml.as_bytes())?;
            f.sync_all()?;
        }
        let target = self.profile_path(patient, version);
        // hard_link fails if the target exists, so an existing version is
        // never replaced
        let linked = fs::hard_link(&tmp, &target);
        let _ = fs::remove_file(&tmp);
        linked?;
        sync_dir(&dir);
        Ok(())
    }

    fn read_profile(&self, patient: &str, version: u64) -> io::Result<Option<String>> {
        match fs::read_to_string(self.profile_path(patient, version)) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn profile_versions(&self, patient: &str) -> io::Result<Vec<u64>> {
        let dir = self.root.join(patient);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut versions = Vec::new();
        for entry in entries {
            let name = entry?.file_name();
            let Some(name) = name.to_str() else { continue };
            if let Some(v) = name
                .strip_prefix("profile.v")
                .and_then(|rest| rest.strip_suffix(".xml"))
                .and_then(|n| n.parse::<u64>().ok())
            {
                versions.push(v);
            }
        }
        versions.sort_unstable();
        Ok(versions)
    }

    fn patients(&self) -> io::Result<Vec<String>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                if let Some(name) = entry.file_name().to_str() {
                    out.push(name.to_string());
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

/// In-process backend for tests and ephemeral servers. Can be told to fail
/// writes to exercise storage-error paths.
#[derive(Debug, Default)]
pub struct MemoryBackend {
    inner: Mutex<MemoryInner>,
}

#[derive(Debug, Default)]
struct MemoryInner {
    lines: BTreeMap<(String, Stream), Vec<String>>,
    profiles: BTreeMap<(String, u64), String>,
    fail_writes: bool,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fail_writes(&self, fail: bool) {
        self.inner.lock().fail_writes = fail;
    }
}

fn injected() -> io::Error {
    io::Error::other("injected write failure")
}

impl Backend for MemoryBackend {
    fn append(&self, patient: &str, stream: Stream, lines: &[String]) -> io::Result<()> {
        let mut inner = self.inner.lock();
        if inner.fail_writes {
            return Err(injected());
        }
        inner.lines.entry((patient.to_string(), stream)).or_default().extend(lines.iter().cloned());
        Ok(())
    }

    fn read_lines(&self, patient: &str, stream: Stream) -> io::Result<Vec<String>> {
        Ok(self.inner.lock().lines.get(&(patient.to_string(), stream)).cloned().unwrap_or_default())
    }

    fn write_profile(&self, patient: &str, version: u64, xml: &str) -> io::Result<()> {
        let mut inner = self.inner.lock();
        if inner.fail_writes {
            return Err(injected());
        }
        let key = (patient.to_string(), version);
        if inner.profiles.contains_key(&key) {
            return Err(io::Error::new(io::ErrorKind::AlreadyExists, "profile version exists"));
        }
        inner.profiles.insert(key, xml.to_string());
        Ok(())
    }

    fn read_profile(&self, patient: &str, version: u64) -> io::Result<Option<String>> {
        Ok(self.inner.lock().profiles.get(&(patient.to_string(), version)).cloned())
    }

    fn profile_versions(&self, patient: &str) -> io::Result<Vec<u64>> {
        Ok(self.inner.lock().profiles.keys().filter(|(p, _)| p == patient).map(|(_, v)| *v).collect())
    }

    fn patients(&self) -> io::Result<Vec<String>> {
        let inner = self.inner.lock();
        let mut out: Vec<String> =
            inner.profiles.keys().map(|(p, _)| p.clone()).chain(inner.lines.keys().map(|(p, _)| p.clone())).collect();
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_trailing_line_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let b = FileBackend::new(dir.path()).unwrap();
        b.append("p1", Stream::Records, &["{\"a\":1}".into()]).unwrap();
        let path = dir.path().join("p1").join("records.jsonl");
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"a\":").unwrap();
        assert_eq!(b.read_lines("p1", Stream::Records).unwrap(), ["{\"a\":1}"]);
        b.append("p1", Stream::Records, &["{\"a\":2}".into()]).unwrap();
        assert_eq!(b.read_lines("p1", Stream::Records).unwrap(), ["{\"a\":1}", "{\"a\":2}"]);
    }

    #[test]
    fn profile_versions_are_never_overwritten() {
        let dir = tempfile::tempdir().unwrap();
        let b = FileBackend::new(dir.path()).unwrap();
        b.write_profile("p1", 1, "one").unwrap();
        assert!(b.write_profile("p1", 1, "other").is_err());
        assert_eq!(b.read_profile("p1", 1).unwrap().as_deref(), Some("one"));
        b.write_profile("p1", 2, "two").unwrap();
        assert_eq!(b.profile_versions("p1").unwrap(), [1, 2]);
        assert_eq!(b.patients().unwrap(), ["p1"]);
    }
}
