use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::encoder::{EncoderHandle, VsfVector};
use crate::error::{Error, Result};
use crate::graph::{k_hop_node_subgraph, Graph};
use crate::par::Exec;
use crate::render::{RenderCache, RenderJob, RenderStyle};

const MAGIC: &[u8; 4] = b"VSFR";
const VERSION: u32 = 1;

/// What produced a repository; compared field by field on reuse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoMeta {
    pub graph_digest: String,
    pub style_digest: String,
    pub k: usize,
    pub encoder_id: String,
}

impl RepoMeta {
    pub fn new(g: &Graph, style: &RenderStyle, k: usize, enc: &EncoderHandle) -> Self {
        RepoMeta {
            graph_digest: g.digest(),
            style_digest: style.digest(),
            k,
            encoder_id: enc.id(),
        }
    }

    /// Fails with a staleness error naming the first mismatched field.
    pub fn check(&self, expected: &RepoMeta) -> Result<()> {
        let fields: [(&'static str, String, String); 4] = [
            ("graph digest", self.graph_digest.clone(), expected.graph_digest.clone()),
            ("style digest", self.style_digest.clone(), expected.style_digest.clone()),
            ("k", self.k.to_string(), expected.k.to_string()),
            ("encoder id", self.encoder_id.clone(), expected.encoder_id.clone()),
        ];
        for (field, found, want) in fields {
            if found != want {
                return Err(Error::Stale {
                    field,
                    found,
                    expected: want,
                });
            }
        }
        Ok(())
    }
}

/// Counters from a repository build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub rendered: usize,
    pub cached: usize,
    pub encoded: usize,
    /// True when an existing file was reused instead of rebuilt.
    pub reused: bool,
}

/// Static per-node VSFs, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VsfRepository {
    meta: RepoMeta,
    dim: usize,
    data: Vec<f32>,
}

impl VsfRepository {
    /// Renders and encodes the node-centered `k`-hop view of every node.
    pub fn build(
        g: &Graph,
        k: usize,
        style: &RenderStyle,
        enc: &EncoderHandle,
        cache: &RenderCache,
        exec: Exec,
    ) -> Result<(Self, BuildStats)> {
        if enc.trainable() {
            return Err(Error::arg("repository build needs a frozen encoder"));
        }
        let jobs = (0..g.num_nodes())
            .map(|v| Ok(RenderJob::new(k_hop_node_subgraph(g, v, k)?, style.clone())))
            .collect::<Result<Vec<_>>>()?;
        let batch = cache.run(&jobs, exec)?;
        let vsfs = enc.encode_batch(&batch.images, exec);
        let dim = enc.output_dim();
        let data = vsfs.into_iter().flat_map(|v| v.0).collect();
        let stats = BuildStats {
            rendered: batch.rendered,
            cached: batch.cached,
            encoded: g.num_nodes(),
            reused: false,
        };
        Ok((
            VsfRepository {
                meta: RepoMeta::new(g, style, k, enc),
                dim,
                data,
            },
            stats,
        ))
    }

    /// Loads `path` when it matches; otherwise builds and saves. A file
    /// produced from different inputs is a staleness error, not overwritten.
    pub fn build_or_load(
        path: &Path,
        g: &Graph,
        k: usize,
        style: &RenderStyle,
        enc: &EncoderHandle,
        cache: &RenderCache,
        exec: Exec,
    ) -> Result<(Self, BuildStats)> {
        let expected = RepoMeta::new(g, style, k, enc);
        if path.exists() {
            let repo = Self::load(path)?;
            repo.meta.check(&expected)?;
            return Ok((
                repo,
                BuildStats {
                    reused: true,
                    ..BuildStats::default()
                },
            ));
        }
        let (repo, stats) = Self::build(g, k, style, enc, cache, exec)?;
        repo.save(path)?;
        Ok((repo, stats))
    }

    pub fn from_rows(meta: RepoMeta, rows: &[VsfVector]) -> Result<Self> {
        let dim = rows.first().map_or(0, VsfVector::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::arg("VSF rows differ in length"));
        }
        Ok(VsfRepository {
            meta,
            dim,
            data: rows.iter().flat_map(|r| r.0.iter().copied()).collect(),
        })
    }

    pub fn meta(&self) -> &RepoMeta {
        &self.meta
    }

    pub fn num_rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn matrix(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.num_rows(), self.dim), |(i, j)| self.data[i * self.dim + j] as f64)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.num_rows() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        let k = self.meta.k.to_string();
        let strings = [
            self.meta.graph_digest.as_str(),
            self.meta.style_digest.as_str(),
            k.as_str(),
            self.meta.encoder_id.as_str(),
        ];
        out.extend_from_slice(&(strings.len() as u32).to_le_bytes());
        for s in strings {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a VSF repository".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported repository version {version}")));
        }
        let n = r.u64()? as usize;
        let dim = r.u32()? as usize;
        let count = r.u32()?;
        if count != 4 {
            return Err(Error::Format(format!("expected 4 metadata strings, found {count}")));
        }
        let mut strings = Vec::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let s = std::str::from_utf8(r.take(len)?)
                .map_err(|e| Error::Format(format!("metadata not UTF-8: {e}")))?;
            strings.push(s.to_string());
        }
        let k = strings[2]
            .parse()
            .map_err(|_| Error::Format(format!("bad k {:?}", strings[2])))?;
        let body = r.take(n * dim * 4)?;
        if r.at != bytes.len() {
            return Err(Error::Format("trailing bytes after repository".into()));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(VsfRepository {
            meta: RepoMeta {
                graph_digest: strings[0].clone(),
                style_digest: strings[1].clone(),
                k,
                encoder_id: strings[3].clone(),
            },
            dim,
            data,
        })
    }

    /// Atomic write.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))?;
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated repository".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
