use std::collections::HashMap;
use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::raster::{render, ImageBuffer};
use super::style::{Labeling, RenderStyle};
use crate::error::{Error, Result};
use crate::graph::SubgraphView;
use crate::par::Exec;

const HASH_KEYWORD: &str = "gvn-pixel-sha256";

/// One image to produce.
#[derive(Debug, Clone)]
pub struct RenderJob {
    pub view: SubgraphView,
    pub style: RenderStyle,
    pub seed: u64,
}

impl RenderJob {
    /// Job seeded from the view's own structure.
    pub fn new(view: SubgraphView, style: RenderStyle) -> Self {
        let seed = view.layout_seed();
        RenderJob { view, style, seed }
    }

    /// Content key over (canonical subgraph encoding, style digest, seed).
    pub fn key(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"render/v1");
        h.update(
            self.view
                .canonical_encoding(self.style.labeling == Labeling::Unique),
        );
        h.update(self.style.digest().as_bytes());
        h.update(self.seed.to_le_bytes());
        hex::encode(h.finalize())
    }
}

/// Images plus what it took to produce them.
#[derive(Debug, Clone, Default)]
pub struct BatchOutput {
    pub images: Vec<ImageBuffer>,
    pub rendered: usize,
    pub cached: usize,
    /// Entries that failed verification and were re-rendered.
    pub repaired: usize,
}

/// Content-addressed PNG store: `<dir>/<first-2-hex>/<hash>.png`.
#[derive(Debug, Clone)]
pub struct RenderCache {
    dir: PathBuf,
}

enum Outcome {
    Hit(ImageBuffer),
    Rendered(ImageBuffer),
    Repaired(ImageBuffer),
}

impl RenderCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(RenderCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.png"))
    }

    /// Number of cached images on disk.
    pub fn len(&self) -> usize {
        let Ok(shards) = fs::read_dir(&self.dir) else {
            return 0;
        };
        shards
            .flatten()
            .filter_map(|s| fs::read_dir(s.path()).ok())
            .flat_map(|d| d.flatten())
            .filter(|f| f.path().extension().is_some_and(|e| e == "png"))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Renders every view with one style, reusing cached images.
    pub fn render_batch(
        &self,
        views: &[SubgraphView],
        style: &RenderStyle,
        exec: Exec,
    ) -> Result<BatchOutput> {
        let jobs: Vec<RenderJob> = views
            .iter()
            .map(|v| RenderJob::new(v.clone(), style.clone()))
            .collect();
        self.run(&jobs, exec)
    }

    /// Runs the jobs; jobs sharing a key are produced once and counted once.
    pub fn run(&self, jobs: &[RenderJob], exec: Exec) -> Result<BatchOutput> {
        let keys: Vec<String> = exec.map(jobs, RenderJob::key);
        let mut first_of: HashMap<&str, usize> = HashMap::new();
        let mut unique = Vec::new();
        let slot: Vec<usize> = keys
            .iter()
            .enumerate()
            .map(|(i, k)| {
                *first_of.entry(k.as_str()).or_insert_with(|| {
                    unique.push(i);
                    unique.len() - 1
                })
            })
            .collect();
        let outcomes = exec.try_map(&unique, |&i| self.fetch_or_render(&jobs[i]))?;
        let mut out = BatchOutput::default();
        let mut images = Vec::with_capacity(unique.len());
        for o in outcomes {
            let img = match o {
                Outcome::Hit(img) => {
                    out.cached += 1;
                    img
                }
                Outcome::Rendered(img) => {
                    out.rendered += 1;
                    img
                }
                Outcome::Repaired(img) => {
                    out.rendered += 1;
                    out.repaired += 1;
                    img
                }
            };
            images.push(img);
        }
        out.images = slot.into_iter().map(|s| images[s].clone()).collect();
        Ok(out)
    }

    fn fetch_or_render(&self, job: &RenderJob) -> Result<Outcome> {
        let path = self.path_for(&job.key());
        let mut repaired = false;
        if path.exists() {
            match read_png(&path) {
                Ok(img) if (img.height(), img.width()) == job.style.canvas_px => {
                    return Ok(Outcome::Hit(img))
                }
                _ => repaired = true,
            }
        }
        let img = render(&job.view, &job.style, job.seed)?;
        write_png_atomic(&path, &img)?;
        Ok(if repaired {
            Outcome::Repaired(img)
        } else {
            Outcome::Rendered(img)
        })
    }
}

pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, img.width(), img.height());
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.add_text_chunk(HASH_KEYWORD.to_string(), img.content_hash())
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut w = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
        w.write_image_data(img.as_raw())
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(bytes)
}

/// Decodes a cached PNG and checks its embedded pixel hash.
pub fn read_png(path: &Path) -> Result<ImageBuffer> {
    let cache_err = |msg: String| Error::Cache {
        path: path.to_path_buf(),
        msg,
    };
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| cache_err(e.to_string()))?;
    let expected = reader
        .info()
        .uncompressed_latin1_text
        .iter()
        .find(|t| t.keyword == HASH_KEYWORD)
        .map(|t| t.text.clone())
        .ok_or_else(|| cache_err("missing pixel hash".into()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| cache_err("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| cache_err(e.to_string()))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(cache_err("not 8-bit RGB".into()));
    }
    buf.truncate(info.buffer_size());
    let img = ImageBuffer::from_raw(info.height, info.width, buf)?;
    if img.content_hash() != expected {
        return Err(cache_err("pixel hash mismatch".into()));
    }
    Ok(img)
}

fn write_png_atomic(path: &Path, img: &ImageBuffer) -> Result<()> {
    let parent = path.parent().expect("cache paths have a shard directory");
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let bytes = encode_png(img)?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
    tmp.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_png(path: &Path, img: &ImageBuffer) -> Result<()> {
    write_png_atomic(path, img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{k_hop_node_subgraph, Graph};
    use crate::render::style::NodeShape;

    fn views(n: usize) -> Vec<SubgraphView> {
        let g = Graph::from_edges(n, (0..n).map(|i| (i, (i * 3 + 1) % n)).filter(|(a, b)| a != b))
            .unwrap();
        (0..n).map(|v| k_hop_node_subgraph(&g, v, 2).unwrap()).collect()
    }

    fn small_style() -> RenderStyle {
        RenderStyle::default().with_canvas(64, 64)
    }

    #[test]
    fn second_batch_is_all_hits() {
        let dir = tempfile::tempdir().unwrap();
        let cache = RenderCache::new(dir.path()).unwrap();
        let vs = views(12);
        let first = cache.render_batch(&vs, &small_style(), Exec::auto()).unwrap();
        assert_eq!(first.cached, 0);
        assert_eq!(first.images.len(), 12);
        let distinct = cache.len();
        assert_eq!(first.rendered, distinct);
        let second = cache.render_batch(&vs, &small_style(), Exec::auto()).unwrap();
        assert_eq!((second.rendered, second.cached), (0, distinct));
        assert_eq!(first.images, second.images);
        assert_eq!(cache.len(), distinct);
    }

    #[test]
    fn style_change_misses() {
        let dir = tempfile::tempdir().unwrap();
        let cache = RenderCache::new(dir.path()).unwrap();
        let vs = views(6);
        cache.render_batch(&vs, &small_style(), Exec::Sequential).unwrap();
        let other = RenderStyle {
            node_shape: NodeShape::Circle,
            ..small_style()
        };
        let before = cache.len();
        let out = cache.render_batch(&vs, &other, Exec::Sequential).unwrap();
        assert_eq!(out.cached, 0);
        assert_eq!(out.rendered, before);
    }

    #[test]
    fn corrupted_entry_is_rerendered() {
        let dir = tempfile::tempdir().unwrap();
        let cache = RenderCache::new(dir.path()).unwrap();
        let vs = views(3);
        let style = small_style();
        let first = cache.render_batch(&vs[..1], &style, Exec::Sequential).unwrap();
        let path = cache.path_for(&RenderJob::new(vs[0].clone(), style.clone()).key());
        fs::write(&path, b"not a png").unwrap();
        assert!(matches!(read_png(&path), Err(Error::Cache { .. })));
        let again = cache.render_batch(&vs[..1], &style, Exec::Sequential).unwrap();
        assert_eq!(again.repaired, 1);
        assert_eq!(again.images[0], first.images[0]);
        assert!(read_png(&path).is_ok());
    }

    #[test]
    fn pixel_hash_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let img = render(&views(4)[0], &small_style(), 1).unwrap();
        let mut bytes = encode_png(&img).unwrap();
        // the hash text sits in a tEXt chunk ahead of the image data; flip one hex digit
        let hash = img.content_hash();
        let at = bytes
            .windows(hash.len())
            .position(|w| w == hash.as_bytes())
            .unwrap();
        bytes[at] = if bytes[at] == b'0' { b'1' } else { b'0' };
        let path = dir.path().join("bad.png");
        fs::write(&path, bytes).unwrap();
        // CRC of the text chunk is now wrong too; either way it is a cache error
        assert!(matches!(read_png(&path), Err(Error::Cache { .. })));
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = render(&views(4)[1], &small_style(), 3).unwrap();
        let path = dir.path().join("x.png");
        write_png(&path, &img).unwrap();
        assert_eq!(read_png(&path).unwrap(), img);
    }
}
