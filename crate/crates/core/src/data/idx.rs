//! IDX files: big-endian `u32` magic and dimensions followed by unsigned
//! bytes. Images use magic 2051 with dims `[n, rows, cols]`, labels use
//! 2049 with dims `[n]`.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use super::{Dataset, DomainTag};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

struct Cursor<R> {
    inner: R,
    offset: u64,
    what: &'static str,
}

impl<R: Read> Cursor<R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        let mut done = 0;
        while done < buf.len() {
            match self.inner.read(&mut buf[done..]) {
                Ok(0) => {
                    return Err(Error::Truncated {
                        offset: self.offset + done as u64,
                        message: format!(
                            "{} ends {} bytes early",
                            self.what,
                            buf.len() - done
                        ),
                    })
                }
                Ok(k) => done += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_be_bytes(b))
    }
}

fn open(path: &Path, what: &'static str) -> Result<Cursor<BufReader<File>>> {
    Ok(Cursor {
        inner: BufReader::new(File::open(path)?),
        offset: 0,
        what,
    })
}

fn expect_magic<R: Read>(c: &mut Cursor<R>, want: u32) -> Result<()> {
    let got = c.u32()?;
    if got != want {
        return Err(Error::Format(format!(
            "{}: magic {got}, expected {want}",
            c.what
        )));
    }
    Ok(())
}

/// Loads at most `max_items` image/label pairs with pixels scaled to
/// `[0, 1]`. Classes are the label byte values; `num_classes` is ten or one
/// more than the largest label, whichever is larger.
pub fn load_idx(images: &Path, labels: &Path, max_items: usize) -> Result<Dataset> {
    let mut ic = open(images, "image file")?;
    let mut lc = open(labels, "label file")?;
    expect_magic(&mut ic, IMAGE_MAGIC)?;
    expect_magic(&mut lc, LABEL_MAGIC)?;
    let n_images = ic.u32()? as usize;
    let rows = ic.u32()? as usize;
    let cols = ic.u32()? as usize;
    let n_labels = lc.u32()? as usize;
    if n_images != n_labels {
        return Err(Error::Consistency(format!(
            "{n_images} images but {n_labels} labels"
        )));
    }
    let n = n_images.min(max_items);
    let width = rows * cols;
    let mut pixels = vec![0u8; n * width];
    ic.fill(&mut pixels)?;
    let mut ys = vec![0u8; n];
    lc.fill(&mut ys)?;
    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels: Vec<usize> = ys.iter().map(|&y| usize::from(y)).collect();
    let num_classes = labels.iter().map(|&y| y + 1).max().unwrap_or(0).max(10);
    Dataset::new(
        Tensor::matrix(n, width, features)?,
        Some(labels),
        DomainTag::Source,
        num_classes,
    )
}

/// Writes `n` images of `rows x cols` bytes.
pub fn write_idx_images(
    mut w: impl Write,
    rows: usize,
    cols: usize,
    pixels: &[u8],
) -> Result<()> {
    let width = rows * cols;
    if width == 0 || pixels.len() % width != 0 {
        return Err(Error::contract("pixel count is not a multiple of rows * cols"));
    }
    w.write_all(&IMAGE_MAGIC.to_be_bytes())?;
    for dim in [pixels.len() / width, rows, cols] {
        w.write_all(&(dim as u32).to_be_bytes())?;
    }
    w.write_all(pixels)?;
    Ok(())
}

pub fn write_idx_labels(mut w: impl Write, labels: &[u8]) -> Result<()> {
    w.write_all(&LABEL_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)?;
    Ok(())
}
