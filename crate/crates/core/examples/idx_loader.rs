//! Loads an IDX image/label pair. Without arguments it writes and reads a
//! tiny fixture; otherwise pass `<images> <labels> [max_items]`.

use std::fs::File;
use std::path::PathBuf;

use acda::data::{load_idx, write_idx_images, write_idx_labels};

fn main() -> acda::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut fixture = None;
    let (images, labels, max) = if args.len() >= 2 {
        let max = args.get(2).map_or(usize::MAX, |m| m.parse().expect("max_items must be an integer"));
        (PathBuf::from(&args[0]), PathBuf::from(&args[1]), max)
    } else {
        let dir = std::env::temp_dir().join(format!("acda-idx-{}", std::process::id()));
        std::fs::create_dir_all(&dir)?;
        let pixels: Vec<u8> = (0..2 * 3 * 3).map(|k| (k * 15) as u8).collect();
        write_idx_images(File::create(dir.join("images"))?, 3, 3, &pixels)?;
        write_idx_labels(File::create(dir.join("labels"))?, &[7, 2])?;
        fixture = Some(dir.clone());
        (dir.join("images"), dir.join("labels"), usize::MAX)
    };
    let ds = load_idx(&images, &labels, max)?;
    println!("{} items of width {}, {} classes", ds.len(), ds.dim(), ds.num_classes);
    for (i, row) in ds.features.row_iter().take(3).enumerate() {
        let head: Vec<String> = row.iter().take(9).map(|v| format!("{v:.2}")).collect();
        println!("item {i} label {}: {} ...", ds.labels.as_ref().unwrap()[i], head.join(" "));
    }
    if let Some(dir) = fixture {
        std::fs::remove_dir_all(dir)?;
    }
    Ok(())
}
