//! Synthetic pairs as CSV: header `x_0,...,x_{d-1},label,domain`, one row
//! per instance, source rows first.

use std::io::{Read, Write};

use super::{Dataset, DomainPair, DomainTag, ShiftSpec};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Target rows carry their true labels.
pub fn write_pair_csv(w: impl Write, pair: &DomainPair) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let d = pair.source.dim();
    let mut header: Vec<String> = (0..d).map(|k| format!("x_{k}")).collect();
    header.push("label".into());
    header.push("domain".into());
    out.write_record(&header)?;
    let target = pair.labelled_target();
    for ds in [&pair.source, &target] {
        let labels = ds.labels.as_deref().unwrap_or(&[]);
        for (row, y) in ds.features.row_iter().zip(labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(y.to_string());
            rec.push(ds.domain.as_str().into());
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_pair_csv`]. Labelling rules are not stored, so the
/// result carries none.
pub fn read_pair_csv(r: impl Read, num_classes: usize) -> Result<DomainPair> {
    let mut input = csv::Reader::from_reader(r);
    let d = input.headers()?.len().checked_sub(2).ok_or_else(|| {
        Error::Format("csv needs feature, label and domain columns".into())
    })?;
    let mut parts: [(Vec<f64>, Vec<usize>); 2] = Default::default();
    for (line, rec) in input.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Format(format!("data row {}: bad {what}", line + 1));
        let slot = match &rec[d + 1] {
            "source" => 0,
            "target" => 1,
            _ => return Err(bad("domain")),
        };
        for k in 0..d {
            parts[slot].0.push(rec[k].parse().map_err(|_| bad("feature"))?);
        }
        parts[slot].1.push(rec[d].parse().map_err(|_| bad("label"))?);
    }
    let [(xs, ys), (xt, yt)] = parts;
    let source = Dataset::new(
        Tensor::matrix(ys.len(), d, xs)?,
        Some(ys),
        DomainTag::Source,
        num_classes,
    )?;
    let target = Dataset::new(
        Tensor::matrix(yt.len(), d, xt)?,
        None,
        DomainTag::Target,
        num_classes,
    )?;
    DomainPair::new(source, target, yt, None, None, ShiftSpec::Loaded)
}
