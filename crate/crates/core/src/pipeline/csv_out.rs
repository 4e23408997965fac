use std::path::Path;

use super::sweep::SweepRow;
use super::train::EpochLoss;
use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn to_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn metrics_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    to_bytes(
        &["method", "intensity", "metric", "mean", "std", "n"],
        rows.iter().map(|r| {
            vec![
                r.method.clone(),
                r.intensity.to_string(),
                r.metric.to_string(),
                r.mean.to_string(),
                r.std.to_string(),
                r.n.to_string(),
            ]
        }),
    )
}

pub fn loss_csv(history: &[EpochLoss]) -> Result<Vec<u8>> {
    to_bytes(
        &["epoch", "train_loss", "val_loss"],
        history.iter().map(|e| vec![e.epoch.to_string(), e.train_loss.to_string(), e.val_loss.to_string()]),
    )
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    crate::io::write_atomic(path, &metrics_csv(rows)?)
}

pub fn write_loss_csv(path: impl AsRef<Path>, history: &[EpochLoss]) -> Result<()> {
    crate::io::write_atomic(path, &loss_csv(history)?)
}
