use std::cell::Cell;
use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use super::config::SearchConfig;
use crate::error::{Error, Result};
use crate::operators::OpKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub mask_mean: f64,
    pub mask_entropy: f64,
}

/// Contents of `result.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub config: SearchConfig,
    pub induced_arch: Vec<OpKind>,
    pub edges_total: usize,
    pub edges_kept: usize,
    pub params_total: usize,
    pub params_kept: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub per_epoch: Vec<EpochRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

/// Compact JSON with every float written to 17 significant digits.
///
/// serde_json turns NaN and infinities into `null` before they reach
/// `write_f64`, and the reports written here never hold a real null, so any
/// null marks a non-finite value.
struct SeventeenDigits<'a> {
    non_finite: &'a Cell<bool>,
}

impl Formatter for SeventeenDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            self.non_finite.set(true);
            writer.write_all(b"null")
        }
    }

    fn write_null<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.non_finite.set(true);
        writer.write_all(b"null")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serialises `value` with 17-significant-digit floats and a trailing
/// newline. Non-finite floats are rejected.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let non_finite = Cell::new(false);
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits { non_finite: &non_finite });
    value.serialize(&mut ser)?;
    if non_finite.get() {
        return Err(Error::NonFinite("float in JSON output".into()));
    }
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("JSON is UTF-8"))
}

/// Writes `value` as 17-digit JSON to `path`.
pub fn write_json<T: Serialize>(path: impl AsRef<std::path::Path>, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}
