//! CSV writers for the experiment outputs. Formats are fixed: one header
//! row, comma separators, floats printed with Rust's shortest-roundtrip
//! `Display` so reruns of a deterministic experiment produce byte-identical
//! files.

use std::path::Path;

use crate::harness::waterfall::BerCurve;
use crate::noisefig::PenaltyReport;
use crate::{Error, Result};

/// Header of the waterfall-curve CSV.
pub const CURVE_HEADER: &str =
    "label,snr_db,frames,bits,prefec_errors,postbp_errors,prefec_ber,postbp_ber";

/// Header of the training-SNR sweep CSV.
pub const SWEEP_HEADER: &str = "train_snr_db,ne_db,nl_db,total_db,nf_db";

/// One or more BER curves as CSV, long format (curves stacked, keyed by the
/// label column).
pub fn curves_csv(curves: &[BerCurve]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for curve in curves {
        for p in &curve.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                curve.label,
                p.snr_db,
                p.frames,
                p.bits,
                p.prefec_errors,
                p.postbp_errors,
                p.prefec_ber(),
                p.postbp_ber()
            ));
        }
    }
    out
}

/// Training-SNR sweep rows as CSV. Each row pairs a penalty decomposition
/// with the analytical noise figure of the model trained at that SNR.
pub fn sweep_csv(rows: &[PenaltyReport]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for rep in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            rep.train_snr_db, rep.ne_penalty_db, rep.nl_penalty_db, rep.total_db, rep.nf_db
        ));
    }
    out
}

/// Write `text` to `dir/name`, creating the directory if needed.
pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::Io)?;
    std::fs::write(dir.join(name), text).map_err(Error::Io)
}
