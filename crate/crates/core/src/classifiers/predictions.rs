//! Prediction-vector files: one `source_id,p_0,...,p_{D-1}` line per mesh.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};
use crate::nn::PredictionVector;

const HEADER: &str = "# source_id,probabilities";

/// Writes records with 17 significant digits, enough to reload every value
/// bit-exactly.
pub fn write_predictions(
    records: &[(String, PredictionVector)],
    w: &mut dyn Write,
) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    let mut line = String::new();
    for (id, p) in records {
        line.clear();
        line.push_str(id);
        for x in p.probs() {
            write!(line, ",{x:.16e}").expect("string formatting");
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn save_predictions(records: &[(String, PredictionVector)], path: &Path) -> Result<()> {
    for (id, _) in records {
        if id.contains([',', '\n']) || id.starts_with('#') {
            return Err(Error::Config(format!("source id {id:?} cannot be stored")));
        }
    }
    write_atomic(path, |w| write_predictions(records, w))
}

pub fn parse_predictions(text: &str, origin: &str) -> Result<Vec<(String, PredictionVector)>> {
    let mut out: Vec<(String, PredictionVector)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = || format!("{origin}:{}", i + 1);
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default().to_string();
        let probs = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(at(), e.to_string()))?;
        let p = PredictionVector::new(probs).map_err(|e| Error::parse(at(), e.to_string()))?;
        if let Some((_, first)) = out.first() {
            if first.len() != p.len() {
                return Err(Error::parse(at(), format!("expected {} probabilities", first.len())));
            }
        }
        out.push((id, p));
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Vec<(String, PredictionVector)>> {
    parse_predictions(&read_to_string(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let records = vec![
            ("a_000".to_string(), PredictionVector::from_logits(&[0.1, 2.0, -1.0])),
            ("b_001".to_string(), PredictionVector::one_hot(3, 2)),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        save_predictions(&records, &path).unwrap();
        assert_eq!(load_predictions(&path).unwrap(), records);
        let text = std::fs::read_to_string(&path).unwrap();
        let first = text.lines().nth(1).unwrap();
        assert!(first.split(',').nth(1).unwrap().len() >= 10);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_predictions("x,0.5,0.6\n", "t").is_err());
        assert!(parse_predictions("x,0.5,zz\n", "t").is_err());
        assert!(parse_predictions("x,0.5,0.5\ny,1.0\n", "t").is_err());
        assert!(parse_predictions("# only a header\n", "t").unwrap().is_empty());
    }
}
