//! Text codecs for datasets.
//!
//! Datasets travel as plain CSV with a `delta,t,y` header. Comment lines
//! starting with `#` carry `key: value` metadata; the `plan` key holds the
//! test plan as JSON so a file is self-describing. A file without an
//! embedded plan can still be parsed against a caller-supplied fallback.

use std::collections::BTreeMap;
use std::path::Path;

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::plan::StressPlan;

/// A parsed dataset together with any metadata found in the file.
#[derive(Debug, Clone)]
pub struct ParsedDataset {
    pub dataset: Dataset,
    /// All `# key: value` pairs in file order (later keys overwrite).
    pub metadata: BTreeMap<String, String>,
}

/// Render a dataset to CSV text with its plan embedded, plus any extra
/// metadata pairs.
pub fn render_dataset(ds: &Dataset, extra_metadata: &[(&str, &str)]) -> String {
    let mut out = String::new();
    let plan_json = serde_json::to_string(&ds.plan).expect("plan serializes");
    out.push_str("# plan: ");
    out.push_str(&plan_json);
    out.push('\n');
    for (key, value) in extra_metadata {
        out.push_str(&format!("# {key}: {value}\n"));
    }
    out.push_str("delta,t,y\n");
    let m = ds.plan.m();
    for obs in &ds.observations {
        out.push_str(&format!("{},{},{}\n", obs.delta(m), obs.time(&ds.plan), obs.marker()));
    }
    out
}

/// Parse CSV text into a dataset. An embedded plan takes precedence over
/// the fallback; with neither, parsing fails.
pub fn parse_dataset_str(text: &str, fallback: Option<&StressPlan>) -> Result<ParsedDataset> {
    let mut metadata = BTreeMap::new();
    let mut plan: Option<StressPlan> = None;
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    let mut header_seen = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(body) = line.strip_prefix('#') {
            let body = body.trim();
            if let Some((key, value)) = body.split_once(':') {
                let key = key.trim().to_string();
                let value = value.trim().to_string();
                if key == "plan" {
                    let parsed: StressPlan = serde_json::from_str(&value).map_err(|e| {
                        Error::Parse(format!("line {}: bad plan metadata: {e}", lineno + 1))
                    })?;
                    parsed.validate()?;
                    plan = Some(parsed);
                }
                metadata.insert(key, value);
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["delta", "t", "y"] {
                return Err(Error::Parse(format!(
                    "line {}: expected header 'delta,t,y', got '{line}'",
                    lineno + 1
                )));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(Error::Parse(format!(
                "line {}: expected 3 comma-separated fields, got {}",
                lineno + 1,
                cols.len()
            )));
        }
        let delta: usize = cols[0]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad delta '{}'", lineno + 1, cols[0])))?;
        let t: f64 = cols[1]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad time '{}'", lineno + 1, cols[1])))?;
        let y: f64 = cols[2]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad marker '{}'", lineno + 1, cols[2])))?;
        rows.push((delta, t, y));
    }

    let plan = match (plan, fallback) {
        (Some(p), _) => p,
        (None, Some(p)) => p.clone(),
        (None, None) => {
            return Err(Error::Parse(
                "no plan metadata in file and no fallback plan supplied".into(),
            ))
        }
    };

    let mut observations = Vec::with_capacity(rows.len());
    for (delta, t, y) in rows {
        observations.push(Observation::from_wire(&plan, delta, t, y)?);
    }
    Ok(ParsedDataset { dataset: Dataset::new(plan, observations)?, metadata })
}

/// Write a dataset to a file.
pub fn write_dataset(ds: &Dataset, path: &Path, extra_metadata: &[(&str, &str)]) -> Result<()> {
    std::fs::write(path, render_dataset(ds, extra_metadata))?;
    Ok(())
}

/// Read a dataset from a file.
pub fn parse_dataset(path: &Path, fallback: Option<&StressPlan>) -> Result<ParsedDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset_str(&text, fallback)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> StressPlan {
        StressPlan::two_level(950.0, 1200.0, 1400.0, 400.0, 700.0, 1.0).unwrap()
    }

    fn sample_dataset() -> Dataset {
        let p = plan();
        let obs = vec![
            Observation::Failed { piece: 1, time: 125.0, marker: 1.3302026 },
            Observation::Failed { piece: 2, time: 409.5, marker: 2.8987105 },
            Observation::Censored { marker: 4.3707818 },
        ];
        Dataset::new(p, obs).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let ds = sample_dataset();
        let text = render_dataset(&ds, &[("seed", "42")]);
        let parsed = parse_dataset_str(&text, None).unwrap();
        assert_eq!(parsed.dataset.plan, ds.plan);
        assert_eq!(parsed.dataset.observations.len(), 3);
        for (a, b) in parsed.dataset.observations.iter().zip(&ds.observations) {
            match (a, b) {
                (
                    Observation::Failed { piece: p1, time: t1, marker: y1 },
                    Observation::Failed { piece: p2, time: t2, marker: y2 },
                ) => {
                    assert_eq!(p1, p2);
                    assert_eq!(t1.to_bits(), t2.to_bits(), "time must round trip bitwise");
                    assert_eq!(y1.to_bits(), y2.to_bits(), "marker must round trip bitwise");
                }
                (
                    Observation::Censored { marker: y1 },
                    Observation::Censored { marker: y2 },
                ) => assert_eq!(y1.to_bits(), y2.to_bits()),
                _ => panic!("observation kind changed in round trip"),
            }
        }
        assert_eq!(parsed.metadata.get("seed").map(String::as_str), Some("42"));
    }

    #[test]
    fn censored_rows_carry_the_censoring_time() {
        let text = render_dataset(&sample_dataset(), &[]);
        let censored_line = text.lines().find(|l| l.starts_with("3,")).unwrap();
        assert_eq!(censored_line, "3,700,4.3707818");
    }

    #[test]
    fn fallback_plan_is_used_without_embedded_metadata() {
        let text = "delta,t,y\n1,100,0.5\n";
        let p = plan();
        let parsed = parse_dataset_str(text, Some(&p)).unwrap();
        assert_eq!(parsed.dataset.plan, p);
        assert_eq!(parsed.dataset.observations.len(), 1);
        assert!(parse_dataset_str(text, None).is_err(), "no plan from any source must fail");
    }

    #[test]
    fn embedded_plan_wins_over_fallback() {
        let embedded = plan().with_change_time(300.0).unwrap();
        let mut text = String::from("# plan: ");
        text.push_str(&serde_json::to_string(&embedded).unwrap());
        text.push_str("\ndelta,t,y\n1,100,0.5\n");
        let parsed = parse_dataset_str(&text, Some(&plan())).unwrap();
        assert_eq!(parsed.dataset.plan.change_times, vec![300.0]);
    }

    #[test]
    fn empty_input_gives_empty_dataset() {
        let parsed = parse_dataset_str("", Some(&plan())).unwrap();
        assert!(parsed.dataset.is_empty());
        let header_only = parse_dataset_str("delta,t,y\n", Some(&plan())).unwrap();
        assert!(header_only.dataset.is_empty());
    }

    #[test]
    fn malformed_rows_are_rejected_with_line_numbers() {
        let p = plan();
        let cases = [
            ("delta,t,y\nx,100,0.5\n", "bad delta"),
            ("delta,t,y\n1,abc,0.5\n", "bad time"),
            ("delta,t,y\n1,100\n", "3 comma-separated fields"),
            ("t,delta,y\n", "expected header"),
            ("delta,t,y\n9,100,0.5\n", "outside"),
        ];
        for (text, needle) in cases {
            let err = parse_dataset_str(text, Some(&p)).unwrap_err();
            let msg = err.to_string();
            assert!(msg.contains(needle), "error '{msg}' should mention '{needle}'");
        }
    }

    #[test]
    fn inconsistent_rows_are_rejected() {
        // Piece 1 with a time beyond the change time.
        let err = parse_dataset_str("delta,t,y\n1,500,0.5\n", Some(&plan())).unwrap_err();
        assert!(matches!(err, Error::Domain(_) | Error::Parse(_)), "got {err:?}");
    }
}
