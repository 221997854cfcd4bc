//! Reading driving profiles, load curves, and price curves from CSV, plus a
//! seeded synthetic fleet generator for when survey data is unavailable.
//!
//! File formats are documented in `docs/data-formats.md` at the repository
//! root. All files are UTF-8 CSV with `.` as the decimal separator.

use crate::series::{HourlySeries, Unit};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

pub const HOURS_PER_DAY: usize = 24;

/// Spread (sigma of the underlying normal) of the per-profile mileage
/// scaling factor used by the synthetic generator.
pub const SYNTH_MILES_SIGMA: f64 = 0.2;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {msg}")]
    BadRow {
        path: String,
        row: usize,
        msg: String,
    },
    #[error("{path}: file contains no data rows")]
    EmptyFile { path: String },
    #[error("{path}: expected {want} rows, found {got}")]
    LengthMismatch {
        path: String,
        want: usize,
        got: usize,
    },
    #[error("{path}: {msg}")]
    BadHeader { path: String, msg: String },
    #[error("archetype list must not be empty")]
    NoArchetypes,
    #[error("archetype weights must be positive and sum to 1 (sum = {0})")]
    BadWeights(f64),
}

/// One row of a driving-profile table: a vehicle id and 24 hourly mile values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub id: String,
    pub miles: Vec<f64>,
}

/// A set of daily driving profiles, one per vehicle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProfileTable {
    pub rows: Vec<ProfileRow>,
}

impl ProfileTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Load a profile table from a CSV file with header `id,h0,...,h23`.
pub fn load_profiles(path: impl AsRef<Path>) -> Result<ProfileTable, IngestError> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(|e| io_err(&path_str, e))?;

    let headers = reader
        .headers()
        .map_err(|e| io_err(&path_str, e))?
        .clone();
    if headers.len() != HOURS_PER_DAY + 1 || headers.get(0) != Some("id") {
        return Err(IngestError::BadHeader {
            path: path_str,
            msg: format!(
                "expected header `id,h0,...,h23` with 25 columns, found {} columns",
                headers.len()
            ),
        });
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Row numbers in errors are 1-based data rows (header is row 0).
        let row_no = i + 1;
        let record = record.map_err(|e| IngestError::BadRow {
            path: path_str.clone(),
            row: row_no,
            msg: e.to_string(),
        })?;
        if record.len() != HOURS_PER_DAY + 1 {
            return Err(IngestError::BadRow {
                path: path_str.clone(),
                row: row_no,
                msg: format!("expected 25 columns, found {}", record.len()),
            });
        }
        let id = record.get(0).unwrap_or_default().to_string();
        let mut miles = Vec::with_capacity(HOURS_PER_DAY);
        for h in 0..HOURS_PER_DAY {
            let field = record.get(h + 1).unwrap_or_default();
            let value: f64 = field.trim().parse().map_err(|_| IngestError::BadRow {
                path: path_str.clone(),
                row: row_no,
                msg: format!("column h{h}: `{field}` is not a number"),
            })?;
            if !value.is_finite() || value < 0.0 {
                return Err(IngestError::BadRow {
                    path: path_str.clone(),
                    row: row_no,
                    msg: format!("column h{h}: mileage {value} must be finite and non-negative"),
                });
            }
            miles.push(value);
        }
        rows.push(ProfileRow { id, miles });
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile { path: path_str });
    }
    Ok(ProfileTable { rows })
}

/// Write a profile table in the same format `load_profiles` reads.
pub fn write_profiles(table: &ProfileTable, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::create(path.as_ref()).map_err(|e| io_err(&path_str, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = |line: String| -> Result<(), IngestError> {
        writeln!(out, "{line}").map_err(|e| io_err(&path_str, e))
    };
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((0..HOURS_PER_DAY).map(|h| format!("h{h}")))
        .collect();
    write(header.join(","))?;
    for row in &table.rows {
        let mut fields = vec![row.id.clone()];
        fields.extend(row.miles.iter().map(|m| format!("{m}")));
        write(fields.join(","))?;
    }
    Ok(())
}

/// Load an hourly series from a CSV file with header `hour,value`.
///
/// The row count must equal `expected_len`. Negativity rules follow the unit
/// tag: prices may be negative, loads and mileages may not.
pub fn load_series(
    path: impl AsRef<Path>,
    expected_len: usize,
    unit: Unit,
) -> Result<HourlySeries, IngestError> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(|e| io_err(&path_str, e))?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| IngestError::BadRow {
            path: path_str.clone(),
            row: row_no,
            msg: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(IngestError::BadRow {
                path: path_str.clone(),
                row: row_no,
                msg: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let field = record.get(1).unwrap_or_default();
        let value: f64 = field.trim().parse().map_err(|_| IngestError::BadRow {
            path: path_str.clone(),
            row: row_no,
            msg: format!("`{field}` is not a number"),
        })?;
        values.push(value);
    }
    if values.len() != expected_len {
        return Err(IngestError::LengthMismatch {
            path: path_str,
            want: expected_len,
            got: values.len(),
        });
    }
    HourlySeries::new(unit, values).map_err(|e| IngestError::BadRow {
        path: path.as_ref().display().to_string(),
        row: 0,
        msg: e.to_string(),
    })
}

/// Write an hourly series as `hour,value` CSV.
pub fn write_series(series: &HourlySeries, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::create(path.as_ref()).map_err(|e| io_err(&path_str, e))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "hour,value").map_err(|e| io_err(&path_str, e))?;
    for (h, v) in series.iter().enumerate() {
        writeln!(out, "{h},{v}").map_err(|e| io_err(&path_str, e))?;
    }
    Ok(())
}

/// A named daily commute pattern with a sampling weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub name: String,
    pub weight: f64,
    pub miles: Vec<f64>,
}

/// The six default archetypes shipped with the crate (a mix of sub-70-mile
/// and over-70-mile commute patterns so both vehicle classes are populated).
pub fn default_archetypes() -> Vec<Archetype> {
    parse_archetypes(include_str!("../assets/default_archetypes.csv"))
        .expect("bundled archetype table must parse")
}

/// Parse an archetype table from CSV text with header
/// `name,weight,h0,...,h23`.
pub fn parse_archetypes(text: &str) -> Result<Vec<Archetype>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut archetypes = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| IngestError::BadRow {
            path: "<archetypes>".into(),
            row: row_no,
            msg: e.to_string(),
        })?;
        let bad_row = |msg: String| IngestError::BadRow {
            path: "<archetypes>".into(),
            row: row_no,
            msg,
        };
        if record.len() != HOURS_PER_DAY + 2 {
            return Err(bad_row(format!(
                "expected 26 columns, found {}",
                record.len()
            )));
        }
        let name = record.get(0).unwrap_or_default().to_string();
        let weight: f64 = record
            .get(1)
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|_| bad_row("weight is not a number".into()))?;
        let mut miles = Vec::with_capacity(HOURS_PER_DAY);
        for h in 0..HOURS_PER_DAY {
            let v: f64 = record
                .get(h + 2)
                .unwrap_or_default()
                .trim()
                .parse()
                .map_err(|_| bad_row(format!("column h{h} is not a number")))?;
            miles.push(v);
        }
        archetypes.push(Archetype {
            name,
            weight,
            miles,
        });
    }
    if archetypes.is_empty() {
        return Err(IngestError::NoArchetypes);
    }
    Ok(archetypes)
}

/// Generate `count` daily driving profiles by jittering weighted archetypes.
///
/// Each profile depends only on `(seed, index)`: the archetype is drawn by
/// weight, its departure hours are shifted by up to one hour (circularly),
/// and its mileage is scaled by a lognormal factor. Deterministic for a
/// given seed.
pub fn synth_fleet(
    count: usize,
    archetypes: &[Archetype],
    seed: u64,
) -> Result<ProfileTable, IngestError> {
    if archetypes.is_empty() {
        return Err(IngestError::NoArchetypes);
    }
    if archetypes.iter().any(|a| a.weight <= 0.0) {
        return Err(IngestError::BadWeights(
            archetypes.iter().map(|a| a.weight).sum(),
        ));
    }
    let total_weight: f64 = archetypes.iter().map(|a| a.weight).sum();
    if (total_weight - 1.0).abs() > 1e-9 {
        return Err(IngestError::BadWeights(total_weight));
    }

    let scale = LogNormal::new(0.0, SYNTH_MILES_SIGMA).expect("valid lognormal");
    let rows = (0..count)
        .map(|i| {
            let mut rng = profile_rng(seed, i as u64);
            let pick: f64 = rng.gen_range(0.0..1.0);
            let mut acc = 0.0;
            let mut chosen = archetypes.len() - 1;
            for (k, a) in archetypes.iter().enumerate() {
                acc += a.weight / total_weight;
                if pick < acc {
                    chosen = k;
                    break;
                }
            }
            let archetype = &archetypes[chosen];
            let shift: i64 = rng.gen_range(-1..=1);
            let factor = scale.sample(&mut rng);
            let mut miles = vec![0.0; HOURS_PER_DAY];
            for (h, &m) in archetype.miles.iter().enumerate() {
                if m > 0.0 {
                    let target =
                        (h as i64 + shift).rem_euclid(HOURS_PER_DAY as i64) as usize;
                    miles[target] += m * factor;
                }
            }
            ProfileRow {
                id: format!("synth-{i}"),
                miles,
            }
        })
        .collect();
    Ok(ProfileTable { rows })
}

/// Per-profile RNG stream: profile `i` is reproducible independently of how
/// many profiles are generated around it.
fn profile_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, index))
}

/// Derive a child seed from a parent seed and a stream index
/// (splitmix64-style finalizer).
pub fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn io_err(path: &str, e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> IngestError {
    IngestError::Io {
        path: path.to_string(),
        source: std::io::Error::other(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{classify_daily_miles, VehicleKind};
    use std::io::Write;

    fn temp_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn header() -> String {
        let cols: Vec<String> = (0..24).map(|h| format!("h{h}")).collect();
        format!("id,{}", cols.join(","))
    }

    #[test]
    fn single_zero_row() {
        let zeros = vec!["0"; 24].join(",");
        let file = temp_csv(&format!("{}\nv1,{zeros}\n", header()));
        let table = load_profiles(file.path()).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.rows[0].id, "v1");
        assert!(table.rows[0].miles.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn short_row_names_row_number() {
        let short = vec!["0"; 23].join(",");
        let file = temp_csv(&format!("{}\nv1,{short}\n", header()));
        let err = load_profiles(file.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 1"), "error should name the row: {msg}");
    }

    #[test]
    fn negative_mileage_rejected() {
        let mut cols = vec!["0".to_string(); 24];
        cols[5] = "-1".into();
        let file = temp_csv(&format!("{}\nv1,{}\n", header(), cols.join(",")));
        assert!(load_profiles(file.path()).is_err());
    }

    #[test]
    fn empty_file_rejected() {
        let file = temp_csv(&format!("{}\n", header()));
        assert!(matches!(
            load_profiles(file.path()).unwrap_err(),
            IngestError::EmptyFile { .. }
        ));
    }

    #[test]
    fn synthetic_file_totals_match_independent_parser() {
        // Oracle: re-parse the written file with plain string splitting,
        // entirely independent of the csv reader path.
        let table = synth_fleet(400, &default_archetypes(), 7).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_profiles(&table, file.path()).unwrap();

        let text = std::fs::read_to_string(file.path()).unwrap();
        let mut oracle_totals = Vec::new();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 25);
            let total: f64 = fields[1..].iter().map(|f| f.parse::<f64>().unwrap()).sum();
            oracle_totals.push(total);
        }
        assert_eq!(oracle_totals.len(), 400);

        let loaded = load_profiles(file.path()).unwrap();
        assert_eq!(loaded.len(), 400);
        for (row, want) in loaded.rows.iter().zip(&oracle_totals) {
            let got: f64 = row.miles.iter().sum();
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_roundtrip() {
        let table = synth_fleet(20, &default_archetypes(), 3).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_profiles(&table, file.path()).unwrap();
        let loaded = load_profiles(file.path()).unwrap();
        assert_eq!(loaded, table);
    }

    #[test]
    fn single_archetype_zero_miles() {
        let archetypes = vec![Archetype {
            name: "idle".into(),
            weight: 1.0,
            miles: vec![0.0; 24],
        }];
        let table = synth_fleet(1, &archetypes, 1).unwrap();
        assert!(table.rows[0].miles.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn same_seed_same_fleet() {
        let a = synth_fleet(50, &default_archetypes(), 99).unwrap();
        let b = synth_fleet(50, &default_archetypes(), 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn profile_independent_of_count() {
        let small = synth_fleet(5, &default_archetypes(), 11).unwrap();
        let large = synth_fleet(50, &default_archetypes(), 11).unwrap();
        assert_eq!(&large.rows[..5], &small.rows[..]);
    }

    #[test]
    fn bev_share_tracks_archetype_weights() {
        let archetypes = default_archetypes();
        let implied: f64 = archetypes
            .iter()
            .filter(|a| a.miles.iter().sum::<f64>() < 70.0)
            .map(|a| a.weight)
            .sum();
        let table = synth_fleet(10_000, &archetypes, 5).unwrap();
        let bev = table
            .rows
            .iter()
            .filter(|r| classify_daily_miles(&r.miles).unwrap() == VehicleKind::Bev)
            .count();
        let share = bev as f64 / table.len() as f64;
        assert!(
            (share - implied).abs() < 0.05,
            "BEV share {share:.3} vs archetype-implied {implied:.3}"
        );
    }

    #[test]
    fn empty_archetypes_rejected() {
        assert!(matches!(
            synth_fleet(1, &[], 0).unwrap_err(),
            IngestError::NoArchetypes
        ));
    }

    #[test]
    fn series_length_enforced() {
        let mut body = String::from("hour,value\n");
        for h in 0..119 {
            body.push_str(&format!("{h},1.0\n"));
        }
        let file = temp_csv(&body);
        let err = load_series(file.path(), 120, Unit::Kilowatts).unwrap_err();
        assert!(matches!(
            err,
            IngestError::LengthMismatch {
                want: 120,
                got: 119,
                ..
            }
        ));

        let mut body = String::from("hour,value\n");
        for h in 0..120 {
            body.push_str(&format!("{h},1.0\n"));
        }
        let file = temp_csv(&body);
        let series = load_series(file.path(), 120, Unit::Kilowatts).unwrap();
        assert_eq!(series.len(), 120);
    }

    #[test]
    fn negative_price_accepted_negative_load_rejected() {
        let body = "hour,value\n0,-0.01\n";
        let file = temp_csv(body);
        assert!(load_series(file.path(), 1, Unit::DollarsPerKilowattHour).is_ok());
        let file = temp_csv(body);
        assert!(load_series(file.path(), 1, Unit::Kilowatts).is_err());
    }

    #[test]
    fn default_archetypes_cover_both_classes() {
        let archetypes = default_archetypes();
        assert_eq!(archetypes.len(), 6);
        let total: f64 = archetypes.iter().map(|a| a.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(archetypes
            .iter()
            .any(|a| a.miles.iter().sum::<f64>() < 70.0));
        assert!(archetypes
            .iter()
            .any(|a| a.miles.iter().sum::<f64>() >= 70.0));
    }
}
