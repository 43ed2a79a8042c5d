//! Text serialization of ensembles.
//!
//! ```text
//! version:1 alpha:1.0000000000000000e0 base_seed:42 shards:2 samples_per_shard:100 count:200
//! 2.7182818284590451e0,1.2000000000000000e0,8.5000000000000000e-1,3
//! ...
//! checksum:89abcdef01234567
//! ```
//!
//! Rows are `tau,sigma2,logw,n` with 17 significant digits. The checksum is
//! the 64-bit FNV-1a hash of every byte before the checksum line.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DressedSample, Ensemble, EnsembleMeta};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Formats a float with 17 significant decimal digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_string(ensemble: &Ensemble) -> String {
    let m = ensemble.meta();
    let mut out = String::with_capacity(64 * (ensemble.len() + 2));
    out.push_str(&format!(
        "version:{} alpha:{} base_seed:{} shards:{} samples_per_shard:{} count:{}\n",
        m.version,
        fmt_f64(m.alpha),
        m.base_seed,
        m.shards,
        m.samples_per_shard,
        ensemble.len()
    ));
    for r in ensemble.rows() {
        out.push_str(&fmt_f64(r.tau));
        out.push(',');
        out.push_str(&fmt_f64(r.sigma2));
        out.push(',');
        out.push_str(&fmt_f64(r.logw));
        out.push(',');
        out.push_str(&r.n.to_string());
        out.push('\n');
    }
    let sum = fnv1a64(out.as_bytes());
    out.push_str(&format!("checksum:{sum:016x}\n"));
    out
}

pub fn save_ensemble(ensemble: &Ensemble, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(to_string(ensemble).as_bytes())?;
    f.sync_all()?;
    Ok(())
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<Ensemble> {
    from_str(&fs::read_to_string(path)?)
}

fn load_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Load {
        line,
        reason: reason.into(),
    }
}

fn parse_header(line: &str) -> Result<(EnsembleMeta, u64)> {
    let mut version = None;
    let mut alpha = None;
    let mut base_seed = None;
    let mut shards = None;
    let mut per_shard = None;
    let mut count = None;
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once(':')
            .ok_or_else(|| load_err(1, format!("header field `{field}` is not key:value")))?;
        let bad = |_| load_err(1, format!("cannot parse header value `{field}`"));
        match key {
            "version" => version = Some(value.parse::<u32>().map_err(|_| load_err(1, "bad version"))?),
            "alpha" => alpha = Some(value.parse::<f64>().map_err(|_| load_err(1, "bad alpha"))?),
            "base_seed" => base_seed = Some(value.parse::<u64>().map_err(bad)?),
            "shards" => shards = Some(value.parse::<u64>().map_err(bad)?),
            "samples_per_shard" => per_shard = Some(value.parse::<u64>().map_err(bad)?),
            "count" => count = Some(value.parse::<u64>().map_err(bad)?),
            other => return Err(load_err(1, format!("unknown header key `{other}`"))),
        }
    }
    let missing = |k: &str| load_err(1, format!("header is missing `{k}`"));
    let version = version.ok_or_else(|| missing("version"))?;
    if version != FORMAT_VERSION {
        return Err(load_err(
            1,
            format!("unsupported format version {version} (expected {FORMAT_VERSION})"),
        ));
    }
    Ok((
        EnsembleMeta {
            version,
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
            base_seed: base_seed.ok_or_else(|| missing("base_seed"))?,
            shards: shards.ok_or_else(|| missing("shards"))?,
            samples_per_shard: per_shard.ok_or_else(|| missing("samples_per_shard"))?,
        },
        count.ok_or_else(|| missing("count"))?,
    ))
}

fn parse_row(line: &str, lineno: usize) -> Result<DressedSample> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(load_err(lineno, format!("expected 4 fields, found {}", fields.len())));
    }
    let num = |i: usize, name: &str| {
        fields[i]
            .parse::<f64>()
            .map_err(|_| load_err(lineno, format!("cannot parse {name} `{}`", fields[i])))
    };
    let n = fields[3]
        .parse::<u32>()
        .map_err(|_| load_err(lineno, format!("cannot parse n `{}`", fields[3])))?;
    DressedSample::new(num(0, "tau")?, num(1, "sigma2")?, num(2, "logw")?, n)
        .map_err(|e| load_err(lineno, e.to_string()))
}

pub fn from_str(text: &str) -> Result<Ensemble> {
    let mut offset = 0usize;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().ok_or_else(|| load_err(1, "empty file"))?;
    offset += header.len();
    let (meta, count) = parse_header(header.trim_end())?;

    let mut rows = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut checksum = None;
    for (i, raw) in lines.enumerate() {
        let lineno = i + 2;
        let line = raw.trim_end_matches('\n');
        if let Some(hex) = line.strip_prefix("checksum:") {
            let stated = u64::from_str_radix(hex, 16)
                .map_err(|_| load_err(lineno, format!("malformed checksum `{hex}`")))?;
            checksum = Some((stated, offset, lineno));
            break;
        }
        if !raw.ends_with('\n') {
            return Err(load_err(
                lineno,
                format!("truncated at row index {} (incomplete line)", rows.len()),
            ));
        }
        rows.push(parse_row(line, lineno)?);
        offset += raw.len();
    }
    let Some((stated, covered, lineno)) = checksum else {
        return Err(load_err(
            rows.len() + 2,
            format!("truncated at row index {}: missing checksum line", rows.len()),
        ));
    };
    if rows.len() as u64 != count {
        return Err(load_err(
            lineno,
            format!("header promises {count} rows but found {} (row index {})", rows.len(), rows.len()),
        ));
    }
    let actual = fnv1a64(&text.as_bytes()[..covered]);
    if actual != stated {
        return Err(load_err(
            lineno,
            format!("checksum mismatch: file says {stated:016x}, content hashes to {actual:016x}"),
        ));
    }
    Ensemble::from_parts(meta, rows).map_err(|e| load_err(1, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_rows() -> Ensemble {
        Ensemble::synthetic(
            0.75,
            vec![
                DressedSample::new(1.0, 0.5, 0.0, 1).unwrap(),
                DressedSample::new(2.0 / 3.0, 0.1, -1.0 / 7.0, 2).unwrap(),
                DressedSample::new(12.5, 12.5, 9.3e-17, 40).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ens.dat");
        let e = three_rows();
        save_ensemble(&e, &path).unwrap();
        assert_eq!(load_ensemble(&path).unwrap(), e);
    }

    #[test]
    fn truncated_file_reports_row_index() {
        let text = to_string(&three_rows());
        let cut = &text[..text.find("\n6.").unwrap() + 1];
        match from_str(cut) {
            Err(Error::Load { reason, .. }) => assert!(reason.contains("row index 1"), "{reason}"),
            other => panic!("{other:?}"),
        }
        // Cut mid-row.
        let cut = &text[..text.find("\n6.").unwrap() + 6];
        match from_str(cut) {
            Err(Error::Load { line, reason }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("row index 1"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corruption_is_detected() {
        let text = to_string(&three_rows());
        let flipped = text.replacen("1.0000000000000000e0,5", "1.0000000000000001e0,5", 1);
        assert_ne!(flipped, text);
        assert!(matches!(from_str(&flipped), Err(Error::Load { line: 5, .. })));

        let bad_row = text.replacen(",2\n", ",x\n", 1);
        assert!(matches!(from_str(&bad_row), Err(Error::Load { line: 3, .. })));

        let bad_version = text.replacen("version:1", "version:2", 1);
        match from_str(&bad_version) {
            Err(Error::Load { line: 1, reason }) => assert!(reason.contains("version")),
            other => panic!("{other:?}"),
        }

        let wrong_count = text.replacen("count:3", "count:4", 1);
        assert!(matches!(from_str(&wrong_count), Err(Error::Load { .. })));
    }

    proptest! {
        #[test]
        fn float_text_round_trip_is_exact(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }

        #[test]
        fn ensemble_round_trip(rows in prop::collection::vec((1e-3f64..50.0, 0.0f64..1.0, -30.0f64..30.0, 1u32..500), 1..40)) {
            let rows: Vec<_> = rows
                .into_iter()
                .map(|(tau, frac, logw, n)| DressedSample::new(tau, (tau * frac).max(tau * 1e-9), logw, n).unwrap())
                .collect();
            let e = Ensemble::synthetic(1.0, rows).unwrap();
            prop_assert_eq!(from_str(&to_string(&e)).unwrap(), e);
        }
    }
}
