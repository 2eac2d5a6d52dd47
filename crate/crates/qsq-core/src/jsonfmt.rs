//! JSON serialization with full-precision floats.
//!
//! Reports and configs round-trip exactly: every `f64` is written with 17
//! significant digits in scientific notation, which is always enough to
//! reconstruct the original bit pattern. A small atomic-write helper keeps
//! partially written report files from ever being observed on disk.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

/// Pretty formatter that renders every float with 17 significant digits.
struct Precise17<'a> {
    inner: PrettyFormatter<'a>,
}

impl Precise17<'_> {
    fn new() -> Self {
        Precise17 { inner: PrettyFormatter::new() }
    }
}

macro_rules! delegate {
    ($name:ident) => {
        fn $name<W>(&mut self, writer: &mut W) -> io::Result<()>
        where
            W: ?Sized + Write,
        {
            self.inner.$name(writer)
        }
    };
    ($name:ident, first) => {
        fn $name<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
        where
            W: ?Sized + Write,
        {
            self.inner.$name(writer, first)
        }
    };
}

impl Formatter for Precise17<'_> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        // 16 digits after the point in scientific notation = 17 significant
        // digits, the round-trip-safe precision for IEEE 754 binary64.
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{:.16e}", value as f64)
    }

    delegate!(begin_array);
    delegate!(end_array);
    delegate!(begin_array_value, first);
    delegate!(end_array_value);
    delegate!(begin_object);
    delegate!(end_object);
    delegate!(begin_object_key, first);
    delegate!(begin_object_value);
    delegate!(end_object_value);
}

/// Serializes `value` as pretty JSON with 17-significant-digit floats.
pub fn to_string_precise<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::with_capacity(256);
    let mut ser = Serializer::with_formatter(&mut out, Precise17::new());
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Writes `value` to `path` atomically (temp file in the same directory,
/// then rename), with 17-significant-digit floats and a trailing newline.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let body = to_string_precise(value).map_err(io::Error::other)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into())
        )),
        None => Path::new(&format!(
            ".{}.tmp",
            path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into())
        ))
        .to_path_buf(),
    };
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(body.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

// =======================================================================
// Tests
// =======================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize)]
    struct Sample {
        a: f64,
        b: Vec<f64>,
        n: u64,
        s: String,
    }

    #[test]
    fn floats_round_trip_bit_exactly() {
        let sample = Sample {
            a: std::f64::consts::PI,
            b: vec![1.0 / 3.0, 2e-300, -0.1, 6.02214076e23, 0.0],
            n: 42,
            s: "frozen".into(),
        };
        let text = to_string_precise(&sample).unwrap();
        let back: Sample = serde_json::from_str(&text).unwrap();
        assert_eq!(back.a.to_bits(), sample.a.to_bits());
        for (x, y) in back.b.iter().zip(&sample.b) {
            assert_eq!(x.to_bits(), y.to_bits(), "mismatch for {y}");
        }
        assert_eq!(back.n, 42);
    }

    #[test]
    fn formatting_is_deterministic_and_scientific() {
        let text = to_string_precise(&vec![0.5_f64]).unwrap();
        assert_eq!(text, "[\n  5.0000000000000000e-1\n]");
    }

    #[test]
    fn atomic_write_produces_parseable_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_json_atomic(&path, &Sample { a: 1.25, b: vec![], n: 7, s: "x".into() }).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        let back: Sample = serde_json::from_str(&body).unwrap();
        assert_eq!(back.a, 1.25);
        assert_eq!(back.n, 7);
        assert!(body.ends_with('\n'));
        // No temp file left behind.
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
