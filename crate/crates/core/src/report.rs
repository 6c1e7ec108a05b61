//! Deterministic JSON and CSV output.
//!
//! Floats are always written with 17 significant digits in scientific
//! notation, which round-trips every `f64` exactly and makes reports
//! byte-identical across runs and execution modes. Non-finite values become
//! `null` in JSON.

use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;
use crate::lipschitz::{PlipProfile, SphereTable};
use crate::selection::Selection;

/// `x` with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

struct FixedFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for FixedFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Pretty-printed JSON with fixed float formatting.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        FixedFormatter {
            inner: PrettyFormatter::with_indent(b"  "),
        },
    );
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

fn csv_string(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(io::Error::from)?;
    for row in rows {
        w.write_record(&row).map_err(io::Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv of ASCII fields"))
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

/// `point_id,x1,..,xd`
pub fn selection_csv(selection: &Selection) -> Result<String> {
    let header = std::iter::once("point_id".to_string())
        .chain(numbered("x", selection.dim()))
        .collect();
    let rows = selection.values().iter().enumerate().map(|(i, v)| {
        std::iter::once(i.to_string())
            .chain(v.iter().map(|x| format_f64(*x)))
            .collect()
    });
    csv_string(header, rows)
}

/// `point_id,r,ratio`, one row per profile radius.
pub fn profile_csv(profiles: &[PlipProfile]) -> Result<String> {
    let header = ["point_id", "r", "ratio"].map(String::from).to_vec();
    let rows = profiles.iter().flat_map(|p| {
        p.rows
            .iter()
            .map(move |row| vec![p.point.to_string(), format_f64(row.r), format_f64(row.ratio)])
    });
    csv_string(header, rows)
}

/// `point_id,y1,..,ym,x1,..,xn` for a map sampled on sphere directions.
pub fn sphere_csv(table: &SphereTable) -> Result<String> {
    let header = std::iter::once("point_id".to_string())
        .chain(numbered("y", table.domain_dim()))
        .chain(numbered("x", table.value_dim()))
        .collect();
    let rows = table
        .directions()
        .iter()
        .zip(table.values())
        .enumerate()
        .map(|(i, (u, v))| {
            std::iter::once(i.to_string())
                .chain(u.iter().chain(v).map(|x| format_f64(*x)))
                .collect()
        });
    csv_string(header, rows)
}
