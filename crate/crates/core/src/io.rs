//! Number formatting shared by every file and report writer.
//!
//! Floats are always written with 17 significant digits so that parsing
//! the output reproduces the exact `f64`.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct SignificantDigits;

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Compact JSON with 17-significant-digit floats, newline terminated.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, SignificantDigits);
    value
        .serialize(&mut ser)
        .expect("in-memory serialisation of finite values");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
