//! Event container formats.
//!
//! Binary (little endian):
//!
//! ```text
//! header: magic "PCEV" | version u16 | n_total u32 | f_dim u16 | n_bar u16 | count u32
//! event:  n u16 | y[n_bar] u32 | x[n_bar * f_dim] f32 (row major)
//! ```
//!
//! Unused `y` slots hold `0xFFFF_FFFF`. The text variant is JSON listing only
//! the live rows of each event.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{CompactEvent, NO_SENSOR};
use crate::error::{Error, Result};

pub const EVENT_MAGIC: [u8; 4] = *b"PCEV";
pub const EVENT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EventFile {
    pub n_total: usize,
    pub f_dim: usize,
    pub n_bar: usize,
    pub events: Vec<CompactEvent>,
}

impl EventFile {
    pub fn new(n_total: usize, f_dim: usize, n_bar: usize) -> Self {
        EventFile {
            n_total,
            f_dim,
            n_bar,
            events: Vec::new(),
        }
    }

    fn check_header(&self) -> Result<()> {
        if self.n_total > u32::MAX as usize
            || self.f_dim > u16::MAX as usize
            || self.n_bar > u16::MAX as usize
            || self.events.len() > u32::MAX as usize
        {
            return Err(Error::data(
                "event container dimensions exceed header fields",
            ));
        }
        for (i, ev) in self.events.iter().enumerate() {
            if ev.n_bar() != self.n_bar || ev.f_dim() != self.f_dim {
                return Err(Error::data(format!(
                    "event {i} is {}x{}, container expects {}x{}",
                    ev.n_bar(),
                    ev.f_dim(),
                    self.n_bar,
                    self.f_dim
                )));
            }
            ev.check(self.n_total)
                .map_err(|e| Error::data(format!("event {i}: {e}")))?;
        }
        Ok(())
    }
}

fn data_err(e: std::io::Error) -> Error {
    Error::data(format!("truncated or unreadable event stream: {e}"))
}

pub fn write_binary<W: Write>(mut w: W, file: &EventFile) -> Result<()> {
    file.check_header()?;
    let io = |e| Error::data(format!("write failed: {e}"));
    w.write_all(&EVENT_MAGIC).map_err(io)?;
    w.write_u16::<LittleEndian>(EVENT_VERSION).map_err(io)?;
    w.write_u32::<LittleEndian>(file.n_total as u32)
        .map_err(io)?;
    w.write_u16::<LittleEndian>(file.f_dim as u16).map_err(io)?;
    w.write_u16::<LittleEndian>(file.n_bar as u16).map_err(io)?;
    w.write_u32::<LittleEndian>(file.events.len() as u32)
        .map_err(io)?;
    for ev in &file.events {
        w.write_u16::<LittleEndian>(ev.n as u16).map_err(io)?;
        for &s in &ev.y {
            w.write_u32::<LittleEndian>(s).map_err(io)?;
        }
        for &v in ev.x.iter() {
            w.write_f32::<LittleEndian>(v as f32).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<EventFile> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(data_err)?;
    if magic != EVENT_MAGIC {
        return Err(Error::data(format!(
            "bad magic {magic:?}, expected \"PCEV\""
        )));
    }
    let version = r.read_u16::<LittleEndian>().map_err(data_err)?;
    if version != EVENT_VERSION {
        return Err(Error::data(format!(
            "unsupported event file version {version}"
        )));
    }
    let n_total = r.read_u32::<LittleEndian>().map_err(data_err)? as usize;
    let f_dim = r.read_u16::<LittleEndian>().map_err(data_err)? as usize;
    let n_bar = r.read_u16::<LittleEndian>().map_err(data_err)? as usize;
    let count = r.read_u32::<LittleEndian>().map_err(data_err)? as usize;

    let mut file = EventFile::new(n_total, f_dim, n_bar);
    file.events.reserve(count.min(1 << 20));
    for i in 0..count {
        let n = r.read_u16::<LittleEndian>().map_err(data_err)? as usize;
        let mut y = vec![0u32; n_bar];
        r.read_u32_into::<LittleEndian>(&mut y).map_err(data_err)?;
        let mut raw = vec![0f32; n_bar * f_dim];
        r.read_f32_into::<LittleEndian>(&mut raw)
            .map_err(data_err)?;
        let x = Array2::from_shape_vec((n_bar, f_dim), raw.into_iter().map(f64::from).collect())
            .expect("shape matches buffer");
        let ev = CompactEvent { x, y, n };
        ev.check(n_total)
            .map_err(|e| Error::data(format!("event {i}: {e}")))?;
        file.events.push(ev);
    }
    Ok(file)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TextEvent {
    n: usize,
    y: Vec<u32>,
    x: Vec<Vec<f32>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TextFile {
    version: u16,
    n_total: usize,
    f_dim: usize,
    n_bar: usize,
    events: Vec<TextEvent>,
}

pub fn write_text<W: Write>(w: W, file: &EventFile) -> Result<()> {
    file.check_header()?;
    let text = TextFile {
        version: EVENT_VERSION,
        n_total: file.n_total,
        f_dim: file.f_dim,
        n_bar: file.n_bar,
        events: file
            .events
            .iter()
            .map(|ev| TextEvent {
                n: ev.n,
                y: ev.y[..ev.n].to_vec(),
                x: (0..ev.n)
                    .map(|r| ev.x.row(r).iter().map(|&v| v as f32).collect())
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(w, &text).map_err(|e| Error::data(e.to_string()))
}

pub fn read_text<R: Read>(r: R) -> Result<EventFile> {
    let text: TextFile =
        serde_json::from_reader(r).map_err(|e| Error::data(format!("event text: {e}")))?;
    if text.version != EVENT_VERSION {
        return Err(Error::data(format!(
            "unsupported event file version {}",
            text.version
        )));
    }
    let mut file = EventFile::new(text.n_total, text.f_dim, text.n_bar);
    for (i, te) in text.events.into_iter().enumerate() {
        if te.n > text.n_bar || te.y.len() != te.n || te.x.len() != te.n {
            return Err(Error::data(format!(
                "event {i}: n = {} but {} indices and {} rows (capacity {})",
                te.n,
                te.y.len(),
                te.x.len(),
                text.n_bar
            )));
        }
        let mut ev = CompactEvent::empty(text.n_bar, text.f_dim);
        for (slot, row) in te.x.iter().enumerate() {
            if row.len() != text.f_dim {
                return Err(Error::data(format!(
                    "event {i} row {slot} has {} features, expected {}",
                    row.len(),
                    text.f_dim
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                ev.x[[slot, c]] = v as f64;
            }
        }
        ev.y[..te.n].copy_from_slice(&te.y);
        ev.n = te.n;
        ev.check(text.n_total)
            .map_err(|e| Error::data(format!("event {i}: {e}")))?;
        file.events.push(ev);
    }
    debug_assert!(file
        .events
        .iter()
        .all(|e| e.y[e.n..].iter().all(|&s| s == NO_SENSOR)));
    Ok(file)
}

/// Read either format, sniffing the binary magic.
pub fn read_events(path: &Path) -> Result<EventFile> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(f);
    let mut head = [0u8; 4];
    let got = reader.read(&mut head).map_err(|e| Error::io(path, e))?;
    let chained = std::io::Cursor::new(head[..got].to_vec()).chain(reader);
    let parsed = if got == 4 && head == EVENT_MAGIC {
        read_binary(chained)
    } else {
        read_text(chained)
    };
    parsed.map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Write the binary container (or JSON when `text` is set).
pub fn write_events(path: &Path, file: &EventFile, text: bool) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    if text {
        write_text(&mut w, file)?;
    } else {
        write_binary(&mut w, file)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{compact, generate_events, GeneratorConfig};

    fn sample(count: usize) -> EventFile {
        let cfg = GeneratorConfig::default();
        let mut file = EventFile::new(cfg.n_total, cfg.f_dim, 32);
        for frame in generate_events(&cfg, count).unwrap() {
            file.events.push(compact(&frame, 32).unwrap());
        }
        file
    }

    #[test]
    fn binary_round_trip() {
        let file = sample(6);
        let mut buf = Vec::new();
        write_binary(&mut buf, &file).unwrap();
        let expected_len = 18 + 6 * (2 + 32 * 4 + 32 * 5 * 4);
        assert_eq!(buf.len(), expected_len);
        assert_eq!(&buf[..4], b"PCEV");
        assert_eq!(read_binary(&buf[..]).unwrap(), file);
    }

    #[test]
    fn sentinel_is_all_ones() {
        let mut file = sample(1);
        let ev = &mut file.events[0];
        ev.n = 3;
        ev.y[3..].fill(NO_SENSOR);
        ev.x.slice_mut(ndarray::s![3.., ..]).fill(0.0);
        let mut buf = Vec::new();
        write_binary(&mut buf, &file).unwrap();
        let n = file.events[0].n;
        assert!(n < 32);
        let off = 18 + 2 + 4 * (32 - 1);
        assert_eq!(&buf[off..off + 4], &[0xFF; 4]);
    }

    #[test]
    fn text_round_trip() {
        let file = sample(3);
        let mut buf = Vec::new();
        write_text(&mut buf, &file).unwrap();
        assert_eq!(read_text(&buf[..]).unwrap(), file);
    }

    #[test]
    fn empty_container() {
        let file = EventFile::new(320, 5, 32);
        let mut buf = Vec::new();
        write_binary(&mut buf, &file).unwrap();
        assert_eq!(buf.len(), 18);
        assert_eq!(read_binary(&buf[..]).unwrap(), file);
    }

    #[test]
    fn rejects_corruption() {
        let file = sample(2);
        let mut buf = Vec::new();
        write_binary(&mut buf, &file).unwrap();
        assert!(read_binary(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_binary(&bad[..]).is_err());
        // duplicate sensor index in the first event
        let mut dup = buf.clone();
        let y0 = 18 + 2;
        let second: [u8; 4] = dup[y0..y0 + 4].try_into().unwrap();
        dup[y0 + 4..y0 + 8].copy_from_slice(&second);
        assert!(matches!(read_binary(&dup[..]), Err(Error::Data(_))));
    }
}
