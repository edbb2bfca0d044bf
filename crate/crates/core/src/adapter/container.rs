//! Bit-exact binary container for adapter libraries.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic  b"SQRL"
//! u8     version (0x01)
//! u32    N,  u32 m,  u32 n,  u32 r
//! u8     shared_a,  u8 forms mask,  u8 discard_b,  u8 reserved (0)
//! [shared A: r*n f64]                      when shared_a = 1
//! per adapter, N times:
//!   u16 id length, id bytes (UTF-8)
//!   [B: m*r f64, then A_i: r*n f64 when shared_a = 0]   mask bit 0
//!   [arrow v: n f64]                                    mask bit 1
//!   [b_hat: m*r f64, a_hat: r*n f64]                    mask bit 2
//!   [q: m*r f64, r_mat: r*r f64]                        mask bit 3
//!   [mu: f64, sigma: f64]                               mask bit 4
//! u32    CRC-32 of every preceding byte
//! ```
//!
//! All matrices are row-major f64. Saving with `discard_b` clears bit 0;
//! on load, `B` is rebuilt from the QR factors (shared A) or the spectral
//! factors (unique A), which reproduce it to working precision.

use std::fs;
use std::path::Path;

use super::{
    AdapterLibrary, ArrowForm, LibraryBundle, LoraAdapter, RoutedForms, SeqrForm, SpectrForm,
};
use crate::calibration::CalibrationStats;
use crate::error::{ContainerError, Error, Result};
use crate::linalg::{Matrix, Vector};

const MAGIC: &[u8; 4] = b"SQRL";
const VERSION: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + 16 + 4;

const BIT_RAW: u8 = 1;
const BIT_ARROW: u8 = 1 << 1;
const BIT_SPECTR: u8 = 1 << 2;
const BIT_SEQR: u8 = 1 << 3;
const BIT_CALIB: u8 = 1 << 4;
const KNOWN_BITS: u8 = BIT_RAW | BIT_ARROW | BIT_SPECTR | BIT_SEQR | BIT_CALIB;

/// Serializes a bundle into the container byte format.
pub fn library_to_bytes(bundle: &LibraryBundle) -> Result<Vec<u8>> {
    let lib = &bundle.library;
    let (m, n, r) = lib.dims();
    let count = lib.n_adapters();

    check_form_lengths(bundle)?;

    let mut mask = 0u8;
    if !bundle.discard_b {
        mask |= BIT_RAW;
    }
    if bundle.forms.arrow.is_some() {
        mask |= BIT_ARROW;
    }
    if bundle.forms.spectr.is_some() {
        mask |= BIT_SPECTR;
    }
    if bundle.forms.seqr.is_some() {
        mask |= BIT_SEQR;
    }
    if bundle.stats.is_some() {
        mask |= BIT_CALIB;
    }
    if bundle.discard_b {
        let recoverable = (lib.is_shared() && bundle.forms.seqr.is_some())
            || (!lib.is_shared() && bundle.forms.spectr.is_some());
        if !recoverable {
            return Err(Error::LibraryInvalid(
                "discard_b needs QR forms (shared A) or spectral forms (unique A) \
                 so B can be rebuilt on load"
                    .to_string(),
            ));
        }
    }

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&(count as u32).to_le_bytes());
    buf.extend_from_slice(&(m as u32).to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(r as u32).to_le_bytes());
    buf.push(lib.is_shared() as u8);
    buf.push(mask);
    buf.push(bundle.discard_b as u8);
    buf.push(0);

    if let Some(a) = lib.shared_a() {
        write_f64s(&mut buf, a.as_slice());
    }

    for i in 0..count {
        let ad = lib.adapter(i);
        let id_bytes = ad.id.as_bytes();
        if id_bytes.len() > u16::MAX as usize {
            return Err(Error::LibraryInvalid(format!(
                "adapter id {:?} exceeds {} bytes",
                ad.id,
                u16::MAX
            )));
        }
        buf.extend_from_slice(&(id_bytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(id_bytes);

        if mask & BIT_RAW != 0 {
            write_f64s(&mut buf, ad.b.as_slice());
            if !lib.is_shared() {
                let a = ad.a.as_ref().expect("unique-A adapter has A");
                write_f64s(&mut buf, a.as_slice());
            }
        }
        if let Some(arrows) = &bundle.forms.arrow {
            write_f64s(&mut buf, arrows[i].v.as_slice());
        }
        if let Some(spectr) = &bundle.forms.spectr {
            write_f64s(&mut buf, spectr[i].b_hat.as_slice());
            write_f64s(&mut buf, spectr[i].a_hat.as_slice());
        }
        if let Some(seqr) = &bundle.forms.seqr {
            write_f64s(&mut buf, seqr[i].q.as_slice());
            write_f64s(&mut buf, seqr[i].r_mat.as_slice());
        }
        if let Some(stats) = &bundle.stats {
            buf.extend_from_slice(&stats.mu[i].to_le_bytes());
            buf.extend_from_slice(&stats.sigma[i].to_le_bytes());
        }
    }

    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

/// Parses a container from bytes, returning each failure mode as its own
/// error: magic, version, truncation, trailing bytes, checksum, then
/// semantic validity, in that order.
pub fn library_from_bytes(bytes: &[u8]) -> Result<LibraryBundle> {
    if bytes.len() < 4 {
        return Err(truncated("magic", 4 - bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err(ContainerError::BadMagic.into());
    }
    if bytes.len() < 5 {
        return Err(truncated("version", 1));
    }
    if bytes[4] != VERSION {
        return Err(ContainerError::UnsupportedVersion(bytes[4]).into());
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated("header", HEADER_LEN - bytes.len()));
    }

    let count = read_u32(bytes, 5) as usize;
    let m = read_u32(bytes, 9) as usize;
    let n = read_u32(bytes, 13) as usize;
    let r = read_u32(bytes, 17) as usize;
    let shared_flag = bytes[21];
    let mask = bytes[22];
    let discard_flag = bytes[23];
    let reserved = bytes[24];

    if count == 0 || m == 0 || n == 0 || r == 0 {
        return Err(header_invalid("zero dimension or empty library"));
    }
    if r > m || r > n {
        return Err(header_invalid(format!(
            "rank {r} exceeds min(m={m}, n={n})"
        )));
    }
    if shared_flag > 1 || discard_flag > 1 || reserved != 0 {
        return Err(header_invalid("flag bytes out of range"));
    }
    if mask & !KNOWN_BITS != 0 {
        return Err(header_invalid(format!("unknown forms bits {mask:#04x}")));
    }
    let shared = shared_flag == 1;
    let discard_b = discard_flag == 1;
    if discard_b == (mask & BIT_RAW != 0) {
        return Err(header_invalid("discard flag contradicts raw-B bit"));
    }
    if mask & BIT_SEQR != 0 && !shared {
        return Err(header_invalid("QR forms stored without a shared A"));
    }
    if mask & BIT_RAW == 0 {
        let recoverable = (shared && mask & BIT_SEQR != 0) || (!shared && mask & BIT_SPECTR != 0);
        if !recoverable {
            return Err(header_invalid(
                "raw B omitted but no forms allow reconstructing it",
            ));
        }
    }

    // Structural walk: every block size is implied by the header except the
    // variable-length ids, so walk adapter by adapter before touching data.
    if bytes.len() < HEADER_LEN + 4 {
        return Err(truncated("checksum", HEADER_LEN + 4 - bytes.len()));
    }
    let payload_end = bytes.len() - 4;
    let mut cursor = Cursor {
        bytes,
        pos: HEADER_LEN,
        end: payload_end,
    };

    // Sizes are computed in u128: a corrupted header must surface as a
    // truncation error, not an overflow or a giant allocation.
    let per_matrix = |rows: usize, cols: usize| 8 * rows as u128 * cols as u128;
    if shared {
        cursor.skip(per_matrix(r, n), "shared A")?;
    }
    let mut id_offsets = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let id_pos = cursor.pos;
        let id_len = cursor.read_u16("adapter id length")? as usize;
        cursor.skip(id_len as u128, "adapter id")?;
        id_offsets.push((id_pos, id_len));
        if mask & BIT_RAW != 0 {
            cursor.skip(per_matrix(m, r), "B matrix")?;
            if !shared {
                cursor.skip(per_matrix(r, n), "A matrix")?;
            }
        }
        if mask & BIT_ARROW != 0 {
            cursor.skip(8 * n as u128, "arrow vector")?;
        }
        if mask & BIT_SPECTR != 0 {
            cursor.skip(per_matrix(m, r) + per_matrix(r, n), "spectral factors")?;
        }
        if mask & BIT_SEQR != 0 {
            cursor.skip(per_matrix(m, r) + per_matrix(r, r), "QR factors")?;
        }
        if mask & BIT_CALIB != 0 {
            cursor.skip(16, "calibration stats")?;
        }
    }
    if cursor.pos != payload_end {
        return Err(ContainerError::TrailingBytes(payload_end - cursor.pos).into());
    }

    let stored_crc = read_u32(bytes, payload_end);
    let computed_crc = crc32fast::hash(&bytes[..payload_end]);
    if stored_crc != computed_crc {
        return Err(ContainerError::CrcMismatch {
            stored: stored_crc,
            computed: computed_crc,
        }
        .into());
    }

    // Semantic pass: decode values now that structure and checksum hold.
    let mut pos = HEADER_LEN;
    let shared_a = if shared {
        Some(read_matrix(bytes, &mut pos, r, n, "shared A")?)
    } else {
        None
    };

    let mut adapters: Vec<LoraAdapter> = Vec::with_capacity(count);
    let mut arrows = Vec::new();
    let mut spectrs: Vec<SpectrForm> = Vec::new();
    let mut seqrs: Vec<SeqrForm> = Vec::new();
    let mut mus = Vec::new();
    let mut sigmas = Vec::new();

    for &(id_pos, id_len) in &id_offsets {
        pos = id_pos + 2;
        let id = std::str::from_utf8(&bytes[pos..pos + id_len])
            .map_err(|_| Error::from(ContainerError::BadId))?
            .to_string();
        pos += id_len;

        let mut b = None;
        let mut a = None;
        if mask & BIT_RAW != 0 {
            b = Some(read_matrix(bytes, &mut pos, m, r, "B matrix")?);
            if !shared {
                a = Some(read_matrix(bytes, &mut pos, r, n, "A matrix")?);
            }
        }
        if mask & BIT_ARROW != 0 {
            let v = read_f64s(bytes, &mut pos, n);
            let v = Vector::new(v).map_err(|_| ContainerError::NonFinite("arrow vector"))?;
            arrows.push(ArrowForm { v });
        }
        if mask & BIT_SPECTR != 0 {
            let b_hat = read_matrix(bytes, &mut pos, m, r, "b_hat")?;
            let a_hat = read_matrix(bytes, &mut pos, r, n, "a_hat")?;
            spectrs.push(SpectrForm { b_hat, a_hat });
        }
        if mask & BIT_SEQR != 0 {
            let q = read_matrix(bytes, &mut pos, m, r, "q")?;
            let r_mat = read_matrix(bytes, &mut pos, r, r, "r_mat")?;
            seqrs.push(SeqrForm { q, r_mat });
        }
        if mask & BIT_CALIB != 0 {
            let mu = read_f64(bytes, &mut pos);
            let sigma = read_f64(bytes, &mut pos);
            if !mu.is_finite() || !sigma.is_finite() {
                return Err(ContainerError::NonFinite("calibration stats").into());
            }
            mus.push(mu);
            sigmas.push(sigma);
        }

        // Rebuild B when it was discarded at save time.
        let (b, a) = match b {
            Some(b) => (b, a),
            None if shared => {
                let form = seqrs.last().expect("seqr forms present");
                (form.q.matmul(&form.r_mat)?, None)
            }
            None => {
                let form = spectrs.last().expect("spectral forms present");
                (form.b_hat.clone(), Some(form.a_hat.clone()))
            }
        };
        adapters.push(LoraAdapter { id, b, a });
    }

    let mut library = match shared_a {
        Some(a) => AdapterLibrary::new_shared(
            a,
            adapters
                .into_iter()
                .map(|ad| (ad.id, ad.b))
                .collect::<Vec<_>>(),
        )?,
        None => AdapterLibrary::new_unique(
            adapters
                .into_iter()
                .map(|ad| (ad.id, ad.b, ad.a.expect("unique-A adapter has A")))
                .collect::<Vec<_>>(),
        )?,
    };
    if discard_b {
        library
            .meta_mut()
            .insert("reconstructed_b".to_string(), "forms".to_string());
    }

    let forms = RoutedForms {
        arrow: (mask & BIT_ARROW != 0).then_some(arrows),
        spectr: (mask & BIT_SPECTR != 0).then_some(spectrs),
        seqr: (mask & BIT_SEQR != 0).then_some(seqrs),
    };
    let stats = (mask & BIT_CALIB != 0).then_some(CalibrationStats {
        mu: mus,
        sigma: sigmas,
    });

    Ok(LibraryBundle {
        library,
        forms,
        stats,
        discard_b,
    })
}

/// Writes the container (and a `<path>.meta` sidecar for any library
/// metadata) atomically: temp file first, then rename.
pub fn save_library(bundle: &LibraryBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = library_to_bytes(bundle)?;
    write_atomic(path, &bytes).map_err(ContainerError::Io)?;

    let meta_path = sidecar_path(path);
    if bundle.library.meta().is_empty() {
        if meta_path.exists() {
            fs::remove_file(&meta_path).map_err(ContainerError::Io)?;
        }
    } else {
        let mut text = String::new();
        for (k, v) in bundle.library.meta() {
            text.push_str(k);
            text.push('=');
            text.push_str(&v.replace('\n', " "));
            text.push('\n');
        }
        write_atomic(&meta_path, text.as_bytes()).map_err(ContainerError::Io)?;
    }
    Ok(())
}

/// Reads a container and its metadata sidecar if one exists.
pub fn load_library(path: impl AsRef<Path>) -> Result<LibraryBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(ContainerError::Io)?;
    let mut bundle = library_from_bytes(&bytes)?;

    let meta_path = sidecar_path(path);
    if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(ContainerError::Io)?;
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                bundle
                    .library
                    .meta_mut()
                    .insert(k.to_string(), v.to_string());
            }
        }
    }
    Ok(bundle)
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta");
    std::path::PathBuf::from(os)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = {
        let mut os = path.as_os_str().to_owned();
        os.push(".tmp");
        std::path::PathBuf::from(os)
    };
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn check_form_lengths(bundle: &LibraryBundle) -> Result<()> {
    let count = bundle.library.n_adapters();
    let (m, n, r) = bundle.library.dims();
    if let Some(arrows) = &bundle.forms.arrow {
        if arrows.len() != count || arrows.iter().any(|f| f.v.dim() != n) {
            return Err(Error::LibraryInvalid("arrow forms do not match library".into()));
        }
    }
    if let Some(spectr) = &bundle.forms.spectr {
        let ok = spectr.len() == count
            && spectr.iter().all(|f| {
                f.b_hat.rows() == m
                    && f.b_hat.cols() == r
                    && f.a_hat.rows() == r
                    && f.a_hat.cols() == n
            });
        if !ok {
            return Err(Error::LibraryInvalid(
                "spectral forms do not match library".into(),
            ));
        }
    }
    if let Some(seqr) = &bundle.forms.seqr {
        if !bundle.library.is_shared() {
            return Err(Error::SharedARequired("storing QR forms"));
        }
        let ok = seqr.len() == count
            && seqr.iter().all(|f| {
                f.q.rows() == m && f.q.cols() == r && f.r_mat.rows() == r && f.r_mat.cols() == r
            });
        if !ok {
            return Err(Error::LibraryInvalid("QR forms do not match library".into()));
        }
    }
    if let Some(stats) = &bundle.stats {
        if stats.mu.len() != count || stats.sigma.len() != count {
            return Err(Error::LengthMismatch {
                left: count,
                right: stats.mu.len(),
            });
        }
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    end: usize,
}

impl Cursor<'_> {
    fn skip(&mut self, len: u128, section: &'static str) -> Result<()> {
        let target = self.pos as u128 + len;
        if target > self.end as u128 {
            let needed = (target - self.end as u128).min(usize::MAX as u128) as usize;
            return Err(truncated(section, needed));
        }
        self.pos = target as usize;
        Ok(())
    }

    fn read_u16(&mut self, section: &'static str) -> Result<u16> {
        if self.pos + 2 > self.end {
            return Err(truncated(section, self.pos + 2 - self.end));
        }
        let v = u16::from_le_bytes([self.bytes[self.pos], self.bytes[self.pos + 1]]);
        self.pos += 2;
        Ok(v)
    }
}

fn truncated(section: &'static str, needed: usize) -> Error {
    ContainerError::Truncated { section, needed }.into()
}

fn header_invalid(msg: impl Into<String>) -> Error {
    ContainerError::HeaderInvalid(msg.into()).into()
}

fn write_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_u32(bytes: &[u8], pos: usize) -> u32 {
    u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap())
}

fn read_f64(bytes: &[u8], pos: &mut usize) -> f64 {
    let v = f64::from_le_bytes(bytes[*pos..*pos + 8].try_into().unwrap());
    *pos += 8;
    v
}

fn read_f64s(bytes: &[u8], pos: &mut usize, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(read_f64(bytes, pos));
    }
    out
}

fn read_matrix(
    bytes: &[u8],
    pos: &mut usize,
    rows: usize,
    cols: usize,
    section: &'static str,
) -> Result<Matrix> {
    let data = read_f64s(bytes, pos, rows * cols);
    Matrix::new(rows, cols, data).map_err(|_| ContainerError::NonFinite(section).into())
}
