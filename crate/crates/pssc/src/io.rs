//! File formats: the shared binary matrix format (`matbin`), parameter
//! checkpoints, numeric CSV, and IDX image/label files.
//!
//! matbin layout: magic `MATB`, then rows and cols as little-endian u64,
//! then rows·cols little-endian f64 values in row-major order.
//!
//! Checkpoint layout: magic `PSSC`, then (all little-endian u64) the number
//! of encoder widths, the widths themselves (input dimension first), n, K,
//! followed by every parameter as little-endian f64 in the crate's fixed
//! coordinate order (encoder weight/bias per layer, decoder, C, classifier).

use crate::error::{PsscError, Result};
use crate::linalg::Mat;
use crate::model::{init_params, PsscParams};
use std::fs;
use std::io::Write as _;
use std::path::Path;

const MATBIN_MAGIC: &[u8; 4] = b"MATB";
const CHECKPOINT_MAGIC: &[u8; 4] = b"PSSC";

fn ingestion(path: &Path, offset: usize, reason: impl Into<String>) -> PsscError {
    PsscError::Ingestion {
        path: path.display().to_string(),
        offset,
        reason: reason.into(),
    }
}

pub fn write_matbin(path: &Path, m: &Mat) -> Result<()> {
    let mut buf = Vec::with_capacity(20 + 8 * m.data().len());
    buf.extend_from_slice(MATBIN_MAGIC);
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_matbin(path: &Path) -> Result<Mat> {
    let bytes = fs::read(path)?;
    if bytes.len() < 20 || &bytes[0..4] != MATBIN_MAGIC {
        return Err(ingestion(path, 0, "missing MATB magic"));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let expected = 20 + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(ingestion(
            path,
            bytes.len().min(expected),
            format!("expected {expected} bytes for a {rows}x{cols} matrix"),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (idx, chunk) in bytes[20..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(ingestion(path, 20 + 8 * idx, "non-finite value"));
        }
        data.push(v);
    }
    Ok(Mat::from_vec(rows, cols, data))
}

pub fn write_checkpoint(path: &Path, params: &PsscParams) -> Result<()> {
    let widths = params.widths();
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(widths.len() as u64).to_le_bytes());
    for w in &widths {
        buf.extend_from_slice(&(*w as u64).to_le_bytes());
    }
    buf.extend_from_slice(&(params.n() as u64).to_le_bytes());
    buf.extend_from_slice(&(params.num_clusters() as u64).to_le_bytes());
    for v in params.flat() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<PsscParams> {
    let bytes = fs::read(path)?;
    if bytes.len() < 12 || &bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(ingestion(path, 0, "missing PSSC magic"));
    }
    let mut pos = 4usize;
    let read_u64 = |bytes: &[u8], pos: &mut usize| -> Result<u64> {
        if *pos + 8 > bytes.len() {
            return Err(ingestion(path, *pos, "truncated header"));
        }
        let v = u64::from_le_bytes(bytes[*pos..*pos + 8].try_into().unwrap());
        *pos += 8;
        Ok(v)
    };
    let width_count = read_u64(&bytes, &mut pos)? as usize;
    let mut widths = Vec::with_capacity(width_count);
    for _ in 0..width_count {
        widths.push(read_u64(&bytes, &mut pos)? as usize);
    }
    let n = read_u64(&bytes, &mut pos)? as usize;
    let k = read_u64(&bytes, &mut pos)? as usize;
    if widths.len() < 2 || n < 2 || k < 2 {
        return Err(ingestion(path, pos, "invalid checkpoint header"));
    }

    // build the right shape, then overwrite every coordinate from the file
    let mut rng = crate::linalg::SeededRng::new(0);
    let mut params = init_params(&widths, n, k, &mut rng);
    let coords = params.flat().len();
    if bytes.len() != pos + 8 * coords {
        return Err(ingestion(
            path,
            bytes.len().min(pos + 8 * coords),
            format!("expected {} parameter bytes", 8 * coords),
        ));
    }
    for (slot, chunk) in params.flat_mut().into_iter().zip(bytes[pos..].chunks_exact(8)) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(ingestion(path, pos, "non-finite parameter"));
        }
        *slot = v;
    }
    Ok(params)
}

/// One sample per CSV row, transposed into samples-as-columns. When
/// `labels_in_last_col` is set the final column holds integer labels.
pub fn read_csv_dataset(path: &Path, labels_in_last_col: bool) -> Result<(Mat, Option<Vec<usize>>)> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut offset = 0usize;
    for line in text.lines() {
        let line_offset = offset;
        offset += line.len() + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields: Vec<&str> = trimmed.split(',').collect();
        if labels_in_last_col {
            let raw = fields.pop().ok_or_else(|| ingestion(path, line_offset, "empty row"))?;
            let label: usize = raw.trim().parse().map_err(|_| {
                ingestion(path, line_offset, format!("bad label field '{raw}'"))
            })?;
            labels.push(label);
        }
        let mut row = Vec::with_capacity(fields.len());
        for field in fields {
            let v: f64 = field.trim().parse().map_err(|_| {
                ingestion(path, line_offset, format!("bad numeric field '{field}'"))
            })?;
            if !v.is_finite() {
                return Err(ingestion(path, line_offset, "non-finite value"));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(ingestion(path, line_offset, "ragged row"));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ingestion(path, 0, "no data rows"));
    }
    let n = rows.len();
    let d = rows[0].len();
    let x = Mat::from_fn(d, n, |i, j| rows[j][i]);
    Ok((x, if labels_in_last_col { Some(labels) } else { None }))
}

pub fn write_csv_dataset(path: &Path, x: &Mat, labels: Option<&[usize]>) -> Result<()> {
    let mut out = String::new();
    for j in 0..x.cols() {
        let mut fields: Vec<String> = (0..x.rows()).map(|i| format!("{}", x.get(i, j))).collect();
        if let Some(labels) = labels {
            fields.push(labels[j].to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// IDX image file (magic 0x00000803): pixels scaled by 1/255 into columns of
/// size rows·cols.
pub fn read_idx_images(path: &Path) -> Result<Mat> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 {
        return Err(ingestion(path, 0, "truncated IDX header"));
    }
    let magic = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    if magic != 0x0000_0803 {
        return Err(ingestion(path, 0, format!("bad IDX image magic {magic:#010x}")));
    }
    let n = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_be_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let w = u32::from_be_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let pixels = h * w;
    if bytes.len() != 16 + n * pixels {
        return Err(ingestion(
            path,
            bytes.len(),
            format!("expected {} pixel bytes", n * pixels),
        ));
    }
    Ok(Mat::from_fn(pixels, n, |i, j| {
        bytes[16 + j * pixels + i] as f64 / 255.0
    }))
}

/// IDX label file (magic 0x00000801).
pub fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 {
        return Err(ingestion(path, 0, "truncated IDX header"));
    }
    let magic = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    if magic != 0x0000_0801 {
        return Err(ingestion(path, 0, format!("bad IDX label magic {magic:#010x}")));
    }
    let n = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + n {
        return Err(ingestion(path, bytes.len(), format!("expected {n} label bytes")));
    }
    Ok(bytes[8..].iter().map(|&b| b as usize).collect())
}

pub fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::from("index,label\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    let mut offset = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line_offset = offset;
        offset += line.len() + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || (idx == 0 && trimmed.starts_with("index")) {
            continue;
        }
        let last = trimmed.rsplit(',').next().unwrap();
        let label: usize = last
            .trim()
            .parse()
            .map_err(|_| ingestion(path, line_offset, format!("bad label '{last}'")))?;
        out.push(label);
    }
    if out.is_empty() {
        return Err(ingestion(path, 0, "no labels"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SeededRng;
    use tempfile::tempdir;

    #[test]
    fn matbin_roundtrip_bitwise() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.matbin");
        let mut rng = SeededRng::new(0);
        let m = Mat::from_fn(4, 3, |_, _| rng.normal());
        write_matbin(&path, &m).unwrap();
        let back = read_matbin(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn matbin_rejects_garbage() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.matbin");
        fs::write(&path, b"nope").unwrap();
        assert!(matches!(read_matbin(&path), Err(PsscError::Ingestion { .. })));
    }

    #[test]
    fn checkpoint_roundtrip_bitwise() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.matbin");
        let mut rng = SeededRng::new(3);
        let params = init_params(&[6, 4, 3], 8, 2, &mut rng);
        write_checkpoint(&path, &params).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(params.flat(), back.flat());
        assert_eq!(back.widths(), vec![6, 4, 3]);
        assert_eq!(back.n(), 8);
        assert_eq!(back.num_clusters(), 2);
    }

    #[test]
    fn csv_transpose_convention() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "1,2\n3,4\n5,6\n").unwrap();
        let (x, labels) = read_csv_dataset(&path, false).unwrap();
        assert_eq!(x.rows(), 2); // d = 2
        assert_eq!(x.cols(), 3); // n = 3
        assert_eq!(x.get(0, 0), 1.0);
        assert_eq!(x.get(1, 2), 6.0);
        assert!(labels.is_none());
    }

    #[test]
    fn csv_labels_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "0.5,0.25,1\n0.125,0.75,0\n").unwrap();
        let (x, labels) = read_csv_dataset(&path, true).unwrap();
        assert_eq!(x.rows(), 2);
        assert_eq!(x.cols(), 2);
        assert_eq!(labels.unwrap(), vec![1, 0]);
    }

    #[test]
    fn csv_rejects_nan_with_location() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "1,2\nNaN,4\n").unwrap();
        match read_csv_dataset(&path, false) {
            Err(PsscError::Ingestion { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn csv_dataset_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let x = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        write_csv_dataset(&path, &x, Some(&[0, 1, 2])).unwrap();
        let (back, labels) = read_csv_dataset(&path, true).unwrap();
        assert_eq!(x, back);
        assert_eq!(labels.unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn idx_hand_built_fixture() {
        // two 28×28 images
        let dir = tempdir().unwrap();
        let path = dir.path().join("images.idx");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&28u32.to_be_bytes());
        bytes.extend_from_slice(&28u32.to_be_bytes());
        for i in 0..2 * 784 {
            bytes.push((i % 256) as u8);
        }
        fs::write(&path, &bytes).unwrap();
        let x = read_idx_images(&path).unwrap();
        assert_eq!(x.rows(), 784);
        assert_eq!(x.cols(), 2);
        assert_eq!(x.get(0, 0), 0.0);
        assert_eq!(x.get(255, 0), 1.0);
        assert!(x.data().iter().all(|&v| (0.0..=1.0).contains(&v)));

        let label_path = dir.path().join("labels.idx");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&[7, 3]);
        fs::write(&label_path, &bytes).unwrap();
        assert_eq!(read_idx_labels(&label_path).unwrap(), vec![7, 3]);
    }

    #[test]
    fn idx_rejects_wrong_magic() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.idx");
        fs::write(&path, 0x0000_0801u32.to_be_bytes()).unwrap();
        assert!(matches!(
            read_idx_images(&path),
            Err(PsscError::Ingestion { .. })
        ));
    }

    #[test]
    fn labels_csv_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        write_labels_csv(&path, &[2, 0, 1]).unwrap();
        assert_eq!(read_labels_csv(&path).unwrap(), vec![2, 0, 1]);
    }
}
