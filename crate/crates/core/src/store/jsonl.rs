use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::StoreError;

/// Records of a JSON-lines file. A final line that is unterminated or does
/// not parse is treated as an interrupted append: it is dropped and cut from
/// the file so later appends start on a clean line. Earlier bad lines are
/// corruption.
pub(crate) fn load<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, bool), StoreError> {
    let mut file = match OpenOptions::new().read(true).write(true).open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), false)),
        Err(e) => return Err(e.into()),
    };
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;

    let mut records = Vec::new();
    let mut start = 0usize;
    let mut keep = 0usize;
    let mut line_no = 0usize;
    while start < bytes.len() {
        line_no += 1;
        let end = bytes[start..].iter().position(|&b| b == b'\n').map(|i| start + i);
        let Some(end) = end else { break };
        let line = &bytes[start..end];
        let is_last = end + 1 == bytes.len();
        if !line.iter().all(u8::is_ascii_whitespace) {
            match serde_json::from_slice::<T>(line) {
                Ok(r) => records.push(r),
                Err(_) if is_last => break,
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        file: path.display().to_string(),
                        line: line_no,
                        message: e.to_string(),
                    })
                }
            }
        }
        start = end + 1;
        keep = start;
    }

    let truncated = keep < bytes.len();
    if truncated {
        file.set_len(keep as u64)?;
        file.sync_all()?;
    }
    Ok((records, truncated))
}

pub(crate) fn append<T: Serialize>(file: &mut File, record: &T) -> Result<(), StoreError> {
    let mut line = serde_json::to_vec(record).map_err(|e| StoreError::Io(e.into()))?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()?;
    Ok(())
}

pub(crate) fn open_append(path: &Path) -> Result<File, StoreError> {
    Ok(OpenOptions::new().create(true).append(true).open(path)?)
}
