//! One-shot framed transfer of a payload over TCP.
//!
//! Wire frame: `len:u32 big-endian | bytes`. A sender may pace itself to a
//! fixed byte rate to imitate a narrow link.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::pipeline::{EncryptedPayload, PipelineError};

pub const MAX_FRAME: usize = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("connection error: {0}")]
    Connection(#[source] io::Error),
    #[error("frame of {0} bytes exceeds the {MAX_FRAME}-byte limit")]
    FrameTooLarge(usize),
    #[error("received data is not a payload: {0}")]
    BadHeader(#[source] PipelineError),
    #[error("throttle rate must be positive")]
    BadRate,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Write one frame. With `rate` set, cumulative bytes (prefix included) are
/// released no faster than `rate` per second.
pub fn write_frame<W: Write>(
    w: &mut W,
    payload: &[u8],
    rate: Option<u64>,
) -> Result<(), TransferError> {
    if payload.len() > MAX_FRAME {
        return Err(TransferError::FrameTooLarge(payload.len()));
    }
    let mut frame = Vec::with_capacity(4 + payload.len());
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(payload);

    match rate {
        None => w.write_all(&frame).map_err(TransferError::Connection)?,
        Some(0) => return Err(TransferError::BadRate),
        Some(rate) => {
            // ~20 releases per second keeps pacing smooth without tiny writes
            let chunk = (rate / 20).clamp(1, 64 * 1024) as usize;
            let start = Instant::now();
            let mut sent = 0usize;
            for piece in frame.chunks(chunk) {
                let due = Duration::from_secs_f64((sent + piece.len()) as f64 / rate as f64);
                if let Some(wait) = due.checked_sub(start.elapsed()) {
                    thread::sleep(wait);
                }
                w.write_all(piece).map_err(TransferError::Connection)?;
                w.flush().map_err(TransferError::Connection)?;
                sent += piece.len();
            }
        }
    }
    w.flush().map_err(TransferError::Connection)
}

/// Read one frame; an early end of stream is a connection error.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Vec<u8>, TransferError> {
    let mut prefix = [0u8; 4];
    r.read_exact(&mut prefix)
        .map_err(TransferError::Connection)?;
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME {
        return Err(TransferError::FrameTooLarge(len));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(TransferError::Connection)?;
    Ok(buf)
}

pub fn send_file<A: ToSocketAddrs>(
    path: &Path,
    addr: A,
    rate: Option<u64>,
) -> Result<usize, TransferError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() > MAX_FRAME {
        return Err(TransferError::FrameTooLarge(bytes.len()));
    }
    let mut stream = TcpStream::connect(addr).map_err(TransferError::Connection)?;
    stream
        .set_nodelay(true)
        .map_err(TransferError::Connection)?;
    write_frame(&mut stream, &bytes, rate)?;
    stream
        .shutdown(std::net::Shutdown::Write)
        .map_err(TransferError::Connection)?;
    Ok(bytes.len())
}

/// Accept one connection, read one frame, check it parses as a payload, and
/// only then write it to `out`.
pub fn recv_file(listener: &TcpListener, out: &Path) -> Result<usize, TransferError> {
    let (mut stream, _) = listener.accept().map_err(TransferError::Connection)?;
    let bytes = read_frame(&mut stream)?;
    EncryptedPayload::from_bytes(&bytes).map_err(TransferError::BadHeader)?;
    crate::image::write_atomic(out, &bytes)?;
    Ok(bytes.len())
}
