//! 4-byte big-endian length prefix followed by the payload.

use std::io::{self, Read, Write};

use crate::error::{NetError, NetResult};

pub const MAX_FRAME: usize = 1 << 24;
pub const HEADER: usize = 4;

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> NetResult<()> {
    if payload.len() > MAX_FRAME {
        return Err(NetError::FrameTooLarge(payload.len()));
    }
    let mut buf = Vec::with_capacity(HEADER + payload.len());
    buf.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    buf.extend_from_slice(payload);
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// `Ok(None)` on a clean end of stream before any header byte.
pub fn read_frame<R: Read>(r: &mut R) -> NetResult<Option<Vec<u8>>> {
    let mut len = [0u8; HEADER];
    let mut got = 0;
    while got < HEADER {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(NetError::FrameTooLarge(len));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Some(payload))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut buf = vec![];
        write_frame(&mut buf, b"{}").unwrap();
        write_frame(&mut buf, b"").unwrap();
        assert_eq!(&buf[..6], &[0, 0, 0, 2, b'{', b'}']);
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"{}");
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"");
        assert!(read_frame(&mut r).unwrap().is_none());
    }

    #[test]
    fn limits() {
        let header = ((MAX_FRAME + 1) as u32).to_be_bytes();
        assert!(matches!(read_frame(&mut &header[..]), Err(NetError::FrameTooLarge(n)) if n == MAX_FRAME + 1));
        assert!(matches!(write_frame(&mut vec![], &vec![0; MAX_FRAME + 1]), Err(NetError::FrameTooLarge(_))));
        assert!(matches!(read_frame(&mut &[0u8, 0][..]), Err(NetError::Io(_))));
        assert!(matches!(read_frame(&mut &[0u8, 0, 0, 3, 1][..]), Err(NetError::Io(_))));
    }
}
