//! `MPMS` particle snapshot files.
//!
//! Layout: magic `MPMS`, `u32` version, `u64` particle count, then per particle
//! little-endian `f64` position (3), velocity (3), mass, affine (9, row-major),
//! def_grad (9, row-major), init_volume, and a `u8` body tag.

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};

use super::{Body, Particle, SimError};

pub const MAGIC: &[u8; 4] = b"MPMS";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut out: W, particles: &[Particle]) -> Result<(), SimError> {
    let mut buf = Vec::with_capacity(16 + particles.len() * 209);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(particles.len() as u64).to_le_bytes());
    for p in particles {
        let mut put = |v: f64| buf.extend_from_slice(&v.to_le_bytes());
        p.position.iter().for_each(|&v| put(v));
        p.velocity.iter().for_each(|&v| put(v));
        put(p.mass);
        for r in 0..3 {
            for c in 0..3 {
                put(p.affine[(r, c)]);
            }
        }
        for r in 0..3 {
            for c in 0..3 {
                put(p.def_grad[(r, c)]);
            }
        }
        put(p.init_volume);
        buf.push(p.body.tag());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<Vec<Particle>, SimError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, at: 0 };
    if cur.take(4)? != MAGIC {
        return Err(SimError::Format("bad snapshot magic".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(SimError::Format(format!("unsupported snapshot version {version}")));
    }
    let count = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
    let mut particles = Vec::with_capacity(count.min(bytes.len() / 209));
    for _ in 0..count {
        let position = Vector3::new(cur.f64()?, cur.f64()?, cur.f64()?);
        let velocity = Vector3::new(cur.f64()?, cur.f64()?, cur.f64()?);
        let mass = cur.f64()?;
        let mut affine = Matrix3::zeros();
        for r in 0..3 {
            for c in 0..3 {
                affine[(r, c)] = cur.f64()?;
            }
        }
        let mut def_grad = Matrix3::zeros();
        for r in 0..3 {
            for c in 0..3 {
                def_grad[(r, c)] = cur.f64()?;
            }
        }
        let init_volume = cur.f64()?;
        let tag = cur.take(1)?[0];
        let body = Body::from_tag(tag)
            .ok_or_else(|| SimError::Format(format!("unknown body tag {tag}")))?;
        particles.push(Particle {
            position,
            velocity,
            mass,
            affine,
            def_grad,
            init_volume,
            body,
        });
    }
    if cur.at != bytes.len() {
        return Err(SimError::Format("trailing bytes after snapshot".into()));
    }
    Ok(particles)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SimError> {
        let end = self.at + n;
        if end > self.bytes.len() {
            return Err(SimError::Format("truncated snapshot".into()));
        }
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64, SimError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_particle() -> impl Strategy<Value = Particle> {
        (
            prop::array::uniform3(-1e3f64..1e3),
            prop::array::uniform3(-1e3f64..1e3),
            prop::array::uniform9(-10f64..10.0),
            prop::bool::ANY,
        )
            .prop_map(|(x, v, m, obj)| Particle {
                position: Vector3::from(x),
                velocity: Vector3::from(v),
                mass: 0.5,
                affine: Matrix3::from_row_slice(&m),
                def_grad: Matrix3::from_column_slice(&m),
                init_volume: 0.008,
                body: if obj { Body::Object } else { Body::Elastomer },
            })
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(ps in prop::collection::vec(arb_particle(), 0..20)) {
            let mut buf = Vec::new();
            write_snapshot(&mut buf, &ps).unwrap();
            prop_assert_eq!(buf.len(), 16 + ps.len() * 209);
            let back = read_snapshot(&buf[..]).unwrap();
            prop_assert_eq!(back, ps);
        }
    }

    #[test]
    fn header_layout() {
        let p = Particle::at_rest(Vector3::new(1.0, 2.0, 3.0), 1.0, 1.0, Body::Object);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &[p]).unwrap();
        assert_eq!(&buf[0..4], b"MPMS");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..16], &1u64.to_le_bytes());
        assert_eq!(&buf[16..24], &1.0f64.to_le_bytes());
        assert_eq!(*buf.last().unwrap(), 1);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_snapshot(&b"MPMX\x01\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &[Particle::at_rest(Vector3::zeros(), 1.0, 1.0, Body::Elastomer)]).unwrap();
        buf.pop();
        assert!(read_snapshot(&buf[..]).is_err());
    }
}
