//! Binary codec for action arguments, results and envelopes.
//!
//! All integers are little-endian. An envelope is laid out as
//!
//! ```text
//! [u32 magic 0x48505852][u16 version = 1][u64 request_id][u32 origin_rank]
//! [u16 name_len][name bytes][u32 payload_len][payload]
//! ```
//!
//! A payload is one tagged [`Value`], always a tuple. Tags: `0` i64, `1` f64,
//! `2` f64 array (u64 length prefix), `3` byte array (u64 length prefix),
//! `4` bool (one byte), `5` tuple (u16 arity, then elements).
//!
//! Replies reuse the envelope with the reserved action names [`REPLY_OK`]
//! (payload `(result,)`) and [`REPLY_ERR`] (payload `(error,)`).

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{ResilienceError, ResilienceErrorKind, TaskError};

pub const MAGIC: u32 = 0x4850_5852;
pub const VERSION: u16 = 1;

pub const REPLY_OK: &str = "$ok";
pub const REPLY_ERR: &str = "$err";

const TAG_I64: u8 = 0;
const TAG_F64: u8 = 1;
const TAG_F64_ARRAY: u8 = 2;
const TAG_BYTES: u8 = 3;
const TAG_BOOL: u8 = 4;
const TAG_TUPLE: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("input truncated")]
    Truncated,
    #[error("bad magic {0:#010x}")]
    BadMagic(u32),
    #[error("unsupported version {0}")]
    BadVersion(u16),
    #[error("unknown type tag {0}")]
    BadTag(u8),
    #[error("expected {expected}")]
    TypeMismatch { expected: &'static str },
    #[error("invalid utf-8")]
    Utf8,
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("length {0} does not fit the format")]
    TooLong(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    I64(i64),
    F64(f64),
    F64Array(Vec<f64>),
    Bytes(Vec<u8>),
    Bool(bool),
    Tuple(Vec<Value>),
}

impl Value {
    /// Equality on encoded bits (distinguishes `-0.0`, compares NaN payloads).
    pub fn bitwise_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::F64(a), Value::F64(b)) => a.to_bits() == b.to_bits(),
            (Value::F64Array(a), Value::F64Array(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Value::Tuple(a), Value::Tuple(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.bitwise_eq(y))
            }
            _ => self == other,
        }
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            Value::I64(v) => {
                out.push(TAG_I64);
                out.extend_from_slice(&v.to_le_bytes());
            }
            Value::F64(v) => {
                out.push(TAG_F64);
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            Value::F64Array(vs) => {
                out.push(TAG_F64_ARRAY);
                out.extend_from_slice(&(vs.len() as u64).to_le_bytes());
                out.reserve(vs.len() * 8);
                for v in vs {
                    out.extend_from_slice(&v.to_bits().to_le_bytes());
                }
            }
            Value::Bytes(bs) => {
                out.push(TAG_BYTES);
                out.extend_from_slice(&(bs.len() as u64).to_le_bytes());
                out.extend_from_slice(bs);
            }
            Value::Bool(b) => {
                out.push(TAG_BOOL);
                out.push(u8::from(*b));
            }
            Value::Tuple(items) => {
                assert!(items.len() <= u16::MAX as usize, "tuple arity exceeds u16");
                out.push(TAG_TUPLE);
                out.extend_from_slice(&(items.len() as u16).to_le_bytes());
                for item in items {
                    item.encode_into(out);
                }
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    /// Decodes exactly one value spanning all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Value, CodecError> {
        let mut r = Reader::new(bytes);
        let v = r.value()?;
        r.finish()?;
        Ok(v)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).ok_or(CodecError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(CodecError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        self.array().map(u64::from_le_bytes)
    }

    fn len_u64(&mut self) -> Result<usize, CodecError> {
        let n = self.u64()?;
        usize::try_from(n).map_err(|_| CodecError::Truncated)
    }

    fn value(&mut self) -> Result<Value, CodecError> {
        match self.u8()? {
            TAG_I64 => self.array().map(|b| Value::I64(i64::from_le_bytes(b))),
            TAG_F64 => self.u64().map(|b| Value::F64(f64::from_bits(b))),
            TAG_F64_ARRAY => {
                let n = self.len_u64()?;
                let raw = self.take(n.checked_mul(8).ok_or(CodecError::Truncated)?)?;
                let vs = raw
                    .chunks_exact(8)
                    .map(|c| {
                        let mut a = [0u8; 8];
                        a.copy_from_slice(c);
                        f64::from_bits(u64::from_le_bytes(a))
                    })
                    .collect();
                Ok(Value::F64Array(vs))
            }
            TAG_BYTES => {
                let n = self.len_u64()?;
                Ok(Value::Bytes(self.take(n)?.to_vec()))
            }
            TAG_BOOL => match self.u8()? {
                0 => Ok(Value::Bool(false)),
                1 => Ok(Value::Bool(true)),
                _ => Err(CodecError::TypeMismatch { expected: "bool byte" }),
            },
            TAG_TUPLE => {
                let n = self.u16()? as usize;
                let mut items = Vec::with_capacity(n);
                for _ in 0..n {
                    items.push(self.value()?);
                }
                Ok(Value::Tuple(items))
            }
            t => Err(CodecError::BadTag(t)),
        }
    }

    fn finish(&self) -> Result<(), CodecError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

/// A serialized remote invocation or reply.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub request_id: u64,
    pub origin: u32,
    pub action: String,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn new(request_id: u64, origin: u32, action: impl Into<String>, payload: &Value) -> Self {
        Envelope {
            request_id,
            origin,
            action: action.into(),
            payload: payload.encode(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let name = self.action.as_bytes();
        let name_len = u16::try_from(name.len()).map_err(|_| CodecError::TooLong(name.len()))?;
        let payload_len =
            u32::try_from(self.payload.len()).map_err(|_| CodecError::TooLong(self.payload.len()))?;
        let mut out = Vec::with_capacity(24 + name.len() + self.payload.len());
        out.extend_from_slice(&MAGIC.to_le_bytes());
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.request_id.to_le_bytes());
        out.extend_from_slice(&self.origin.to_le_bytes());
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&payload_len.to_le_bytes());
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Envelope, CodecError> {
        let mut r = Reader::new(bytes);
        let magic = r.u32()?;
        if magic != MAGIC {
            return Err(CodecError::BadMagic(magic));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(CodecError::BadVersion(version));
        }
        let request_id = r.u64()?;
        let origin = r.u32()?;
        let name_len = r.u16()? as usize;
        let action = core::str::from_utf8(r.take(name_len)?)
            .map_err(|_| CodecError::Utf8)?
            .into();
        let payload_len = r.u32()? as usize;
        let payload = r.take(payload_len)?.to_vec();
        r.finish()?;
        Ok(Envelope {
            request_id,
            origin,
            action,
            payload,
        })
    }

    pub fn payload_value(&self) -> Result<Value, CodecError> {
        Value::decode(&self.payload)
    }
}

/// Types that cross the locality boundary.
pub trait Wire: Sized {
    fn to_value(&self) -> Value;
    fn from_value(v: Value) -> Result<Self, CodecError>;

    fn to_bytes(&self) -> Vec<u8> {
        self.to_value().encode()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        Self::from_value(Value::decode(bytes)?)
    }
}

fn mismatch<T>(expected: &'static str) -> Result<T, CodecError> {
    Err(CodecError::TypeMismatch { expected })
}

impl Wire for Value {
    fn to_value(&self) -> Value {
        self.clone()
    }
    fn from_value(v: Value) -> Result<Self, CodecError> {
        Ok(v)
    }
}

impl Wire for i64 {
    fn to_value(&self) -> Value {
        Value::I64(*self)
    }
    fn from_value(v: Value) -> Result<Self, CodecError> {
        match v {
            Value::I64(x) => Ok(x),
            _ => mismatch("i64"),
        }
    }
}

macro_rules! wire_via_i64 {
    ($($t:ty),*) => {$(
        impl Wire for $t {
            fn to_value(&self) -> Value {
                Value::I64(*self as i64)
            }
            fn from_value(v: Value) -> Result<Self, CodecError> {
                match v {
                    Value::I64(x) => <$t>::try_from(x)
                        .map_err(|_| CodecError::TypeMismatch { expected: stringify!($t) }),
                    _ => mismatch(stringify!($t)),
                }
            }
        }
    )*};
}

wire_via_i64!(i32, u32, u16, u8, usize);

// u64 is carried bit-for-bit in the signed slot.
impl Wire for u64 {
    fn to_value(&self) -> Value {
        Value::I64(*self as i64)
    }
    fn from_value(v: Value) -> Result<Self, CodecError> {
        match v {
            Value::I64(x) => Ok(x as u64),
            _ => mismatch("u64"),
        }
    }
}

impl Wire for f64 {
    fn to_value(&self) -> Value {
        Value::F64(*self)
    }
    fn from_value(v: Value) -> Result<Self, CodecError> {
        match v {
            Value::F64(x) => Ok(x),
            _ => mismatch("f64"),
        }
    }
}

impl Wire for bool {
    fn to_value(&self) -> Value {
        Value::Bool(*self)
    }
    fn from_value(v: Value) -> Result<Self, CodecError> {
        match v {
            Value::Bool(x) => Ok(x),
            _ => mismatch("bool"),
        }
    }
}

impl Wire for Vec<f64> {
    fn to_value(&self) -> Value {
        Value::F64Array(self.clone())
    }
    fn from_value(v: Value) -> Result<Self, CodecError> {
        match v {
            Value::F64Array(x) => Ok(x),
            _ => mismatch("f64 array"),
        }
    }
}

impl Wire for Vec<u8> {
    fn to_value(&self) -> Value {
        Value::Bytes(self.clone())
    }
    fn from_value(v: Value) -> Result<Self, CodecError> {
        match v {
            Value::Bytes(x) => Ok(x),
            _ => mismatch("byte array"),
        }
    }
}

impl Wire for String {
    fn to_value(&self) -> Value {
        Value::Bytes(self.as_bytes().to_vec())
    }
    fn from_value(v: Value) -> Result<Self, CodecError> {
        match v {
            Value::Bytes(x) => String::from_utf8(x).map_err(|_| CodecError::Utf8),
            _ => mismatch("string"),
        }
    }
}

impl Wire for () {
    fn to_value(&self) -> Value {
        Value::Tuple(Vec::new())
    }
    fn from_value(v: Value) -> Result<Self, CodecError> {
        match v {
            Value::Tuple(x) if x.is_empty() => Ok(()),
            _ => mismatch("empty tuple"),
        }
    }
}

macro_rules! wire_tuple {
    ($n:literal; $($name:ident : $idx:tt),+) => {
        impl<$($name: Wire),+> Wire for ($($name,)+) {
            fn to_value(&self) -> Value {
                Value::Tuple(alloc::vec![$(self.$idx.to_value()),+])
            }
            fn from_value(v: Value) -> Result<Self, CodecError> {
                match v {
                    Value::Tuple(items) if items.len() == $n => {
                        let mut it = items.into_iter();
                        Ok(($($name::from_value(it.next().expect("arity checked"))?,)+))
                    }
                    _ => mismatch(concat!($n, "-tuple")),
                }
            }
        }
    };
}

wire_tuple!(1; A: 0);
wire_tuple!(2; A: 0, B: 1);
wire_tuple!(3; A: 0, B: 1, C: 2);
wire_tuple!(4; A: 0, B: 1, C: 2, D: 3);
wire_tuple!(5; A: 0, B: 1, C: 2, D: 3, E: 4);
wire_tuple!(6; A: 0, B: 1, C: 2, D: 3, E: 4, F: 5);

// Error wire form: (code, fields...). Codes are stable.
const ERR_FAILED: i64 = 1;
const ERR_SDC: i64 = 2;
const ERR_RESILIENCE: i64 = 3;
const ERR_UNKNOWN_ACTION: i64 = 4;
const ERR_CHANNEL_CLOSED: i64 = 5;
const ERR_PANICKED: i64 = 6;
const ERR_CODEC: i64 = 7;

const KIND_EXCEPTION: i64 = 0;
const KIND_INVALID: i64 = 1;
const KIND_NO_REPLICA: i64 = 2;

impl Wire for TaskError {
    fn to_value(&self) -> Value {
        use alloc::string::ToString;
        use alloc::vec;
        let t = |code: i64, mut rest: Vec<Value>| {
            rest.insert(0, Value::I64(code));
            Value::Tuple(rest)
        };
        match self {
            TaskError::Failed { code, message } => {
                t(ERR_FAILED, vec![code.to_value(), message.to_value()])
            }
            TaskError::SimulatedSdc {
                locality,
                task_id,
                attempt,
            } => t(
                ERR_SDC,
                vec![locality.to_value(), task_id.to_value(), attempt.to_value()],
            ),
            TaskError::Resilience(r) => {
                let (kind, inner) = match &r.kind {
                    ResilienceErrorKind::ExhaustedWithException(e) => (KIND_EXCEPTION, e.to_value()),
                    ResilienceErrorKind::ExhaustedWithInvalidResult => {
                        (KIND_INVALID, Value::Tuple(Vec::new()))
                    }
                    ResilienceErrorKind::NoValidReplica => (KIND_NO_REPLICA, Value::Tuple(Vec::new())),
                };
                t(
                    ERR_RESILIENCE,
                    vec![Value::I64(kind), r.attempts.to_value(), inner],
                )
            }
            TaskError::UnknownAction(name) => t(ERR_UNKNOWN_ACTION, vec![name.to_value()]),
            TaskError::ChannelClosed => t(ERR_CHANNEL_CLOSED, Vec::new()),
            TaskError::Panicked(msg) => t(ERR_PANICKED, vec![msg.to_value()]),
            TaskError::Codec(e) => t(ERR_CODEC, vec![e.to_string().to_value()]),
        }
    }

    fn from_value(v: Value) -> Result<Self, CodecError> {
        let Value::Tuple(items) = v else {
            return mismatch("error tuple");
        };
        let mut it = items.into_iter();
        let code = i64::from_value(it.next().ok_or(CodecError::Truncated)?)?;
        let mut next = || it.next().ok_or(CodecError::TypeMismatch { expected: "error field" });
        Ok(match code {
            ERR_FAILED => TaskError::Failed {
                code: u32::from_value(next()?)?,
                message: String::from_value(next()?)?,
            },
            ERR_SDC => TaskError::SimulatedSdc {
                locality: u32::from_value(next()?)?,
                task_id: u64::from_value(next()?)?,
                attempt: u32::from_value(next()?)?,
            },
            ERR_RESILIENCE => {
                let kind = i64::from_value(next()?)?;
                let attempts = u32::from_value(next()?)?;
                let inner = next()?;
                let kind = match kind {
                    KIND_EXCEPTION => {
                        ResilienceErrorKind::ExhaustedWithException(Box::new(TaskError::from_value(inner)?))
                    }
                    KIND_INVALID => ResilienceErrorKind::ExhaustedWithInvalidResult,
                    KIND_NO_REPLICA => ResilienceErrorKind::NoValidReplica,
                    _ => return mismatch("resilience error kind"),
                };
                TaskError::Resilience(ResilienceError { kind, attempts })
            }
            ERR_UNKNOWN_ACTION => TaskError::UnknownAction(String::from_value(next()?)?),
            ERR_CHANNEL_CLOSED => TaskError::ChannelClosed,
            ERR_PANICKED => TaskError::Panicked(String::from_value(next()?)?),
            // Codec errors lose their structured form; the message is kept.
            ERR_CODEC => TaskError::Failed {
                code: ERR_CODEC as u32,
                message: String::from_value(next()?)?,
            },
            _ => return mismatch("error code"),
        })
    }
}
