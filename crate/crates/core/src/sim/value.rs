//! Scalar values and C-style integer arithmetic for the interpreter.

use crate::dsl::{BinOp, ScalarType};

/// A pointer into a DRAM buffer, in elements of that buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ptr {
    pub buf: usize,
    pub off: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Ptr(Ptr),
}

impl Value {
    pub fn truthy(self) -> bool {
        match self {
            Value::Int(v) => v != 0,
            Value::Float(v) => v != 0.0,
            Value::Ptr(_) => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithError {
    DivByZero,
    BadShift(i64),
}

impl std::fmt::Display for ArithError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArithError::DivByZero => write!(f, "division by zero"),
            ArithError::BadShift(n) => write!(f, "shift amount {n} out of range"),
        }
    }
}

/// Integer binary operation with 64-bit signed semantics. Division truncates
/// toward zero like C.
pub fn int_binop(op: BinOp, a: i64, b: i64) -> Result<i64, ArithError> {
    Ok(match op {
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div => {
            if b == 0 {
                return Err(ArithError::DivByZero);
            }
            a.wrapping_div(b)
        }
        BinOp::Rem => {
            if b == 0 {
                return Err(ArithError::DivByZero);
            }
            a.wrapping_rem(b)
        }
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Shl | BinOp::Shr => {
            if !(0..64).contains(&b) {
                return Err(ArithError::BadShift(b));
            }
            if op == BinOp::Shl {
                a.wrapping_shl(b as u32)
            } else {
                a >> b
            }
        }
        BinOp::Lt => i64::from(a < b),
        BinOp::Le => i64::from(a <= b),
        BinOp::Gt => i64::from(a > b),
        BinOp::Ge => i64::from(a >= b),
        BinOp::Eq => i64::from(a == b),
        BinOp::Ne => i64::from(a != b),
        BinOp::BitAnd => a & b,
        BinOp::BitXor => a ^ b,
        BinOp::BitOr => a | b,
        BinOp::And => i64::from(a != 0 && b != 0),
        BinOp::Or => i64::from(a != 0 || b != 0),
    })
}

/// Narrows an integer to the range of a declared integer type. Non-integer
/// types pass the value through.
pub fn wrap_int(ty: ScalarType, v: i64) -> i64 {
    use ScalarType::*;
    match ty {
        Int8 | Char | ElemT => v as i8 as i64,
        Uint8 => v as u8 as i64,
        Int16 => v as i16 as i64,
        Uint16 => v as u16 as i64,
        Int32 | Int | AccT => v as i32 as i64,
        Uint32 | Unsigned => v as u32 as i64,
        Bool => i64::from(v != 0),
        Int64 | Uint64 | IntFast32 | UintFast32 | Long | SizeT | Float | Double => v,
    }
}

/// `sizeof` for types whose size does not depend on the accelerator.
pub fn sizeof_static(ty: ScalarType) -> Option<usize> {
    use ScalarType::*;
    Some(match ty {
        Int8 | Uint8 | Bool | Char => 1,
        Int16 | Uint16 => 2,
        Int32 | Uint32 | Int | Unsigned | Float => 4,
        Int64 | Uint64 | IntFast32 | UintFast32 | Long | SizeT | Double => 8,
        ElemT | AccT => return None,
    })
}

pub fn is_float_type(ty: ScalarType) -> bool {
    matches!(ty, ScalarType::Float | ScalarType::Double)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_division() {
        assert_eq!(int_binop(BinOp::Div, -7, 2), Ok(-3));
        assert_eq!(int_binop(BinOp::Rem, -7, 2), Ok(-1));
        assert_eq!(int_binop(BinOp::Div, 1, 0), Err(ArithError::DivByZero));
    }

    #[test]
    fn shift_into_bit_31() {
        let v = int_binop(BinOp::Shl, 1, 31).unwrap();
        assert_eq!(wrap_int(ScalarType::Uint32, v), 0x8000_0000);
        assert_eq!(wrap_int(ScalarType::Int32, v), i32::MIN as i64);
    }
}
