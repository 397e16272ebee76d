//! Post-training conversion to half-precision storage.

use half::f16;

use crate::error::{Error, Result};
use crate::model::transformer::{Precision, TranslationModel};
use crate::numerics::Scalar;

/// Rounds every weight to the nearest IEEE binary16 value (ties to even).
/// Fails, naming the tensors, if any finite weight overflows to infinity.
pub fn quantize_fp16<T: Scalar>(model: &TranslationModel<T>) -> Result<TranslationModel<T>> {
    let mut out = model.clone();
    let mut overflow = Vec::new();
    out.params_mut().visit_mut(&mut |name, t| {
        let mut bad = false;
        for v in t.data_mut() {
            let h = f16::from_f64(v.f64());
            if h.is_infinite() && v.is_finite() {
                bad = true;
            }
            *v = T::of(h.to_f64());
        }
        if bad {
            overflow.push(name);
        }
    });
    if !overflow.is_empty() {
        return Err(Error::Fp16Overflow(overflow));
    }
    out.set_precision(Precision::F16);
    Ok(out)
}
