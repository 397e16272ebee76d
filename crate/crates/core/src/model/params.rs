//! Parameter blocks, generic over the handle type so the same layout serves
//! stored tensors (`P = Tensor<T>`) and graph variables (`P = Var`).

use crate::error::Result;

macro_rules! param_block {
    ($(#[$m:meta])* $name:ident { $($field:ident),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name<P> {
            $(pub $field: P),+
        }

        impl<P> $name<P> {
            pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a P)) {
                $( f(format!("{prefix}.{}", stringify!($field)), &self.$field); )+
            }

            pub fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut P)) {
                $( f(format!("{prefix}.{}", stringify!($field)), &mut self.$field); )+
            }

            pub fn try_map<Q>(&self, f: &mut dyn FnMut(&P) -> Result<Q>) -> Result<$name<Q>> {
                Ok($name { $($field: f(&self.$field)?),+ })
            }
        }
    };
}

param_block!(
    /// Layer-norm gain and bias, both `[d]`.
    Norm { gain, bias }
);

param_block!(
    /// Multi-head attention projections. Weights are `[d_in, d_out]`.
    Attention { wq, bq, wk, bk, wv, bv, wo, bo }
);

param_block!(
    /// Position-wise feed-forward: `gelu(x w1 + b1) w2 + b2`.
    FeedForward { w1, b1, w2, b2 }
);

/// Pre-norm encoder block. `origin` is the block's index in the stack it was
/// first created in; it survives layer removal.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayer<P> {
    pub origin: usize,
    pub self_norm: Norm<P>,
    pub self_attn: Attention<P>,
    pub ffn_norm: Norm<P>,
    pub ffn: FeedForward<P>,
}

/// Pre-norm decoder block with causal self-attention and cross-attention.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderLayer<P> {
    pub origin: usize,
    pub self_norm: Norm<P>,
    pub self_attn: Attention<P>,
    pub cross_norm: Norm<P>,
    pub cross_attn: Attention<P>,
    pub ffn_norm: Norm<P>,
    pub ffn: FeedForward<P>,
}

impl<P> EncoderLayer<P> {
    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a P)) {
        self.self_norm.visit(&format!("{prefix}.self_norm"), f);
        self.self_attn.visit(&format!("{prefix}.self_attn"), f);
        self.ffn_norm.visit(&format!("{prefix}.ffn_norm"), f);
        self.ffn.visit(&format!("{prefix}.ffn"), f);
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut P)) {
        self.self_norm.visit_mut(&format!("{prefix}.self_norm"), f);
        self.self_attn.visit_mut(&format!("{prefix}.self_attn"), f);
        self.ffn_norm.visit_mut(&format!("{prefix}.ffn_norm"), f);
        self.ffn.visit_mut(&format!("{prefix}.ffn"), f);
    }

    pub fn try_map<Q>(&self, f: &mut dyn FnMut(&P) -> Result<Q>) -> Result<EncoderLayer<Q>> {
        Ok(EncoderLayer {
            origin: self.origin,
            self_norm: self.self_norm.try_map(f)?,
            self_attn: self.self_attn.try_map(f)?,
            ffn_norm: self.ffn_norm.try_map(f)?,
            ffn: self.ffn.try_map(f)?,
        })
    }
}

impl<P> DecoderLayer<P> {
    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a P)) {
        self.self_norm.visit(&format!("{prefix}.self_norm"), f);
        self.self_attn.visit(&format!("{prefix}.self_attn"), f);
        self.cross_norm.visit(&format!("{prefix}.cross_norm"), f);
        self.cross_attn.visit(&format!("{prefix}.cross_attn"), f);
        self.ffn_norm.visit(&format!("{prefix}.ffn_norm"), f);
        self.ffn.visit(&format!("{prefix}.ffn"), f);
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut P)) {
        self.self_norm.visit_mut(&format!("{prefix}.self_norm"), f);
        self.self_attn.visit_mut(&format!("{prefix}.self_attn"), f);
        self.cross_norm.visit_mut(&format!("{prefix}.cross_norm"), f);
        self.cross_attn.visit_mut(&format!("{prefix}.cross_attn"), f);
        self.ffn_norm.visit_mut(&format!("{prefix}.ffn_norm"), f);
        self.ffn.visit_mut(&format!("{prefix}.ffn"), f);
    }

    pub fn try_map<Q>(&self, f: &mut dyn FnMut(&P) -> Result<Q>) -> Result<DecoderLayer<Q>> {
        Ok(DecoderLayer {
            origin: self.origin,
            self_norm: self.self_norm.try_map(f)?,
            self_attn: self.self_attn.try_map(f)?,
            cross_norm: self.cross_norm.try_map(f)?,
            cross_attn: self.cross_attn.try_map(f)?,
            ffn_norm: self.ffn_norm.try_map(f)?,
            ffn: self.ffn.try_map(f)?,
        })
    }
}
