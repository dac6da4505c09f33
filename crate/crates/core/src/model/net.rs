use super::config::{Bottleneck, RadioUNetConfig};
use crate::error::{Error, Result};
use crate::nn::{AttentionWeights, Bindings, Graph, Init, ModelParams, ParamSpec, Real, Tensor, Var};

const POS_EMBED_STD: f64 = 0.02;

/// Graph handles produced by one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    pub output: Var,
    /// Projected tokens with positional embedding, `[N · tokens, D]`;
    /// absent unless the bottleneck is a Transformer.
    pub tokens: Option<Var>,
}

/// TUNet backbone with frequency transformation layers after the input
/// layer and after every encoder level.
#[derive(Clone, Debug, PartialEq)]
pub struct RadioUNet {
    cfg: RadioUNetConfig,
}

fn conv_spec(out: &mut Vec<ParamSpec>, path: &str, co: usize, ci: usize, k: usize) {
    out.push(ParamSpec {
        path: format!("{path}.w"),
        shape: vec![co, ci, k, k],
        init: Init::KaimingUniform { fan_in: ci * k * k },
    });
    out.push(ParamSpec {
        path: format!("{path}.b"),
        shape: vec![co],
        init: Init::Zeros,
    });
}

fn linear_spec(out: &mut Vec<ParamSpec>, path: &str, d_in: usize, d_out: usize) {
    out.push(ParamSpec {
        path: format!("{path}.w"),
        shape: vec![d_in, d_out],
        init: Init::XavierUniform {
            fan_in: d_in,
            fan_out: d_out,
        },
    });
    out.push(ParamSpec {
        path: format!("{path}.b"),
        shape: vec![d_out],
        init: Init::Zeros,
    });
}

fn norm_spec(out: &mut Vec<ParamSpec>, path: &str, d: usize) {
    out.push(ParamSpec {
        path: format!("{path}.gamma"),
        shape: vec![d],
        init: Init::Ones,
    });
    out.push(ParamSpec {
        path: format!("{path}.beta"),
        shape: vec![d],
        init: Init::Zeros,
    });
}

pub(crate) fn ftl_specs(out: &mut Vec<ParamSpec>, path: &str, channels: usize, bands: usize) {
    for i in 1..=3 {
        conv_spec(out, &format!("{path}.conv{i}"), channels, channels, 3);
    }
    out.push(ParamSpec {
        path: format!("{path}.w_tr"),
        shape: vec![bands, bands],
        init: Init::XavierUniform {
            fan_in: bands,
            fan_out: bands,
        },
    });
    conv_spec(out, &format!("{path}.fuse"), channels, 2 * channels, 1);
}

fn conv<T: Real>(g: &mut Graph<T>, b: &Bindings, path: &str, x: Var, stride: usize) -> Result<Var> {
    let w = b.get(&format!("{path}.w"))?;
    let bias = b.get(&format!("{path}.b"))?;
    g.conv2d(x, w, Some(bias), stride)
}

fn linear<T: Real>(g: &mut Graph<T>, b: &Bindings, path: &str, x: Var) -> Result<Var> {
    let w = b.get(&format!("{path}.w"))?;
    let bias = b.get(&format!("{path}.b"))?;
    g.linear(x, w, Some(bias))
}

fn norm<T: Real>(g: &mut Graph<T>, b: &Bindings, path: &str, x: Var) -> Result<Var> {
    let gamma = b.get(&format!("{path}.gamma"))?;
    let beta = b.get(&format!("{path}.beta"))?;
    g.layer_norm(x, gamma, beta)
}

/// Frequency transformation block: three 3×3 convs produce `f_in`,
/// `f_out(:, t) = W_tr · f_in(:, t)` per channel and frame, then a 1×1 conv
/// fuses the block input with `f_out`.
pub fn ftl_block<T: Real>(g: &mut Graph<T>, b: &Bindings, path: &str, x: Var) -> Result<Var> {
    let mut h = x;
    for i in 1..=3 {
        h = conv(g, b, &format!("{path}.conv{i}"), h, 1)?;
        h = g.relu(h)?;
    }
    let w_tr = b.get(&format!("{path}.w_tr"))?;
    let f_out = g.freq_transform(h, w_tr)?;
    let cat = g.concat_channels(&[x, f_out])?;
    conv(g, b, &format!("{path}.fuse"), cat, 1)
}

impl RadioUNet {
    pub fn new(cfg: RadioUNetConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(RadioUNet { cfg })
    }

    pub fn config(&self) -> &RadioUNetConfig {
        &self.cfg
    }

    /// Every parameter with its shape and initializer. Depends only on the
    /// configuration.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let c = &self.cfg;
        let levels = c.enc_dec_levels;
        let mut out = Vec::new();
        conv_spec(&mut out, "input.conv", c.channels(0), 1, 3);
        ftl_specs(&mut out, "ftl0", c.channels(0), c.extent(0).0);
        for l in 1..=levels {
            conv_spec(&mut out, &format!("enc{l}.conv"), c.channels(l), c.channels(l - 1), 3);
            ftl_specs(&mut out, &format!("ftl{l}"), c.channels(l), c.extent(l).0);
        }
        if c.bottleneck == Bottleneck::Transformer {
            let (d, cl) = (c.token_dim, c.channels(levels));
            linear_spec(&mut out, "bottleneck.proj_in", cl, d);
            out.push(ParamSpec {
                path: "bottleneck.pos".into(),
                shape: vec![c.bottleneck_tokens(), d],
                init: Init::Normal { std: POS_EMBED_STD },
            });
            for i in 0..c.transformer_layers {
                let p = format!("bottleneck.layer{i:02}");
                norm_spec(&mut out, &format!("{p}.ln1"), d);
                out.extend(AttentionWeights::specs(&format!("{p}.attn"), d));
                norm_spec(&mut out, &format!("{p}.ln2"), d);
                linear_spec(&mut out, &format!("{p}.mlp.fc1"), d, d * c.mlp_ratio);
                linear_spec(&mut out, &format!("{p}.mlp.fc2"), d * c.mlp_ratio, d);
            }
            norm_spec(&mut out, "bottleneck.ln_f", d);
            linear_spec(&mut out, "bottleneck.proj_out", d, cl);
        }
        for l in (1..=levels).rev() {
            let (hi, lo) = (c.channels(l), c.channels(l - 1));
            conv_spec(&mut out, &format!("dec{l}.up"), 4 * lo, hi, 3);
            conv_spec(&mut out, &format!("dec{l}.fuse"), lo, 2 * lo, 3);
        }
        conv_spec(&mut out, "output.conv", 1, c.channels(0), 3);
        out.sort_by(|a, b| a.path.cmp(&b.path));
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_specs()
            .iter()
            .map(|s| s.shape.iter().product::<usize>())
            .sum()
    }

    pub fn init_params<T: Real>(&self, seed: u64) -> Result<ModelParams<T>> {
        ModelParams::initialize(&self.param_specs(), seed)
    }

    /// Flatten `[N, C, H, W]` to tokens, project to D and add the positional
    /// embedding.
    pub fn tokenize<T: Real>(&self, g: &mut Graph<T>, b: &Bindings, x: Var) -> Result<Var> {
        let t = g.to_tokens(x)?;
        let t = linear(g, b, "bottleneck.proj_in", t)?;
        let pos = b.get("bottleneck.pos")?;
        g.add_rows(t, pos)
    }

    fn transformer<T: Real>(&self, g: &mut Graph<T>, b: &Bindings, tokens: Var, batch: usize) -> Result<Var> {
        let mut h = tokens;
        for i in 0..self.cfg.transformer_layers {
            let p = format!("bottleneck.layer{i:02}");
            let n1 = norm(g, b, &format!("{p}.ln1"), h)?;
            let w = AttentionWeights::bind(b, &format!("{p}.attn"))?;
            let a = g.multihead_attention(n1, &w, batch, self.cfg.heads)?;
            h = g.add(h, a)?;
            let n2 = norm(g, b, &format!("{p}.ln2"), h)?;
            let m = linear(g, b, &format!("{p}.mlp.fc1"), n2)?;
            let m = g.gelu(m)?;
            let m = linear(g, b, &format!("{p}.mlp.fc2"), m)?;
            h = g.add(h, m)?;
        }
        norm(g, b, "bottleneck.ln_f", h)
    }

    /// Map `x` of shape `[N, 1, bands, frames]` to the same shape.
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, b: &Bindings, x: Var) -> Result<Forward> {
        let c = &self.cfg;
        let shape = g.shape(x).to_vec();
        if shape.len() != 4 || shape[1] != 1 || shape[2] != c.input_bands || shape[3] != c.input_frames {
            return Err(Error::Shape(format!(
                "model expects [N, 1, {}, {}], got {shape:?}",
                c.input_bands, c.input_frames
            )));
        }
        let n = shape[0];
        let h = conv(g, b, "input.conv", x, 1)?;
        let h = g.relu(h)?;
        let mut skips = vec![ftl_block(g, b, "ftl0", h)?];
        for l in 1..=c.enc_dec_levels {
            let h = conv(g, b, &format!("enc{l}.conv"), skips[l - 1], 2)?;
            let h = g.relu(h)?;
            skips.push(ftl_block(g, b, &format!("ftl{l}"), h)?);
        }
        let deepest = *skips.last().unwrap();
        let (mut h, tokens) = match c.bottleneck {
            Bottleneck::Transformer => {
                let tokens = self.tokenize(g, b, deepest)?;
                let t = self.transformer(g, b, tokens, n)?;
                let t = linear(g, b, "bottleneck.proj_out", t)?;
                let (f, tt) = c.extent(c.enc_dec_levels);
                let out = g.from_tokens(t, [n, c.channels(c.enc_dec_levels), f, tt])?;
                (out, Some(tokens))
            }
            Bottleneck::Identity => (deepest, None),
            Bottleneck::Zero => {
                let zeros = Tensor::zeros(g.shape(deepest));
                (g.constant(zeros)?, None)
            }
        };
        for l in (1..=c.enc_dec_levels).rev() {
            let up = conv(g, b, &format!("dec{l}.up"), h, 1)?;
            let up = g.pixel_shuffle(up, 2)?;
            let cat = g.concat_channels(&[up, skips[l - 1]])?;
            let fused = conv(g, b, &format!("dec{l}.fuse"), cat, 1)?;
            h = g.relu(fused)?;
        }
        let output = conv(g, b, "output.conv", h, 1)?;
        Ok(Forward { output, tokens })
    }

    /// Run the network on a batch of `[N, 1, bands, frames]` inputs without
    /// keeping gradients.
    pub fn predict<T: Real>(&self, params: &ModelParams<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let b = params.bind(&mut g)?;
        let x = g.constant(input.clone())?;
        let f = self.forward(&mut g, &b, x)?;
        Ok(g.value(f.output).clone())
    }
}
