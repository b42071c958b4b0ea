//! Encoder → FINOLA propagation → decoder, built on a [`Tape`].

use rand::Rng;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::ModelError;
use crate::finola::{FeatureMap, FinolaParams, LatentSet, Placement, Position, ScanOrder};
use crate::image::Image;
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::wave::{materialize_constrained, ConstrainedParams, SpeedMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecoderBlock {
    /// 2× nearest upsampling, 3×3 conv to the given width, SiLU.
    UpConv(usize),
    /// `x + conv(SiLU(conv(x)))`, width preserved.
    ResConv(usize),
}

/// Blocks applied to the feature map, followed by a 3×3 conv to image channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoderSpec {
    pub blocks: Vec<DecoderBlock>,
}

impl DecoderSpec {
    pub fn upsampling_factor(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b, DecoderBlock::UpConv(_)))
            .fold(1, |f, _| f * 2)
    }

    /// Compact textual form, e.g. `up32,res32,up16`.
    pub fn to_spec_string(&self) -> String {
        self.blocks
            .iter()
            .map(|b| match b {
                DecoderBlock::UpConv(c) => format!("up{c}"),
                DecoderBlock::ResConv(c) => format!("res{c}"),
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl std::str::FromStr for DecoderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let blocks = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                let parse = |n: &str| n.parse::<usize>().map_err(|_| format!("bad decoder block `{t}`"));
                if let Some(n) = t.strip_prefix("up") {
                    Ok(DecoderBlock::UpConv(parse(n)?))
                } else if let Some(n) = t.strip_prefix("res") {
                    Ok(DecoderBlock::ResConv(parse(n)?))
                } else {
                    Err(format!("bad decoder block `{t}`"))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { blocks })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub image_width: usize,
    pub image_height: usize,
    pub image_channels: usize,
    pub channels: usize,
    pub paths: usize,
    pub placement: Placement,
    pub map_width: usize,
    pub map_height: usize,
    pub order: ScanOrder,
    pub constraint: SpeedMode,
    pub epsilon: f64,
    /// Output widths of the stride-2 encoder convolutions.
    pub encoder_widths: Vec<usize>,
    pub decoder: DecoderSpec,
}

impl ModelConfig {
    /// 16×16 grayscale images, a 4×4 map, 32-wide decoder.
    pub fn desk(channels: usize, paths: usize) -> Self {
        Self {
            image_width: 16,
            image_height: 16,
            image_channels: 1,
            channels,
            paths,
            placement: Placement::Center,
            map_width: 4,
            map_height: 4,
            order: ScanOrder::Averaged,
            constraint: SpeedMode::ComplexFree,
            epsilon: 1e-6,
            encoder_widths: vec![8, 16, 32],
            decoder: DecoderSpec {
                blocks: vec![DecoderBlock::UpConv(64), DecoderBlock::UpConv(32)],
            },
        }
    }

    /// The small graph used for finite-difference checks: 8×8 images,
    /// C = 6, a 4×4 map.
    pub fn gradcheck() -> Self {
        Self {
            image_width: 8,
            image_height: 8,
            image_channels: 1,
            channels: 6,
            paths: 2,
            placement: Placement::Scattered,
            map_width: 4,
            map_height: 4,
            order: ScanOrder::Averaged,
            constraint: SpeedMode::ComplexFree,
            epsilon: 1e-12,
            encoder_widths: vec![4, 8, 8],
            decoder: DecoderSpec {
                blocks: vec![DecoderBlock::UpConv(8), DecoderBlock::ResConv(8)],
            },
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.channels < 2 || self.paths == 0 || self.image_channels == 0 {
            return bad("channels must be ≥ 2 and paths, image channels ≥ 1".into());
        }
        if self.map_width == 0 || self.map_height == 0 {
            return bad("map must be non-empty".into());
        }
        let f = self.decoder.upsampling_factor();
        if self.map_width * f != self.image_width || self.map_height * f != self.image_height {
            return bad(format!(
                "decoder upsamples {}x{} by {f} but images are {}x{}",
                self.map_width, self.map_height, self.image_width, self.image_height
            ));
        }
        let mut width = self.channels;
        for b in &self.decoder.blocks {
            match *b {
                DecoderBlock::UpConv(c) => width = c,
                DecoderBlock::ResConv(c) if c != width => {
                    return bad(format!("res-conv width {c} does not match incoming width {width}"));
                }
                DecoderBlock::ResConv(_) => {}
            }
            if width == 0 {
                return bad("zero-width decoder block".into());
            }
        }
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) {
            return bad("encoder needs at least one non-empty stage".into());
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<Position> {
        self.placement.positions(self.paths, self.map_width, self.map_height)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Init {
    Zeros,
    Uniform(f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry<T> {
    pub name: String,
    pub tensor: Tensor<T>,
    pub trainable: bool,
}

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T> {
    pub entries: Vec<ParamEntry<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|e| e.name == name).map(|e| &e.tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries.iter_mut().find(|e| e.name == name).map(|e| &mut e.tensor)
    }

    pub fn freeze(&mut self, name: &str) -> bool {
        match self.entries.iter_mut().find(|e| e.name == name) {
            Some(e) => {
                e.trainable = false;
                true
            }
            None => false,
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    tensor: e.tensor.cast(),
                    trainable: e.trainable,
                })
                .collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    /// One leaf per entry, in store order.
    pub fn register(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.entries.iter().map(|e| tape.leaf(e.tensor.clone())).collect()
    }
}

fn param_layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let lecun = |fan_in: usize| {
        let b = (3.0 / fan_in as f64).sqrt();
        Init::Uniform(-b, b)
    };
    let mut out = Vec::new();
    let conv = |out: &mut Vec<_>, name: &str, ci: usize, co: usize| {
        out.push((format!("{name}.w"), vec![co, ci, 3, 3], lecun(ci * 9)));
        out.push((format!("{name}.b"), vec![co], Init::Zeros));
    };
    let mut ci = cfg.image_channels;
    for (i, &co) in cfg.encoder_widths.iter().enumerate() {
        conv(&mut out, &format!("enc.conv{i}"), ci, co);
        ci = co;
    }
    let mc = cfg.paths * cfg.channels;
    out.push(("enc.head.w".into(), vec![mc, ci], lecun(ci)));
    out.push(("enc.head.b".into(), vec![mc], Init::Zeros));

    let c = cfg.channels;
    let fb = 1.0 / (c as f64).sqrt();
    let m = |name: &str| (format!("finola.{name}"), vec![c, c], Init::Uniform(-fb, fb));
    match cfg.constraint {
        SpeedMode::ComplexFree => out.extend([m("a"), m("b"), m("a_minus"), m("b_minus")]),
        SpeedMode::RealSpeed => {
            out.push(m("p"));
            out.push(("finola.alpha".into(), vec![c], Init::Uniform(0.5, 1.5)));
            out.push(("finola.beta".into(), vec![c], Init::Uniform(0.5, 1.5)));
        }
        SpeedMode::AllOne => out.push(m("p")),
    }

    let mut width = cfg.channels;
    for (i, b) in cfg.decoder.blocks.iter().enumerate() {
        match *b {
            DecoderBlock::UpConv(co) => {
                conv(&mut out, &format!("dec.{i}.up"), width, co);
                width = co;
            }
            DecoderBlock::ResConv(co) => {
                conv(&mut out, &format!("dec.{i}.res1"), width, co);
                conv(&mut out, &format!("dec.{i}.res2"), co, co);
            }
        }
    }
    conv(&mut out, "dec.out", width, cfg.image_channels);
    out
}

/// The architecture; parameters live in a [`ParamStore`] so the same graph
/// can be evaluated at perturbed values.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub config: ModelConfig,
    names: Vec<String>,
}

/// Handles produced by one forward evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Outputs {
    /// `[N, M·C]`.
    pub latents: Var,
    /// `[N, C, H, W]`.
    pub map: Var,
    pub reconstruction: Var,
}

impl Network {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let names = param_layout(&config).into_iter().map(|(n, _, _)| n).collect();
        Ok(Self { config, names })
    }

    pub fn init_params<T: Scalar, R: Rng>(&self, rng: &mut R) -> ParamStore<T> {
        let entries = param_layout(&self.config)
            .into_iter()
            .map(|(name, shape, init)| {
                let n: usize = shape.iter().product();
                let data = (0..n)
                    .map(|_| {
                        T::from_f64_lossy(match init {
                            Init::Zeros => 0.0,
                            Init::Uniform(lo, hi) => rng.gen_range(lo..hi),
                        })
                    })
                    .collect();
                ParamEntry {
                    name,
                    tensor: Tensor::new(shape, data),
                    trainable: true,
                }
            })
            .collect();
        ParamStore { entries }
    }

    /// Checks names and shapes of a store against this architecture.
    pub fn check_params<T: Scalar>(&self, store: &ParamStore<T>) -> Result<(), ModelError> {
        let layout = param_layout(&self.config);
        if layout.len() != store.entries.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "expected {} parameter tensors, found {}",
                layout.len(),
                store.entries.len()
            )));
        }
        for ((name, shape, _), e) in layout.iter().zip(&store.entries) {
            if *name != e.name || *shape != e.tensor.shape {
                return Err(ModelError::ShapeMismatch(format!(
                    "parameter {} {:?} does not match expected {name} {shape:?}",
                    e.name, e.tensor.shape
                )));
            }
        }
        Ok(())
    }

    fn var(&self, vars: &[Var], name: &str) -> Var {
        let i = self.names.iter().position(|n| n == name).expect("parameter name from layout");
        vars[i]
    }

    fn conv<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], name: &str, x: Var, stride: usize) -> Result<Var, ModelError> {
        let w = self.var(vars, &format!("{name}.w"));
        let b = self.var(vars, &format!("{name}.b"));
        tape.conv2d(x, w, b, stride, 1)
    }

    /// `[N, ch, H, W]` images to `[N, M·C]` latents.
    pub fn encoder<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], images: Var) -> Result<Var, ModelError> {
        let mut h = images;
        for i in 0..self.config.encoder_widths.len() {
            let c = self.conv(tape, vars, &format!("enc.conv{i}"), h, 2)?;
            h = tape.silu(c);
        }
        let pooled = tape.mean_pool(h)?;
        let lin = tape.matmul_t(pooled, self.var(vars, "enc.head.w"))?;
        tape.add_row_bias(lin, self.var(vars, "enc.head.b"))
    }

    /// The four direction matrices `(A, B, A⁻, B⁻)` as tape nodes.
    fn direction_matrices<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var]) -> Result<[Var; 4], ModelError> {
        Ok(match self.config.constraint {
            SpeedMode::ComplexFree => [
                self.var(vars, "finola.a"),
                self.var(vars, "finola.b"),
                self.var(vars, "finola.a_minus"),
                self.var(vars, "finola.b_minus"),
            ],
            SpeedMode::RealSpeed => {
                let p = self.var(vars, "finola.p");
                let a = tape.scale_columns(p, self.var(vars, "finola.alpha"))?;
                let b = tape.scale_columns(p, self.var(vars, "finola.beta"))?;
                [a, b, a, b]
            }
            SpeedMode::AllOne => {
                let p = self.var(vars, "finola.p");
                [p, p, p, p]
            }
        })
    }

    fn step<T: Scalar>(&self, tape: &mut Tape<T>, z: Var, m: Var) -> Result<Var, ModelError> {
        let eps = T::from_f64_lossy(self.config.epsilon);
        let hat = tape.layer_norm(z, eps)?;
        let delta = tape.matmul_t(hat, m)?;
        tape.add(z, delta)
    }

    fn scan<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        q: Var,
        origin: (usize, usize),
        mats: [Var; 4],
        horizontal_first: bool,
    ) -> Result<Vec<Var>, ModelError> {
        let (w, h) = (self.config.map_width, self.config.map_height);
        let (x0, y0) = origin;
        let [a, b, am, bm] = mats;
        let mut cells: Vec<Option<Var>> = vec![None; w * h];
        cells[y0 * w + x0] = Some(q);
        let get = |cells: &[Option<Var>], x: usize, y: usize| cells[y * w + x].expect("cell filled before use");
        let row = |me: &Self, tape: &mut Tape<T>, cells: &mut Vec<Option<Var>>, y: usize| -> Result<(), ModelError> {
            for x in x0 + 1..w {
                let v = me.step(tape, get(cells, x - 1, y), a)?;
                cells[y * w + x] = Some(v);
            }
            for x in (0..x0).rev() {
                let v = me.step(tape, get(cells, x + 1, y), am)?;
                cells[y * w + x] = Some(v);
            }
            Ok(())
        };
        let column = |me: &Self, tape: &mut Tape<T>, cells: &mut Vec<Option<Var>>, x: usize| -> Result<(), ModelError> {
            for y in y0 + 1..h {
                let v = me.step(tape, get(cells, x, y - 1), b)?;
                cells[y * w + x] = Some(v);
            }
            for y in (0..y0).rev() {
                let v = me.step(tape, get(cells, x, y + 1), bm)?;
                cells[y * w + x] = Some(v);
            }
            Ok(())
        };
        if horizontal_first {
            row(self, tape, &mut cells, y0)?;
            for x in 0..w {
                column(self, tape, &mut cells, x)?;
            }
        } else {
            column(self, tape, &mut cells, x0)?;
            for y in 0..h {
                row(self, tape, &mut cells, y)?;
            }
        }
        Ok(cells.into_iter().map(|c| c.expect("every cell visited")).collect())
    }

    /// `[N, M·C]` latents to the summed multi-path `[N, C, H, W]` map.
    pub fn propagation<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], latents: Var) -> Result<Var, ModelError> {
        let cfg = &self.config;
        let mats = self.direction_matrices(tape, vars)?;
        let mut total: Option<Vec<Var>> = None;
        for (m, pos) in cfg.positions().into_iter().enumerate() {
            let origin = pos.resolve(cfg.map_width, cfg.map_height)?;
            let q = tape.slice_cols(latents, m * cfg.channels, cfg.channels)?;
            let cells = match cfg.order {
                ScanOrder::HorizontalFirst => self.scan(tape, q, origin, mats, true)?,
                ScanOrder::VerticalFirst => self.scan(tape, q, origin, mats, false)?,
                ScanOrder::Averaged => {
                    let hf = self.scan(tape, q, origin, mats, true)?;
                    let vf = self.scan(tape, q, origin, mats, false)?;
                    let mut out = Vec::with_capacity(hf.len());
                    for (a, b) in hf.into_iter().zip(vf) {
                        let s = tape.add(a, b)?;
                        out.push(tape.scale(s, T::from_f64_lossy(0.5)));
                    }
                    out
                }
            };
            total = Some(match total {
                None => cells,
                Some(prev) => prev
                    .into_iter()
                    .zip(cells)
                    .map(|(a, b)| tape.add(a, b))
                    .collect::<Result<_, _>>()?,
            });
        }
        let cells = total.expect("at least one path");
        tape.assemble_map(cells, cfg.map_height, cfg.map_width)
    }

    /// `[N, C, H, W]` map to `[N, ch, H·f, W·f]` images.
    pub fn decoder<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], map: Var) -> Result<Var, ModelError> {
        let mut h = map;
        for (i, b) in self.config.decoder.blocks.iter().enumerate() {
            match b {
                DecoderBlock::UpConv(_) => {
                    let up = tape.upsample2(h)?;
                    let c = self.conv(tape, vars, &format!("dec.{i}.up"), up, 1)?;
                    h = tape.silu(c);
                }
                DecoderBlock::ResConv(_) => {
                    let c1 = self.conv(tape, vars, &format!("dec.{i}.res1"), h, 1)?;
                    let a1 = tape.silu(c1);
                    let c2 = self.conv(tape, vars, &format!("dec.{i}.res2"), a1, 1)?;
                    h = tape.add(h, c2)?;
                }
            }
        }
        self.conv(tape, vars, "dec.out", h, 1)
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, vars: &[Var], images: Var) -> Result<Outputs, ModelError> {
        let latents = self.encoder(tape, vars, images)?;
        let map = self.propagation(tape, vars, latents)?;
        let reconstruction = self.decoder(tape, vars, map)?;
        Ok(Outputs {
            latents,
            map,
            reconstruction,
        })
    }

    /// Direction matrices materialized from the store.
    pub fn finola_params<T: Scalar>(&self, store: &ParamStore<T>) -> Result<FinolaParams<T>, ModelError> {
        let c = self.config.channels;
        let mat = |name: &str| -> Result<Matrix<T>, ModelError> {
            let t = store
                .get(name)
                .ok_or_else(|| ModelError::ShapeMismatch(format!("missing parameter {name}")))?;
            Ok(Matrix::from_vec(c, c, t.data.clone()).map_err(|e| ModelError::ShapeMismatch(e.to_string()))?)
        };
        let vec = |name: &str| -> Result<Vec<T>, ModelError> {
            Ok(store
                .get(name)
                .ok_or_else(|| ModelError::ShapeMismatch(format!("missing parameter {name}")))?
                .data
                .clone())
        };
        let eps = T::from_f64_lossy(self.config.epsilon);
        Ok(match self.config.constraint {
            SpeedMode::ComplexFree => FinolaParams::new(
                mat("finola.a")?,
                mat("finola.b")?,
                mat("finola.a_minus")?,
                mat("finola.b_minus")?,
                eps,
            )?,
            SpeedMode::RealSpeed => materialize_constrained(
                &ConstrainedParams::RealSpeed {
                    p: mat("finola.p")?,
                    alpha: vec("finola.alpha")?,
                    beta: vec("finola.beta")?,
                },
                eps,
            )?,
            SpeedMode::AllOne => materialize_constrained(&ConstrainedParams::AllOne { p: mat("finola.p")? }, eps)?,
        })
    }
}

/// Stacks images into a planar `[N, ch, H, W]` batch.
pub fn batch_tensor<T: Scalar>(images: &[&Image]) -> Result<Tensor<T>, ModelError> {
    let first = images
        .first()
        .ok_or_else(|| ModelError::ShapeMismatch("empty batch".into()))?;
    let (w, h, c) = first.shape();
    let mut data = Vec::with_capacity(images.len() * w * h * c);
    for img in images {
        if img.shape() != (w, h, c) {
            return Err(ModelError::ShapeMismatch(format!("{:?} vs {:?}", img.shape(), (w, h, c))));
        }
        data.extend(img.to_planar().into_iter().map(T::from_f64_lossy));
    }
    Ok(Tensor::new(vec![images.len(), c, h, w], data))
}

/// A network with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub network: Network,
    pub params: ParamStore<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        let network = Network::new(config)?;
        let params = network.init_params(rng);
        Ok(Self { network, params })
    }

    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self, ModelError> {
        let network = Network::new(config)?;
        network.check_params(&params)?;
        Ok(Self { network, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.network.config
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            network: self.network.clone(),
            params: self.params.cast(),
        }
    }

    pub fn encode(&self, image: &Image) -> Result<LatentSet<T>, ModelError> {
        let mut tape = Tape::new();
        let vars = self.params.register(&mut tape);
        let x = tape.leaf(batch_tensor(&[image])?);
        let lat = self.network.encoder(&mut tape, &vars, x)?;
        let c = self.config().channels;
        let vectors = tape.value(lat).data.chunks(c).map(<[T]>::to_vec).collect();
        Ok(LatentSet::with_positions(vectors, self.config().positions())?)
    }

    /// Decodes a feature map (values not clamped).
    pub fn decode(&self, z: &FeatureMap<T>) -> Result<Image, ModelError> {
        let cfg = self.config();
        if (z.width(), z.height(), z.channels()) != (cfg.map_width, cfg.map_height, cfg.channels) {
            return Err(ModelError::ShapeMismatch(format!(
                "map {}x{}x{} does not match the decoder",
                z.width(),
                z.height(),
                z.channels()
            )));
        }
        let mut tape = Tape::new();
        let vars = self.params.register(&mut tape);
        let planar: Vec<T> = (0..z.channels()).flat_map(|k| z.channel_plane(k)).collect();
        let x = tape.leaf(Tensor::new(vec![1, z.channels(), z.height(), z.width()], planar));
        let out = self.network.decoder(&mut tape, &vars, x)?;
        let data: Vec<f64> = tape.value(out).data.iter().map(|v| v.to_f64_lossy()).collect();
        Ok(Image::from_planar(cfg.image_width, cfg.image_height, cfg.image_channels, &data)?)
    }

    /// Encode, propagate, decode; clamped to `[0, 1]`.
    pub fn reconstruct(&self, image: &Image) -> Result<Image, ModelError> {
        Ok(self.reconstruct_batch(&[image])?.remove(0))
    }

    pub fn reconstruct_batch(&self, images: &[&Image]) -> Result<Vec<Image>, ModelError> {
        let cfg = self.config();
        let mut tape = Tape::new();
        let vars = self.params.register(&mut tape);
        let x = tape.leaf(batch_tensor(images)?);
        let out = self.network.forward(&mut tape, &vars, x)?;
        let per = cfg.image_width * cfg.image_height * cfg.image_channels;
        tape.value(out.reconstruction)
            .data
            .chunks(per)
            .map(|chunk| {
                let data: Vec<f64> = chunk.iter().map(|v| v.to_f64_lossy()).collect();
                Ok(Image::from_planar(cfg.image_width, cfg.image_height, cfg.image_channels, &data)?.clamped())
            })
            .collect()
    }

    pub fn finola_params(&self) -> Result<FinolaParams<T>, ModelError> {
        self.network.finola_params(&self.params)
    }
}
