//! `augment`: applies the augmentation engine to PNG files.
//!
//! Grayscale and RGB images are augmented as 1 or 3 channels; an alpha
//! channel is carried through untouched. 16-bit PNGs are reduced to 8 bits
//! on load. Each file gets its own stream keyed by the run seed and the file
//! name, so outputs do not depend on which other files were processed.

use std::fs;
use std::path::{Path, PathBuf};

use augprobe::augment::{augmix, AugmixConfig, Image, MixMode};
use augprobe::numerics::SeededRng;
use clap::Args;
use image::{ExtendedColorType, ImageFormat, ImageReader};
use serde::Deserialize;

use crate::config::{load_json, name_key, Staged};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// PNG file, or a directory whose PNG files are all augmented.
    pub input: PathBuf,
    /// Output file (for a file input) or directory (for a directory input).
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Severity in [0, 10].
    #[arg(long)]
    pub severity: Option<f64>,
    /// Blend the chain mixture with the original image.
    #[arg(long, conflicts_with = "no_mix")]
    pub mix: bool,
    /// Return the chain mixture without blending it back.
    #[arg(long)]
    pub no_mix: bool,
    /// Fixed blend weight on the original image instead of a Beta draw.
    #[arg(long)]
    pub fixed_m: Option<f64>,
    /// Number of augmentation chains.
    #[arg(long)]
    pub chains: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AugmentFile {
    seed: Option<u64>,
    augmix: Option<AugmixConfig>,
}

struct Decoded {
    image: Image,
    alpha: Option<Vec<u8>>,
}

fn decode(path: &Path) -> CliResult<Decoded> {
    let img = ImageReader::open(path)
        .map_err(|e| CliError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| CliError::io(path, e))?
        .decode()
        .map_err(|e| CliError::data(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let color = img.color();
    let (channels, alpha) = (if color.has_color() { 3 } else { 1 }, color.has_alpha());
    let bytes = match (channels, alpha) {
        (1, false) => img.into_luma8().into_raw(),
        (1, true) => img.into_luma_alpha8().into_raw(),
        (3, false) => img.into_rgb8().into_raw(),
        _ => img.into_rgba8().into_raw(),
    };
    let (pixels, alpha) = if alpha {
        let stride = channels + 1;
        let pixels = bytes
            .chunks(stride)
            .flat_map(|p| p[..channels].iter().copied())
            .collect::<Vec<_>>();
        (pixels, Some(bytes.chunks(stride).map(|p| p[channels]).collect()))
    } else {
        (bytes, None)
    };
    Ok(Decoded {
        image: Image::from_u8(h, w, channels, &pixels)?,
        alpha,
    })
}

fn encode(img: &Image, alpha: Option<&[u8]>, path: &Path) -> CliResult<Vec<u8>> {
    let pixels = img.to_u8();
    let channels = img.channels();
    let (bytes, color) = match alpha {
        Some(a) => {
            let mut out = Vec::with_capacity(pixels.len() + a.len());
            for (p, &al) in pixels.chunks(channels).zip(a) {
                out.extend_from_slice(p);
                out.push(al);
            }
            (
                out,
                if channels == 1 {
                    ExtendedColorType::La8
                } else {
                    ExtendedColorType::Rgba8
                },
            )
        }
        None => (
            pixels,
            if channels == 1 {
                ExtendedColorType::L8
            } else {
                ExtendedColorType::Rgb8
            },
        ),
    };
    let mut buf = std::io::Cursor::new(Vec::new());
    image::write_buffer_with_format(
        &mut buf,
        &bytes,
        img.width() as u32,
        img.height() as u32,
        color,
        ImageFormat::Png,
    )
    .map_err(|e| CliError::data(path, e))?;
    Ok(buf.into_inner())
}

fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// `(input, output)` pairs in file-name order.
fn plan(input: &Path, out: &Path) -> CliResult<Vec<(PathBuf, PathBuf)>> {
    if input.is_dir() {
        let mut files = Vec::new();
        for entry in fs::read_dir(input).map_err(|e| CliError::io(input, e))? {
            let p = entry.map_err(|e| CliError::io(input, e))?.path();
            if p.is_file() && is_png(&p) {
                files.push(p);
            }
        }
        if files.is_empty() {
            return Err(CliError::data(input, "directory holds no PNG files"));
        }
        files.sort();
        Ok(files
            .into_iter()
            .map(|p| {
                let dest = out.join(p.file_name().expect("listed files have names"));
                (p, dest)
            })
            .collect())
    } else {
        Ok(vec![(input.to_path_buf(), out.to_path_buf())])
    }
}

fn resolve(args: &AugmentArgs, file: AugmentFile) -> (u64, AugmixConfig) {
    let mut cfg = file.augmix.unwrap_or_default();
    if let Some(s) = args.severity {
        cfg.severity = s;
    }
    if args.mix {
        cfg.mix_mode = MixMode::Mix;
    }
    if args.no_mix {
        cfg.mix_mode = MixMode::WoMix;
    }
    if args.fixed_m.is_some() {
        cfg.fixed_m = args.fixed_m;
    }
    if let Some(k) = args.chains {
        cfg.chain_count = k;
    }
    (args.seed.or(file.seed).unwrap_or(0), cfg)
}

pub fn cmd_augment(args: AugmentArgs) -> CliResult<String> {
    let file: AugmentFile = load_json(args.config.as_deref())?;
    let (seed, cfg) = resolve(&args, file);
    cfg.validate()?;
    if !args.input.exists() {
        return Err(CliError::data(&args.input, "no such file or directory"));
    }
    let jobs = plan(&args.input, &args.out)?;
    let decoded = jobs.iter().map(|(src, _)| decode(src)).collect::<CliResult<Vec<_>>>()?;

    let mut staged = Staged::default();
    for ((src, dest), d) in jobs.iter().zip(&decoded) {
        let name = src
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut rng = SeededRng::derived(seed, &[name_key(&name)]);
        let out = augmix(&d.image, &cfg, &mut rng)?;
        staged.add(dest.clone(), encode(&out, d.alpha.as_deref(), dest)?);
    }
    let written = staged.commit()?;
    Ok(format!(
        "augmented {} image(s) at severity {} ({}, seed {seed})\n",
        written.len(),
        cfg.severity,
        cfg.mix_mode
    ))
}
