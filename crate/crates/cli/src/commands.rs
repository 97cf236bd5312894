use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use mocap_doppler::dsp::{
    build_pairs, fill_gaps, resample_linear, segment_windows, PreprocessConfig, Taper,
    WindowedPairs,
};
use mocap_doppler::io::{
    align, load_mocap, load_pairs, load_radar, load_spectrogram, save_pairs, save_spectrogram,
    SpectrogramTable, SyncMark, PAIRS_MAGIC,
};
use mocap_doppler::model::{load_checkpoint, ModelConfig, SttModel, Variant};
use mocap_doppler::synth::{make_dataset, Manifest, Recipe, SceneKind};
use mocap_doppler::train::{run_ablation, train, RunLog, TrainOptions};

use crate::args::{
    AblateArgs, GlobalArgs, InferArgs, PreprocessArgs, RenderArgs, SynthArgs, TrainArgs,
};
use crate::render::{curve_image, spectrogram_image, write_outputs, Panel};
use crate::settings::{Echo, Settings};

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(d) => ensure_dir(d),
        None => Ok(()),
    }
}

pub fn synth(global: &GlobalArgs, args: &SynthArgs) -> Result<()> {
    let mut recipe = match &args.recipe {
        Some(p) => Recipe::load(p)?,
        None => Recipe::default(),
    };
    if let Some(scene) = &args.scene {
        recipe.scene = serde_json::from_value::<SceneKind>(serde_json::Value::String(scene.clone()))
            .map_err(|_| anyhow!("unknown scene '{scene}' (expected stationary, constant_velocity, pendulum or gait)"))?;
    }
    if let Some(n) = args.trials {
        recipe.n_trials = n;
    }
    if let Some(d) = args.duration {
        recipe.duration_s = d;
    }
    if let Some(m) = args.markers {
        recipe.gait.markers = m;
    }
    if let Some(s) = global.seed {
        recipe.seed = s;
    }
    recipe.validate()?;
    let out = args.out.clone().unwrap_or_else(|| global.data_dir.join("synth"));
    Echo::new("synth").path("out", &out).section("recipe", &recipe)?.print()?;

    let manifest = make_dataset(&recipe, recipe.n_trials, recipe.seed, &out)?;
    println!(
        "wrote {} trials ({} s each) to {}",
        manifest.trials.len(),
        recipe.duration_s,
        out.display()
    );
    Ok(())
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn preprocess(global: &GlobalArgs, args: &PreprocessArgs) -> Result<()> {
    let settings = Settings::resolve(global)?;
    let mut cfg = settings.preprocess;
    if let Some(w) = args.window {
        cfg.window = w;
    }
    if let Some(h) = args.hop {
        cfg.hop = h;
    }
    if args.hann {
        cfg.taper = Taper::Hann;
    }
    let out = args.out.clone().unwrap_or_else(|| global.data_dir.join("pairs.bin"));

    let mut trials = Vec::new();
    match (&args.dataset, &args.mocap, &args.radar) {
        (Some(dir), _, _) => {
            let manifest = read_manifest(dir)?;
            for entry in &manifest.trials {
                let mocap = load_mocap(dir.join(&entry.mocap_file))?;
                let radar = load_radar(dir.join(&entry.radar_file))?;
                trials.push((mocap, radar, entry.sync));
            }
        }
        (None, Some(m), Some(r)) => {
            let mocap = load_mocap(m)?;
            let radar = load_radar(r)?;
            let sync = SyncMark {
                mocap_epoch_s: args.sync_mocap,
                radar_epoch_s: args.sync_radar,
            };
            trials.push((mocap, radar, sync));
        }
        _ => bail!("give either --dataset DIR or both --mocap and --radar"),
    }
    if trials.is_empty() {
        bail!("dataset lists no trials");
    }
    cfg.mocap_rate = trials[0].0.rate;
    cfg.radar_rate = trials[0].1.rate;
    cfg.validate()?;

    let mut echo = Echo::new("preprocess").path("out", &out);
    echo = match &args.dataset {
        Some(d) => echo.path("dataset", d),
        None => echo
            .path("mocap", args.mocap.as_deref().unwrap_or(Path::new("")))
            .path("radar", args.radar.as_deref().unwrap_or(Path::new("")))
            .arg("sync_mocap", args.sync_mocap)
            .arg("sync_radar", args.sync_radar),
    };
    echo.section("preprocess", &cfg)?.print()?;

    let mut parts = Vec::with_capacity(trials.len());
    for (mocap, radar, sync) in &trials {
        let (m, r) = align(mocap, radar, *sync)?;
        parts.push(build_pairs(&m, &r, &PreprocessConfig { mocap_rate: mocap.rate, ..cfg.clone() })?);
    }
    let mut pairs = WindowedPairs::concat(&parts)?;
    pairs.cfg = cfg;
    ensure_parent(&out)?;
    save_pairs(&pairs, &out)?;
    println!(
        "T={} W={} M={} D={} -> {}",
        pairs.len(),
        pairs.window(),
        pairs.markers,
        pairs.dims,
        out.display()
    );
    Ok(())
}

/// The configured architecture with the input geometry of `pairs`.
fn model_config(settings: &Settings, pairs: &WindowedPairs) -> Result<ModelConfig> {
    let cfg = ModelConfig {
        markers: pairs.markers,
        dims: pairs.dims,
        window: pairs.window(),
        ..settings.model.clone()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn train_cmd(global: &GlobalArgs, args: &TrainArgs) -> Result<()> {
    let settings = Settings::resolve(global)?;
    let pairs = load_pairs(&args.pairs)?;
    let test = args.test.as_ref().map(load_pairs).transpose()?;
    let model_cfg = model_config(&settings, &pairs)?;
    settings.train.validate()?;
    let out = args.out.clone().unwrap_or_else(|| global.data_dir.join("run"));

    let mut echo = Echo::new("train")
        .path("pairs", &args.pairs)
        .path("out", &out)
        .arg("variant", settings.variant.key());
    if let Some(t) = &args.test {
        echo = echo.path("test", t);
    }
    let text = echo.section("model", &model_cfg)?.section("train", &settings.train)?.print()?;

    let mut model = SttModel::new(&model_cfg, settings.variant, settings.train.seed)?;
    let opts = TrainOptions {
        test: test.as_ref(),
        out_dir: Some(out.clone()),
    };
    let result = train(&mut model, &pairs, &settings.train, &opts)?;
    fs::write(out.join("config.toml"), text).with_context(|| format!("writing config echo in {}", out.display()))?;

    let last = result.log.epochs.last().expect("at least one epoch");
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6e}"));
    println!(
        "variant {} epochs {}: train MSE {:.6e}, val MSE {}, test MSE {}, best epoch {}",
        settings.variant,
        last.epoch,
        last.train_mse,
        fmt(last.val_mse),
        fmt(last.test_mse),
        result.best_epoch
    );
    println!("wrote final.ckpt, best.ckpt, runlog.jsonl to {}", out.display());
    Ok(())
}

pub fn ablate(global: &GlobalArgs, args: &AblateArgs) -> Result<()> {
    let settings = Settings::resolve(global)?;
    let variants: Vec<Variant> = args.variants.iter().map(|v| v.parse()).collect::<Result<_, _>>()?;
    let pairs = load_pairs(&args.pairs)?;
    let model_cfg = model_config(&settings, &pairs)?;
    settings.train.validate()?;
    let out = args.out.clone().unwrap_or_else(|| global.data_dir.join("ablation"));
    let keys: Vec<&str> = variants.iter().map(|v| v.key()).collect();
    let seeds: Vec<String> = args.seeds.iter().map(u64::to_string).collect();
    Echo::new("ablate")
        .path("pairs", &args.pairs)
        .path("out", &out)
        .arg("variants", keys.join(","))
        .arg("seeds", seeds.join(","))
        .section("model", &model_cfg)?
        .section("train", &settings.train)?
        .print()?;

    let summary = run_ablation(&pairs, &model_cfg, &variants, &settings.train, &args.seeds)?;
    ensure_dir(&out)?;
    let logs: String = summary.runs.iter().map(RunLog::to_jsonl).collect();
    fs::write(out.join("ablation.jsonl"), logs).context("writing ablation.jsonl")?;
    fs::write(out.join("ablation_table.csv"), summary.to_csv()).context("writing ablation_table.csv")?;
    print!("{}", summary.table());
    println!("wrote ablation.jsonl and ablation_table.csv to {}", out.display());
    Ok(())
}

fn check_geometry(ckpt: &Path, source: &Path, cfg: &ModelConfig, markers: usize, dims: usize) -> Result<()> {
    if markers != cfg.markers || dims != cfg.dims {
        bail!(
            "geometry mismatch between {} and {}: checkpoint expects M={} markers x D={} dims, input has M={markers} x D={dims}",
            ckpt.display(),
            source.display(),
            cfg.markers,
            cfg.dims
        );
    }
    Ok(())
}

pub fn infer(global: &GlobalArgs, args: &InferArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let cfg = ckpt.model.config().clone();
    let out = args.out.clone().unwrap_or_else(|| global.data_dir.join("prediction.csv"));
    let mut echo = Echo::new("infer")
        .path("checkpoint", &args.checkpoint)
        .path("out", &out)
        .arg("variant", ckpt.model.variant().key());

    // Windows `[T, W·M·D]` and the centre time of each.
    let (windows, times, pre) = match (&args.mocap, &args.pairs) {
        (_, Some(path)) => {
            let pairs = load_pairs(path)?;
            check_geometry(&args.checkpoint, path, &cfg, pairs.markers, pairs.dims)?;
            if pairs.window() != cfg.window {
                bail!(
                    "window mismatch: checkpoint expects W={}, {} has W={}",
                    cfg.window,
                    path.display(),
                    pairs.window()
                );
            }
            echo = echo.path("pairs", path);
            let half = pairs.window() as f64 / 2.0;
            let times: Vec<f64> = pairs.starts.iter().map(|&s| (s as f64 + half) / pairs.cfg.radar_rate).collect();
            (pairs.mocap.clone(), times, pairs.cfg.clone())
        }
        (Some(path), None) => {
            let mocap = load_mocap(path)?;
            check_geometry(&args.checkpoint, path, &cfg, mocap.n_markers(), mocap.dims)?;
            let pre = match &ckpt.preprocess {
                Some(p) => p.clone(),
                None => {
                    log::warn!("checkpoint records no preprocessing; using defaults with window {}", cfg.window);
                    PreprocessConfig {
                        window: cfg.window,
                        hop: cfg.window / 4,
                        ..PreprocessConfig::default()
                    }
                }
            };
            if pre.window != cfg.window {
                bail!("checkpoint preprocessing window {} differs from model window {}", pre.window, cfg.window);
            }
            echo = echo.path("mocap", path);
            let filled = if mocap.has_gaps() { fill_gaps(&mocap)?.0 } else { mocap };
            let resampled = resample_linear(&filled, pre.radar_rate)?;
            let (windows, starts) =
                segment_windows(&resampled.data, resampled.frame_len(), pre.window, pre.hop)?;
            let half = pre.window as f64 / (2.0 * pre.radar_rate);
            let times: Vec<f64> = starts.iter().map(|&s| resampled.t[s] + half).collect();
            (windows, times, pre)
        }
        (None, None) => bail!("give --mocap or --pairs"),
    };
    echo.section("preprocess", &pre)?.section("model", &cfg)?.print()?;

    let span = cfg.window * cfg.markers * cfg.dims;
    let mut values = Vec::with_capacity(times.len() * cfg.window);
    for w in windows.chunks(span) {
        values.extend(ckpt.model.predict(w)?);
    }
    let table = SpectrogramTable {
        rate_hz: pre.radar_rate,
        window: pre.window,
        hop: pre.hop,
        times,
        bins: cfg.window,
        values,
    };
    ensure_parent(&out)?;
    save_spectrogram(&table, &out)?;
    println!("T={} F={} -> {}", table.frames(), table.bins, out.display());
    Ok(())
}

enum RenderInput {
    Spectrogram { frames: usize, bins: usize, values: Vec<f64> },
    Runs(Vec<RunLog>),
}

fn read_render_input(path: &Path) -> Result<RenderInput> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(PAIRS_MAGIC) {
        let pairs = load_pairs(path)?;
        return Ok(RenderInput::Spectrogram {
            frames: pairs.len(),
            bins: pairs.bins(),
            values: pairs.spec,
        });
    }
    if bytes.first() == Some(&b'{') {
        let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
        return Ok(RenderInput::Runs(RunLog::parse_all(&text)?));
    }
    let table = load_spectrogram(path)?;
    Ok(RenderInput::Spectrogram {
        frames: table.frames(),
        bins: table.bins,
        values: table.values,
    })
}

pub fn render(_global: &GlobalArgs, args: &RenderArgs) -> Result<()> {
    let mut echo = Echo::new("render").path("input", &args.input).path("out", &args.out);
    if let Some(p) = &args.predicted {
        echo = echo.path("predicted", p);
    }
    echo.print()?;

    let (img, csv) = match read_render_input(&args.input)? {
        RenderInput::Runs(runs) => {
            if args.predicted.is_some() {
                bail!("--predicted applies to spectrograms, not run logs");
            }
            println!("{} run(s)", runs.len());
            curve_image(&runs)?
        }
        RenderInput::Spectrogram { frames, bins, values } => {
            let mut panels = vec![Panel { frames, bins, values: &values }];
            let predicted = match &args.predicted {
                Some(p) => match read_render_input(p)? {
                    RenderInput::Spectrogram { frames, bins, values } => Some((frames, bins, values)),
                    RenderInput::Runs(_) => bail!("{} is a run log, expected a spectrogram", p.display()),
                },
                None => None,
            };
            if let Some((frames, bins, values)) = &predicted {
                panels.push(Panel {
                    frames: *frames,
                    bins: *bins,
                    values,
                });
            }
            let img = spectrogram_image(&panels)?;
            let csv = img.csv();
            (img, csv)
        }
    };
    let twin: PathBuf = write_outputs(&args.out, &img, &csv)?;
    println!("{} x {} image -> {} (values in {})", img.width, img.height, args.out.display(), twin.display());
    Ok(())
}
