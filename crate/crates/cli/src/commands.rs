use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ctstreak::geometry::{make_parallel_geometry, Geometry, Image, Sinogram};
use ctstreak::io::{
    ingest_image, load_checkpoint, load_ctt, load_image, save_checkpoint, save_image, save_png, save_png_grid, save_sinogram,
    write_atomic,
};
use ctstreak::metrics::{mse_metric, psnr, ssim};
use ctstreak::noise::{apply_poisson_noise, NoiseConfig};
use ctstreak::phantom::{random_ellipse_phantom, shepp_logan};
use ctstreak::pipeline::{
    make_dataset_with, noise_sweep, restore, train, write_loss_csv, write_metrics_csv, DatasetPair, MetricsReport, ModelKind,
    ModelSpec, Network, SweepConfig, TrainConfig,
};
use ctstreak::projector::forward_project;
use ctstreak::recon::{reconstruct, ReconConfig};
use serde_json::{json, Value};

use crate::args::*;
use crate::error::usage;

fn geometry(angles: usize, detectors: usize, size: usize, fov: f64) -> Result<Geometry> {
    if !(fov > 0.0 && fov.is_finite()) {
        return Err(usage(format!("--fov must be positive, got {fov}")));
    }
    Ok(make_parallel_geometry(angles, detectors, size)?.with_scale(fov / size as f64))
}

fn read_image(path: &Path) -> Result<Image> {
    load_image(path).with_context(|| format!("reading image {}", path.display()))
}

fn read_sinogram(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let (dims, data) = load_ctt(path).with_context(|| format!("reading sinogram {}", path.display()))?;
    match dims.as_slice() {
        [a, d] => Ok((*a, *d, data)),
        _ => anyhow::bail!("{} is not a rank-2 sinogram (dims {dims:?})", path.display()),
    }
}

fn load_network(path: &Path) -> Result<Network> {
    let ckpt = load_checkpoint(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    Network::from_checkpoint(&ckpt).with_context(|| format!("decoding checkpoint {}", path.display()))
}

fn expect_kind(net: &Network, want: ModelKind, path: &Path) -> Result<()> {
    if net.kind() != want {
        return Err(usage(format!("{} holds a {} model, not {want}", path.display(), net.kind())));
    }
    Ok(())
}

fn metrics_json(image: &Image, reference: &Image) -> Result<Value> {
    Ok(json!({
        "psnr": psnr(image, reference, 1.0)?,
        "ssim": ssim(image, reference)?,
        "mse": mse_metric(image, reference)?,
    }))
}

pub fn phantom(a: &PhantomArgs) -> Result<Value> {
    let img = match a.kind {
        PhantomKind::SheppLogan => shepp_logan(a.size)?,
        PhantomKind::Ellipses => random_ellipse_phantom(a.size, a.n_ellipses, a.seed)?,
        PhantomKind::File => {
            let src = a.input.as_ref().ok_or_else(|| usage("--kind file needs --input"))?;
            ingest_image(src, a.size).with_context(|| format!("ingesting {}", src.display()))?
        }
    };
    save_image(&a.output, &img)?;
    if let Some(png) = &a.png {
        save_png(png, &img)?;
    }
    Ok(json!({ "width": img.width(), "height": img.height() }))
}

pub fn project(a: &ProjectArgs) -> Result<Value> {
    let img = read_image(&a.input)?;
    if img.width() != img.height() {
        return Err(usage(format!("projection needs a square image, got {}x{}", img.width(), img.height())));
    }
    let size = img.width();
    let g = geometry(a.angles, a.detectors.unwrap_or(size), size, a.fov)?;
    let sino = forward_project(&img.with_pixel_size(g.pixel_size), &g)?;
    save_sinogram(&a.output, &sino)?;
    Ok(json!({ "image_size": size, "detectors": g.n_detectors, "pixel_size": g.pixel_size }))
}

pub fn noise(a: &NoiseArgs) -> Result<Value> {
    let (angles, dets, data) = read_sinogram(&a.input)?;
    // The noise model only looks at values, so any geometry of this shape will do.
    let g = make_parallel_geometry(angles, dets, dets)?;
    let noisy = apply_poisson_noise(&Sinogram::from_vec(&g, data)?, &NoiseConfig::new(a.intensity, a.seed)?)?;
    save_sinogram(&a.output, &noisy)?;
    Ok(json!({ "angles": angles, "detectors": dets }))
}

pub fn recon(a: &ReconArgs) -> Result<Value> {
    let (angles, dets, data) = read_sinogram(&a.input)?;
    let size = a.size.unwrap_or(dets);
    let g = geometry(angles, dets, size, a.fov)?;
    let mut cfg = ReconConfig::new(a.method).with_tv_weight(a.lambda);
    if let Some(n) = a.iters {
        cfg = cfg.with_iterations(n);
    }
    cfg.validate()?;
    let img = reconstruct(&Sinogram::from_vec(&g, data)?, &g, &cfg)?;
    save_image(&a.output, &img)?;
    if let Some(png) = &a.png {
        save_png(png, &img)?;
    }
    let mut out = json!({ "method": a.method.name(), "iterations": cfg.iterations, "image_size": size });
    if let Some(r) = &a.reference {
        let m = metrics_json(&img, &read_image(r)?)?;
        let num = |k: &str| m[k].as_f64().unwrap_or(f64::NAN);
        println!("psnr {:.4} dB  ssim {:.4}  mse {:.6e}", num("psnr"), num("ssim"), num("mse"));
        out["metrics"] = m;
    }
    Ok(out)
}

fn dataset(d: &DataArgs, seed: u64) -> Result<Vec<DatasetPair>> {
    let g = geometry(d.angles, d.size, d.size, d.fov)?;
    let noise = d.intensity.map(|i| NoiseConfig::new(i, d.noise_seed.unwrap_or(seed))).transpose()?;
    Ok(make_dataset_with(d.pairs, &g, noise, d.sirt_iters, seed, d.ellipses)?)
}

pub fn train_cmd(a: &TrainArgs) -> Result<Value> {
    let mut spec = ModelSpec::new(a.model, a.layers)?;
    spec.variant = a.variant;
    spec.order = a.order;
    match (a.model, a.patch) {
        (ModelKind::MsdGru, Some(p)) => spec = spec.with_patch(p, p),
        (ModelKind::Msd, Some(_)) => return Err(usage("--patch only applies to msd-gru")),
        _ => {}
    }
    let initial = match &a.init {
        Some(path) => {
            let mut net = load_network(path)?;
            expect_kind(&net, a.model, path)?;
            if net.config().n_layers != a.layers {
                return Err(usage(format!("{} has {} layers, --layers is {}", path.display(), net.config().n_layers, a.layers)));
            }
            net.set_patch(spec.patch.0, spec.patch.1);
            Some(net)
        }
        None => None,
    };
    let mut cfg = TrainConfig::new(spec, a.seed);
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.split_fraction = a.split;
    cfg.adam.lr = a.lr;
    cfg.validate()?;
    let data = dataset(&a.data, a.seed)?;
    let out = train(&cfg, &data, initial)?;
    save_checkpoint(&a.output, &out.network.to_checkpoint_with_optimizer(&out.optimizer)?)?;
    let loss_path = a.loss_csv.clone().unwrap_or_else(|| with_suffix(&a.output, ".loss.csv"));
    write_loss_csv(&loss_path, &out.history)?;
    let (first, last) = (out.history.first(), out.history.last());
    if let (Some(f), Some(l)) = (first, last) {
        println!("train loss {:.6e} -> {:.6e}, best validation epoch {}", f.train_loss, l.train_loss, out.best_epoch);
    }
    Ok(json!({
        "epochs": out.history.len(),
        "first_train_loss": first.map(|e| e.train_loss),
        "final_train_loss": last.map(|e| e.train_loss),
        "best_epoch": out.best_epoch,
        "train_indices": out.train_indices,
        "val_indices": out.val_indices,
    }))
}

fn patches_per_image(net: &Network, size: usize) -> usize {
    match net {
        Network::MsdGru { patch: (ph, pw), .. } => (size / ph) * (size / pw),
        Network::Msd { .. } => 1,
    }
}

pub fn eval(a: &EvalArgs) -> Result<Value> {
    let mut net = load_network(&a.checkpoint)?;
    if let Some(kind) = a.model {
        expect_kind(&net, kind, &a.checkpoint)?;
    }
    if let Some(p) = a.patch {
        if net.kind() != ModelKind::MsdGru {
            return Err(usage("--patch only applies to msd-gru checkpoints"));
        }
        net.set_patch(p, p);
    }
    let data = dataset(&a.data, a.seed)?;
    let outputs = restore(&net, &data)?;
    let targets: Vec<&Image> = data.iter().map(|p| &p.target).collect();
    let inputs: Vec<Image> = data.iter().map(|p| p.input.clone()).collect();
    let before = MetricsReport::compute(&inputs, &targets)?;
    let after = MetricsReport::compute(&outputs, &targets)?;

    let mut csv = String::from("index,phantom_seed,psnr_input,psnr_output,ssim_input,ssim_output,mse_input,mse_output\n");
    for (i, pair) in data.iter().enumerate() {
        writeln!(
            csv,
            "{i},{},{},{},{},{},{},{}",
            pair.provenance.phantom_seed,
            before.psnr[i],
            after.psnr[i],
            before.ssim[i],
            after.ssim[i],
            before.mse[i],
            after.mse[i]
        )?;
    }
    write_atomic(&a.output, csv.as_bytes())?;

    if let Some(dir) = &a.png_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (i, (pair, out)) in data.iter().zip(&outputs).enumerate() {
            save_png_grid(dir.join(format!("eval_{i:03}.png")), &[vec![&pair.input, out, &pair.target]])?;
        }
    }
    let t = patches_per_image(&net, a.data.size);
    let (pin, pout) = (before.summary(ctstreak::pipeline::Metric::Psnr), after.summary(ctstreak::pipeline::Metric::Psnr));
    println!("model {}  patches per image {t}", net.kind());
    println!("psnr input {:.3} dB -> output {:.3} dB over {} images", pin.mean, pout.mean, pin.n);
    Ok(json!({
        "model": net.kind().name(),
        "patches_per_image": t,
        "mean_psnr_input": pin.mean,
        "mean_psnr_output": pout.mean,
    }))
}

pub fn sweep(a: &SweepArgs) -> Result<Value> {
    let g = geometry(a.angles, a.size, a.size, a.fov)?;
    let phantoms = (0..a.phantoms as u64)
        .map(|j| Ok(random_ellipse_phantom(a.size, a.ellipses, a.phantom_seed.wrapping_add(j))?.with_pixel_size(g.pixel_size)))
        .collect::<Result<Vec<_>>>()?;
    let mut nets = Vec::new();
    for (path, kind) in [(&a.msd, ModelKind::Msd), (&a.msd_gru, ModelKind::MsdGru)] {
        if let Some(path) = path {
            let net = load_network(path)?;
            expect_kind(&net, kind, path)?;
            nets.push((kind.name(), net));
        }
    }
    let named: Vec<(&str, &Network)> = nets.iter().map(|(n, net)| (*n, net)).collect();
    let mut cfg = SweepConfig::new(a.intensities.clone(), a.seed);
    cfg.sirt_iterations = a.sirt_iters;
    cfg.tv_weight = a.lambda;
    if let Some(n) = a.cgls_iters {
        cfg.cgls_iterations = n;
    }
    if let Some(n) = a.tv_iters {
        cfg.tv_iterations = n;
    }
    let rows = noise_sweep(&named, &g, &phantoms, &cfg)?;
    write_metrics_csv(&a.output, &rows)?;
    let methods = 4 + named.len();
    println!("{} rows: {methods} methods x {} intensities x 3 metrics", rows.len(), a.intensities.len());
    Ok(json!({
        "rows": rows.len(),
        "methods": methods,
        "sirt_iterations": cfg.sirt_iterations,
        "cgls_iterations": cfg.cgls_iterations,
        "tv_iterations": cfg.tv_iterations,
    }))
}
