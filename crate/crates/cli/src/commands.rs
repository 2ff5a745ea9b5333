use std::fmt::Write as _;
use std::io::Write as _;
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};

use clap::Args;
use latentseal::codec::{
    model_file, train_adversarial, train_autoencoder, AdversarialConfig, CodecModel, TrainConfig,
};
use latentseal::dataset;
use latentseal::ecies::{self, EciesKeypair, PublicKey};
use latentseal::henon::SymKey;
use latentseal::image::{write_atomic, GrayImage};
use latentseal::metrics::{QualityReport, SsimParams};
use latentseal::pipeline::{self, EncryptedPayload};
use latentseal::transfer;

use crate::error::{CliError, CliResult};

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn read_sym(path: &Path) -> CliResult<SymKey> {
    read_text(path)?
        .parse()
        .map_err(|e: latentseal::henon::HenonError| CliError::from(e).context(path.display()))
}

fn read_public(path: &Path) -> CliResult<PublicKey> {
    ecies::public_from_hex(&read_text(path)?).map_err(|e| CliError::from(e).context(path.display()))
}

fn read_private(path: &Path) -> CliResult<EciesKeypair> {
    ecies::keypair_from_hex(&read_text(path)?)
        .map_err(|e| CliError::from(e).context(path.display()))
}

fn read_model(path: &Path) -> CliResult<CodecModel> {
    model_file::read(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn read_image(path: &Path) -> CliResult<GrayImage> {
    GrayImage::read(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn keygen(prefix: &Path, seed: Option<u64>) -> CliResult<()> {
    let (keys, sym) = pipeline::generate_keys(seed)?;
    let files = [
        (
            with_suffix(prefix, ".priv"),
            format!("{}\n", keys.private_hex()),
        ),
        (
            with_suffix(prefix, ".pub"),
            format!("{}\n", keys.public_hex()),
        ),
        (with_suffix(prefix, ".sym"), sym.to_string()),
    ];
    for (path, text) in &files {
        write_atomic(path, text.as_bytes())
            .map_err(|e| CliError::from(e).context(path.display()))?;
    }
    Ok(())
}

pub fn encrypt(image: &Path, model: &Path, sym: &Path, public: &Path, out: &Path) -> CliResult<()> {
    let img = read_image(image)?;
    let codec = read_model(model)?;
    let sym = read_sym(sym)?;
    let public = read_public(public)?;
    let (payload, secs) = pipeline::compress_encrypt(&img, &codec, &sym, &public)?;
    let bytes = payload.to_bytes();
    write_atomic(out, &bytes).map_err(|e| CliError::from(e).context(out.display()))?;
    println!(
        "encrypted {} pixels into {} bytes in {secs:.6} s",
        img.len(),
        bytes.len()
    );
    Ok(())
}

pub fn decrypt(
    payload: &Path,
    model: &Path,
    sym: &Path,
    private: &Path,
    out: &Path,
) -> CliResult<()> {
    let bytes = std::fs::read(payload).map_err(|e| CliError::from(e).context(payload.display()))?;
    let payload = EncryptedPayload::from_bytes(&bytes)?;
    let codec = read_model(model)?;
    let sym = read_sym(sym)?;
    let keys = read_private(private)?;
    let (img, secs) = pipeline::decrypt_reconstruct(&payload, &codec, &sym, keys.secret())?;
    img.write(out)
        .map_err(|e| CliError::from(e).context(out.display()))?;
    println!(
        "decrypted {}x{} image in {secs:.6} s",
        img.width(),
        img.height()
    );
    Ok(())
}

pub fn evaluate(
    images: &Path,
    model: &Path,
    sym: &Path,
    public: &Path,
    private: &Path,
    out: Option<&Path>,
    window: Option<usize>,
) -> CliResult<()> {
    let paths =
        dataset::list_images(images).map_err(|e| CliError::from(e).context(images.display()))?;
    let codec = read_model(model)?;
    let sym = read_sym(sym)?;
    let public = read_public(public)?;
    let keys = read_private(private)?;
    let params = window.map_or_else(SsimParams::default, SsimParams::windowed);

    let mut csv = format!("{}\n", QualityReport::CSV_HEADER);
    let mut first_error = None;
    for path in &paths {
        let row = read_image(path).and_then(|img| {
            Ok(pipeline::evaluate_with(
                &img,
                &codec,
                &sym,
                &public,
                keys.secret(),
                &params,
            )?)
        });
        match row {
            Ok(report) => writeln!(csv, "{}", report.csv_row()).expect("string write"),
            Err(e) => {
                let e = e.context(path.display());
                eprintln!("error: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    match out {
        Some(out) => write_atomic(out, csv.as_bytes())
            .map_err(|e| CliError::from(e).context(out.display()))?,
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    first_error.map_or(Ok(()), Err)
}

pub fn henon_plot(sym: &Path, n: usize, out: &Path) -> CliResult<()> {
    let points = read_sym(sym)?.trajectory(n)?;
    let mut csv = String::from("x,y\n");
    for p in points {
        writeln!(csv, "{},{}", p.x, p.y).expect("string write");
    }
    write_atomic(out, csv.as_bytes()).map_err(|e| CliError::from(e).context(out.display()))?;
    Ok(())
}

pub fn send(payload: &Path, to: &str, throttle: Option<u64>) -> CliResult<()> {
    let sent =
        transfer::send_file(payload, to, throttle).map_err(|e| CliError::from(e).context(to))?;
    println!("sent {sent} bytes to {to}");
    Ok(())
}

pub fn recv(addr: SocketAddr, out: &Path) -> CliResult<()> {
    let listener = TcpListener::bind(addr).map_err(|e| CliError::from(e).context(addr))?;
    println!("listening on {}", listener.local_addr()?);
    std::io::stdout().flush()?;
    let received = transfer::recv_file(&listener, out)?;
    println!("received {received} bytes into {}", out.display());
    Ok(())
}

pub fn make_dataset(out: &Path, count: usize, size: usize, seed: u64) -> CliResult<()> {
    let paths = dataset::write_dataset(out, count, size, seed)
        .map_err(|e| CliError::from(e).context(out.display()))?;
    println!("wrote {} images to {}", paths.len(), out.display());
    Ok(())
}

pub fn make_dct_model(m: usize, out: &Path) -> CliResult<()> {
    model_file::write(&CodecModel::dct(m)?, out)?;
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u16).range(1..))]
    m: u16,
    /// Encoder hidden layer widths; the decoder mirrors them
    #[arg(long, value_delimiter = ',', default_value = "64")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enable the image discriminator with this generator-term weight
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "32")]
    disc_hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    disc_learning_rate: f64,
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let paths = dataset::list_images(&args.images)
        .map_err(|e| CliError::from(e).context(args.images.display()))?;
    if paths.is_empty() {
        return Err(CliError::usage(format!(
            "no images in {}",
            args.images.display()
        )));
    }
    let images = paths
        .iter()
        .map(|p| read_image(p))
        .collect::<CliResult<Vec<_>>>()?;
    let config = TrainConfig {
        m: usize::from(args.m),
        hidden: args.hidden.clone(),
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
    };
    let (model, initial, last) = match args.lambda {
        None => {
            let r = train_autoencoder(&images, &config)?;
            (r.model, r.initial_loss, r.loss_trace.last().copied())
        }
        Some(lambda) => {
            let config = AdversarialConfig {
                autoencoder: config,
                disc_hidden: args.disc_hidden.clone(),
                disc_learning_rate: args.disc_learning_rate,
                lambda,
            };
            let r = train_adversarial(&images, &config)?;
            (r.model, r.initial_loss, r.loss_trace.last().copied())
        }
    };
    model_file::write(&CodecModel::Neural(model), &args.out)?;
    println!(
        "trained on {} images: loss {initial:.6} -> {:.6}",
        images.len(),
        last.unwrap_or(initial)
    );
    Ok(())
}
