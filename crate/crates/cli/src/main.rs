//! `latentseal` command-line interface.

mod commands;
mod error;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "latentseal",
    version,
    about = "Compress, permute and seal grayscale images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write <prefix>.priv, <prefix>.pub and <prefix>.sym
    Keygen {
        #[arg(long)]
        out_prefix: PathBuf,
        /// Derive all three keys deterministically from this seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compress and seal one image into a payload file
    Encrypt {
        #[arg(long)]
        image: PathBuf,
        #[command(flatten)]
        keys: SendKeys,
        #[arg(long)]
        out: PathBuf,
    },
    /// Open a payload file and reconstruct the image as binary PGM
    Decrypt {
        #[arg(long)]
        payload: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        sym: PathBuf,
        #[arg(long = "priv")]
        private: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full round trip on every image in a directory and report quality as CSV
    Evaluate {
        #[arg(long)]
        images: PathBuf,
        #[command(flatten)]
        keys: SendKeys,
        #[arg(long = "priv")]
        private: PathBuf,
        /// CSV destination; standard output if omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Average SSIM over sliding windows of this side instead of whole-image statistics
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        ssim_window: Option<u32>,
    },
    /// Export post-burn-in orbit points of a symmetric key as x,y CSV
    HenonPlot {
        #[arg(long)]
        sym: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Send a payload file as one length-prefixed frame
    Send {
        #[arg(long)]
        payload: PathBuf,
        #[arg(long)]
        to: String,
        /// Pace the transfer to this many bytes per second
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        throttle: Option<u64>,
    },
    /// Accept one connection and store the received payload
    Recv {
        /// Port to listen on; 0 picks a free one (printed on standard output)
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "0.0.0.0")]
        bind: std::net::IpAddr,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write seeded synthetic training images
    MakeDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u16).range(1..))]
        size: u16,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write a truncated-DCT codec model file
    MakeDctModel {
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u16).range(1..))]
        m: u16,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a neural codec on a directory of equally sized images
    Train(commands::TrainArgs),
}

#[derive(Args)]
struct SendKeys {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    sym: PathBuf,
    #[arg(long = "pub")]
    public: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Keygen { out_prefix, seed } => commands::keygen(&out_prefix, seed),
        Command::Encrypt { image, keys, out } => {
            commands::encrypt(&image, &keys.model, &keys.sym, &keys.public, &out)
        }
        Command::Decrypt {
            payload,
            model,
            sym,
            private,
            out,
        } => commands::decrypt(&payload, &model, &sym, &private, &out),
        Command::Evaluate {
            images,
            keys,
            private,
            out,
            ssim_window,
        } => commands::evaluate(
            &images,
            &keys.model,
            &keys.sym,
            &keys.public,
            &private,
            out.as_deref(),
            ssim_window.map(|w| w as usize),
        ),
        Command::HenonPlot { sym, n, out } => commands::henon_plot(&sym, n, &out),
        Command::Send {
            payload,
            to,
            throttle,
        } => commands::send(&payload, &to, throttle),
        Command::Recv { port, bind, out } => commands::recv(SocketAddr::new(bind, port), &out),
        Command::MakeDataset {
            out,
            count,
            size,
            seed,
        } => commands::make_dataset(&out, count, usize::from(size), seed),
        Command::MakeDctModel { m, out } => commands::make_dct_model(usize::from(m), &out),
        Command::Train(args) => commands::train(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
